"""Domain types, validation, and serialization for distance tensors and model parameters.

A distance tensor holds the observed data y[i, j, p]: one symmetric N x N
matrix of pairwise distances per replicate p.  Only the j > i entries are
canonical (they are what gets serialized and modeled); the in-memory array is
kept fully mirrored for convenient indexing.
"""

from __future__ import annotations

import dataclasses

import numpy as np

FLOAT_FMT = "%.16e"  # 17 significant digits: exact float64 round-trip


def pair_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Row/column indices of the j > i pairs, in row-major order."""
    return np.triu_indices(n, k=1)


def upper_to_square(vec: np.ndarray, n: int) -> np.ndarray:
    """Place a condensed pair vector into the upper triangle of an (n, n) matrix."""
    out = np.zeros((n, n), dtype=np.float64)
    iu, ju = pair_indices(n)
    out[iu, ju] = vec
    return out


def symmetrize(mat: np.ndarray) -> np.ndarray:
    """Mirror the upper triangle of a square matrix onto the lower."""
    upper = np.triu(mat, k=1)
    return upper + upper.T


@dataclasses.dataclass(frozen=True, eq=False)
class DistanceTensor:
    """Replicate pairwise distances y[i, j, p] for N entities over M replicates.

    The array is copied and frozen on construction; instances are immutable
    value objects, safe to share across threads.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 3 or v.shape[0] != v.shape[1]:
            raise ValueError(f"expected an (N, N, M) array, got shape {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n_entities(self) -> int:
        return self.values.shape[0]

    @property
    def n_replicates(self) -> int:
        return self.values.shape[2]

    def upper(self) -> np.ndarray:
        """Canonical entries as an (n_pairs, M) array, pairs in row-major j > i order."""
        iu, ju = pair_indices(self.n_entities)
        return self.values[iu, ju, :]

    def __eq__(self, other) -> bool:
        if not isinstance(other, DistanceTensor):
            return NotImplemented
        return self.values.shape == other.values.shape and bool(
            np.array_equal(self.values, other.values)
        )


@dataclasses.dataclass(frozen=True, eq=False)
class ModelState:
    """One point in parameter space.

    X            : (N, r) latent coordinates, r = N - 1
    delta        : (n_pairs,) systematic dissimilarities, j > i row-major order
    tau          : (M,) replicate potentials for variation
    psi          : gamma likelihood shape
    gamma_shrink : shrinkage of delta toward the latent Euclidean distances
    """

    X: np.ndarray
    delta: np.ndarray
    tau: np.ndarray
    psi: float
    gamma_shrink: float

    def __post_init__(self):
        X = np.array(self.X, dtype=np.float64)
        delta = np.array(self.delta, dtype=np.float64)
        tau = np.array(np.atleast_1d(self.tau), dtype=np.float64)
        if X.ndim != 2:
            raise ValueError("X must be a 2-d array of latent coordinates")
        n = X.shape[0]
        if delta.shape != (n * (n - 1) // 2,):
            raise ValueError(
                f"delta must have length N(N-1)/2 = {n * (n - 1) // 2}, got {delta.shape}"
            )
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "psi", float(self.psi))
        object.__setattr__(self, "gamma_shrink", float(self.gamma_shrink))

    @property
    def n_entities(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    @property
    def n_replicates(self) -> int:
        return self.tau.shape[0]

    @property
    def n_pairs(self) -> int:
        return self.delta.shape[0]

    def pair_distances(self) -> np.ndarray:
        """Euclidean distances between latent coordinates, condensed j > i order."""
        iu, ju = pair_indices(self.n_entities)
        return np.linalg.norm(self.X[iu] - self.X[ju], axis=1)

    def validate(self) -> list[str]:
        """Invariant violations (positivity of delta, tau, psi, gamma); empty if none."""
        problems = []
        if not np.all(self.delta > 0):
            problems.append("delta has non-positive entries")
        if not np.all(self.tau > 0):
            problems.append("tau has non-positive entries")
        if not self.psi > 0:
            problems.append("psi is non-positive")
        if not self.gamma_shrink > 0:
            problems.append("gamma_shrink is non-positive")
        if not np.all(np.isfinite(self.X)):
            problems.append("X has non-finite entries")
        return problems


@dataclasses.dataclass(frozen=True)
class Hyperparams:
    """Prior hyperparameters.

    psi ~ Gamma(a1, b1), gamma ~ Gamma(a2, b2) (shape/rate),
    tau_p ~ Inverse-Gamma(alpha, beta) (shape/scale),
    X_i ~ Normal(0, diag(lambda_diag)).

    The scalar defaults are the weakly-informative choices used throughout:
    a1 = b1 = a2 = b2 = 0.01 and alpha = beta = 1.
    """

    lambda_diag: np.ndarray
    a1: float = 0.01
    b1: float = 0.01
    a2: float = 0.01
    b2: float = 0.01
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        lam = np.array(np.atleast_1d(self.lambda_diag), dtype=np.float64)
        if not np.all(lam > 0):
            raise ValueError("lambda_diag must be strictly positive")
        for name in ("a1", "b1", "a2", "b2", "alpha", "beta"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        object.__setattr__(self, "lambda_diag", lam)

    @property
    def dim(self) -> int:
        return self.lambda_diag.shape[0]


def validate_tensor(t: DistanceTensor) -> list[str]:
    """Check all distance-tensor invariants; returns violations, never raises.

    Each violation names the offending index and rule.  Checked: finiteness,
    symmetry y[i,j,p] == y[j,i,p], zero diagonal, strictly positive
    off-diagonal entries (gamma support).
    """
    v = t.values
    n, m = t.n_entities, t.n_replicates
    problems: list[str] = []

    bad = np.argwhere(~np.isfinite(v))
    for i, j, p in bad:
        problems.append(f"non-finite entry at ({i},{j},{p})")
    if len(bad):
        return problems

    asym = np.argwhere(v != v.transpose(1, 0, 2))
    for i, j, p in asym:
        if i < j:
            problems.append(f"asymmetry at ({i},{j},{p})")

    diag = v[np.arange(n), np.arange(n), :]
    for i, p in np.argwhere(diag != 0.0):
        problems.append(f"nonzero diagonal at ({i},{i},{p})")

    off = ~np.eye(n, dtype=bool)
    for i, j, p in np.argwhere((v <= 0.0) & off[:, :, None]):
        if i < j:
            problems.append(f"non-positive off-diagonal at ({i},{j},{p})")
    return problems


def normalize_tensor(t: DistanceTensor, floor: float = 1e-6) -> DistanceTensor:
    """Scale a tensor so its largest off-diagonal entry is 1, then floor small entries.

    The scale is taken over *all* replicates jointly, so replicate-level scale
    differences survive normalization.  Off-diagonal entries below ``floor``
    (notably exact zeros from identical curves) are replaced by ``floor``,
    because the gamma likelihood is undefined at 0.
    """
    if not floor > 0:
        raise ValueError("floor must be strictly positive")
    v = np.array(t.values)
    n = t.n_entities
    off = ~np.eye(n, dtype=bool)
    top = v[off, :].max() if v.size else 0.0
    if top <= 0.0:
        raise ValueError("degenerate tensor: all off-diagonal distances are zero")
    v /= top
    low = off[:, :, None] & (v < floor)
    v[low] = floor
    return DistanceTensor(v)


def write_tensor(t: DistanceTensor, path) -> None:
    """Write the canonical j > i entries as CSV with header ``i,j,p,y``.

    Values are written with 17 significant digits so that reading the file
    back reproduces the tensor bit-exactly.
    """
    iu, ju = pair_indices(t.n_entities)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("i,j,p,y\n")
        for i, j in zip(iu, ju):
            for p in range(t.n_replicates):
                fh.write(f"{i},{j},{p},{FLOAT_FMT % t.values[i, j, p]}\n")


def read_tensor(path, n_entities: int | None = None, n_replicates: int | None = None) -> DistanceTensor:
    """Read a tensor written by :func:`write_tensor`, mirroring to full symmetry.

    The file holds j > i rows only.  Index bounds are checked against
    ``n_entities`` / ``n_replicates`` when given, otherwise inferred from the
    data.  Malformed rows, out-of-range indices, duplicate (i, j, p) triples,
    and missing entries raise ``ValueError`` with the offending line number.
    """
    entries: dict[tuple[int, int, int], float] = {}
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "i,j,p,y":
            raise ValueError(f"line 1: expected header 'i,j,p,y', got {header!r}")
        for ln, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise ValueError(f"line {ln}: expected 4 fields, got {len(parts)}")
            try:
                i, j, p = int(parts[0]), int(parts[1]), int(parts[2])
                y = float(parts[3])
            except ValueError as exc:
                raise ValueError(f"line {ln}: malformed row: {exc}") from None
            if i < 0 or j < 0 or p < 0:
                raise ValueError(f"line {ln}: negative index")
            if n_entities is not None and (i >= n_entities or j >= n_entities):
                raise ValueError(f"line {ln}: index out of range (N = {n_entities})")
            if n_replicates is not None and p >= n_replicates:
                raise ValueError(f"line {ln}: index out of range (M = {n_replicates})")
            if j <= i:
                raise ValueError(f"line {ln}: expected j > i, got i={i}, j={j}")
            if (i, j, p) in entries:
                raise ValueError(f"line {ln}: duplicate entry ({i},{j},{p})")
            entries[(i, j, p)] = y
    if not entries:
        raise ValueError("tensor file holds no entries")

    n = n_entities if n_entities is not None else max(j for _, j, _ in entries) + 1
    m = n_replicates if n_replicates is not None else max(p for _, _, p in entries) + 1
    v = np.zeros((n, n, m), dtype=np.float64)
    iu, ju = pair_indices(n)
    for i, j in zip(iu, ju):
        for p in range(m):
            if (i, j, p) not in entries:
                raise ValueError(f"missing entry ({i},{j},{p})")
            v[i, j, p] = v[j, i, p] = entries[(i, j, p)]
    return DistanceTensor(v)
