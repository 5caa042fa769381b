"""Blocked MCMC for the hierarchical scaling model.

One sweep draws every delta_ij and every tau_p exactly from their inverse-gamma
full conditionals, then updates each latent vector X_i by a spherical
random-walk Metropolis step and psi and gamma by log-scale random walks (with
the log-scale Jacobian).  During burn-in the three Metropolis scales may be
doubled/halved to steer block acceptance into [0.2, 0.5]; adaptation is frozen
afterwards so the retained draws target the exact posterior.

The diagonal prior covariance of the latent vectors is set empirically from
classical (Torgerson) multidimensional scaling of each replicate's matrix.
"""

from __future__ import annotations

import dataclasses
import json

import numpy as np
from scipy.special import gammaln

from .core import DistanceTensor, Hyperparams, ModelState, pair_indices
from .model import gamma_logpdf, inv_gamma_logpdf


class ChainDivergenceError(RuntimeError):
    """Raised when a sweep produces a non-finite parameter; carries the offending state."""

    def __init__(self, message: str, state: ModelState, iteration: int):
        super().__init__(f"{message} at iteration {iteration}; state dump: {state!r}")
        self.state = state
        self.iteration = iteration


@dataclasses.dataclass(frozen=True)
class ChainConfig:
    """Chain length, seed, and Metropolis proposal scales.

    Defaults run 30000 sweeps and discard the first 15000 as burn-in, with no
    thinning.  Proposal scales may be zero to pin a block (its component is
    then never moved), which is useful for conditional checks.
    """

    n_iter: int = 30000
    n_burnin: int = 15000
    thin: int = 1
    rng_seed: int = 0
    step_x: float = 0.1
    step_log_psi: float = 0.4
    step_log_gamma: float = 0.4
    adapt: bool = True

    def __post_init__(self):
        if not 0 <= self.n_burnin < self.n_iter:
            raise ValueError("require 0 <= n_burnin < n_iter")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        for name in ("step_x", "step_log_psi", "step_log_gamma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


def classical_mds(d: np.ndarray, n_dims: int) -> np.ndarray:
    """Torgerson scaling: double-center the squared distances and eigendecompose.

    Negative eigenvalues (non-Euclidean input) are clamped to zero.  For an
    exactly Euclidean matrix the embedding reproduces it to rounding error.
    """
    d = np.asarray(d, dtype=np.float64)
    n = d.shape[0]
    h = np.eye(n) - np.ones((n, n)) / n
    b = -0.5 * h @ (d * d) @ h
    evals, evecs = np.linalg.eigh(b)
    order = np.argsort(evals)[::-1][:n_dims]
    lam = np.clip(evals[order], 0.0, None)
    return evecs[:, order] * np.sqrt(lam)[None, :]


def empirical_bayes_lambda(y: DistanceTensor, floor: float = 1e-8) -> np.ndarray:
    """Diagonal prior covariance from per-replicate classical MDS embeddings.

    Each replicate matrix is embedded in N-1 dimensions; the variance of each
    coordinate, pooled across entities and replicates, becomes lambda_kk.
    Vanishing variances are floored so the prior stays proper.
    """
    n, m = y.n_entities, y.n_replicates
    r = n - 1
    coords = np.empty((m, n, r))
    for p in range(m):
        coords[p] = classical_mds(y.values[:, :, p], r)
    lam = coords.reshape(m * n, r).var(axis=0)
    return np.maximum(lam, floor)


def init_state(y: DistanceTensor, h: Hyperparams, rng: np.random.Generator) -> ModelState:
    """Random start: X from its prior, delta/tau from one MLE-style sweep, psi = gamma = 1."""
    n = y.n_entities
    u = y.upper()
    X = rng.standard_normal((n, n - 1)) * np.sqrt(h.lambda_diag)[None, :]
    tau = u.mean(axis=0) / u.mean()
    delta = (u / tau[None, :]).mean(axis=1)
    return ModelState(X=X, delta=delta, tau=tau, psi=1.0, gamma_shrink=1.0)


def _loglik(u: np.ndarray, sum_log_u: float, psi: float, delta: np.ndarray, tau: np.ndarray) -> float:
    """Gamma log likelihood over the (n_pairs, M) canonical entries."""
    n_pairs, m = u.shape
    n_obs = n_pairs * m
    sum_log_mean = m * np.sum(np.log(delta)) + n_pairs * np.sum(np.log(tau))
    sum_ratio = np.sum(u / (delta[:, None] * tau[None, :]))
    return (
        n_obs * (psi * np.log(psi) - gammaln(psi))
        - psi * sum_log_mean
        + (psi - 1.0) * sum_log_u
        - psi * sum_ratio
    )


def _sweep(u, s_arrays, h, scales, rng, pair_of):
    """One full update sweep on raw arrays; returns per-block acceptance flags.

    ``s_arrays`` is the mutable dict {X, delta, tau, psi, gamma}; ``pair_of``
    maps an (i, j) entity pair to its condensed index.
    """
    X, delta, tau = s_arrays["X"], s_arrays["delta"], s_arrays["tau"]
    psi, gamma = s_arrays["psi"], s_arrays["gamma"]
    n, r = X.shape
    n_pairs, m = u.shape
    iu, ju = pair_indices(n)

    # block 1: exact conditional draws for every delta_ij
    dist = np.linalg.norm(X[iu] - X[ju], axis=1)
    shape_d = m * psi + gamma
    scale_d = (gamma + 1.0) * dist + psi * np.sum(u / tau[None, :], axis=1)
    delta = 1.0 / rng.gamma(shape_d, 1.0 / scale_d)

    # block 2: exact conditional draws for every tau_p
    shape_t = h.alpha + n_pairs * psi
    scale_t = h.beta + psi * np.sum(u / delta[:, None], axis=0)
    tau = 1.0 / rng.gamma(shape_t, 1.0 / scale_t)

    # block 3: spherical random-walk Metropolis on each latent vector
    accept_x = np.zeros(n, dtype=bool)
    lam = h.lambda_diag
    others = [np.delete(np.arange(n), i) for i in range(n)]
    for i in range(n):
        prop = X[i] + scales["x"] * rng.standard_normal(r)
        js = others[i]
        idx = pair_of[np.minimum(i, js), np.maximum(i, js)]
        d_cur = np.linalg.norm(X[i][None, :] - X[js], axis=1)
        d_new = np.linalg.norm(prop[None, :] - X[js], axis=1)
        with np.errstate(divide="ignore"):
            log_ratio = np.sum(
                gamma * (np.log(d_new) - np.log(d_cur))
                - (gamma + 1.0) * (d_new - d_cur) / delta[idx]
            )
        log_ratio += 0.5 * np.sum((X[i] * X[i] - prop * prop) / lam)
        if np.log(rng.random()) < log_ratio:
            X[i] = prop
            accept_x[i] = True

    # block 4: log-scale random walks for psi and gamma (Jacobian included)
    sum_log_u = s_arrays["sum_log_u"]
    psi_prop = psi * np.exp(scales["psi"] * rng.standard_normal())
    log_ratio = (
        _loglik(u, sum_log_u, psi_prop, delta, tau)
        - _loglik(u, sum_log_u, psi, delta, tau)
        + gamma_logpdf(psi_prop, h.a1, h.b1)
        - gamma_logpdf(psi, h.a1, h.b1)
        + np.log(psi_prop)
        - np.log(psi)
    )
    accept_psi = np.log(rng.random()) < log_ratio
    if accept_psi:
        psi = psi_prop

    dist = np.linalg.norm(X[iu] - X[ju], axis=1)
    gamma_prop = gamma * np.exp(scales["gamma"] * rng.standard_normal())
    log_ratio = (
        np.sum(inv_gamma_logpdf(delta, gamma_prop, (gamma_prop + 1.0) * dist))
        - np.sum(inv_gamma_logpdf(delta, gamma, (gamma + 1.0) * dist))
        + gamma_logpdf(gamma_prop, h.a2, h.b2)
        - gamma_logpdf(gamma, h.a2, h.b2)
        + np.log(gamma_prop)
        - np.log(gamma)
    )
    accept_gamma = np.log(rng.random()) < log_ratio
    if accept_gamma:
        gamma = gamma_prop

    s_arrays.update(X=X, delta=delta, tau=tau, psi=psi, gamma=gamma)
    return accept_x, accept_psi, accept_gamma


def _pair_lookup(n: int) -> np.ndarray:
    iu, ju = pair_indices(n)
    lookup = np.zeros((n, n), dtype=np.int64)
    lookup[iu, ju] = np.arange(len(iu))
    lookup[ju, iu] = np.arange(len(iu))
    return lookup


def step(
    y: DistanceTensor,
    s: ModelState,
    h: Hyperparams,
    cfg: ChainConfig,
    rng: np.random.Generator,
) -> ModelState:
    """One sweep of the sampler starting from ``s``; returns the new state."""
    u = y.upper()
    arrays = {
        "X": np.array(s.X),
        "delta": np.array(s.delta),
        "tau": np.array(s.tau),
        "psi": s.psi,
        "gamma": s.gamma_shrink,
        "sum_log_u": float(np.sum(np.log(u))),
    }
    scales = {"x": cfg.step_x, "psi": cfg.step_log_psi, "gamma": cfg.step_log_gamma}
    _sweep(u, arrays, h, scales, rng, _pair_lookup(y.n_entities))
    return ModelState(
        X=arrays["X"],
        delta=arrays["delta"],
        tau=arrays["tau"],
        psi=arrays["psi"],
        gamma_shrink=arrays["gamma"],
    )


@dataclasses.dataclass(frozen=True, eq=False)
class ChainOutput:
    """Retained post-burn-in draws plus acceptance statistics.

    Behaves as a sequence of :class:`ModelState`: ``len(chain)`` is the number
    of retained draws and ``chain[k]`` materializes draw k.  The stacked
    arrays (``X``, ``delta``, ``tau``, ``psi``, ``gamma_shrink``) are the
    efficient access path.
    """

    X: np.ndarray  # (K, N, r)
    delta: np.ndarray  # (K, n_pairs)
    tau: np.ndarray  # (K, M)
    psi: np.ndarray  # (K,)
    gamma_shrink: np.ndarray  # (K,)
    n_burnin: int
    thin: int
    rng_seed: int
    acceptance_rates: dict

    def __post_init__(self):
        if len(self.psi) == 0:
            raise ValueError("chain holds no retained draws")

    @property
    def n_entities(self) -> int:
        return self.X.shape[1]

    @property
    def dim(self) -> int:
        return self.X.shape[2]

    @property
    def n_replicates(self) -> int:
        return self.tau.shape[1]

    @property
    def n_pairs(self) -> int:
        return self.delta.shape[1]

    def __len__(self) -> int:
        return self.psi.shape[0]

    def __getitem__(self, k: int) -> ModelState:
        return ModelState(
            X=self.X[k],
            delta=self.delta[k],
            tau=self.tau[k],
            psi=float(self.psi[k]),
            gamma_shrink=float(self.gamma_shrink[k]),
        )

    def __iter__(self):
        for k in range(len(self)):
            yield self[k]

    def schema(self) -> dict[str, int]:
        """Parameter name -> column offset in :meth:`to_matrix`."""
        cols: dict[str, int] = {"psi": 0, "gamma": 1}
        off = 2
        for p in range(self.n_replicates):
            cols[f"tau[{p}]"] = off
            off += 1
        iu, ju = pair_indices(self.n_entities)
        for i, j in zip(iu, ju):
            cols[f"delta[{i},{j}]"] = off
            off += 1
        for i in range(self.n_entities):
            for k in range(self.dim):
                cols[f"X[{i},{k}]"] = off
                off += 1
        return cols

    def to_matrix(self) -> np.ndarray:
        """(K, D) flat layout: psi, gamma, tau..., delta..., X... per draw."""
        k = len(self)
        return np.hstack(
            [
                self.psi[:, None],
                self.gamma_shrink[:, None],
                self.tau,
                self.delta,
                self.X.reshape(k, -1),
            ]
        )


def run_chain(y: DistanceTensor, h: Hyperparams, cfg: ChainConfig) -> ChainOutput:
    """Run the sampler for cfg.n_iter sweeps and retain thinned post-burn-in draws."""
    rng = np.random.default_rng(cfg.rng_seed)
    s0 = init_state(y, h, rng)
    u = y.upper()
    arrays = {
        "X": np.array(s0.X),
        "delta": np.array(s0.delta),
        "tau": np.array(s0.tau),
        "psi": s0.psi,
        "gamma": s0.gamma_shrink,
        "sum_log_u": float(np.sum(np.log(u))),
    }
    pair_of = _pair_lookup(y.n_entities)
    scales = {"x": cfg.step_x, "psi": cfg.step_log_psi, "gamma": cfg.step_log_gamma}

    n_keep = (cfg.n_iter - cfg.n_burnin + cfg.thin - 1) // cfg.thin
    n, r, m, n_pairs = y.n_entities, y.n_entities - 1, y.n_replicates, u.shape[0]
    out = {
        "X": np.empty((n_keep, n, r)),
        "delta": np.empty((n_keep, n_pairs)),
        "tau": np.empty((n_keep, m)),
        "psi": np.empty(n_keep),
        "gamma": np.empty(n_keep),
    }

    window = 100
    win_counts = {"x": 0.0, "psi": 0.0, "gamma": 0.0}
    post_counts = {"x": np.zeros(n), "psi": 0, "gamma": 0}
    n_post = 0
    kept = 0
    for it in range(cfg.n_iter):
        acc_x, acc_psi, acc_gamma = _sweep(u, arrays, h, scales, rng, pair_of)
        if not (
            np.isfinite(arrays["psi"])
            and np.isfinite(arrays["gamma"])
            and np.all(np.isfinite(arrays["delta"]))
            and np.all(np.isfinite(arrays["tau"]))
            and np.all(np.isfinite(arrays["X"]))
        ):
            state = ModelState(
                X=arrays["X"], delta=arrays["delta"], tau=arrays["tau"],
                psi=arrays["psi"], gamma_shrink=arrays["gamma"],
            )
            raise ChainDivergenceError("non-finite parameter", state, it)

        if it < cfg.n_burnin:
            if cfg.adapt:
                win_counts["x"] += acc_x.mean()
                win_counts["psi"] += acc_psi
                win_counts["gamma"] += acc_gamma
                if (it + 1) % window == 0:
                    for block in ("x", "psi", "gamma"):
                        rate = win_counts[block] / window
                        if rate < 0.2:
                            scales[block] *= 0.5
                        elif rate > 0.5:
                            scales[block] *= 2.0
                        win_counts[block] = 0.0
        else:
            n_post += 1
            post_counts["x"] += acc_x
            post_counts["psi"] += acc_psi
            post_counts["gamma"] += acc_gamma
            if (it - cfg.n_burnin) % cfg.thin == 0:
                out["X"][kept] = arrays["X"]
                out["delta"][kept] = arrays["delta"]
                out["tau"][kept] = arrays["tau"]
                out["psi"][kept] = arrays["psi"]
                out["gamma"][kept] = arrays["gamma"]
                kept += 1

    rates = {
        "x": post_counts["x"] / max(n_post, 1),
        "psi": post_counts["psi"] / max(n_post, 1),
        "gamma": post_counts["gamma"] / max(n_post, 1),
    }
    return ChainOutput(
        X=out["X"][:kept],
        delta=out["delta"][:kept],
        tau=out["tau"][:kept],
        psi=out["psi"][:kept],
        gamma_shrink=out["gamma"][:kept],
        n_burnin=cfg.n_burnin,
        thin=cfg.thin,
        rng_seed=cfg.rng_seed,
        acceptance_rates=rates,
    )


def save_chain(chain: ChainOutput, csv_path, schema_path=None) -> None:
    """Write retained draws as flat CSV rows plus a sidecar JSON schema.

    The schema maps each parameter name to its column offset and records the
    chain's shape, seed, burn-in, thinning, and acceptance rates.
    """
    if schema_path is None:
        schema_path = str(csv_path) + ".schema.json"
    mat = chain.to_matrix()
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        for row in mat:
            fh.write(",".join("%.16e" % v for v in row))
            fh.write("\n")
    meta = {
        "columns": chain.schema(),
        "n_entities": chain.n_entities,
        "dim": chain.dim,
        "n_replicates": chain.n_replicates,
        "n_draws": len(chain),
        "n_burnin": chain.n_burnin,
        "thin": chain.thin,
        "rng_seed": chain.rng_seed,
        "acceptance_rates": {
            k: (v.tolist() if isinstance(v, np.ndarray) else v)
            for k, v in chain.acceptance_rates.items()
        },
    }
    with open(schema_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_chain(csv_path, schema_path=None) -> ChainOutput:
    """Read a chain written by :func:`save_chain`."""
    if schema_path is None:
        schema_path = str(csv_path) + ".schema.json"
    with open(schema_path, "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    mat = np.loadtxt(csv_path, delimiter=",", ndmin=2)
    n, r, m = meta["n_entities"], meta["dim"], meta["n_replicates"]
    n_pairs = n * (n - 1) // 2
    k = mat.shape[0]
    off = 2 + m
    rates = {
        key: (np.asarray(v) if isinstance(v, list) else v)
        for key, v in meta["acceptance_rates"].items()
    }
    return ChainOutput(
        X=mat[:, off + n_pairs :].reshape(k, n, r),
        delta=mat[:, off : off + n_pairs],
        tau=mat[:, 2:off],
        psi=mat[:, 0],
        gamma_shrink=mat[:, 1],
        n_burnin=meta["n_burnin"],
        thin=meta["thin"],
        rng_seed=meta["rng_seed"],
        acceptance_rates=rates,
    )
