"""Hellinger distances between normalized curves and assembly of distance tensors."""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .core import DistanceTensor, normalize_tensor

_INV_SQRT2 = 1.0 / math.sqrt(2.0)


def hellinger(p, q) -> float:
    """Hellinger distance between two discrete distributions of equal length.

    (1/sqrt(2)) * l2 distance of the elementwise square roots; a metric,
    bounded in [0, 1] for normalized nonnegative inputs.  Summation is
    compensated (exact) so long curves with tiny per-term values stay accurate.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {q.shape}")
    diff = np.sqrt(p) - np.sqrt(q)
    return _INV_SQRT2 * math.sqrt(math.fsum(diff * diff))


@dataclasses.dataclass(frozen=True, eq=False)
class CurveSet:
    """Rectangular collection of normalized curves: values[i, p, k] for entity i, replicate p."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 3:
            raise ValueError(f"expected (n_entities, n_replicates, L) array, got {v.shape}")
        object.__setattr__(self, "values", v)

    @property
    def n_entities(self) -> int:
        return self.values.shape[0]

    @property
    def n_replicates(self) -> int:
        return self.values.shape[1]

    @property
    def curve_length(self) -> int:
        return self.values.shape[2]


def build_tensor(cs: CurveSet, floor: float = 1e-6) -> DistanceTensor:
    """Pairwise Hellinger distances per replicate, normalized across replicates jointly.

    The raw tensor is scaled so its largest entry is 1 and exact-zero
    distances (identical curves) are floored, giving a tensor fit for the
    gamma likelihood.
    """
    n, m = cs.n_entities, cs.n_replicates
    raw = np.zeros((n, n, m))
    for p in range(m):
        for i in range(n):
            for j in range(i + 1, n):
                d = hellinger(cs.values[i, p], cs.values[j, p])
                raw[i, j, p] = raw[j, i, p] = d
    return normalize_tensor(DistanceTensor(raw), floor=floor)
