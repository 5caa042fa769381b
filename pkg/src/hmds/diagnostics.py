"""Chain diagnostics: effective sample size, HPD intervals, posterior-predictive checks.

The two predictive checks mirror the two levels of the model.  The pairwise
check simulates replicate distances from the fitted gamma likelihood at each
retained draw; the hierarchical check first resamples the systematic
dissimilarities from their latent-distance prior.  Both score the log ratio
r = log(y_sim / y_obs), whose HPD interval should cover 0 when the model fits.
"""

from __future__ import annotations

import dataclasses
import math
import warnings

import numpy as np

from .core import DistanceTensor, pair_indices
from .sampler import ChainOutput


def ess(series) -> float:
    """Effective sample size by the initial-positive-sequence estimator.

    n / (1 + 2 * sum of autocorrelations), where the sum is truncated at the
    first paired autocorrelation sum (rho_2m + rho_2m+1) that is not positive.
    Capped at n; a constant series is reported as n with a warning.
    """
    x = np.asarray(series, dtype=np.float64).ravel()
    n = x.shape[0]
    if n < 10:
        raise ValueError("series must have length >= 10")
    x = x - x.mean()
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n].real / n
    if acov[0] <= 0.0:
        warnings.warn("constant series: effective sample size defined as n")
        return float(n)
    rho = acov / acov[0]
    total = 0.0  # sum of Geyer pairs Gamma_m = rho_2m + rho_2m+1; Gamma_0 includes rho_0 = 1
    for m in range(n // 2):
        pair = rho[2 * m] + (rho[2 * m + 1] if 2 * m + 1 < n else 0.0)
        if pair <= 0.0:
            break
        total += pair
    tau = 2.0 * total - 1.0
    if tau <= 0.0:
        warnings.warn("negative autocorrelation: effective sample size capped at n")
        return float(n)
    est = n / tau
    if est > n:
        warnings.warn("effective sample size exceeds n; capped at n")
        return float(n)
    return float(est)


def hpd(samples, mass: float) -> tuple[float, float]:
    """Shortest contiguous interval containing ceil(mass * n) sorted samples."""
    x = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    n = x.shape[0]
    if n < 100:
        raise ValueError("need at least 100 samples for an HPD interval")
    if not 0.0 < mass < 1.0:
        raise ValueError("mass must be in (0, 1)")
    k = math.ceil(mass * n)
    widths = x[k - 1 :] - x[: n - k + 1]
    i = int(np.argmin(widths))
    return float(x[i]), float(x[i + k - 1])


@dataclasses.dataclass(frozen=True, eq=False)
class PpcReport:
    """Posterior-predictive log-ratio samples and their HPD coverage.

    ``ratios`` holds r_ijp per draw with shape (n_pairs, M, K); ``averaged``
    is r-bar_ij (mean over replicates) with shape (n_pairs, K).  ``coverage``
    is the fraction of checked units whose HPD interval contains 0; the units
    are the (i, j, p) triples for the pairwise check and the (i, j) pairs for
    the hierarchical check.
    """

    ratios: np.ndarray
    averaged: np.ndarray
    hpd_mass: float
    coverage: float
    intervals: np.ndarray
    contains_zero: np.ndarray
    pair_i: np.ndarray
    pair_j: np.ndarray


def _default_rng(chain: ChainOutput, stream: int) -> np.random.Generator:
    return np.random.default_rng([chain.rng_seed, stream])


def _simulate_ratios(y: DistanceTensor, chain: ChainOutput, delta_draws, rng) -> np.ndarray:
    """(K, n_pairs, M) log ratios of simulated over observed distances."""
    u = y.upper()  # (n_pairs, M)
    psi = chain.psi[:, None, None]
    mean = delta_draws[:, :, None] * chain.tau[:, None, :]
    sim = rng.gamma(psi, mean / psi)
    return np.log(sim / u[None, :, :])


def ppc_pairwise(
    y: DistanceTensor, chain: ChainOutput, hpd_mass: float = 0.95, rng=None
) -> PpcReport:
    """Goodness of fit of the gamma sampling model, one check per (i, j, p)."""
    if rng is None:
        rng = _default_rng(chain, 1)
    r = _simulate_ratios(y, chain, chain.delta, rng)  # (K, P, M)
    ratios = np.moveaxis(r, 0, -1)  # (P, M, K)
    n_pairs, m, _ = ratios.shape
    intervals = np.empty((n_pairs, m, 2))
    for a in range(n_pairs):
        for p in range(m):
            intervals[a, p] = hpd(ratios[a, p], hpd_mass)
    contains = (intervals[..., 0] <= 0.0) & (0.0 <= intervals[..., 1])
    iu, ju = pair_indices(y.n_entities)
    return PpcReport(
        ratios=ratios,
        averaged=ratios.mean(axis=1),
        hpd_mass=hpd_mass,
        coverage=float(contains.mean()),
        intervals=intervals,
        contains_zero=contains,
        pair_i=iu,
        pair_j=ju,
    )


def ppc_hierarchical(
    y: DistanceTensor, chain: ChainOutput, hpd_mass: float = 0.95, rng=None
) -> PpcReport:
    """Goodness of fit of the latent-distance prior, one check per pair (i, j).

    At each draw, the systematic dissimilarities are resampled from
    Inv-Gamma(gamma, (gamma + 1) ||X_i - X_j||) before simulating distances;
    the log ratios are averaged across replicates.
    """
    if rng is None:
        rng = _default_rng(chain, 2)
    iu, ju = pair_indices(chain.n_entities)
    dist = np.linalg.norm(chain.X[:, iu, :] - chain.X[:, ju, :], axis=2)  # (K, P)
    g = chain.gamma_shrink[:, None]
    delta_sim = 1.0 / rng.gamma(g, 1.0 / ((g + 1.0) * dist))
    r = _simulate_ratios(y, chain, delta_sim, rng)  # (K, P, M)
    ratios = np.moveaxis(r, 0, -1)  # (P, M, K)
    averaged = ratios.mean(axis=1)  # (P, K)
    n_pairs = averaged.shape[0]
    intervals = np.empty((n_pairs, 2))
    for a in range(n_pairs):
        intervals[a] = hpd(averaged[a], hpd_mass)
    contains = (intervals[:, 0] <= 0.0) & (0.0 <= intervals[:, 1])
    return PpcReport(
        ratios=ratios,
        averaged=averaged,
        hpd_mass=hpd_mass,
        coverage=float(contains.mean()),
        intervals=intervals,
        contains_zero=contains,
        pair_i=iu,
        pair_j=ju,
    )


def trace_export(chain: ChainOutput, names, path) -> None:
    """Write retained draws of the named parameters as CSV, one row per draw.

    Columns are the iteration index followed by one column per name; names
    follow the chain schema (``psi``, ``gamma``, ``tau[p]``, ``delta[i,j]``,
    ``X[i,k]``).  Unknown names raise ``ValueError``.
    """
    schema = chain.schema()
    missing = [n for n in names if n not in schema]
    if missing:
        raise ValueError(f"unknown parameter name(s): {', '.join(missing)}")
    mat = chain.to_matrix()
    cols = [schema[n] for n in names]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("iteration," + ",".join(names) + "\n")
        for k in range(mat.shape[0]):
            fh.write(str(k) + "," + ",".join("%.16e" % mat[k, c] for c in cols) + "\n")
