"""Maximum likelihood estimation for the replicated gamma distance model.

delta and tau solve the coupled system

    delta_ij = (1/M) sum_p y_ijp / tau_p
    tau_p    = (2 / (N(N-1))) sum_{j>i} y_ijp / delta_ij

by alternating exact coordinate updates; each half-sweep maximizes the
likelihood in that block, so the log likelihood is non-decreasing.  The system
only identifies delta and tau up to (delta -> c*delta, tau -> tau/c); the
returned tau is normalized to geometric mean 1 and delta rescaled inversely.

Given delta and tau, the shape psi solves the score equation

    digamma(psi) - log(psi) = 1 + mean[ log(y/(tau*delta)) - y/(tau*delta) ]

whose right-hand side is strictly negative for any non-degenerate data
(log u - u <= -1 with equality only at u = 1).
"""

from __future__ import annotations

import dataclasses
import warnings

import numpy as np
from scipy.special import digamma

from .core import DistanceTensor

PSI_BRACKET = (1e-3, 1e6)


@dataclasses.dataclass(frozen=True)
class MleEstimate:
    """Joint MLE: condensed delta (j > i order), tau with geometric mean 1, psi."""

    delta_hat: np.ndarray
    tau_hat: np.ndarray
    psi_hat: float
    converged: bool
    iterations: int


def fit_delta_tau(
    y: DistanceTensor, tol: float = 1e-12, max_iter: int = 1000
) -> tuple[np.ndarray, np.ndarray, bool, int]:
    """Alternate the two MLE equations until the largest relative change is below tol.

    Returns (delta_hat, tau_hat, converged, iterations).  On non-convergence
    the last iterate is returned with converged = False.
    """
    u = y.upper()  # (n_pairs, M)
    if not np.all(u > 0):
        raise ValueError("tensor must be strictly positive off the diagonal")
    tau = u.mean(axis=0) / u.mean()
    delta = (u / tau[None, :]).mean(axis=1)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        delta_new = (u / tau[None, :]).mean(axis=1)
        tau_new = (u / delta_new[:, None]).mean(axis=0)
        change = max(
            np.max(np.abs(delta_new / delta - 1.0)),
            np.max(np.abs(tau_new / tau - 1.0)),
        )
        delta, tau = delta_new, tau_new
        if change < tol:
            converged = True
            break
    g = np.exp(np.mean(np.log(tau)))
    return delta * g, tau / g, converged, it


def fit_psi(
    y: DistanceTensor, delta_hat: np.ndarray, tau_hat: np.ndarray, tol: float = 1e-12
) -> float:
    """Solve the digamma score equation for psi by bisection on log(psi).

    Raises ``ValueError`` when the residual term vanishes (y identically equal
    to tau*delta), which drives the root to infinity.  Roots outside the
    bracket [1e-3, 1e6] are capped with a warning.
    """
    u = y.upper()
    ratio = u / (delta_hat[:, None] * tau_hat[None, :])
    rhs = 1.0 + float(np.mean(np.log(ratio) - ratio))
    if rhs >= 0.0:
        raise ValueError("degenerate: residuals vanish, psi MLE is unbounded")

    def score(log_psi: float) -> float:
        p = np.exp(log_psi)
        return digamma(p) - log_psi - rhs

    lo, hi = np.log(PSI_BRACKET[0]), np.log(PSI_BRACKET[1])
    if score(hi) < 0.0:
        warnings.warn("psi MLE capped at upper bracket edge")
        return PSI_BRACKET[1]
    if score(lo) > 0.0:
        warnings.warn("psi MLE capped at lower bracket edge")
        return PSI_BRACKET[0]
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if score(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return float(np.exp(0.5 * (lo + hi)))


def fit_mle(y: DistanceTensor, tol: float = 1e-12, max_iter: int = 1000) -> MleEstimate:
    """Full MLE of (delta, tau, psi) for a distance tensor."""
    delta, tau, converged, iterations = fit_delta_tau(y, tol=tol, max_iter=max_iter)
    psi = fit_psi(y, delta, tau, tol=tol)
    return MleEstimate(delta, tau, psi, converged, iterations)
