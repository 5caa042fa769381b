"""Log densities and exact conditional distributions of the hierarchical scaling model.

Observation model:  y_ijp ~ Gamma(psi, psi / (tau_p * delta_ij)), independently
across pairs j > i and replicates p, so E y = tau*delta and
Var y = (tau*delta)^2 / psi.

Priors:  delta_ij ~ Inv-Gamma(gamma, (gamma + 1) * ||X_i - X_j||), which has its
mode exactly at the latent Euclidean distance; X_i ~ N(0, diag(lambda));
psi ~ Gamma(a1, b1); gamma ~ Gamma(a2, b2); tau_p ~ Inv-Gamma(alpha, beta).

Everything is computed in log space.  ``psi`` here is the gamma shape; the
chromagram in :mod:`hmds.audio` (often written with the same Greek letter) is
named ``chroma`` there to keep the two ideas apart.
"""

from __future__ import annotations

import dataclasses

import numpy as np
from scipy.special import gammaln

from .core import DistanceTensor, Hyperparams, ModelState


@dataclasses.dataclass(frozen=True)
class GammaSpec:
    """Gamma distribution in shape/rate form; mean = shape/rate."""

    shape: float
    rate: float

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise ValueError("gamma shape and rate must be strictly positive")

    @property
    def mean(self) -> float:
        return self.shape / self.rate


@dataclasses.dataclass(frozen=True)
class InvGammaSpec:
    """Inverse-gamma distribution in shape/scale form; mode = scale/(shape + 1)."""

    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise ValueError("inverse-gamma shape and scale must be strictly positive")

    @property
    def mode(self) -> float:
        return self.scale / (self.shape + 1.0)

    @property
    def mean(self) -> float:
        """Defined for shape > 1."""
        if self.shape <= 1.0:
            return np.inf
        return self.scale / (self.shape - 1.0)


def gamma_logpdf(x, shape, rate):
    """Log density of Gamma(shape, rate); vectorized."""
    x = np.asarray(x, dtype=np.float64)
    return shape * np.log(rate) - gammaln(shape) + (shape - 1.0) * np.log(x) - rate * x


def inv_gamma_logpdf(x, shape, scale):
    """Log density of Inv-Gamma(shape, scale); vectorized."""
    x = np.asarray(x, dtype=np.float64)
    return shape * np.log(scale) - gammaln(shape) - (shape + 1.0) * np.log(x) - scale / x


def normal_logpdf(x, var):
    """Log density of N(0, var); vectorized."""
    x = np.asarray(x, dtype=np.float64)
    return -0.5 * (np.log(2.0 * np.pi * var) + x * x / var)


def log_likelihood(y: DistanceTensor, s: ModelState) -> float:
    """Gamma log likelihood summed over the j > i pairs and all replicates."""
    u = y.upper()  # (n_pairs, M)
    mean = s.delta[:, None] * s.tau[None, :]
    return float(np.sum(gamma_logpdf(u, s.psi, s.psi / mean)))


def log_prior(s: ModelState, h: Hyperparams) -> float:
    """Joint log prior density of a model state."""
    d = s.pair_distances()
    out = np.sum(inv_gamma_logpdf(s.delta, s.gamma_shrink, (s.gamma_shrink + 1.0) * d))
    out += np.sum(normal_logpdf(s.X, h.lambda_diag[None, :]))
    out += gamma_logpdf(s.psi, h.a1, h.b1)
    out += gamma_logpdf(s.gamma_shrink, h.a2, h.b2)
    out += np.sum(inv_gamma_logpdf(s.tau, h.alpha, h.beta))
    return float(out)


def delta_conditional(i: int, j: int, y: DistanceTensor, s: ModelState) -> InvGammaSpec:
    """Full conditional of delta_ij given everything else.

    Inv-Gamma with shape M*psi + gamma and scale
    (gamma + 1) * ||X_i - X_j|| + psi * sum_p y_ijp / tau_p.  Its mode is the
    convex combination of the latent Euclidean distance and the per-pair MLE,
    which is how the prior shrinks delta toward an embeddable metric.
    """
    if not 0 <= i < j < s.n_entities:
        raise ValueError("require 0 <= i < j < N")
    m = y.n_replicates
    dist = float(np.linalg.norm(s.X[i] - s.X[j]))
    shape = m * s.psi + s.gamma_shrink
    scale = (s.gamma_shrink + 1.0) * dist + s.psi * float(
        np.sum(y.values[i, j, :] / s.tau)
    )
    return InvGammaSpec(shape, scale)


def tau_conditional(p: int, y: DistanceTensor, s: ModelState, h: Hyperparams) -> InvGammaSpec:
    """Full conditional of tau_p given everything else.

    Inv-Gamma with shape alpha + N(N-1)/2 * psi and scale
    beta + psi * sum_{j>i} y_ijp / delta_ij.
    """
    if not 0 <= p < y.n_replicates:
        raise ValueError("replicate index out of range")
    u = y.upper()[:, p]
    shape = h.alpha + s.n_pairs * s.psi
    scale = h.beta + s.psi * float(np.sum(u / s.delta))
    return InvGammaSpec(shape, scale)


def sample_gamma(spec: GammaSpec, rng: np.random.Generator, size=None):
    """Draw from Gamma(shape, rate).  Scalar by default, array when ``size`` given."""
    out = rng.gamma(spec.shape, 1.0 / spec.rate, size=size)
    return float(out) if size is None else out


def sample_inv_gamma(spec: InvGammaSpec, rng: np.random.Generator, size=None):
    """Draw from Inv-Gamma(shape, scale) as the reciprocal of a Gamma(shape, rate=scale) draw."""
    out = 1.0 / rng.gamma(spec.shape, 1.0 / spec.scale, size=size)
    return float(out) if size is None else out
