"""Shared builders for synthetic model states and tensors."""

import numpy as np
import pytest

from hmds.core import Hyperparams, ModelState, pair_indices
from hmds.synth import generate_tensor


def euclidean_state(rng, n=4, m=6, psi=10.0, gamma=1.0, x_scale=0.6, tau_spread=0.25):
    """A model state whose delta values are exact latent Euclidean distances."""
    x = rng.standard_normal((n, n - 1)) * x_scale
    iu, ju = pair_indices(n)
    delta = np.linalg.norm(x[iu] - x[ju], axis=1)
    tau = np.exp(rng.normal(0.0, tau_spread, m))
    tau /= np.exp(np.log(tau).mean())
    return ModelState(X=x, delta=delta, tau=tau, psi=psi, gamma_shrink=gamma)


def prior_state(rng, n, m, h: Hyperparams):
    """A model state drawn from the prior given by ``h`` (used for Geweke-style checks)."""
    x = rng.standard_normal((n, n - 1)) * np.sqrt(h.lambda_diag)
    psi = rng.gamma(h.a1, 1.0 / h.b1)
    gamma = rng.gamma(h.a2, 1.0 / h.b2)
    tau = 1.0 / rng.gamma(h.alpha, 1.0 / h.beta, m)
    iu, ju = pair_indices(n)
    d = np.linalg.norm(x[iu] - x[ju], axis=1)
    delta = 1.0 / rng.gamma(gamma, 1.0 / ((gamma + 1.0) * d))
    return ModelState(X=x, delta=delta, tau=tau, psi=psi, gamma_shrink=gamma)


@pytest.fixture
def small_tensor():
    rng = np.random.default_rng(11)
    state = euclidean_state(rng, n=4, m=5)
    return generate_tensor(state, 5, rng), state
