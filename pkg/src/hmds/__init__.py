"""Hierarchical multidimensional scaling (HMDS) for replicate distance matrices.

The package turns collections of aligned recordings into replicate Hellinger
distance tensors over tempo, dynamics, and spectral-flatness curves, fits a
hierarchical gamma-likelihood Bayesian scaling model by Gibbs-within-MH
sampling, and summarizes the systematic pairwise dissimilarities with
diagnostics, clustering, and aligned latent embeddings.
"""

from .core import (
    DistanceTensor,
    Hyperparams,
    ModelState,
    normalize_tensor,
    read_tensor,
    validate_tensor,
    write_tensor,
)
from .metrics import CurveSet, build_tensor, hellinger
from .mle import MleEstimate, fit_delta_tau, fit_mle, fit_psi
from .model import (
    GammaSpec,
    InvGammaSpec,
    delta_conditional,
    log_likelihood,
    log_prior,
    sample_gamma,
    sample_inv_gamma,
    tau_conditional,
)
from .sampler import (
    ChainConfig,
    ChainOutput,
    classical_mds,
    empirical_bayes_lambda,
    init_state,
    load_chain,
    run_chain,
    save_chain,
    step,
)
from .diagnostics import PpcReport, ess, hpd, ppc_hierarchical, ppc_pairwise, trace_export
from .summarize import Dendrogram, agglomerate, posterior_mean_delta, procrustes_align
from .synth import generate_tensor, generate_warped_audio, synth_melody

__version__ = "0.1.0"

__all__ = [
    "ChainConfig",
    "ChainOutput",
    "CurveSet",
    "Dendrogram",
    "DistanceTensor",
    "GammaSpec",
    "Hyperparams",
    "InvGammaSpec",
    "MleEstimate",
    "ModelState",
    "PpcReport",
    "agglomerate",
    "build_tensor",
    "classical_mds",
    "delta_conditional",
    "empirical_bayes_lambda",
    "ess",
    "fit_delta_tau",
    "fit_mle",
    "fit_psi",
    "generate_tensor",
    "generate_warped_audio",
    "hellinger",
    "hpd",
    "init_state",
    "load_chain",
    "log_likelihood",
    "log_prior",
    "normalize_tensor",
    "posterior_mean_delta",
    "ppc_hierarchical",
    "ppc_pairwise",
    "procrustes_align",
    "read_tensor",
    "run_chain",
    "sample_gamma",
    "sample_inv_gamma",
    "save_chain",
    "step",
    "synth_melody",
    "tau_conditional",
    "trace_export",
    "validate_tensor",
    "write_tensor",
]
