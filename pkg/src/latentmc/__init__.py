"""Bayesian inference in inverse problems with generative decoder priors.

Latent posteriors p(z|y) proportional to exp(-Phi(z)) N(z; 0, I) are sampled
with parallel-tempered preconditioned Crank-Nicolson MCMC; the package also
computes MMSE point estimates, PCA uncertainty maps, HPD coverage
diagnostics, and thermodynamic-integration model evidence.
"""

__version__ = "0.1.0"

from .analysis import (
    CoverageResult,
    PcaMap,
    PosteriorSummary,
    coverage_experiment,
    hpd_threshold,
    latent_dim_diagnostic,
    log_posterior_density,
    mmse_estimate,
    posterior_pca,
    standard_normal_logpdf,
)
from .estimator import LatentPosteriorSampler
from .evidence import (
    EvidenceEstimate,
    ReferenceDistribution,
    estimate_evidence,
    misspecification_test,
    per_temperature_loglik_means,
    thermodynamic_integration,
)
from .forward_model import (
    ConvolutionOperator,
    ForwardOperator,
    IdentityOperator,
    MaskOperator,
    Observation,
    PotentialFn,
    WellPosednessReport,
    apply_operator,
    check_wellposedness,
    gaussian_blur_kernel,
    log_likelihood,
    operator_norm,
    potential,
    psnr,
    random_mask,
)
from .generator import (
    AffineDecoder,
    Decoder,
    DenseLayer,
    LoadedWeights,
    MlpDecoder,
    MlpNetwork,
    ParabolaDecoder,
    WeightsFormatError,
    builtin_decoder,
    decode,
    encode_mean,
    lipschitz_upper_bound,
    load_weights,
    save_weights,
    spectral_norm,
)
from .sampler import (
    ChainEnsemble,
    PcnConfig,
    TemperatureLadder,
    TraceStore,
    pcn_step,
    robbins_monro_update,
    run_sampler,
    swap_step,
)

__all__ = [name for name in dir() if not name.startswith("_")]
