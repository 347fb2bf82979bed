"""Weighted Hermite variations of fractional Brownian motion and their mixed-Gaussian limit."""
from .bounds import (
    alpha_bounds,
    beta_power_double_sum,
    beta_power_sum,
    fit_exponent,
    lemma_sweep,
    triple_beta_sum,
)
from .errors import (
    ConfigError,
    DomainError,
    EmbeddingError,
    FactorizationError,
    GrowthError,
    HermvarError,
    MissingDerivativeError,
    ParameterRangeError,
)
from .fbm import FbmPath, generate, generate_cholesky, generate_circulant, increments, sample_paths
from .harness import (
    breuer_major_check,
    estimate_weak_distance,
    fn_gn_decay,
    phi_exponent,
    rate_experiment,
    stable_convergence_check,
    test_function,
)
from .hermite import gauss_hermite_inner, hermite_eval, hermite_product_check
from .kernel import alpha, alpha_diag, beta, fbm_covariance, rho, sigma_sq
from .seeds import derive_seed
from .variations import (
    VariationConfig,
    correction_term,
    limit_scale,
    mixture_sample,
    residual_second_moment_exact,
    seminorm,
    skorohod_variation,
    weighted_variation,
)
from .weights import WeightFunction, weight

__version__ = "0.1.0"
