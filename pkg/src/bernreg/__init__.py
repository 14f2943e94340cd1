"""Bayesian shape-restricted regression with random Bernstein polynomials.

Monotone and unimodal convex/concave regression curves are modelled as
Bernstein polynomials whose order and coefficients carry a prior that
enforces the shape.  Posteriors are explored with an independence sampler
or a reversible-jump Metropolis-Hastings sampler.
"""

from .bernstein import (
    BernsteinPoly,
    ShapeClass,
    basis_eval,
    basis_matrix,
    bernstein_approx,
    poly_derivative,
    poly_eval,
    shape_check,
    unimodal_indices,
)
from .errors import BernregError, ConfigurationError, DegenerateInputError, DomainError
from .model import (
    Dataset,
    NoiseModel,
    TestFunction,
    empirical_hyperparams,
    estimate_sigma_sq,
    generate_dataset,
    log_likelihood,
    true_fn_eval,
)
from .priors import (
    OrderDistribution,
    OrderKind,
    PriorDraw,
    PriorSpec,
    order_pmf,
    prior_logdensity,
    sample_concave,
    sample_convex,
    sample_isotonic,
    sample_order,
    sample_prior,
)
from .samplers import ChainTrace, SamplerConfig, SamplerKind, run_chain
from .analysis import (
    CurveEstimate,
    Diagnostics,
    ErrorMetrics,
    autocorrelation,
    diagnostics,
    effective_sample_size,
    error_metrics,
    order_posterior,
    posterior_mean_curve,
)
from .experiment import ExperimentConfig, ExperimentReport, emit_report, load_report, run_experiment

__version__ = "0.1.0"
