"""Bayesian evaluation of order-constrained treatment effects and
hierarchical variance components.

The package has three layers:

* one-way treatment-effect models with inequality constraints, compared
  by Monte Carlo marginal likelihoods or encompassing Bayes factors;
* hierarchical additive models whose variance components are summarized
  as finite-population standard deviations;
* classical baselines (the one-way F test and a likelihood-ratio test in
  a random-intercept model).

The Gibbs sweep kernels are compiled with Cython when possible and fall
back to the interpreter otherwise; both backends produce bit-identical
draws. :func:`backend` reports which one is active.
"""

from .classical import (
    FTestResult,
    LRTestResult,
    lr_test_equal_treatments,
    oneway_f_test,
)
from .constraints import (
    ConstraintSet,
    exact_prior_proportion,
    indicator,
    indicator_matrix,
    mc_prior_proportion,
    parse_constraints,
    render_constraints,
)
from .designs import (
    Dataset,
    LatinSquareDesign,
    NestedDesign,
    SimulationRecord,
    SimulationTruth,
    design_from_dataset,
    load_csv,
    make_latin_square,
    make_nested_design,
    simulate_latin,
    simulate_nested,
    validate_latin_dataset,
    write_csv,
)
from .diagnostics import effective_sample_size, mcse_mean
from .errors import (
    ConstraintError,
    CsvError,
    DegenerateEstimateError,
    NonConvergenceError,
    NumericError,
    OrdanovaError,
    SchemaError,
    ValidationError,
)
from .evidence import (
    EncompassingBF,
    LindleyResult,
    LindleyRow,
    ModelComparison,
    ModelEvidence,
    VarCompPriors,
    VarianceModelSpec,
    bf_from_draws,
    compare_constrained_models,
    direct_marginal,
    encompassing_bf,
    integrated_likelihood_varcomps,
    lindley_sensitivity,
    posterior_model_probs,
    varcomp_loglik_gradient,
    variance_model_evidence,
)
from .hierarchical import (
    BatchSpec,
    HierDraws,
    SdPrior,
    VarCompRow,
    VarCompSummary,
    anova_display,
    default_sd_prior,
    finite_pop_sd,
    gibbs_latin,
    gibbs_three_level,
    gibbs_two_level_dummies,
)
from .samplers import (
    ChainConfig,
    OneWayStats,
    PosteriorDraws,
    PriorSpec,
    Theta,
    backend,
    gibbs_oneway,
    log_likelihood,
    log_prior_density,
    sample_prior,
    scaled_inv_chisq_logpdf,
    scaled_inv_chisq_sample,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "backend",
    # constraints
    "ConstraintSet",
    "parse_constraints",
    "render_constraints",
    "indicator",
    "indicator_matrix",
    "exact_prior_proportion",
    "mc_prior_proportion",
    # designs
    "Dataset",
    "LatinSquareDesign",
    "NestedDesign",
    "SimulationTruth",
    "SimulationRecord",
    "make_latin_square",
    "simulate_latin",
    "make_nested_design",
    "simulate_nested",
    "load_csv",
    "write_csv",
    "validate_latin_dataset",
    "design_from_dataset",
    # samplers
    "PriorSpec",
    "Theta",
    "ChainConfig",
    "PosteriorDraws",
    "OneWayStats",
    "scaled_inv_chisq_sample",
    "scaled_inv_chisq_logpdf",
    "log_likelihood",
    "log_prior_density",
    "sample_prior",
    "gibbs_oneway",
    # evidence
    "ModelEvidence",
    "EncompassingBF",
    "ModelComparison",
    "VarCompPriors",
    "VarianceModelSpec",
    "LindleyRow",
    "LindleyResult",
    "direct_marginal",
    "encompassing_bf",
    "bf_from_draws",
    "posterior_model_probs",
    "compare_constrained_models",
    "integrated_likelihood_varcomps",
    "varcomp_loglik_gradient",
    "variance_model_evidence",
    "lindley_sensitivity",
    # hierarchical
    "SdPrior",
    "BatchSpec",
    "HierDraws",
    "VarCompRow",
    "VarCompSummary",
    "default_sd_prior",
    "finite_pop_sd",
    "gibbs_latin",
    "gibbs_two_level_dummies",
    "gibbs_three_level",
    "anova_display",
    # classical
    "FTestResult",
    "LRTestResult",
    "oneway_f_test",
    "lr_test_equal_treatments",
    # diagnostics
    "effective_sample_size",
    "mcse_mean",
    # errors
    "OrdanovaError",
    "ValidationError",
    "SchemaError",
    "ConstraintError",
    "CsvError",
    "DegenerateEstimateError",
    "NonConvergenceError",
    "NumericError",
]
