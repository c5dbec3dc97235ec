"""Monte Carlo solver for Kolmogorov PDEs.

Estimates the solution at the initial time over a query slice by path
sampling of the stochastic representation, smoothed with Gaussian
process regression whose observation noise is the per-point sample
variance.  The posterior variance quantifies the uncertainty of the
estimate and is accompanied by spectral and concentration bounds.
"""

from .baselines import interpolant, l2_error, linear_interpolate
from .bench import (
    ExperimentConfig,
    ProblemBundle,
    ResultRecord,
    analytic_reference,
    build_problem,
    register_problem,
    run_experiment,
    summarize,
    write_results,
)
from .errors import (
    CoefficientError,
    ConfigError,
    DomainError,
    FactorizationError,
    FkgpError,
    LinearizationError,
    OptimizationError,
    PathBlowupError,
)
from .kernels import KernelSpec, cross_vector, gram_matrix, kernel_grad, matern
from .problems import (
    Orientation,
    PdeProblem,
    QueryDomain,
    ValidationReport,
    advection_diffusion_problem,
    cole_hopf_inverse,
    cole_hopf_linearize,
    heat_problem,
    hjb_problem,
    reverse_time,
    validate_lipschitz,
)
from .regression import (
    FitResult,
    GpPosterior,
    HeteroscedasticNoise,
    HomoscedasticNoise,
    fit_posterior,
    log_marginal_likelihood,
    optimize_hyperparameters,
)
from .sampling import (
    FkConfig,
    FkEnsemble,
    euler_maruyama_path,
    fk_ensemble,
    fk_sample,
    fk_values,
    sample_stream,
)
from .uncertainty import (
    EigenEstimate,
    UncertaintyReport,
    chebyshev_variance_bound,
    conservative_bound_check,
    estimate_eigenvalues,
    imse,
    imse_lower_bound,
    r_min_estimate,
)

__version__ = "0.1.0"
