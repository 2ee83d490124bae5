"""Differentially private release and estimation for the covariate-adjusted
beta-model: noisy sufficient statistics, moment-equation fitting, asymptotic
inference with bias correction, and a Monte-Carlo simulation harness."""

from .model import (
    ModelParams,
    Network,
    SufficientStats,
    log_likelihood,
    mu,
    mu_derivs,
    pi,
    sample_network,
    sufficient_stats,
)
from .release import (
    PrivacyBudget,
    ReleasedStats,
    release,
    sample_discrete_laplace,
    sample_laplace,
    sensitivity_covariate,
    sensitivity_degree,
)
from .estimator import (
    FitConfig,
    FitResult,
    f_residual,
    fisher_v,
    fit,
    h_matrix,
    q_residual,
    s_approx_inverse,
    solve_beta_given_gamma,
)
from .inference import (
    InferenceReport,
    beta_contrast_ci,
    beta_contrast_se,
    bias_b,
    bias_correct,
    build_report,
    gamma_ci,
    normal_quantile,
    xi_statistic,
)
from .simulate import (
    SimDesign,
    SimTable,
    epsilon_of,
    make_beta_star,
    make_sim_covariates,
    run_design,
)

__version__ = "0.1.0"
