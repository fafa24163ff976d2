"""Adaptive experimental design for Gaussian-process models under
right-censored responses: censored GP fitting (single- and bi-fidelity),
the integrated censored mean-squared error design criterion, sequential
campaign simulation, and a human-in-the-loop campaign service."""

from .criteria import (
    CriterionEval,
    HcMatrix,
    h_adjust,
    hc_matrix,
    icmse_general,
    icmse_nocensor_training,
    imse_baseline,
    interval_score,
    mean_interval_score,
    rmse,
)
from .designer import (
    PROBLEMS,
    CampaignHistory,
    DesignConfig,
    DesignMethod,
    Problem,
    initial_design,
    propose_next,
    run_benchmark,
    run_campaign_sim,
    sobol_points,
    testfn_f_1d,
    testfn_f_2d,
    testfn_xi_1d,
    testfn_xi_2d,
)
from .errors import (
    DegenerateTruncationError,
    FitError,
    IcmseError,
    ModelModeError,
    NumericalError,
    ProposalError,
    UnsupportedKernelError,
)
from .gpmodel import (
    Fidelity,
    FittedModel,
    Hyperparams,
    ModelMode,
    Observation,
    OptConfig,
    Prediction,
    build_model,
    censored_loglik,
    discrepancy_estimate,
    fit_mle,
    predict_bifidelity,
    predict_censored,
    predict_standard,
    read_observations_csv,
    write_observations_csv,
)
from .kernels import (
    KernelFamily,
    KernelSpec,
    LengthscaleParams,
    corr_gaussian,
    corr_matrix,
    g_exp_integral,
    lambda_matrix,
    lambda_matrix_quadrature,
)
from .tmvn import (
    MvnSpec,
    TruncatedMoments,
    mvn_box_prob,
    orthant_prob,
    trunc_moments,
    trunc_moments_box,
    trunc_univariate,
)

__version__ = "0.1.0"
