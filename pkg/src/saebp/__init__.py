"""Empirical best prediction of nonlinear small-area parameters.

Monte Carlo prediction under the unit-level nested error model, MSE
estimation combining a draw-based leading-term estimator with a parametric
bootstrap for the parameter-variance term and four bias corrections,
calibrated prediction intervals, an informative-sampling extension built on
sample-distribution weight models, and a simulation harness.
"""

from .ebp import EbpDraws, EbpPrediction, draw_conditional_population, predict, predict_area
from .informative import (
    AreaWeightParams,
    JackknifeCov,
    ModelParams,
    WeightModelParams,
    fit_area_weight_model,
    fit_weight_model,
    jackknife_cov,
    mse_informative,
    param_bootstrap_draws,
    sir_draw_nonsampled_area,
    sir_draw_sampled_area,
)
from .intervals import IntervalReport, calibrated_ci, naive_ci, normal_ci
from .model import (
    AreaData,
    EstimationError,
    FittedNer,
    NerParams,
    PopulationDesign,
    SampleDataset,
    UnitRecord,
    ValidationError,
    conditional_effect,
    fit_ml,
    generalized_residuals,
    simulate_population,
)
from .mse import (
    BootstrapReplicate,
    MseReport,
    bias_corrected_m1,
    bootstrap_noninf,
    m1_hat,
    m2_hat,
    mse_report,
    standard_mr_mse,
)
from .params import (
    AreaParameter,
    UndefinedValueError,
    custom_param,
    evaluate,
    exp_mean_param,
    gini_param,
    mean_param,
    parse_parameter,
    poverty_gap_param,
    quantile_param,
)
from .pipeline import PipelineResult, run_informative, run_noninformative
from .simharness import SimConfig, SimResult, run_study, systematic_pps

__version__ = "0.1.0"
