"""Sliced Bayesian state-space modeling of mortgage default rates under
natural-hazard losses: data preparation, Gibbs inference with spike-and-slab
selection, exact simulation smoothing, rolling prediction, CRPS evaluation."""

from .data import (
    CountRecord,
    DesignMatrix,
    LossRecord,
    SeriesPanel,
    SliceSpec,
    TransformSpec,
    aggregate_losses,
    aligned_response,
    build_design,
    build_panel,
    compute_rate,
    inverse_transform_response,
    transform_loss,
    transform_response,
)
from .diagnostics import ess, export_traces, summarize
from .errors import ConfigError, DataError, HazardSsmError, NumericalError, UndefinedEssError
from .forecast import (
    CrpsConfig,
    PredictiveDistribution,
    crps,
    ols_baseline,
    posterior_predictive,
    rolling_forecast,
)
from .gibbs import (
    ChainOutput,
    GibbsConfig,
    PriorSpec,
    run_gibbs,
    sample_beta,
    sample_gamma,
    sample_variance,
    slab_log_marginal,
)
from .simulate import DgpSpec, SimulationOutput, rolling_reestimation_study, simulate_dgp
from .ssm import FilterOutput, ModelParams, exact_joint_loglik, ffbs_sample, kalman_filter

__version__ = "0.1.0"
