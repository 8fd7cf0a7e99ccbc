"""Estimate and remove the selection bias of ranked effect-size estimates."""

__version__ = "0.1.0"

from .baselines import IrlsConfig, MarginalDensityFit, fit_lindsey, james_stein, poisson_irls, tweedie
from .bias import (
    BiasMethod,
    BiasVector,
    BootstrapEnsemble,
    adjust,
    estimate_bias,
    nonparametric_bootstrap,
    oracle_bias,
    parametric_bootstrap,
)
from .evaluation import (
    EvaluationReport,
    ExtremeSelection,
    MetricKind,
    rmse,
    select_extremes,
    split_train_test,
    test_ssd,
)
from .randgen import (
    CorrelationKind,
    CorrelationSpec,
    GenerativeModel,
    SeedPlan,
    build_correlation,
    sample_mvn,
    sample_mvt,
)
from .stats import (
    DataMatrix,
    EstimateKind,
    EstimateVector,
    Statistic,
    one_sample_t,
    one_sample_z,
    pooled_covariance,
    rank,
    read_csv,
    sample_covariance,
    two_sample_t,
)
