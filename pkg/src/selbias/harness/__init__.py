"""Config-driven simulation studies, identity checks and real-data evaluation."""

from .config import (
    ONE_SAMPLE_METHODS,
    REAL_DATA_METHODS,
    TWO_SAMPLE_METHODS,
    ScenarioConfig,
    ScenarioKind,
    full_preset,
    resolve_threads,
    scaled_preset,
)
from .lemmas import LemmaCheckResult, run_lemma_checks, scaling_ratios
from .scenarios import (
    ReplicateError,
    make_two_sample_data,
    run_one_sample_scenario,
    run_real_data,
    run_two_sample_scenario,
)
