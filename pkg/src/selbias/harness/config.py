"""Declarative scenario configuration (versioned JSON)."""

from __future__ import annotations

import enum
import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from ..errors import ConfigError
from ..randgen import CorrelationKind

SCHEMA_VERSION = 1
THREADS_ENV = "SELBIAS_THREADS"


class ScenarioKind(str, enum.Enum):
    ONE_SAMPLE_GAUSSIAN = "one_sample_gaussian"
    ONE_SAMPLE_MVT = "one_sample_mvt"
    TWO_SAMPLE = "two_sample"
    LEMMA_CHECK = "lemma_check"
    REAL_DATA = "real_data"


ONE_SAMPLE_METHODS = (
    "james-stein",
    "tweedie",
    "para-uncor",
    "para-cor",
    "nonpara",
    "oracle-cor",
    "oracle-uncor",
)
TWO_SAMPLE_METHODS = (
    "james-stein",
    "tweedie",
    "para-uncor",
    "para-cor-wrong",
    "para-cor-right",
    "nonpara",
    "oracle-cor",
    "oracle-uncor",
)
REAL_DATA_METHODS = ("james-stein", "tweedie", "para-uncor", "para-cor", "nonpara")
LEMMAS = ("1", "2", "3", "4", "corollary1", "5")

ALLOWED_METHODS = {
    ScenarioKind.ONE_SAMPLE_GAUSSIAN: ONE_SAMPLE_METHODS,
    ScenarioKind.ONE_SAMPLE_MVT: ONE_SAMPLE_METHODS,
    ScenarioKind.TWO_SAMPLE: TWO_SAMPLE_METHODS + ("para-cor",),
    ScenarioKind.REAL_DATA: REAL_DATA_METHODS,
    ScenarioKind.LEMMA_CHECK: (),
}


def _as_list(value):
    return list(value) if isinstance(value, (list, tuple)) else [value]


@dataclass
class ScenarioConfig:
    """One simulation study, lemma suite or real-data evaluation.

    ``rho`` is a grid: each value becomes its own scenario id in the report.
    Defaults are the desk-scale preset; :func:`full_preset` gives the
    published sizes.
    """

    scenario: ScenarioKind = ScenarioKind.ONE_SAMPLE_GAUSSIAN
    name: str = ""
    n: int = 50
    n1: int = 40
    n2: int = 40
    p: int = 200
    k_nonnull: int = 40
    rho: list = field(default_factory=lambda: [0.0])
    correlation: CorrelationKind = CorrelationKind.EQUICORRELATION
    block_size: int = 100
    nu: float | None = None
    B: int = 300
    replications: int = 20
    methods: list = field(default_factory=lambda: list(ONE_SAMPLE_METHODS))
    select_k: list = field(default_factory=lambda: [25])
    master_seed: int = 20240101
    statistic: str = "t"
    n_mc: int = 3000
    ridge: float | None = None
    bins: int = 120
    spline_df: int = 5
    nonnull_mean_var: float = 0.01
    # two-sample model
    case_shift: float = 0.5
    control_rho: float = 0.5
    case_within_rho: float = 0.8
    case_across_rho: float = 0.5
    # real data
    top_sd: int | None = None
    # lemma checks
    lemmas: list = field(default_factory=lambda: list(LEMMAS))
    p_grid: list = field(default_factory=lambda: [10])
    a_values: list = field(default_factory=lambda: [0.0, 1.0])
    separation: float = 10.0
    cross_rho: float = 0.2
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        try:
            self.scenario = ScenarioKind(self.scenario)
            self.correlation = CorrelationKind(self.correlation)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        self.rho = [float(r) for r in _as_list(self.rho)]
        self.select_k = [int(k) for k in _as_list(self.select_k)]
        self.methods = list(_as_list(self.methods))
        self.lemmas = [str(x) for x in _as_list(self.lemmas)]
        self.p_grid = [int(x) for x in _as_list(self.p_grid)]
        self.a_values = [float(x) for x in _as_list(self.a_values)]
        if not self.name:
            self.name = self.scenario.value
        self.validate()

    @property
    def scenario_id(self) -> str:
        return self.name

    def validate(self) -> None:
        kind = self.scenario
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {self.schema_version}")
        counts = {
            "n": self.n, "n1": self.n1, "n2": self.n2, "p": self.p, "B": self.B,
            "replications": self.replications, "n_mc": self.n_mc, "bins": self.bins,
        }
        for key, value in counts.items():
            if not isinstance(value, int) or value < 1:
                raise ConfigError(f"{key} must be a positive integer, got {value!r}")
        if self.k_nonnull < 0 or self.k_nonnull > self.p:
            raise ConfigError(f"k_nonnull must lie in [0, p], got {self.k_nonnull}")
        if self.statistic not in ("t", "z"):
            raise ConfigError("statistic must be 't' or 'z'")
        if self.statistic == "z" and kind not in (ScenarioKind.ONE_SAMPLE_GAUSSIAN, ScenarioKind.ONE_SAMPLE_MVT):
            raise ConfigError("the z statistic is only available for one-sample scenarios")
        if kind is ScenarioKind.ONE_SAMPLE_MVT and (self.nu is None or not self.nu > 2):
            raise ConfigError("one_sample_mvt needs nu > 2")
        if self.ridge is not None and self.ridge < 0:
            raise ConfigError("ridge must be non-negative")
        if not self.rho:
            raise ConfigError("rho grid is empty")
        if kind is ScenarioKind.LEMMA_CHECK:
            unknown = set(self.lemmas) - set(LEMMAS)
            if unknown or not self.lemmas:
                raise ConfigError(f"unknown lemma ids {sorted(unknown)}; choose from {LEMMAS}")
            if any(p < 2 for p in self.p_grid) or not self.p_grid:
                raise ConfigError("p_grid entries must be at least 2")
            if any(not (-1 < r < 1) for r in self.rho):
                raise ConfigError("lemma rho values must lie in (-1, 1)")
            if self.n_mc < 1000:
                raise ConfigError("n_mc must be at least 1000")
            return
        if not self.methods:
            raise ConfigError("methods must be non-empty")
        allowed = ALLOWED_METHODS[kind]
        bad = [m for m in self.methods if m not in allowed]
        if bad:
            raise ConfigError(f"methods {bad} not available for {kind.value}; choose from {allowed}")
        if len(set(self.methods)) != len(self.methods):
            raise ConfigError("duplicate methods")
        if any(k < 1 for k in self.select_k) or not self.select_k:
            raise ConfigError("select_k entries must be positive")
        if kind is not ScenarioKind.REAL_DATA:
            if 2 * max(self.select_k) > self.p:
                raise ConfigError("2 * select_k exceeds p")
            if any(m.startswith("oracle") for m in self.methods) and self.n_mc < 1000:
                raise ConfigError("oracle methods need n_mc >= 1000")
        if kind in (ScenarioKind.ONE_SAMPLE_GAUSSIAN, ScenarioKind.ONE_SAMPLE_MVT):
            if self.n < 2:
                raise ConfigError("n must be at least 2")
            for r in self.rho:
                _check_rho(self.correlation, r, self.p, self.block_size)
        if kind is ScenarioKind.TWO_SAMPLE:
            if self.n1 < 2 or self.n2 < 2:
                raise ConfigError("n1 and n2 must be at least 2")
        if self.top_sd is not None and self.top_sd < 1:
            raise ConfigError("top_sd must be positive")

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        d = asdict(self)
        d["scenario"] = self.scenario.value
        d["correlation"] = self.correlation.value
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, path) -> "ScenarioConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
        return cls.from_dict(data)

    def with_(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)


def _check_rho(kind: CorrelationKind, rho: float, p: int, block_size: int):
    if kind is CorrelationKind.IDENTITY:
        return
    if kind is CorrelationKind.EQUICORRELATION:
        lower = -1.0 / (p - 1) if p > 1 else float("-inf")
        if not (lower < rho < 1):
            raise ConfigError(f"rho={rho} invalid for equicorrelation with p={p}")
    elif kind in (CorrelationKind.BLOCK_AR, CorrelationKind.NEGATIVE_BLOCK_AR):
        if not (-1 < rho < 1):
            raise ConfigError(f"rho={rho} invalid for block AR")
        if block_size < 1 or p % block_size:
            raise ConfigError(f"p={p} not divisible by block_size={block_size}")
    else:
        raise ConfigError(f"correlation kind {kind.value} is not available in scenarios")


def full_preset(scenario=ScenarioKind.ONE_SAMPLE_GAUSSIAN, **overrides) -> ScenarioConfig:
    """Full-size settings: p=500, 100 replications, B=1000, 10000 oracle draws."""
    scenario = ScenarioKind(scenario)
    base = dict(scenario=scenario, p=500, B=1000, replications=100, n_mc=10_000)
    if scenario is ScenarioKind.TWO_SAMPLE:
        base.update(k_nonnull=200, methods=list(TWO_SAMPLE_METHODS))
    else:
        base.update(k_nonnull=100)
    base.update(overrides)
    return ScenarioConfig(**base)


def scaled_preset(scenario=ScenarioKind.ONE_SAMPLE_GAUSSIAN, **overrides) -> ScenarioConfig:
    """Desk-scale sizes: p=200, 20 replications, B=300, 3000 oracle draws."""
    scenario = ScenarioKind(scenario)
    base = dict(scenario=scenario)
    if scenario is ScenarioKind.TWO_SAMPLE:
        base.update(k_nonnull=80, methods=list(TWO_SAMPLE_METHODS))
    elif scenario is ScenarioKind.REAL_DATA:
        base.update(methods=list(REAL_DATA_METHODS), select_k=[15, 25, 50], replications=20)
    base.update(overrides)
    return ScenarioConfig(**base)


def resolve_threads(threads: int | None = None) -> int:
    """Worker count: explicit value, else $SELBIAS_THREADS, else 1."""
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        if env:
            try:
                threads = int(env)
            except ValueError:
                raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
        else:
            threads = 1
    if threads < 1:
        raise ConfigError("thread count must be at least 1")
    return threads
