"""Simulation studies and the train/test protocol on real data.

Each replicate draws its own truth and data from dedicated streams
``(replicate, purpose)`` under the master seed. The streams do not involve
the rho grid position, so every rho value sees the same underlying normals,
and replicates may run on any number of workers without changing a digit.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from ..baselines import IrlsConfig, james_stein, tweedie
from ..bias import (
    BiasMethod,
    adjust,
    estimate_bias,
    nonparametric_bootstrap,
    oracle_bias,
    parametric_bootstrap,
)
from ..errors import ConfigError, SelbiasError
from ..evaluation import EvaluationReport, MetricKind, rmse, select_extremes, split_train_test, test_ssd
from ..randgen import (
    CorrelationKind,
    CorrelationSpec,
    GenerativeModel,
    SeedPlan,
    build_correlation,
    draw_datasets,
    equicorrelation,
)
from ..stats import (
    CASE,
    CONTROL,
    DataMatrix,
    Statistic,
    compute_statistic,
    pooled_covariance,
    read_csv,
    sample_covariance,
    top_sd_features,
)
from .config import ScenarioConfig, ScenarioKind, resolve_threads

log = logging.getLogger(__name__)

# stream purposes within a replicate
TRUTH, DATA, PARA_UNCOR, PARA_COR, PARA_COR_WRONG, NONPARA, ORACLE_COR, ORACLE_UNCOR, SPLIT = range(9)


class ReplicateError(SelbiasError, RuntimeError):
    """An estimator failed inside one replicate."""


def _map_ordered(fn, items, threads):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _annotated(label, fn):
    def run(i):
        try:
            return fn(i)
        except SelbiasError as exc:
            raise ReplicateError(f"{label} {i}: {type(exc).__name__}: {exc}") from exc

    return run


# ---------------------------------------------------------------------------
# Per-method estimators
# ---------------------------------------------------------------------------


def _fit_one_sample(D: DataMatrix, ridge):
    mean = D.values.mean(axis=0)
    var = D.values.var(axis=0, ddof=1)
    uncor = GenerativeModel.independent_normal(mean, var)
    cor = GenerativeModel.mvn(mean, sample_covariance(D, ridge))
    return uncor, cor


def _fit_two_sample(D: DataMatrix, ridge):
    models = {"uncor": {}, "right": {}, "wrong": {}}
    pooled = pooled_covariance(D, ridge)
    for label in (CONTROL, CASE):
        x = D.group_values(label)
        mean = x.mean(axis=0)
        models["uncor"][label] = GenerativeModel.independent_normal(mean, x.var(axis=0, ddof=1))
        models["right"][label] = GenerativeModel.mvn(mean, sample_covariance(x, ridge))
        models["wrong"][label] = GenerativeModel.mvn(mean, pooled)
    return models


def _bootstrap_adjust(D, model, statistic, cfg, seed, unadjusted, sigma=None):
    if model is None:
        ens = nonparametric_bootstrap(D, statistic, cfg.B, seed, sigma=sigma)
    else:
        ens = parametric_bootstrap(D, model, statistic, cfg.B, seed, sigma=sigma)
    return adjust(unadjusted, estimate_bias(ens, unadjusted)).values


def adjusted_estimates(
    method: str,
    D: DataMatrix,
    unadjusted,
    statistic: Statistic,
    cfg: ScenarioConfig,
    seed: SeedPlan,
    sigma=None,
    oracle=None,
):
    """Adjusted estimates for one method on one dataset.

    ``oracle`` is ``(truth, model, n)`` for the oracle methods; the model is a
    group mapping for the two-sample statistic.
    """
    if method == "james-stein":
        return james_stein(unadjusted).values
    if method == "tweedie":
        return tweedie(unadjusted, bins=cfg.bins, df=cfg.spline_df, cfg=IrlsConfig()).values
    if method == "nonpara":
        return _bootstrap_adjust(D, None, statistic, cfg, seed.child(NONPARA), unadjusted, sigma)
    if method.startswith("oracle"):
        truth, model, n = oracle
        if method == "oracle-uncor":
            if isinstance(model, dict):
                model = {g: m.decorrelated() for g, m in model.items()}
            else:
                model = model.decorrelated()
            purpose, kind = ORACLE_UNCOR, BiasMethod.ORACLE_UNCOR
        else:
            purpose, kind = ORACLE_COR, BiasMethod.ORACLE_COR
        bias = oracle_bias(truth, model, statistic, cfg.n_mc, seed.child(purpose), n=n, sigma=sigma, method=kind)
        return adjust(unadjusted, bias).values
    if statistic is Statistic.TWO_SAMPLE_T:
        models = _fit_two_sample(D, cfg.ridge)
        choice = {
            "para-uncor": ("uncor", PARA_UNCOR),
            "para-cor": ("right", PARA_COR),
            "para-cor-right": ("right", PARA_COR),
            "para-cor-wrong": ("wrong", PARA_COR_WRONG),
        }[method]
        return _bootstrap_adjust(D, models[choice[0]], statistic, cfg, seed.child(choice[1]), unadjusted)
    uncor, cor = _fit_one_sample(D, cfg.ridge)
    if method == "para-uncor":
        return _bootstrap_adjust(D, uncor, statistic, cfg, seed.child(PARA_UNCOR), unadjusted, sigma)
    if method == "para-cor":
        return _bootstrap_adjust(D, cor, statistic, cfg, seed.child(PARA_COR), unadjusted, sigma)
    raise ConfigError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# One-sample studies
# ---------------------------------------------------------------------------


def _scenario_id(cfg: ScenarioConfig, rho: float) -> str:
    return f"{cfg.name}:rho={rho:g}"


def _one_sample_replicate(cfg: ScenarioConfig, rho: float, rep: int) -> dict:
    p, n, k = cfg.p, cfg.n, cfg.k_nonnull
    root = SeedPlan(cfg.master_seed, (rep,))
    R = build_correlation(CorrelationSpec(cfg.correlation, rho, cfg.block_size), p)
    mu = np.zeros(p)
    mu[p - k:] = root.child(TRUTH).generator().normal(0.0, math.sqrt(cfg.nonnull_mean_var), k)
    if cfg.scenario is ScenarioKind.ONE_SAMPLE_MVT:
        model = GenerativeModel.mvt(mu, R, cfg.nu)
    else:
        model = GenerativeModel.mvn(mu, R)
    sigma_true = model.marginal_sd()
    truth = math.sqrt(n) * mu / sigma_true
    D = DataMatrix(draw_datasets(model, n, [root.child(DATA)])[0])
    if cfg.statistic == "z":
        statistic, sigma = Statistic.ONE_SAMPLE_Z, sigma_true
    else:
        statistic, sigma = Statistic.ONE_SAMPLE_T, None
    unadjusted = compute_statistic(D, statistic, sigma).values
    out = {}
    for method in cfg.methods:
        adjusted = adjusted_estimates(
            method, D, unadjusted, statistic, cfg, root, sigma=sigma, oracle=(truth, model, n)
        )
        for sk in cfg.select_k:
            out[(method, sk)] = rmse(adjusted, unadjusted, truth, select_extremes(unadjusted, sk))
    return out


def _aggregate(scenario_id, cfg, per_rep, metric=MetricKind.RMSE, methods=None):
    rows = []
    for method in methods or cfg.methods:
        for sk in cfg.select_k:
            values = [r[(method, sk)] for r in per_rep]
            rows.append(EvaluationReport.from_values(scenario_id, method, metric, sk, values))
    return rows


def run_one_sample_scenario(cfg: ScenarioConfig, threads: int | None = None) -> list[EvaluationReport]:
    """RMSE of every method over replications, one block of rows per rho."""
    if cfg.scenario not in (ScenarioKind.ONE_SAMPLE_GAUSSIAN, ScenarioKind.ONE_SAMPLE_MVT):
        raise ConfigError(f"expected a one-sample scenario, got {cfg.scenario.value}")
    threads = resolve_threads(threads)
    rows = []
    for rho in cfg.rho:
        log.info("%s rho=%g: %d replications", cfg.name, rho, cfg.replications)
        per_rep = _map_ordered(
            _annotated("replicate", lambda rep: _one_sample_replicate(cfg, rho, rep)),
            range(cfg.replications),
            threads,
        )
        rows += _aggregate(_scenario_id(cfg, rho), cfg, per_rep)
    return rows


# ---------------------------------------------------------------------------
# Two-sample study
# ---------------------------------------------------------------------------


def case_correlation(p: int, k: int, within: float, across: float) -> np.ndarray:
    """Unit diagonal; ``within`` inside the null block and inside the non-null
    block (last k features); ``across`` between them."""
    R = np.full((p, p), float(across))
    R[: p - k, : p - k] = within
    R[p - k:, p - k:] = within
    np.fill_diagonal(R, 1.0)
    return R


def two_sample_truth_model(cfg: ScenarioConfig, seed: SeedPlan):
    p, k = cfg.p, cfg.k_nonnull
    rng = seed.child(TRUTH).generator()
    sd = math.sqrt(cfg.nonnull_mean_var)
    mu_control = rng.normal(0.0, sd, p)
    mu_case = rng.normal(0.0, sd, p)
    mu_case[p - k:] += cfg.case_shift
    model = {
        CONTROL: GenerativeModel.mvn(mu_control, equicorrelation(p, cfg.control_rho)),
        CASE: GenerativeModel.mvn(mu_case, case_correlation(p, k, cfg.case_within_rho, cfg.case_across_rho)),
    }
    truth = (mu_case - mu_control) / math.sqrt(1.0 / cfg.n1 + 1.0 / cfg.n2)
    return truth, model


def _two_sample_replicate(cfg: ScenarioConfig, rep: int) -> dict:
    root = SeedPlan(cfg.master_seed, (rep,))
    truth, model = two_sample_truth_model(cfg, root)
    data_seed = root.child(DATA)
    D = DataMatrix.two_group(
        draw_datasets(model[CONTROL], cfg.n1, [data_seed.child(0)])[0],
        draw_datasets(model[CASE], cfg.n2, [data_seed.child(1)])[0],
    )
    statistic = Statistic.TWO_SAMPLE_T
    unadjusted = compute_statistic(D, statistic).values
    out = {}
    for method in cfg.methods:
        adjusted = adjusted_estimates(
            method, D, unadjusted, statistic, cfg, root, oracle=(truth, model, (cfg.n1, cfg.n2))
        )
        for sk in cfg.select_k:
            out[(method, sk)] = rmse(adjusted, unadjusted, truth, select_extremes(unadjusted, sk))
    return out


def run_two_sample_scenario(cfg: ScenarioConfig, threads: int | None = None) -> list[EvaluationReport]:
    if cfg.scenario is not ScenarioKind.TWO_SAMPLE:
        raise ConfigError(f"expected a two_sample scenario, got {cfg.scenario.value}")
    threads = resolve_threads(threads)
    per_rep = _map_ordered(
        _annotated("replicate", lambda rep: _two_sample_replicate(cfg, rep)),
        range(cfg.replications),
        threads,
    )
    return _aggregate(cfg.name, cfg, per_rep)


def make_two_sample_data(cfg: ScenarioConfig, seed: int | SeedPlan) -> tuple[DataMatrix, np.ndarray]:
    """One dataset from the two-sample model, with its true effect sizes."""
    root = seed if isinstance(seed, SeedPlan) else SeedPlan(int(seed))
    truth, model = two_sample_truth_model(cfg, root)
    data_seed = root.child(DATA)
    D = DataMatrix.two_group(
        draw_datasets(model[CONTROL], cfg.n1, [data_seed.child(0)])[0],
        draw_datasets(model[CASE], cfg.n2, [data_seed.child(1)])[0],
        feature_names=[f"g{j + 1}" for j in range(cfg.p)],
    )
    return D, truth


# ---------------------------------------------------------------------------
# Real data
# ---------------------------------------------------------------------------


UNADJUSTED = "unadjusted"


def _real_data_split(cfg: ScenarioConfig, D: DataMatrix, split: int) -> dict:
    root = SeedPlan(cfg.master_seed, (split,))
    train, test = split_train_test(D, root.child(SPLIT))
    statistic = Statistic.ONE_SAMPLE_T if D.group is None else Statistic.TWO_SAMPLE_T
    train_hat = compute_statistic(train, statistic).values
    test_hat = compute_statistic(test, statistic).values
    out = {}
    selections = {sk: select_extremes(train_hat, sk) for sk in cfg.select_k}
    for sk, sel in selections.items():
        out[(UNADJUSTED, sk)] = test_ssd(train_hat, test_hat, sel)
    for method in cfg.methods:
        adjusted = adjusted_estimates(method, train, train_hat, statistic, cfg, root)
        for sk, sel in selections.items():
            out[(method, sk)] = test_ssd(adjusted, test_hat, sel)
    return out


def run_real_data(cfg: ScenarioConfig, data, threads: int | None = None) -> list[EvaluationReport]:
    """Repeated stratified half splits scored by test sum of squared differences.

    ``data`` is a CSV path or a DataMatrix. ``cfg.replications`` is the number
    of random splits.
    """
    if cfg.scenario is not ScenarioKind.REAL_DATA:
        raise ConfigError(f"expected a real_data scenario, got {cfg.scenario.value}")
    threads = resolve_threads(threads)
    D = data if isinstance(data, DataMatrix) else read_csv(Path(data))
    if cfg.top_sd is not None:
        D = top_sd_features(D, cfg.top_sd)
    if 2 * max(cfg.select_k) > D.p:
        raise ConfigError(f"2 * select_k exceeds the {D.p} features in the data")
    per_split = _map_ordered(
        _annotated("split", lambda s: _real_data_split(cfg, D, s)),
        range(cfg.replications),
        threads,
    )
    return _aggregate(cfg.name, cfg, per_split, MetricKind.TEST_SSD, methods=list(cfg.methods) + [UNADJUSTED])
