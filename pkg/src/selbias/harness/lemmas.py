"""Monte Carlo checks of the bias identities for normal estimates.

Every quantity on either side of an identity comes from its own random
stream, so agreement is evidence rather than algebra. Estimates are drawn
directly as delta_hat ~ N(delta, Sigma), i.e. one-row datasets reduced with
the z statistic at sigma = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..bias import oracle_errors
from ..errors import ConfigError, NotPositiveDefinite
from ..randgen import GenerativeModel, SeedPlan, cholesky, equicorrelation
from ..stats import Statistic
from .config import LEMMAS, ScenarioConfig, ScenarioKind, resolve_threads
from .scenarios import _map_ordered

PASS_SES = 3.0


@dataclass(frozen=True)
class LemmaCheckResult:
    """One side-by-side comparison. ``k`` is the 1-based rank, or 0 for
    identities summed over ranks."""

    lemma: str
    case: str
    k: int
    lhs: float
    lhs_se: float
    rhs: float
    rhs_se: float
    combined_se: float
    z: float
    passed: bool


def _result(lemma, case, k, lhs, lhs_se, rhs, rhs_se, combined=None):
    combined = math.hypot(lhs_se, rhs_se) if combined is None else combined
    diff = lhs - rhs
    z = diff / combined if combined > 0 else (0.0 if diff == 0 else math.inf)
    return LemmaCheckResult(
        lemma, case, int(k), float(lhs), float(lhs_se), float(rhs), float(rhs_se),
        float(combined), float(z), bool(abs(diff) <= PASS_SES * combined),
    )


def order_errors(delta, cov, n_mc: int, seed: SeedPlan) -> np.ndarray:
    """(n_mc, p) draws of delta_hat_(k) - delta_j(k) for delta_hat ~ N(delta, cov)."""
    delta = np.asarray(delta, dtype=float)
    model = GenerativeModel.mvn(delta, cov)
    return oracle_errors(delta, model, Statistic.ONE_SAMPLE_Z, n_mc, seed, n=1, sigma=1.0)


def mc_bias(delta, cov, n_mc: int, seed: SeedPlan):
    """Monte Carlo beta(delta, cov) and its per-rank standard errors."""
    e = order_errors(delta, cov, n_mc, seed)
    return e.mean(axis=0), e.std(axis=0, ddof=1) / math.sqrt(n_mc)


def _mean_se(x):
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def _linear_se(errors, weights):
    """SE of sum_k weights_k * mean(errors[:, k]), covariance across ranks included."""
    return float((errors @ weights).std(ddof=1) / math.sqrt(errors.shape[0]))


def _case(**kv) -> str:
    return ",".join(f"{k}={v:g}" if isinstance(v, float) else f"{k}={v}" for k, v in kv.items())


def _equicorrelation(p, rho):
    try:
        R = equicorrelation(p, rho)
        cholesky(R)
    except (NotPositiveDefinite, ValueError) as exc:
        raise ConfigError(f"rho={rho} gives no valid equicorrelation for p={p}: {exc}") from None
    return R


def _arbitrary_delta(p: int, seed: SeedPlan) -> np.ndarray:
    return seed.generator().normal(0.0, 1.0, p)


# ---------------------------------------------------------------------------
# Individual identities
# ---------------------------------------------------------------------------


def check_mse_decomposition(p, rho, n_mc, seed: SeedPlan) -> list[LemmaCheckResult]:
    """Total MSE of the estimates = sum of squared biases + total MSE of the oracle."""
    delta = _arbitrary_delta(p, seed.child(0))
    R = _equicorrelation(p, rho)
    a = order_errors(delta, R, n_mc, seed.child(1))
    b = order_errors(delta, R, n_mc, seed.child(2))
    c = order_errors(delta, R, n_mc, seed.child(3))
    lhs, lhs_se = _mean_se((a ** 2).sum(axis=1))
    beta = b.mean(axis=0)
    oracle_mse, oracle_se = _mean_se(((c - beta) ** 2).sum(axis=1))
    rhs = float(beta @ beta) + oracle_mse
    rhs_se = math.hypot(oracle_se, _linear_se(b, 2 * beta))
    return [_result("1", _case(p=p, rho=rho), 0, lhs, lhs_se, rhs, rhs_se)]


def check_variance_equivalence(p, rho, n_mc, seed: SeedPlan) -> list[LemmaCheckResult]:
    """beta(delta, R_rho) = beta(delta, (1 - rho) I) for any delta."""
    delta = _arbitrary_delta(p, seed.child(0))
    lhs, lhs_se = mc_bias(delta, _equicorrelation(p, rho), n_mc, seed.child(1))
    rhs, rhs_se = mc_bias(delta, (1 - rho) * np.eye(p), n_mc, seed.child(2))
    case = _case(p=p, rho=rho)
    return [_result("2", case, k + 1, lhs[k], lhs_se[k], rhs[k], rhs_se[k]) for k in range(p)]


def check_equicorrelation_scaling(p, rho, a, n_mc, seed: SeedPlan) -> list[LemmaCheckResult]:
    """beta(a 1, R_rho) = sqrt(1 - rho) beta(a 1, I), compared rank by rank."""
    delta = np.full(p, float(a))
    s = math.sqrt(1 - rho)
    lhs, lhs_se = mc_bias(delta, _equicorrelation(p, rho), n_mc, seed.child(1))
    ind, ind_se = mc_bias(delta, np.eye(p), n_mc, seed.child(2))
    case = _case(p=p, rho=rho, a=float(a))
    return [_result("3", case, k + 1, lhs[k], lhs_se[k], s * ind[k], s * ind_se[k]) for k in range(p)]


@dataclass(frozen=True)
class ScalingRatio:
    k: int
    ratio: float
    se: float
    target: float
    independent_bias: float

    @property
    def within(self) -> bool:
        return abs(self.ratio - self.target) <= PASS_SES * self.se


def scaling_ratios(rows: list[LemmaCheckResult], rho: float, min_bias: float = 0.05) -> list[ScalingRatio]:
    """Turn scaling-check rows into beta(R)_k / beta(I)_k with delta-method SEs,
    keeping ranks where |beta(I)_k| exceeds ``min_bias``."""
    s = math.sqrt(1 - rho)
    out = []
    for r in rows:
        ind, ind_se = r.rhs / s, r.rhs_se / s
        if abs(ind) <= min_bias:
            continue
        ratio = r.lhs / ind
        se = math.hypot(r.lhs_se, ratio * ind_se) / abs(ind)
        out.append(ScalingRatio(r.k, ratio, se, s, ind))
    return out


def _two_cluster_correlation(R11, R22, cross):
    h = R11.shape[0]
    R = np.full((2 * h, 2 * h), float(cross))
    R[:h, :h] = R11
    R[h:, h:] = R22
    try:
        cholesky(R)
    except NotPositiveDefinite:
        raise ConfigError(f"cross correlation {cross} makes the two-cluster matrix indefinite") from None
    return R


def _ar1(h, rho):
    idx = np.arange(h)
    return float(rho) ** np.abs(idx[:, None] - idx[None, :])


def _require_even(p):
    if p % 2:
        raise ConfigError(f"two-cluster checks need even p, got {p}")
    return p // 2


def check_cluster_separation(p, rho, b, cross, n_mc, seed: SeedPlan) -> list[LemmaCheckResult]:
    """Well-separated clusters: each cluster's biases only involve its own block.

    R11 is equicorrelated and R22 is AR(1), both at ``rho``; off-diagonal
    blocks are the constant ``cross``.
    """
    h = _require_even(p)
    R11, R22 = _equicorrelation(h, rho), _ar1(h, rho)
    R = _two_cluster_correlation(R11, R22, cross)
    delta = np.concatenate([np.zeros(h), np.full(h, float(b))])
    lhs, lhs_se = mc_bias(delta, R, n_mc, seed.child(1))
    low, low_se = mc_bias(np.zeros(h), R11, n_mc, seed.child(2))
    high, high_se = mc_bias(np.zeros(h), R22, n_mc, seed.child(3))
    rhs, rhs_se = np.concatenate([low, high]), np.concatenate([low_se, high_se])
    case = _case(p=p, rho=rho, b=float(b), cross=float(cross))
    return [_result("4", case, k + 1, lhs[k], lhs_se[k], rhs[k], rhs_se[k]) for k in range(p)]


def check_two_cluster_scaling(p, rho, b, cross, n_mc, seed: SeedPlan) -> list[LemmaCheckResult]:
    """Two separated equicorrelated clusters: beta_k = sqrt(1 - rho) beta(0, I)_k per cluster."""
    h = _require_even(p)
    R11 = _equicorrelation(h, rho)
    R = _two_cluster_correlation(R11, R11, cross)
    delta = np.concatenate([np.zeros(h), np.full(h, float(b))])
    s = math.sqrt(1 - rho)
    lhs, lhs_se = mc_bias(delta, R, n_mc, seed.child(1))
    ind, ind_se = mc_bias(np.zeros(h), np.eye(h), n_mc, seed.child(2))
    rhs, rhs_se = s * np.tile(ind, 2), s * np.tile(ind_se, 2)
    case = _case(p=p, rho=rho, b=float(b), cross=float(cross))
    return [_result("corollary1", case, k + 1, lhs[k], lhs_se[k], rhs[k], rhs_se[k]) for k in range(p)]


def check_false_oracle_penalty(p, rho, n_mc, seed: SeedPlan) -> list[LemmaCheckResult]:
    """MSE(false oracle) - MSE(oracle) = (1 - sqrt(1 - rho))^2 sum_k beta(0, I)_k^2 at delta = 0."""
    zero = np.zeros(p)
    R = _equicorrelation(p, rho)
    er = order_errors(zero, R, n_mc, seed.child(1))
    ei = order_errors(zero, np.eye(p), n_mc, seed.child(2))
    ec = order_errors(zero, R, n_mc, seed.child(3))
    ed = order_errors(zero, np.eye(p), n_mc, seed.child(4))
    beta_r, beta_i = er.mean(axis=0), ei.mean(axis=0)
    gap_rows = ((ec - beta_i) ** 2).sum(axis=1) - ((ec - beta_r) ** 2).sum(axis=1)
    lhs, lhs_se = _mean_se(gap_rows)
    # first-order sensitivity of the gap to the estimated false-oracle bias
    lhs_se = math.hypot(lhs_se, _linear_se(ei, 2 * (beta_i - ec.mean(axis=0))))
    c = (1 - math.sqrt(1 - rho)) ** 2
    beta_d = ed.mean(axis=0)
    rhs = c * float(beta_d @ beta_d)
    rhs_se = _linear_se(ed, 2 * c * beta_d)
    return [_result("5", _case(p=p, rho=rho), 0, lhs, lhs_se, rhs, rhs_se)]


# ---------------------------------------------------------------------------
# Suite
# ---------------------------------------------------------------------------


def _jobs(cfg: ScenarioConfig):
    root = SeedPlan(cfg.master_seed)
    n_mc, b, cross = cfg.n_mc, cfg.separation, cfg.cross_rho
    jobs = []
    for lemma in cfg.lemmas:
        li = LEMMAS.index(lemma)
        case_index = 0
        for p in cfg.p_grid:
            for rho in cfg.rho:
                if lemma == "3":
                    for a in cfg.a_values:
                        seed = root.child(li, case_index)
                        jobs.append(lambda p=p, rho=rho, a=a, s=seed: check_equicorrelation_scaling(p, rho, a, n_mc, s))
                        case_index += 1
                    continue
                seed = root.child(li, case_index)
                case_index += 1
                if lemma == "1":
                    jobs.append(lambda p=p, rho=rho, s=seed: check_mse_decomposition(p, rho, n_mc, s))
                elif lemma == "2":
                    jobs.append(lambda p=p, rho=rho, s=seed: check_variance_equivalence(p, rho, n_mc, s))
                elif lemma == "4":
                    jobs.append(lambda p=p, rho=rho, s=seed: check_cluster_separation(p, rho, b, cross, n_mc, s))
                elif lemma == "corollary1":
                    jobs.append(lambda p=p, rho=rho, s=seed: check_two_cluster_scaling(p, rho, b, cross, n_mc, s))
                elif lemma == "5":
                    jobs.append(lambda p=p, rho=rho, s=seed: check_false_oracle_penalty(p, rho, n_mc, s))
    return jobs


def run_lemma_checks(cfg: ScenarioConfig, threads: int | None = None) -> list[LemmaCheckResult]:
    """Every requested identity over the p grid and rho grid (and a values for
    the scaling identity), in config order."""
    if cfg.scenario is not ScenarioKind.LEMMA_CHECK:
        raise ConfigError(f"expected a lemma_check config, got {cfg.scenario.value}")
    for lemma in ("4", "corollary1"):
        if lemma in cfg.lemmas:
            for p in cfg.p_grid:
                _require_even(p)
    jobs = _jobs(cfg)
    results = _map_ordered(lambda job: job(), jobs, resolve_threads(threads))
    return [row for rows in results for row in rows]
