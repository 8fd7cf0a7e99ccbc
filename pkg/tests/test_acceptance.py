"""Acceptance criteria, one test per criterion (two for the two-sample trends).

Every test records a PASS/FAIL line, shown in the terminal summary under
"acceptance criteria". The long simulation runs share session fixtures with
test_harness.py.
"""

import math
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from conftest import by_key, record
from selbias.baselines import james_stein, tweedie
from selbias.bias import BiasVector, BiasMethod, BootstrapEnsemble, adjust, estimate_bias, oracle_bias
from selbias.evaluation import rows_to_csv
from selbias.harness import lemmas, run_one_sample_scenario, scaling_ratios
from selbias.randgen import GenerativeModel, SeedPlan
from selbias.stats import EstimateVector

RHOS = ("0", "0.5", "0.8")


def combined_se(a, b):
    return math.hypot(a.standard_error, b.standard_error)


def test_criterion_1_hand_oracles():
    original = np.array([0.5, -1.0, 2.0])
    reps = np.array([[1.0, 0.0, 1.5], [-0.5, -2.0, 3.0]])
    bias = estimate_bias(BootstrapEnsemble(reps, "parametric"), original).values
    adjusted = adjust(EstimateVector(original), BiasVector([0.0, -0.25, 0.25], BiasMethod.BOOTSTRAP_PARAMETRIC, 2))
    js = james_stein(np.array([2.0, -2.0, 2.0, -2.0])).values
    ok = (
        bias.tolist() == [0.0, -0.25, 0.25]
        and adjusted.values.tolist() == [0.75, -1.0, 1.75]
        and js.tolist() == [1.75, -1.75, 1.75, -1.75]
    )
    record(1, ok, f"bias={bias.tolist()} adjusted={adjusted.values.tolist()} js={js.tolist()}")
    assert ok


def test_criterion_2_order_statistic_closed_form():
    bias = oracle_bias(np.zeros(2), GenerativeModel.mvn(np.zeros(2), np.eye(2)), n_mc=1_000_000, seed=SeedPlan(2))
    target = 1 / math.sqrt(math.pi)
    ok = abs(bias.values[1] - target) <= 0.01
    record(2, ok, f"beta_2={bias.values[1]:.5f} target={target:.5f} tol=0.01")
    assert ok


def test_criterion_3_equicorrelation_scaling():
    failures, checked = [], 0
    root = SeedPlan(3)
    for i, (p, rho, a) in enumerate((p, rho, a) for p in (5, 20) for rho in (0.5, 0.8) for a in (0.0, 1.0)):
        rows = lemmas.check_equicorrelation_scaling(p, rho, a, 20_000, root.child(i))
        for r in scaling_ratios(rows, rho, min_bias=0.05):
            checked += 1
            if not r.within:
                failures.append(f"p={p} rho={rho} a={a} k={r.k} ratio={r.ratio:.4f}+-{r.se:.4f} target={r.target:.4f}")
    ok = checked > 0 and not failures
    record(3, ok, f"{checked} ranks checked, {len(failures)} outside 3 SE" + (f": {failures}" if failures else ""))
    assert ok


def test_criterion_4_decomposition_and_penalty():
    rows = lemmas.check_mse_decomposition(10, 0.5, 20_000, SeedPlan(41))
    rows += lemmas.check_false_oracle_penalty(10, 0.5, 20_000, SeedPlan(42))
    bad = [r for r in rows if not r.passed]
    detail = "; ".join(f"lemma {r.lemma} k={r.k} z={r.z:+.2f}" for r in rows if r.k == 0 or not r.passed)
    ok = not bad
    record(4, ok, f"{len(rows)} comparisons, {len(bad)} outside 3 SE ({detail})")
    assert ok


def test_criterion_5_scaled_equicorrelation_trends(equicorr_rows):
    rows = by_key(equicorr_rows)

    def row(rho, method):
        return rows[(f"equicorrelation:rho={rho}", method, 25)]

    a = 0.05 <= row("0", "nonpara").mean <= 0.25
    b = row("0.8", "para-uncor").mean > 2 * row("0.8", "para-cor").mean

    def monotone(method):
        inversions = []
        for lo, hi in zip(RHOS, RHOS[1:]):
            x, y = row(lo, method), row(hi, method)
            if y.mean <= x.mean:
                inversions.append(x.mean - y.mean <= combined_se(x, y))
        return len(inversions) == 0 or (len(inversions) == 1 and inversions[0])

    c = monotone("para-cor") and monotone("nonpara")
    gaps = [row(r, "oracle-uncor").mean - row(r, "oracle-cor").mean for r in RHOS]
    d = gaps[0] < gaps[1] < gaps[2]
    series = {m: [round(row(r, m).mean, 3) for r in RHOS] for m in ("para-uncor", "para-cor", "nonpara")}
    record(
        5,
        a and b and c and d,
        f"(a) {a} (b) {b} (c) {c} (d) {d}; RMSE over rho {RHOS}: {series}; oracle gaps {[round(g, 3) + 0.0 for g in gaps]}",
    )
    assert a and b and c and d


def _two_sample(two_sample_rows, method):
    return by_key(two_sample_rows)[("two_sample", method, 25)]


def test_criterion_6b_nonpara_beats_uncorrelated_model(two_sample_rows):
    nonpara, uncor = _two_sample(two_sample_rows, "nonpara"), _two_sample(two_sample_rows, "para-uncor")
    ok = uncor.mean - nonpara.mean > combined_se(nonpara, uncor)
    record("6b", ok, f"para-uncor {uncor.mean:.4f} - nonpara {nonpara.mean:.4f} vs 1 SE {combined_se(nonpara, uncor):.4f}")
    assert ok


@pytest.mark.xfail(
    strict=True,
    reason="with n1 = n2 the pooled covariance gives the mean difference the same covariance "
    "as the per-group covariances, so the two parametric models differ only at higher order",
)
def test_criterion_6a_wrong_model_worse_than_right(two_sample_rows):
    wrong, right = _two_sample(two_sample_rows, "para-cor-wrong"), _two_sample(two_sample_rows, "para-cor-right")
    ok = wrong.mean - right.mean > combined_se(wrong, right)
    record(
        "6a", ok,
        f"para-cor-wrong {wrong.mean:.4f} - para-cor-right {right.mean:.4f} vs 1 SE {combined_se(wrong, right):.4f}",
    )
    assert ok


def test_criterion_7_tweedie_conjugate_slope():
    rng = np.random.default_rng(7)
    delta = rng.standard_normal(100_000)
    est = delta + rng.standard_normal(100_000)
    slope = np.polyfit(est, tweedie(EstimateVector(est)).values, 1)[0]
    ok = 0.45 <= slope <= 0.55
    record(7, ok, f"slope={slope:.4f} in [0.45, 0.55]")
    assert ok


def test_criterion_8_determinism_across_threads(equicorr_config, equicorr_rows):
    threads = max(4, os.cpu_count() or 1)
    sequential = rows_to_csv(equicorr_rows).encode()
    parallel = rows_to_csv(run_one_sample_scenario(equicorr_config, threads=threads)).encode()
    ok = sequential == parallel
    record(8, ok, f"1 thread vs {threads} threads: {len(sequential)} bytes, identical={ok}")
    assert ok


PROPERTY_SUITES = [
    "test_baselines.py::test_spline_derivative_matches_finite_differences",
    "test_baselines.py::test_irls_deviance_is_monotone",
    "test_stats.py::test_rank_is_a_bijection_reproducing_sorted_values",
    "test_evaluation.py::test_rmse_invariant_to_joint_permutation",
    "test_stats.py::test_one_sample_t_scale_invariance",
    "test_randgen.py::test_cholesky_round_trip",
]


def test_criterion_9_property_suites():
    here = Path(__file__).resolve().parent
    ids = [str(here / s) for s in PROPERTY_SUITES]
    out = subprocess.run(
        [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *ids],
        capture_output=True, text=True, cwd=here.parent,
    )
    last = out.stdout.strip().splitlines()[-1] if out.stdout.strip() else out.stderr.strip()
    ok = out.returncode == 0
    record(9, ok, f"{len(ids)} property suites: {last}")
    assert ok, out.stdout[-2000:]
