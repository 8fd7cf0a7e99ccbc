import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats as sps

from selbias.errors import CsvFormatError, DegenerateVariance, MissingGroup, NonPositiveSigma
from selbias.randgen import cholesky
from selbias.stats import (
    CASE,
    CONTROL,
    DataMatrix,
    EstimateVector,
    one_sample_t,
    one_sample_z,
    pooled_covariance,
    rank,
    read_csv,
    sample_covariance,
    summary_stats,
    top_sd_features,
    two_sample_t,
    write_csv,
)


def col(*values):
    return DataMatrix(np.array(values, dtype=float)[:, None])


def test_one_sample_t_symmetric_feature_is_zero():
    assert one_sample_t(col(-1, 1, -1, 1)).values[0] == 0.0


def test_one_sample_t_hand_value_and_scipy():
    got = one_sample_t(col(1, 2, 3, 4)).values[0]
    # the hand value rounds the sd to 6 decimals
    assert got == pytest.approx(2 * 2.5 / 1.290994, abs=1e-5)
    assert got == pytest.approx(sps.ttest_1samp([1, 2, 3, 4], 0).statistic, rel=1e-12)
    assert got == pytest.approx(3.872983, abs=1e-6)


def test_one_sample_t_constant_feature_is_degenerate():
    D = DataMatrix(np.array([[1.0, 3.0], [2.0, 3.0], [4.0, 3.0]]))
    with pytest.raises(DegenerateVariance) as info:
        one_sample_t(D)
    assert info.value.feature == 1


def test_two_sample_t_identical_groups_is_zero():
    x = np.array([[1.0, 2.0], [3.0, 5.0], [0.0, 1.0]])
    assert np.all(two_sample_t(DataMatrix.two_group(x, x)).values == 0)


def test_two_sample_t_hand_value_and_scipy():
    control = np.array([0, 0, 2, 2.0])[:, None]
    case = np.array([1, 1, 3, 3.0])[:, None]
    got = two_sample_t(DataMatrix.two_group(control, case)).values[0]
    assert got == pytest.approx(1 / (1.154701 * math.sqrt(0.5)), abs=1e-6)
    assert got == pytest.approx(1.224745, abs=1e-6)
    assert got == pytest.approx(sps.ttest_ind(case[:, 0], control[:, 0]).statistic, rel=1e-12)


def test_two_sample_t_constant_groups_degenerate():
    c = np.full((3, 1), 2.0)
    with pytest.raises(DegenerateVariance):
        two_sample_t(DataMatrix.two_group(c, c.copy()))


def test_two_sample_t_needs_groups():
    with pytest.raises(MissingGroup):
        two_sample_t(DataMatrix(np.ones((4, 2))))


def test_one_sample_z():
    assert one_sample_z(col(-1, 1), [1.0]).values[0] == 0
    assert one_sample_z(col(1, 2, 3, 4), [1.0]).values[0] == 5.0
    with pytest.raises(NonPositiveSigma):
        one_sample_z(col(1, 2, 3, 4), [0.0])


def test_rank_examples():
    r = rank(EstimateVector([0.5, -1.0, 2.0]))
    assert r.sorted_values.tolist() == [-1.0, 0.5, 2.0]
    assert (r.order + 1).tolist() == [2, 1, 3]
    assert rank([1.0, 2.0, 3.0]).order.tolist() == [0, 1, 2]
    assert rank([1.0, 1.0]).order.tolist() == [0, 1]


@settings(max_examples=100)
@given(arrays(np.float64, st.integers(1, 40), elements=st.floats(-1e6, 1e6)))
def test_rank_is_a_bijection_reproducing_sorted_values(x):
    r = rank(x)
    assert sorted(r.order.tolist()) == list(range(x.size))
    assert np.array_equal(x[r.order], r.sorted_values)
    assert np.all(np.diff(r.sorted_values) >= 0)


@settings(max_examples=60, deadline=None)
@given(
    arrays(np.float64, (6, 3), elements=st.floats(-100, 100)),
    st.floats(1e-3, 1e3),
)
def test_one_sample_t_scale_invariance(x, c):
    try:
        base = one_sample_t(DataMatrix(x)).values
    except DegenerateVariance:
        return
    if np.any(x.std(axis=0, ddof=1) < 1e-6 * np.max(np.abs(x), axis=0).clip(1.0)):
        return
    scaled = one_sample_t(DataMatrix(x * c)).values
    assert np.allclose(scaled, base, rtol=1e-9, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(
    arrays(np.float64, (4, 3), elements=st.floats(-100, 100)),
    arrays(np.float64, (5, 3), elements=st.floats(-100, 100)),
)
def test_two_sample_t_antisymmetric(a, b):
    try:
        fwd = two_sample_t(DataMatrix.two_group(a, b)).values
    except DegenerateVariance:
        return
    rev = two_sample_t(DataMatrix.two_group(b, a)).values
    assert np.array_equal(fwd, -rev)


def test_t_statistic_centered_at_effect_size_for_large_n():
    # 20000 independent features at n = 1e4; the mean t has SE ~ 0.007
    rng = np.random.default_rng(0)
    n, mu = 10_000, 0.01
    delta = math.sqrt(n) * mu
    t = np.concatenate([one_sample_t(DataMatrix(rng.normal(mu, 1.0, (n, 2000)))).values for _ in range(10)])
    assert abs(t.mean() - delta) < 0.02


def test_sample_covariance_examples():
    same = DataMatrix(np.array([[1.0, 2.0], [1.0, 2.0]]))
    assert np.allclose(sample_covariance(same, 0.01), 0.01 * np.eye(2))
    assert np.array_equal(sample_covariance(DataMatrix(np.array([[0.0, 0], [2, 2]])), 0.0), [[2, 2], [2, 2]])


def test_default_ridge_is_scale_relative():
    x = np.array([[0.0, 0.0], [2.0, 4.0], [1.0, 1.0]])
    raw = np.cov(x, rowvar=False)
    got = sample_covariance(DataMatrix(x), None)
    assert np.allclose(got - raw, 1e-3 * np.mean(np.diag(raw)) * np.eye(2))


def test_singular_covariance_flagged_by_cholesky():
    from selbias.errors import NotPositiveDefinite

    S = sample_covariance(DataMatrix(np.random.default_rng(1).normal(size=(3, 6))), 0.0)
    with pytest.raises(NotPositiveDefinite):
        cholesky(S)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (3, 6), elements=st.floats(-10, 10)), st.floats(1e-3, 1.0))
def test_ridged_covariance_always_factorizes(x, ridge):
    cholesky(sample_covariance(DataMatrix(x), ridge))


def test_pooled_covariance():
    x = np.random.default_rng(2).normal(size=(5, 3))
    same = DataMatrix.two_group(x, x)
    assert np.allclose(pooled_covariance(same), sample_covariance(x))
    control = np.zeros((3, 2))
    case = np.array([[0.0, 0.0], [2.0, 0.0], [1.0, math.sqrt(3)]])
    case_cov = np.cov(case, rowvar=False)
    got = pooled_covariance(DataMatrix.two_group(control, case))
    assert np.allclose(got, case_cov / 2)
    assert np.allclose(pooled_covariance(DataMatrix.two_group(control, case), 0.01) - got, 0.01 * np.eye(2))


def test_pooled_covariance_weighted_average_example():
    # S_control = 0, S_case = 2I, equal sizes -> I
    control = np.zeros((4, 2))
    case = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [2.0, 2.0]]) * math.sqrt(1.5)
    assert np.allclose(np.cov(case, rowvar=False), 2 * np.eye(2))
    assert np.allclose(pooled_covariance(DataMatrix.two_group(control, case)), np.eye(2))


def test_pooled_covariance_missing_group():
    with pytest.raises(MissingGroup):
        pooled_covariance(DataMatrix(np.ones((3, 2))))


def test_data_matrix_validation():
    with pytest.raises(ValueError):
        DataMatrix(np.array([[1.0, np.nan]]))
    with pytest.raises(ValueError):
        DataMatrix(np.ones((2, 2)), np.array(["control", "other"], dtype=object))


def test_summary_stats_pooled_sd():
    control = np.array([0, 0, 2, 2.0])[:, None]
    case = np.array([1, 1, 3, 3.0])[:, None]
    s = summary_stats(DataMatrix.two_group(control, case))
    assert s.pooled_sd[0] == pytest.approx(1.154701, abs=1e-6)
    assert s.group_means[CASE][0] == 2.0 and s.group_means[CONTROL][0] == 1.0


def test_csv_round_trip(tmp_path):
    D = DataMatrix.two_group(np.arange(6.0).reshape(3, 2), np.arange(6.0, 12).reshape(3, 2), ["a", "b"])
    path = tmp_path / "d.csv"
    write_csv(D, path)
    back = read_csv(path)
    assert np.array_equal(back.values, D.values)
    assert back.feature_names == ["a", "b"]
    assert list(back.group) == list(D.group)


def test_csv_missing_value_names_line_and_column(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("group,g1,g2\ncontrol,1.0,2.0\ncase,3.0,\n")
    with pytest.raises(CsvFormatError, match=r"line 3, column 'g2'"):
        read_csv(path)


def test_csv_bad_group_and_ragged_rows(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("group,g1\ntreated,1.0\n")
    with pytest.raises(CsvFormatError, match="bad group label"):
        read_csv(path)
    path.write_text("g1,g2\n1.0\n")
    with pytest.raises(CsvFormatError, match="line 2"):
        read_csv(path)


def test_top_sd_features_keeps_widest_columns():
    x = np.column_stack([np.arange(5.0), 10 * np.arange(5.0), 0.1 * np.arange(5.0)])
    kept = top_sd_features(DataMatrix(x, feature_names=["a", "b", "c"]), 2)
    assert kept.feature_names == ["a", "b"]
