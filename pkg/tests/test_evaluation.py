import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from selbias.errors import GroupTooSmall, KTooLarge, LengthMismatch, ZeroDenominator
from selbias.evaluation import (
    EvaluationReport,
    ExtremeSelection,
    MetricKind,
    rmse,
    rows_to_csv,
    rows_to_table,
    select_extremes,
    split_train_test,
    test_ssd as ssd,
)
from selbias.stats import CASE, CONTROL, DataMatrix


def test_select_extremes_examples():
    assert sorted(select_extremes(np.array([4.0, 3, 2, 1]), 2).indices.tolist()) == [0, 1, 2, 3]
    # 1-based {2, 4}
    assert sorted((select_extremes(np.array([3.0, -1, 0, 5]), 1).indices + 1).tolist()) == [2, 4]
    assert select_extremes(np.array([1.0, 2.0]), 0).indices.size == 0


def test_select_extremes_too_large():
    with pytest.raises(KTooLarge):
        select_extremes(np.arange(5.0), 3)


def test_select_extremes_tie_break():
    sel = select_extremes(np.array([1.0, 1.0, 1.0, 1.0]), 1)
    assert sel.indices.tolist() == [0, 3]


@settings(max_examples=60)
@given(arrays(np.float64, st.integers(2, 30), elements=st.floats(-10, 10)), st.data())
def test_selection_indices_distinct_and_extreme(x, data):
    k = data.draw(st.integers(0, x.size // 2))
    sel = select_extremes(x, k)
    assert len(set(sel.indices.tolist())) == 2 * k
    rest = np.setdiff1d(np.arange(x.size), sel.indices)
    if k and rest.size:
        assert x[sel.indices[:k]].max() <= x[rest].min()
        assert x[sel.indices[k:]].min() >= x[rest].max()


def test_rmse_examples():
    truth, unadj = np.zeros(2), np.array([1.0, 2.0])
    sel = ExtremeSelection(1, np.array([0, 1]))
    assert rmse(truth, unadj, truth, sel) == 0
    assert rmse(unadj, unadj, truth, sel) == 1
    assert rmse(np.array([0.5, 1.0]), unadj, truth, sel) == pytest.approx(0.25)


def test_rmse_zero_denominator_and_lengths():
    sel = ExtremeSelection(1, np.array([0, 1]))
    with pytest.raises(ZeroDenominator):
        rmse(np.ones(2), np.zeros(2), np.zeros(2), sel)
    with pytest.raises(LengthMismatch):
        rmse(np.ones(3), np.zeros(2), np.zeros(2), sel)


@settings(max_examples=60)
@given(st.integers(2, 20), st.randoms(use_true_random=False))
def test_rmse_invariant_to_joint_permutation(p, rnd):
    rng = np.random.default_rng(rnd.randint(0, 2**32))
    adj, unadj, truth = rng.normal(size=(3, p))
    sel = select_extremes(unadj, p // 2)
    perm = rng.permutation(p)
    inv = np.argsort(perm)
    moved = ExtremeSelection(sel.k, inv[sel.indices])
    assert rmse(adj[perm], unadj[perm], truth[perm], moved) == pytest.approx(rmse(adj, unadj, truth, sel), rel=1e-12)


def test_ssd_examples():
    sel = ExtremeSelection(1, np.array([0, 1]))
    assert ssd(np.array([1.0, 2.0]), np.array([1.0, 2.0]), sel) == 0
    assert ssd(np.array([1.0, 2.0]), np.zeros(2), sel) == 5
    with pytest.raises(LengthMismatch):
        ssd(np.zeros(3), np.zeros(2), sel)


# a lattice keeps squared differences away from underflow
lattice = st.integers(-1000, 1000).map(lambda i: i / 100)


@settings(max_examples=60)
@given(arrays(np.float64, 8, elements=lattice), arrays(np.float64, 8, elements=lattice))
def test_ssd_nonnegative_and_zero_iff_equal(a, b):
    sel = select_extremes(a, 2)
    value = ssd(a, b, sel)
    assert value >= 0
    assert (value == 0) == bool(np.all(a[sel.indices] == b[sel.indices]))


def _grouped(n_control, n_case, p=3):
    rng = np.random.default_rng(0)
    return DataMatrix.two_group(rng.normal(size=(n_control, p)), rng.normal(size=(n_case, p)))


def test_split_even_groups():
    train, test = split_train_test(_grouped(4, 4), 1)
    assert (train.group == CONTROL).sum() == 2 and (train.group == CASE).sum() == 2
    assert (test.group == CONTROL).sum() == 2 and (test.group == CASE).sum() == 2


def test_split_odd_group_extra_row_to_training():
    train, test = split_train_test(_grouped(5, 4), 1)
    assert (train.group == CONTROL).sum() == 3 and (test.group == CONTROL).sum() == 2


def test_split_deterministic():
    D = _grouped(6, 7)
    a, b = split_train_test(D, 3), split_train_test(D, 3)
    assert np.array_equal(a[0].values, b[0].values) and np.array_equal(a[1].values, b[1].values)


def test_split_too_small():
    with pytest.raises(GroupTooSmall):
        split_train_test(_grouped(3, 6), 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(4, 15), st.integers(4, 15), st.integers(0, 1000))
def test_split_is_a_stratified_partition(n1, n2, seed):
    # unique row ids let us track rows across the split
    D = DataMatrix.two_group(np.arange(n1, dtype=float)[:, None], np.arange(n1, n1 + n2, dtype=float)[:, None])
    train, test = split_train_test(D, seed)
    ids_train, ids_test = set(train.values[:, 0]), set(test.values[:, 0])
    assert not ids_train & ids_test
    assert len(ids_train | ids_test) == n1 + n2
    for label, n in ((CONTROL, n1), (CASE, n2)):
        assert abs((train.group == label).sum() - (test.group == label).sum()) <= 1
        assert (train.group == label).sum() == math.ceil(n / 2)


def test_split_single_group_data():
    train, test = split_train_test(DataMatrix(np.arange(9.0)[:, None]), 0)
    assert train.n == 5 and test.n == 4


def test_report_standard_error():
    values = [0.1, 0.3, 0.2, 0.4]
    r = EvaluationReport.from_values("s", "m", MetricKind.RMSE, 25, values)
    assert r.mean == pytest.approx(0.25)
    assert r.standard_error == pytest.approx(np.std(values, ddof=1) / 2)
    assert r.replicates == 4


def test_report_serialization():
    rows = [EvaluationReport.from_values("s:rho=0", "nonpara", "RMSE", 25, [0.1, 0.2])]
    text = rows_to_csv(rows)
    assert text.splitlines()[0] == "scenario,method,metric,k,mean,standard_error,replicates"
    assert text.splitlines()[1] == "s:rho=0,nonpara,RMSE,25,0.150000,0.050000,2"
    table = rows_to_table(rows)
    assert "nonpara" in table and "0.150000" in table
