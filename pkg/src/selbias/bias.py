"""Frequentist selection-bias estimation and rank-wise correction.

The bias of the k-th order statistic is the expected gap between the k-th
smallest estimate and the true effect of whichever feature lands at rank k.
Bootstrap ensembles estimate it by treating the original estimates as the
truth of the bootstrap world; oracle biases are Monte Carlo averages under a
known generative model.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Union

import numpy as np

from .errors import DegenerateVariance, LengthMismatch, MissingGroup
from .randgen import GenerativeModel, SeedPlan, as_seed_plan, draw_datasets
from .stats import (
    CASE,
    CONTROL,
    DataMatrix,
    EstimateKind,
    EstimateVector,
    Statistic,
    as_values,
    rank,
    statistic_batch,
)

DEFAULT_B = 1000
DEFAULT_N_MC = 10_000
# floats per working chunk of stacked datasets
_CHUNK_FLOATS = 4_000_000

ModelSpec = Union[GenerativeModel, Mapping[str, GenerativeModel]]


class BiasMethod(str, enum.Enum):
    BOOTSTRAP_PARAMETRIC = "bootstrap_parametric"
    BOOTSTRAP_NONPARAMETRIC = "bootstrap_nonparametric"
    ORACLE_COR = "oracle_cor"
    ORACLE_UNCOR = "oracle_uncor"


@dataclass(eq=False)
class BiasVector:
    """Per-rank biases, ``values[k]`` for the (k+1)-th smallest estimate."""

    values: np.ndarray
    method: BiasMethod
    B: int
    standard_errors: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        self.method = BiasMethod(self.method)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("bias values must be finite")

    def __len__(self):
        return self.values.size

    def summary(self) -> dict:
        return {
            "method": self.method.value,
            "B": self.B,
            "p": len(self),
            "min": float(self.values.min()),
            "max": float(self.values.max()),
            "sum_sq": float(np.sum(self.values**2)),
        }


@dataclass(eq=False)
class BootstrapEnsemble:
    replicates: np.ndarray
    origin: str
    model: ModelSpec | None = None

    @property
    def B(self) -> int:
        return self.replicates.shape[0]

    @property
    def p(self) -> int:
        return self.replicates.shape[1]

    def summary(self) -> dict:
        return {
            "origin": self.origin,
            "B": self.B,
            "p": self.p,
            "replicate_mean": float(self.replicates.mean()),
            "replicate_sd": float(self.replicates.std()),
        }


# ---------------------------------------------------------------------------
# Replicate machinery
# ---------------------------------------------------------------------------


def _chunk_size(n: int, p: int) -> int:
    return max(1, _CHUNK_FLOATS // max(1, n * p))


def _reducer(statistic, sigma):
    statistic = Statistic(statistic)

    def reduce(batch):
        if statistic is Statistic.TWO_SAMPLE_T:
            return statistic_batch(statistic, control=batch[0], case=batch[1])
        return statistic_batch(statistic, batch, sigma=sigma)

    return reduce


def _run_replicates(make_batch: Callable, reduce: Callable, B: int, p: int, seed: SeedPlan, chunk: int):
    """Fill a (B, p) array; replicate b uses stream (..., b, attempt).

    A replicate with a zero-variance feature is redrawn once on its next
    attempt stream, then the whole run fails.
    """
    out = np.empty((B, p))
    for start in range(0, B, chunk):
        stop = min(B, start + chunk)
        values, bad = reduce(make_batch([seed.child(b, 0) for b in range(start, stop)]))
        rows = np.flatnonzero(bad.any(axis=1))
        if rows.size:
            retry = [seed.child(start + int(i), 1) for i in rows]
            v2, bad2 = reduce(make_batch(retry))
            if bad2.any():
                r, j = np.argwhere(bad2)[0]
                raise DegenerateVariance(
                    int(j),
                    f"bootstrap replicate {start + int(rows[r])}: feature {int(j)} has zero "
                    "variance after one redraw",
                )
            values[rows] = v2
        out[start:stop] = values
    return out


def _split_groups(D: DataMatrix):
    if D.group is None:
        raise MissingGroup("two-sample statistic needs group labels")
    control = D.group_values(CONTROL)
    case = D.group_values(CASE)
    return control, case


def parametric_bootstrap(
    D: DataMatrix,
    model: ModelSpec,
    statistic=Statistic.ONE_SAMPLE_T,
    B: int = DEFAULT_B,
    seed=0,
    sigma=None,
) -> BootstrapEnsemble:
    """Regenerate B datasets from a fitted model and reduce each to estimates.

    ``model`` is one GenerativeModel for one-sample statistics, or a mapping
    ``{"control": ..., "case": ...}`` for the two-sample t, in which case each
    group is redrawn at its original size. Fitting the model is the caller's
    job, which keeps misspecified models expressible.
    """
    seed = as_seed_plan(seed)
    statistic = Statistic(statistic)
    p = D.p
    if B < 1:
        raise ValueError("B must be positive")
    if statistic is Statistic.TWO_SAMPLE_T:
        if not isinstance(model, Mapping):
            raise TypeError("two-sample bootstrap needs a {'control': model, 'case': model} mapping")
        control, case = _split_groups(D)
        n1, n2 = len(control), len(case)
        mc, mt = model[CONTROL], model[CASE]
        if mc.p != p or mt.p != p:
            raise LengthMismatch("model dimension does not match the data")

        def make_batch(seeds):
            return (
                draw_datasets(mc, n1, [s.child(0) for s in seeds]),
                draw_datasets(mt, n2, [s.child(1) for s in seeds]),
            )

        chunk = _chunk_size(n1 + n2, p)
    else:
        if isinstance(model, Mapping):
            raise TypeError("one-sample bootstrap needs a single GenerativeModel")
        if model.p != p:
            raise LengthMismatch("model dimension does not match the data")
        n = D.n

        def make_batch(seeds):
            return draw_datasets(model, n, seeds)

        chunk = _chunk_size(n, p)
    reps = _run_replicates(make_batch, _reducer(statistic, sigma), B, p, seed, chunk)
    return BootstrapEnsemble(reps, "parametric", model)


def nonparametric_bootstrap(
    D: DataMatrix,
    statistic=Statistic.ONE_SAMPLE_T,
    B: int = DEFAULT_B,
    seed=0,
    sigma=None,
) -> BootstrapEnsemble:
    """Resample rows with replacement (within group for the two-sample t)."""
    seed = as_seed_plan(seed)
    statistic = Statistic(statistic)
    p = D.p
    if B < 1:
        raise ValueError("B must be positive")
    if statistic is Statistic.TWO_SAMPLE_T:
        control, case = _split_groups(D)
        n1, n2 = len(control), len(case)
        if n1 < 2 or n2 < 2:
            raise MissingGroup("nonparametric bootstrap needs at least 2 rows per group")

        def make_batch(seeds):
            ic = np.empty((len(seeds), n1), dtype=np.intp)
            it = np.empty((len(seeds), n2), dtype=np.intp)
            for i, s in enumerate(seeds):
                rng = s.generator()
                ic[i] = rng.integers(0, n1, n1)
                it[i] = rng.integers(0, n2, n2)
            return control[ic], case[it]

        chunk = _chunk_size(n1 + n2, p)
    else:
        x = D.values
        n = D.n
        if n < 2:
            raise ValueError("nonparametric bootstrap needs n >= 2")

        def make_batch(seeds):
            idx = np.empty((len(seeds), n), dtype=np.intp)
            for i, s in enumerate(seeds):
                idx[i] = s.generator().integers(0, n, n)
            return x[idx]

        chunk = _chunk_size(n, p)
    reps = _run_replicates(make_batch, _reducer(statistic, sigma), B, p, seed, chunk)
    return BootstrapEnsemble(reps, "nonparametric")


# ---------------------------------------------------------------------------
# Bias estimation and correction
# ---------------------------------------------------------------------------


def order_statistic_errors(draws: np.ndarray, truth) -> np.ndarray:
    """Row-wise ``sorted(draw)[k] - truth[j(k)]`` for a (m, p) stack of draws."""
    draws = np.atleast_2d(draws)
    truth = as_values(truth)
    if draws.shape[1] != truth.size:
        raise LengthMismatch(f"draws have {draws.shape[1]} features, truth has {truth.size}")
    order = np.argsort(draws, axis=1, kind="stable")
    return np.take_along_axis(draws, order, axis=1) - truth[order]


def _mean_and_se(errors: np.ndarray):
    m = errors.shape[0]
    se = errors.std(axis=0, ddof=1) / math.sqrt(m) if m > 1 else np.full(errors.shape[1], np.nan)
    return errors.mean(axis=0), se


def estimate_bias(ensemble: BootstrapEnsemble, original, method: BiasMethod | None = None) -> BiasVector:
    """Average over replicates of the replicate's k-th order statistic minus
    the original estimate of the feature holding rank k in that replicate."""
    original = as_values(original)
    if ensemble.p != original.size:
        raise LengthMismatch(f"ensemble has {ensemble.p} features, original has {original.size}")
    values, se = _mean_and_se(order_statistic_errors(ensemble.replicates, original))
    if method is None:
        method = (
            BiasMethod.BOOTSTRAP_PARAMETRIC
            if ensemble.origin == "parametric"
            else BiasMethod.BOOTSTRAP_NONPARAMETRIC
        )
    return BiasVector(values, method, ensemble.B, se)


def adjust(original, bias: BiasVector) -> EstimateVector:
    """Subtract the rank-k bias from the k-th order statistic, in feature order."""
    values = as_values(original)
    bias_values = bias.values if isinstance(bias, BiasVector) else np.asarray(bias, dtype=float)
    if bias_values.size != values.size:
        raise LengthMismatch(f"bias has {bias_values.size} entries, estimates have {values.size}")
    ranked = rank(values)
    out = np.empty_like(values)
    out[ranked.order] = ranked.sorted_values - bias_values
    oracle = isinstance(bias, BiasVector) and bias.method in (BiasMethod.ORACLE_COR, BiasMethod.ORACLE_UNCOR)
    statistic = original.statistic if isinstance(original, EstimateVector) else None
    return EstimateVector(
        out, EstimateKind.ORACLE_ADJUSTED if oracle else EstimateKind.ADJUSTED, statistic
    )


def _oracle_block(n: int, p: int) -> int:
    return max(1, min(1000, 1_000_000 // max(1, n * p)))


def oracle_errors(
    truth,
    model: ModelSpec,
    statistic=Statistic.ONE_SAMPLE_Z,
    n_mc: int = DEFAULT_N_MC,
    seed=0,
    n=1,
    sigma=None,
) -> np.ndarray:
    """Monte Carlo draws of the order-statistic errors, shape (n_mc, p).

    Draws come in fixed-size blocks, block i on stream (..., i), so the
    result does not depend on how the work is scheduled.
    """
    seed = as_seed_plan(seed)
    statistic = Statistic(statistic)
    truth = as_values(truth)
    p = truth.size
    reduce = _reducer(statistic, sigma)
    if statistic is Statistic.TWO_SAMPLE_T:
        n1, n2 = n
        mc, mt = model[CONTROL], model[CASE]
        block = _oracle_block(n1 + n2, p)

        def draw(plan, m):
            return (
                draw_datasets(mc, n1, [plan.child(0)], per_seed=m),
                draw_datasets(mt, n2, [plan.child(1)], per_seed=m),
            )
    else:
        block = _oracle_block(n, p)

        def draw(plan, m):
            return draw_datasets(model, n, [plan], per_seed=m)

    out = np.empty((n_mc, p))
    for i, start in enumerate(range(0, n_mc, block)):
        m = min(block, n_mc - start)
        values, bad = reduce(draw(seed.child(i), m))
        if bad.any():
            r, j = np.argwhere(bad)[0]
            raise DegenerateVariance(int(j), f"oracle draw {start + int(r)}: feature {int(j)} has zero variance")
        out[start:start + m] = order_statistic_errors(values, truth)
    return out


def oracle_bias(
    truth,
    model: ModelSpec,
    statistic=Statistic.ONE_SAMPLE_Z,
    n_mc: int = DEFAULT_N_MC,
    seed=0,
    n=1,
    sigma=None,
    method=BiasMethod.ORACLE_COR,
) -> BiasVector:
    """Monte Carlo bias of each order statistic under a known model.

    ``model`` generates data rows (n per dataset; an (n1, n2) pair and a
    group mapping for the two-sample t) and ``statistic`` reduces each
    dataset to estimates of ``truth``. With ``n=1``, the z statistic and
    ``sigma=1`` the model draws the estimates themselves. Pass a decorrelated
    model with ``method=ORACLE_UNCOR`` for the false-oracle variant.
    """
    if n_mc < 1000:
        raise ValueError("oracle bias needs n_mc >= 1000")
    if Statistic(statistic) is Statistic.ONE_SAMPLE_Z and sigma is None:
        sigma = 1.0
    errors = oracle_errors(truth, model, statistic, n_mc, seed, n, sigma)
    values, se = _mean_and_se(errors)
    return BiasVector(values, method, n_mc, se)

