"""Data matrices, effect-size statistics, covariance estimators and ranking."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    CsvFormatError,
    DegenerateVariance,
    LengthMismatch,
    MissingGroup,
    NonPositiveSigma,
)

CONTROL = "control"
CASE = "case"
GROUP_COLUMN = "group"

# sd at or below this fraction of the feature's magnitude counts as zero
_DEGENERATE_RTOL = 1e-12


class EstimateKind(str, enum.Enum):
    UNADJUSTED = "unadjusted"
    ADJUSTED = "adjusted"
    ORACLE_ADJUSTED = "oracle_adjusted"


class Statistic(str, enum.Enum):
    ONE_SAMPLE_T = "one_sample_t"
    TWO_SAMPLE_T = "two_sample_t"
    ONE_SAMPLE_Z = "one_sample_z"


@dataclass(eq=False)
class DataMatrix:
    values: np.ndarray
    group: np.ndarray | None = None
    feature_names: list[str] | None = None

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if self.values.ndim != 2:
            raise ValueError("data matrix must be two-dimensional")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("data matrix contains non-finite entries")
        if self.group is not None:
            self.group = np.asarray(self.group, dtype=object)
            if self.group.shape != (self.n,):
                raise LengthMismatch("group labels must have one entry per row")
            bad = set(self.group) - {CONTROL, CASE}
            if bad:
                raise ValueError(f"unknown group labels {sorted(bad)}")
        if self.feature_names is not None:
            self.feature_names = list(self.feature_names)
            if len(self.feature_names) != self.p:
                raise LengthMismatch("feature_names must have one entry per column")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def group_values(self, label: str) -> np.ndarray:
        if self.group is None:
            raise MissingGroup("data matrix has no group labels")
        rows = self.values[self.group == label]
        if rows.shape[0] == 0:
            raise MissingGroup(f"no rows in group {label!r}")
        return rows

    def rows(self, index) -> "DataMatrix":
        index = np.asarray(index)
        group = None if self.group is None else self.group[index]
        return DataMatrix(self.values[index], group, self.feature_names)

    def columns(self, index) -> "DataMatrix":
        index = np.asarray(index)
        names = None if self.feature_names is None else [self.feature_names[i] for i in index]
        return DataMatrix(self.values[:, index], self.group, names)

    @classmethod
    def two_group(cls, control, case, feature_names=None) -> "DataMatrix":
        control = np.atleast_2d(np.asarray(control, dtype=float))
        case = np.atleast_2d(np.asarray(case, dtype=float))
        group = np.array([CONTROL] * len(control) + [CASE] * len(case), dtype=object)
        return cls(np.vstack([control, case]), group, feature_names)


@dataclass(eq=False)
class EstimateVector:
    values: np.ndarray
    kind: EstimateKind = EstimateKind.UNADJUSTED
    statistic: Statistic | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        self.kind = EstimateKind(self.kind)
        if self.statistic is not None:
            self.statistic = Statistic(self.statistic)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("estimates must be finite")

    def __len__(self):
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def as_values(e) -> np.ndarray:
    """Plain float array from an EstimateVector or array-like."""
    if isinstance(e, EstimateVector):
        return e.values
    return np.asarray(e, dtype=float).reshape(-1)


@dataclass(frozen=True, eq=False)
class RankedEstimates:
    order: np.ndarray
    sorted_values: np.ndarray


@dataclass(eq=False)
class SummaryStats:
    means: np.ndarray
    sds: np.ndarray
    group_means: dict = field(default_factory=dict)
    group_sds: dict = field(default_factory=dict)
    pooled_sd: np.ndarray | None = None


def rank(e) -> RankedEstimates:
    """Ascending order statistics and the index map; ties go to the lower index."""
    values = as_values(e)
    order = np.argsort(values, kind="stable")
    return RankedEstimates(order=order, sorted_values=values[order])


# ---------------------------------------------------------------------------
# Batched statistic kernels. Arrays carry observations on axis -2.
# ---------------------------------------------------------------------------


def _degenerate(x: np.ndarray, sd: np.ndarray) -> np.ndarray:
    scale = np.max(np.abs(x), axis=-2)
    return sd <= _DEGENERATE_RTOL * np.maximum(scale, 1.0)


def _one_sample_t_kernel(x):
    n = x.shape[-2]
    mean = x.mean(axis=-2)
    sd = x.std(axis=-2, ddof=1)
    bad = _degenerate(x, sd)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = math.sqrt(n) * mean / sd
    return np.where(bad, 0.0, t), bad


def _one_sample_z_kernel(x, sigma):
    n = x.shape[-2]
    return math.sqrt(n) * x.mean(axis=-2) / sigma, np.zeros(x.shape[:-2] + x.shape[-1:], bool)


def _two_sample_t_kernel(control, case):
    n1, n2 = control.shape[-2], case.shape[-2]
    ss1 = control.var(axis=-2, ddof=1) * (n1 - 1)
    ss2 = case.var(axis=-2, ddof=1) * (n2 - 1)
    pooled = np.sqrt((ss1 + ss2) / (n1 + n2 - 2))
    scale = np.maximum(np.max(np.abs(control), axis=-2), np.max(np.abs(case), axis=-2))
    bad = pooled <= _DEGENERATE_RTOL * np.maximum(scale, 1.0)
    diff = case.mean(axis=-2) - control.mean(axis=-2)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = diff / (pooled * math.sqrt(1.0 / n1 + 1.0 / n2))
    return np.where(bad, 0.0, t), bad


def statistic_batch(statistic, x=None, *, control=None, case=None, sigma=None):
    """Evaluate a statistic on stacked datasets.

    One-sample statistics take ``x`` of shape (..., n, p); the two-sample
    statistic takes ``control`` and ``case``. Returns ``(values, degenerate)``
    where ``degenerate`` flags features with zero (pooled) sd.
    """
    statistic = Statistic(statistic)
    if statistic is Statistic.ONE_SAMPLE_T:
        return _one_sample_t_kernel(x)
    if statistic is Statistic.ONE_SAMPLE_Z:
        if sigma is None:
            raise NonPositiveSigma("z statistic needs known sigma")
        return _one_sample_z_kernel(x, _check_sigma(sigma, x.shape[-1]))
    return _two_sample_t_kernel(control, case)


def _check_sigma(sigma, p):
    sigma = np.asarray(sigma, dtype=float)
    sigma = np.broadcast_to(sigma, (p,)) if sigma.ndim == 0 else sigma
    if sigma.shape != (p,):
        raise LengthMismatch(f"sigma has {sigma.size} entries, expected {p}")
    if np.any(~(sigma > 0)):
        raise NonPositiveSigma("sigma must be strictly positive")
    return sigma


def _raise_first(bad: np.ndarray):
    if np.any(bad):
        raise DegenerateVariance(int(np.flatnonzero(bad)[0]))


def one_sample_t(D) -> EstimateVector:
    """sqrt(n) * mean / sd per feature, sd with the n-1 denominator."""
    x = D.values if isinstance(D, DataMatrix) else np.asarray(D, dtype=float)
    if x.shape[0] < 2:
        raise ValueError("one-sample t needs n >= 2")
    t, bad = _one_sample_t_kernel(x)
    _raise_first(bad)
    return EstimateVector(t, EstimateKind.UNADJUSTED, Statistic.ONE_SAMPLE_T)


def one_sample_z(D, sigma) -> EstimateVector:
    x = D.values if isinstance(D, DataMatrix) else np.asarray(D, dtype=float)
    z, _ = _one_sample_z_kernel(x, _check_sigma(sigma, x.shape[1]))
    return EstimateVector(z, EstimateKind.UNADJUSTED, Statistic.ONE_SAMPLE_Z)


def two_sample_t(D: DataMatrix) -> EstimateVector:
    """Pooled-variance two-sample t, case minus control."""
    control, case = D.group_values(CONTROL), D.group_values(CASE)
    if len(control) < 2 or len(case) < 2:
        raise MissingGroup("two-sample t needs at least 2 rows per group")
    t, bad = _two_sample_t_kernel(control, case)
    _raise_first(bad)
    return EstimateVector(t, EstimateKind.UNADJUSTED, Statistic.TWO_SAMPLE_T)


def compute_statistic(D: DataMatrix, statistic, sigma=None) -> EstimateVector:
    statistic = Statistic(statistic)
    if statistic is Statistic.ONE_SAMPLE_T:
        return one_sample_t(D)
    if statistic is Statistic.ONE_SAMPLE_Z:
        return one_sample_z(D, sigma)
    return two_sample_t(D)


def summary_stats(D: DataMatrix) -> SummaryStats:
    x = D.values
    out = SummaryStats(means=x.mean(axis=0), sds=x.std(axis=0, ddof=1))
    if D.group is not None:
        sizes = {}
        for label in (CONTROL, CASE):
            rows = D.values[D.group == label]
            if len(rows):
                out.group_means[label] = rows.mean(axis=0)
                out.group_sds[label] = rows.std(axis=0, ddof=1)
                sizes[label] = len(rows)
        if len(sizes) == 2:
            n1, n2 = sizes[CONTROL], sizes[CASE]
            out.pooled_sd = np.sqrt(
                ((n1 - 1) * out.group_sds[CONTROL] ** 2 + (n2 - 1) * out.group_sds[CASE] ** 2)
                / (n1 + n2 - 2)
            )
    return out


# ---------------------------------------------------------------------------
# Covariance
# ---------------------------------------------------------------------------


def default_ridge(cov: np.ndarray) -> float:
    """1e-3 times the mean diagonal entry."""
    return 1e-3 * float(np.mean(np.diag(cov)))


def _with_ridge(cov, ridge):
    if ridge is None:
        ridge = default_ridge(cov)
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    cov = cov.copy()
    cov[np.diag_indices_from(cov)] += ridge
    return cov


def sample_covariance(D, ridge: float | None = 0.0) -> np.ndarray:
    """Unbiased sample covariance plus ``ridge * I``.

    ``ridge=None`` picks :func:`default_ridge` of the unregularized matrix.
    """
    x = D.values if isinstance(D, DataMatrix) else np.atleast_2d(np.asarray(D, dtype=float))
    if x.shape[0] < 2:
        raise ValueError("sample covariance needs n >= 2")
    return _with_ridge(np.atleast_2d(np.cov(x, rowvar=False, ddof=1)), ridge)


def pooled_covariance(D: DataMatrix, ridge: float | None = 0.0) -> np.ndarray:
    control, case = D.group_values(CONTROL), D.group_values(CASE)
    n1, n2 = len(control), len(case)
    if n1 < 2 or n2 < 2:
        raise MissingGroup("pooled covariance needs at least 2 rows per group")
    s1 = np.atleast_2d(np.cov(control, rowvar=False, ddof=1))
    s2 = np.atleast_2d(np.cov(case, rowvar=False, ddof=1))
    return _with_ridge(((n1 - 1) * s1 + (n2 - 1) * s2) / (n1 + n2 - 2), ridge)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def read_csv(path) -> DataMatrix:
    """Load a data matrix from CSV.

    The header names the features; an optional ``group`` column holds
    ``control``/``case`` labels. Every other cell must be a finite number.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        group_col = header.index(GROUP_COLUMN) if GROUP_COLUMN in header else None
        names = [h for i, h in enumerate(header) if i != group_col]
        if not names:
            raise CsvFormatError(f"{path}: no feature columns")
        rows, groups = [], []
        for line_no, record in enumerate(reader, start=2):
            if not record or all(not c.strip() for c in record):
                continue
            if len(record) != len(header):
                raise CsvFormatError(
                    f"{path}: line {line_no}: expected {len(header)} fields, got {len(record)}"
                )
            row = []
            for i, cell in enumerate(record):
                cell = cell.strip()
                if i == group_col:
                    if cell not in (CONTROL, CASE):
                        raise CsvFormatError(
                            f"{path}: line {line_no}, column {header[i]!r}: bad group label {cell!r}"
                        )
                    groups.append(cell)
                    continue
                try:
                    value = float(cell)
                except ValueError:
                    value = math.nan
                if not cell or not math.isfinite(value):
                    raise CsvFormatError(
                        f"{path}: line {line_no}, column {header[i]!r}: missing or non-numeric value {cell!r}"
                    )
                row.append(value)
            rows.append(row)
    if not rows:
        raise CsvFormatError(f"{path}: no data rows")
    return DataMatrix(np.array(rows), np.array(groups, dtype=object) if group_col is not None else None, names)


def write_csv(D: DataMatrix, path) -> None:
    names = D.feature_names or [f"f{j}" for j in range(D.p)]
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(([GROUP_COLUMN] if D.group is not None else []) + names)
        for i in range(D.n):
            row = [repr(float(v)) for v in D.values[i]]
            writer.writerow(([D.group[i]] if D.group is not None else []) + row)


def top_sd_features(D: DataMatrix, count: int) -> DataMatrix:
    """Keep the ``count`` features with the largest overall sample sd."""
    if count >= D.p:
        return D
    sd = D.values.std(axis=0, ddof=1)
    keep = np.sort(np.argsort(-sd, kind="stable")[:count])
    return D.columns(keep)
