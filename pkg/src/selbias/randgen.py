"""Correlation builders, multivariate samplers and reproducible random streams.

Every draw in the package goes through a :class:`SeedPlan`. A plan is a
master seed plus a tuple of integers naming the stream (replicate index,
bootstrap index, ...). The stream's generator is a Philox counter-based
bit generator keyed by hashing both through ``numpy.random.SeedSequence``,
so a stream's output never depends on which worker draws it or in which
order streams are consumed.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import BlockMismatch, InvalidDf, InvalidRho, NotPositiveDefinite
from .stats import DataMatrix


@dataclass(frozen=True)
class SeedPlan:
    master_seed: int
    stream_id: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "stream_id", tuple(int(s) for s in self.stream_id))
        if any(s < 0 for s in self.stream_id) or self.master_seed < 0:
            raise ValueError("seed and stream ids must be non-negative")

    def child(self, *ids: int) -> "SeedPlan":
        return SeedPlan(self.master_seed, self.stream_id + tuple(ids))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.master_seed, spawn_key=self.stream_id)
        return np.random.Generator(np.random.Philox(ss))


def as_seed_plan(seed) -> SeedPlan:
    if isinstance(seed, SeedPlan):
        return seed
    return SeedPlan(int(seed))


# ---------------------------------------------------------------------------
# Correlation structures
# ---------------------------------------------------------------------------


class CorrelationKind(str, enum.Enum):
    IDENTITY = "identity"
    EQUICORRELATION = "equicorrelation"
    BLOCK_AR = "block_ar"
    NEGATIVE_BLOCK_AR = "negative_block_ar"
    EXPLICIT = "explicit"


@dataclass(frozen=True)
class CorrelationSpec:
    kind: CorrelationKind = CorrelationKind.IDENTITY
    rho: float = 0.0
    block_size: int | None = None
    explicit: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", CorrelationKind(self.kind))

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value, "rho": self.rho}
        if self.block_size is not None:
            out["block_size"] = self.block_size
        if self.explicit is not None:
            out["explicit"] = np.asarray(self.explicit).tolist()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "CorrelationSpec":
        explicit = d.get("explicit")
        return cls(
            kind=CorrelationKind(d.get("kind", "identity")),
            rho=float(d.get("rho", 0.0)),
            block_size=d.get("block_size"),
            explicit=None if explicit is None else np.asarray(explicit, dtype=float),
        )


def equicorrelation(p: int, rho: float) -> np.ndarray:
    R = np.full((p, p), float(rho))
    np.fill_diagonal(R, 1.0)
    return R


def _block_ar(p: int, rho: float, block_size: int) -> np.ndarray:
    lag = np.abs(np.subtract.outer(np.arange(block_size), np.arange(block_size)))
    block = np.power(float(rho), lag)
    R = np.zeros((p, p))
    for start in range(0, p, block_size):
        R[start:start + block_size, start:start + block_size] = block
    return R


def cholesky(matrix: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, raising NotPositiveDefinite on failure."""
    try:
        return np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("matrix is not positive definite") from exc


def build_correlation(spec: CorrelationSpec, p: int) -> np.ndarray:
    """Materialize a p x p correlation matrix.

    Block AR kinds put ``rho**|i-j|`` (or ``(-rho)**|i-j|`` for the negative
    variant) inside consecutive diagonal blocks of ``block_size`` features and
    zeros between blocks.
    """
    if p < 1:
        raise ValueError("p must be positive")
    kind = spec.kind
    rho = float(spec.rho)
    if kind is CorrelationKind.IDENTITY:
        R = np.eye(p)
    elif kind is CorrelationKind.EQUICORRELATION:
        lower = -1.0 / (p - 1) if p > 1 else -np.inf
        if not (lower < rho < 1.0):
            raise InvalidRho(f"equicorrelation rho={rho} outside ({lower:.4g}, 1) for p={p}")
        R = equicorrelation(p, rho)
    elif kind in (CorrelationKind.BLOCK_AR, CorrelationKind.NEGATIVE_BLOCK_AR):
        if not (-1.0 < rho < 1.0):
            raise InvalidRho(f"block AR rho={rho} outside (-1, 1)")
        size = spec.block_size or p
        if size < 1 or p % size:
            raise BlockMismatch(f"p={p} is not divisible by block_size={size}")
        R = _block_ar(p, -rho if kind is CorrelationKind.NEGATIVE_BLOCK_AR else rho, size)
    elif kind is CorrelationKind.EXPLICIT:
        if spec.explicit is None:
            raise ValueError("explicit correlation kind needs a matrix")
        R = np.array(spec.explicit, dtype=float)
        if R.shape != (p, p):
            raise ValueError(f"explicit matrix has shape {R.shape}, expected {(p, p)}")
        if not np.allclose(R, R.T, atol=1e-12, rtol=0) or not np.allclose(np.diag(R), 1.0):
            raise ValueError("explicit correlation must be symmetric with unit diagonal")
    else:  # pragma: no cover
        raise ValueError(f"unknown correlation kind {kind}")
    cholesky(R)
    return R


# ---------------------------------------------------------------------------
# Generative models
# ---------------------------------------------------------------------------


class Family(str, enum.Enum):
    MVN = "mvn"
    MVT = "mvt"
    INDEPENDENT_NORMAL = "independent_normal"


@dataclass(frozen=True, eq=False)
class GenerativeModel:
    """Row distribution of a data matrix.

    ``scale`` is the covariance for MVN and IndependentNormal and the scale
    matrix R for MVT, whose covariance is ``df / (df - 2) * R``.
    """

    family: Family
    mean: np.ndarray
    scale: np.ndarray
    df: float | None = None
    _factor: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        family = Family(self.family)
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        scale = np.atleast_2d(np.asarray(self.scale, dtype=float))
        p = mean.size
        if scale.shape != (p, p):
            raise ValueError(f"scale has shape {scale.shape}, expected {(p, p)}")
        if family is Family.MVT:
            if self.df is None or not self.df > 2:
                raise InvalidDf(f"multivariate t needs df > 2, got {self.df}")
        if family is Family.INDEPENDENT_NORMAL:
            if np.any(scale - np.diag(np.diag(scale))):
                raise ValueError("independent normal scale must be diagonal")
            sd = np.sqrt(np.clip(np.diag(scale), 0, None))
            if np.any(np.diag(scale) <= 0):
                raise NotPositiveDefinite("independent normal variances must be positive")
            factor = sd
        else:
            factor = cholesky(scale)
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "_factor", factor)

    def decorrelated(self) -> "GenerativeModel":
        """Independent normal model with this model's means and marginal variances."""
        return GenerativeModel.independent_normal(self.mean, np.diag(self.covariance()))

    @classmethod
    def mvn(cls, mean, cov) -> "GenerativeModel":
        return cls(Family.MVN, mean, cov)

    @classmethod
    def mvt(cls, mean, scale, df) -> "GenerativeModel":
        return cls(Family.MVT, mean, scale, float(df))

    @classmethod
    def independent_normal(cls, mean, variances) -> "GenerativeModel":
        return cls(Family.INDEPENDENT_NORMAL, mean, np.diag(np.asarray(variances, dtype=float)))

    @property
    def p(self) -> int:
        return self.mean.size

    def covariance(self) -> np.ndarray:
        if self.family is Family.MVT:
            return self.df / (self.df - 2.0) * self.scale
        return self.scale.copy()

    def marginal_sd(self) -> np.ndarray:
        return np.sqrt(np.diag(self.covariance()))

    def to_dict(self) -> dict:
        out = {"family": self.family.value, "mean": self.mean.tolist(), "scale": self.scale.tolist()}
        if self.df is not None:
            out["df"] = self.df
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "GenerativeModel":
        return cls(Family(d["family"]), d["mean"], d["scale"], d.get("df"))


def draw_datasets(
    model: GenerativeModel, n: int, seeds: Sequence[SeedPlan], per_seed: int = 1
) -> np.ndarray:
    """Draw ``per_seed`` n x p datasets from each seed plan's stream.

    Returns shape (len(seeds) * per_seed, n, p). The block belonging to
    ``seeds[i]`` depends only on that plan.
    """
    if n < 1 or per_seed < 1:
        raise ValueError("n and per_seed must be positive")
    p = model.p
    m = len(seeds) * per_seed
    z = np.empty((len(seeds), per_seed, n, p))
    w = np.empty((len(seeds), per_seed, n)) if model.family is Family.MVT else None
    for i, plan in enumerate(seeds):
        rng = plan.generator()
        z[i] = rng.standard_normal((per_seed, n, p))
        if w is not None:
            w[i] = rng.chisquare(model.df, (per_seed, n))
    z = z.reshape(m, n, p)
    if model.family is Family.INDEPENDENT_NORMAL:
        x = z * model._factor
    else:
        x = z @ model._factor.T
    if w is not None:
        x /= np.sqrt(w.reshape(m, n) / model.df)[..., None]
    x += model.mean
    return x


def sample_mvn(model: GenerativeModel, n: int, seed) -> DataMatrix:
    """n i.i.d. rows from N(mean, scale)."""
    if model.family is Family.MVT:
        raise ValueError("sample_mvn called with a multivariate t model")
    return sample(model, n, seed)


def sample_mvt(model: GenerativeModel, n: int, seed) -> DataMatrix:
    """n i.i.d. rows from t_df(mean, scale): Gaussian rows over sqrt(chi2_df / df)."""
    if model.family is not Family.MVT:
        raise ValueError("sample_mvt needs a multivariate t model")
    return sample(model, n, seed)


def sample(model: GenerativeModel, n: int, seed) -> DataMatrix:
    return DataMatrix(draw_datasets(model, n, [as_seed_plan(seed)])[0])
