from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np

SIMPLEX_TOL = 1e-9

Setting = Literal["correlated", "uncorrelated"]
Metric = Literal["pac", "mse"]
Task = Literal["frequency", "mean"]

SETTINGS = ("correlated", "uncorrelated")
METRICS = ("pac", "mse")
TASKS = ("frequency", "mean")

FREQUENCY_ESTIMATORS = ("HPF-opt", "HPF-A", "HPF-Turbo", "Prop", "UNI", "SM", "LDP")
MEAN_ESTIMATORS = ("HPM-opt", "HPM-A", "HPM-Turbo", "Prop", "UNI", "SM", "LDP")


# ================= ERRORS ================= #
class ArgumentError(ValueError):
    """Raised when an operation receives arguments it cannot work with."""


class ValidationError(ArgumentError):
    """Input data failed validation; `row` is the 1-indexed data row if known."""

    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class ConfigError(ArgumentError):
    """Benchmark manifest or flag combination is unusable."""


class SolverError(RuntimeError):
    """A weight solver gave up before converging."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


# ================= PRIVACY DEMAND ================= #
@dataclass(frozen=True, eq=False)
class PrivacyDemand:
    """Per-user privacy levels in user order; +inf marks public data."""

    eps: np.ndarray

    def __post_init__(self):
        eps = np.asarray(self.eps, dtype=float).reshape(-1)
        if eps.size < 1:
            raise ArgumentError("privacy demand needs at least one user")
        if np.isnan(eps).any() or (eps <= 0).any():
            raise ArgumentError("every privacy level must be strictly positive")
        eps.setflags(write=False)
        object.__setattr__(self, "eps", eps)

    @classmethod
    def homogeneous(cls, n, eps):
        return cls(np.full(int(n), float(eps)))

    @property
    def n(self):
        return int(self.eps.size)

    @property
    def public(self):
        """Boolean mask of users with eps = inf."""
        return np.isinf(self.eps)

    @property
    def min(self):
        return float(self.eps.min())

    @property
    def max(self):
        return float(self.eps.max())

    def sorted_view(self):
        """Return (sorted eps, order, inverse) with eps[order] non-decreasing and sorted[inverse] == eps."""
        order = np.argsort(self.eps, kind="stable")
        inverse = np.empty_like(order)
        inverse[order] = np.arange(order.size)
        return self.eps[order], order, inverse

    def __len__(self):
        return self.n

    def __repr__(self):
        return f"<PrivacyDemand n={self.n} min={self.min:.4g} max={self.max:.4g}>"


# ================= WEIGHTS ================= #
@dataclass(frozen=True, eq=False)
class WeightVector:
    """Point on the probability simplex, one weight per user."""

    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float).reshape(-1)
        if w.size < 1:
            raise ArgumentError("weights need at least one entry")
        if not np.isfinite(w).all() or (w < 0).any():
            raise ArgumentError("weights must be finite and non-negative")
        if abs(w.sum() - 1.0) > SIMPLEX_TOL:
            raise ArgumentError(f"weights must sum to 1 (got {w.sum():.12g})")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @classmethod
    def uniform(cls, n):
        return cls(np.full(int(n), 1.0 / int(n)))

    @classmethod
    def normalized(cls, values):
        """Scale a non-negative vector onto the simplex."""
        values = np.asarray(values, dtype=float)
        total = values.sum()
        if not total > 0:
            raise ArgumentError("cannot normalize a vector with zero mass")
        return cls(values / total)

    @property
    def n(self):
        return int(self.w.size)

    def __len__(self):
        return self.n

    def __repr__(self):
        return f"<WeightVector n={self.n} max={self.w.max():.4g}>"


# ================= DATASET ================= #
@dataclass(frozen=True, eq=False)
class Dataset:
    """Categorical records in {1..k} or scalar records in [0, 1], in user order."""

    kind: Literal["categorical", "scalar"]
    records: np.ndarray
    k: Optional[int] = None

    def __post_init__(self):
        if self.kind == "categorical":
            if self.k is None or int(self.k) < 2:
                raise ArgumentError("categorical data needs k >= 2 bins")
            records = np.asarray(self.records).reshape(-1)
            if records.size and not np.all(np.equal(np.mod(records, 1), 0)):
                raise ValidationError("categorical records must be whole bin indices")
            records = records.astype(np.int64)
            bad = np.flatnonzero((records < 1) | (records > self.k))
            if bad.size:
                raise ValidationError(f"bin {records[bad[0]]} outside 1..{self.k}", row=int(bad[0]) + 1)
            object.__setattr__(self, "k", int(self.k))
        elif self.kind == "scalar":
            records = np.asarray(self.records, dtype=float).reshape(-1)
            bad = np.flatnonzero(~((records >= 0.0) & (records <= 1.0)))
            if bad.size:
                raise ValidationError(f"value {records[bad[0]]} outside [0, 1]", row=int(bad[0]) + 1)
            object.__setattr__(self, "k", None)
        else:
            raise ArgumentError(f"unknown dataset kind: {self.kind!r}")
        records.setflags(write=False)
        object.__setattr__(self, "records", records)

    @classmethod
    def categorical(cls, records, k):
        return cls("categorical", records, k)

    @classmethod
    def scalar(cls, records):
        return cls("scalar", records)

    @property
    def is_categorical(self):
        return self.kind == "categorical"

    @property
    def n(self):
        return int(self.records.size)

    def with_records(self, records):
        return Dataset(self.kind, records, self.k)

    def __len__(self):
        return self.n

    def __repr__(self):
        shape = f"k={self.k}" if self.is_categorical else "scalar"
        return f"<Dataset {shape} n={self.n}>"


# ================= STATISTICS ================= #
@dataclass(frozen=True, eq=False)
class EmpiricalStatistic:
    """A frequency vector over k bins or a single mean."""

    kind: Literal["frequency", "mean"]
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if self.kind == "mean" and values.size != 1:
            raise ArgumentError("a mean statistic holds exactly one value")
        if self.kind not in ("frequency", "mean"):
            raise ArgumentError(f"unknown statistic kind: {self.kind!r}")
        object.__setattr__(self, "values", values)

    @classmethod
    def frequency(cls, values):
        return cls("frequency", values)

    @classmethod
    def mean(cls, value):
        return cls("mean", [value])

    @property
    def value(self):
        if self.kind != "mean":
            raise ArgumentError("only a mean statistic has a scalar value")
        return float(self.values[0])

    def __repr__(self):
        return f"<EmpiricalStatistic {self.kind} {np.round(self.values, 4).tolist()}>"


# ================= ESTIMATOR SPEC ================= #
@dataclass(frozen=True)
class EstimatorSpec:
    """Which estimator runs, in which setting, judged by which metric."""

    estimator: str
    setting: Setting = "correlated"
    metric: Metric = "pac"
    beta: float = 0.05

    def __post_init__(self):
        if self.setting not in SETTINGS:
            raise ArgumentError(f"unknown setting: {self.setting!r}")
        if self.metric not in METRICS:
            raise ArgumentError(f"unknown metric: {self.metric!r}")
        if self.metric == "pac" and not 0.0 < self.beta < 1.0:
            raise ArgumentError(f"beta must lie in (0, 1), got {self.beta}")


# ================= SOLVER TYPES ================= #
@dataclass(frozen=True, eq=False)
class ObjectiveParams:
    """Arguments of the weight objectives: effective bin count, failure level and demand."""

    k_eff: float
    beta: float
    eps: PrivacyDemand

    def __post_init__(self):
        if not self.k_eff >= 1.0:
            raise ArgumentError(f"k_eff must be >= 1, got {self.k_eff}")
        if not 0.0 < self.beta <= 1.0:
            raise ArgumentError(f"beta must lie in (0, 1], got {self.beta}")
        if not isinstance(self.eps, PrivacyDemand):
            object.__setattr__(self, "eps", PrivacyDemand(self.eps))

    @property
    def n(self):
        return self.eps.n

    @property
    def log_term(self):
        """log(k_eff / beta), clamped at 0."""
        return max(0.0, math.log(self.k_eff / self.beta))


@dataclass(frozen=True, eq=False)
class SolverReport:
    weights: WeightVector
    objective_value: float
    iterations: int = 0
    converged: bool = True
    method: str = ""
    branch: Optional[str] = None


# ================= MECHANISM OUTPUTS ================= #
@dataclass(frozen=True, eq=False)
class MechanismOutput:
    estimate: EmpiricalStatistic
    noise_scale: float
    weights_used: Optional[WeightVector] = None


@dataclass(frozen=True, eq=False)
class LdpClientReport:
    """What one user sends under local DP: k flipped bits, or a noised value."""

    kind: Literal["frequency", "mean"]
    bits: Optional[np.ndarray] = None
    value: Optional[float] = None

    def __post_init__(self):
        if self.kind == "frequency":
            bits = np.asarray(self.bits, dtype=np.int8).reshape(-1)
            if not np.isin(bits, (0, 1)).all():
                raise ArgumentError("frequency reports carry 0/1 bits only")
            object.__setattr__(self, "bits", bits)
        elif self.kind != "mean":
            raise ArgumentError(f"unknown report kind: {self.kind!r}")


# ================= EVALUATION TYPES ================= #
@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a synthetic (dataset, privacy demand) pair."""

    n: int
    k: int = 12
    scalar: bool = False
    correlation: Setting = "correlated"
    spread: float = 3.0
    slope: Optional[float] = None
    edge_center: float = -5.5
    log_eps_low: float = -5.0
    log_eps_high: float = 5.0
    data_law: Optional[tuple] = None
    heavy_bin: int = 1
    heavy_factor: float = 3.0

    def __post_init__(self):
        if self.n < 1:
            raise ArgumentError("synthetic data needs n >= 1")
        if self.k < 2:
            raise ArgumentError("synthetic data needs k >= 2 bins")
        if self.correlation not in SETTINGS:
            raise ArgumentError(f"unknown correlation: {self.correlation!r}")
        if self.spread < 0:
            raise ArgumentError("spread must be non-negative")
        if self.log_eps_low > self.log_eps_high:
            raise ArgumentError("log_eps_low must not exceed log_eps_high")
        if not 1 <= self.heavy_bin <= self.k:
            raise ArgumentError(f"heavy_bin must lie in 1..{self.k}")
        if self.data_law is not None:
            law = np.asarray(self.data_law, dtype=float)
            if law.size != self.k or (law < 0).any() or not law.sum() > 0:
                raise ArgumentError("data_law must hold k non-negative weights with positive mass")

    @property
    def center_slope(self):
        """Slope of the bin-centered law; edge bins land on `edge_center`."""
        if self.slope is not None:
            return float(self.slope)
        return -self.edge_center / ((self.k - 1) / 2.0)

    def bin_center(self, i):
        return -self.center_slope * abs(i - (self.k + 1) / 2.0)

    def bin_probabilities(self):
        if self.data_law is not None:
            law = np.asarray(self.data_law, dtype=float)
        else:
            law = np.ones(self.k)
            law[self.heavy_bin - 1] *= self.heavy_factor
        return law / law.sum()


@dataclass(eq=False)
class TrialReport:
    estimator: str
    errors: np.ndarray
    beta: float
    pac_quantile: float
    mse: float
    seed: int
    trials: int
    noise_scale: float = 0.0
    weights: Optional[WeightVector] = None
    solver: Optional[SolverReport] = None
    extra: dict = field(default_factory=dict)

    def __repr__(self):
        return f"<TrialReport {self.estimator} T={self.trials} pac={self.pac_quantile:.4g} mse={self.mse:.4g}>"
