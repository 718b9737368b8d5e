"""Domain types: per-name intensity parameters, pool composition, the
systematic risk factor model, time grid and simulation configuration.

Validation is report-style (a pool with a bad parameter can be constructed
and then rejected by :func:`validate_pool`), because the boundedness cap is
a modelling assumption, not a runtime precondition.  The default cap is
large enough that any realistic input passes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_PARAM_CAP = 1e6

RISK_KINDS = ("none", "brownian", "ou", "cir")


@dataclass(frozen=True)
class NameParams:
    """Intensity dynamics of one name: mean reversion at rate ``alpha``
    toward ``lambda_bar``, square-root diffusion ``sigma``, contagion
    sensitivity ``beta_c`` and systematic sensitivity ``beta_s``."""

    alpha: float
    lambda_bar: float
    sigma: float
    beta_c: float
    beta_s: float

    def astuple(self) -> tuple[float, float, float, float, float]:
        return (self.alpha, self.lambda_bar, self.sigma, self.beta_c, self.beta_s)


@dataclass(frozen=True)
class PoolEntry:
    """One bucket of identical names: shared parameters, shared initial
    intensity, ``weight`` names in the bucket."""

    params: NameParams
    lambda0: float
    weight: int = 1


@dataclass(frozen=True)
class PoolSpec:
    """Empirical type / initial-intensity distribution of the pool."""

    entries: tuple[PoolEntry, ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))

    @property
    def total_names(self) -> int:
        return sum(e.weight for e in self.entries)

    @property
    def homogeneous(self) -> bool:
        return len(self.entries) == 1

    @staticmethod
    def homogeneous_pool(params: NameParams, lambda0: float, n: int = 1) -> "PoolSpec":
        return PoolSpec(entries=(PoolEntry(params, lambda0, n),))

    def bucket_weights(self) -> np.ndarray:
        """Normalized bucket weights (sum to 1)."""
        w = np.array([e.weight for e in self.entries], dtype=float)
        return w / w.sum()

    def expand_names(self, n: int | None = None):
        """Per-name parameter arrays in entry order.

        With ``n`` given, bucket counts are rescaled to a pool of exactly
        ``n`` names by largest remainder; otherwise the raw weights are used.
        Returns a dict of float64 arrays: alpha, lambda_bar, sigma, beta_c,
        beta_s, lambda0, entry_index.
        """
        counts = [e.weight for e in self.entries]
        if n is not None:
            total = sum(counts)
            quota = [c * n / total for c in counts]
            counts = [int(math.floor(q)) for q in quota]
            rem = n - sum(counts)
            order = sorted(
                range(len(quota)), key=lambda i: quota[i] - math.floor(quota[i]), reverse=True
            )
            for i in order[:rem]:
                counts[i] += 1
        cols = {k: [] for k in ("alpha", "lambda_bar", "sigma", "beta_c", "beta_s", "lambda0")}
        entry_index = []
        for i, (entry, c) in enumerate(zip(self.entries, counts)):
            a, lb, s, bc, bs = entry.params.astuple()
            cols["alpha"] += [a] * c
            cols["lambda_bar"] += [lb] * c
            cols["sigma"] += [s] * c
            cols["beta_c"] += [bc] * c
            cols["beta_s"] += [bs] * c
            cols["lambda0"] += [entry.lambda0] * c
            entry_index += [i] * c
        out = {k: np.asarray(v, dtype=float) for k, v in cols.items()}
        out["entry_index"] = np.asarray(entry_index, dtype=np.int64)
        return out


@dataclass(frozen=True)
class SystematicRiskModel:
    """Common risk factor X: a diffusion dX = b0(X)dt + sigma0(X)dV.

    kind "none" keeps X frozen at x0 (sensitivity terms inert), "brownian"
    is b0=0, sigma0=1, "ou" and "cir" are mean reverting with rate kappa,
    level theta and volatility epsilon (square-root volatility for cir).
    """

    kind: str
    x0: float
    kappa: float = 0.0
    theta: float = 0.0
    epsilon: float = 0.0

    def __post_init__(self):
        if self.kind not in RISK_KINDS:
            raise ValueError(f"unknown risk factor kind {self.kind!r}; expected one of {RISK_KINDS}")
        if self.kind == "cir" and (self.kappa < 0 or self.theta < 0 or self.epsilon < 0):
            raise ValueError("cir risk factor requires kappa, theta, epsilon >= 0")

    @staticmethod
    def none(x0: float = 0.0) -> "SystematicRiskModel":
        return SystematicRiskModel("none", x0)

    @staticmethod
    def brownian(x0: float = 0.0) -> "SystematicRiskModel":
        return SystematicRiskModel("brownian", x0)

    @staticmethod
    def ou(kappa: float, theta: float, epsilon: float, x0: float) -> "SystematicRiskModel":
        return SystematicRiskModel("ou", x0, kappa, theta, epsilon)

    @staticmethod
    def cir(kappa: float, theta: float, epsilon: float, x0: float) -> "SystematicRiskModel":
        return SystematicRiskModel("cir", x0, kappa, theta, epsilon)

    def b0(self, x):
        """Drift b0(x), vectorized."""
        x = np.asarray(x, dtype=float)
        if self.kind in ("none", "brownian"):
            return np.zeros_like(x)
        return self.kappa * (self.theta - x)

    def sigma0(self, x):
        """Diffusion sigma0(x), vectorized; sqrt truncated at zero for cir."""
        x = np.asarray(x, dtype=float)
        if self.kind == "none":
            return np.zeros_like(x)
        if self.kind == "brownian":
            return np.ones_like(x)
        if self.kind == "ou":
            return np.full_like(x, self.epsilon)
        return self.epsilon * np.sqrt(np.maximum(x, 0.0))


_GRID_ALIGN_TOL = 1e-9


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_j = j*delta, j = 0..steps, with the horizons at which
    loss samples are recorded (grid-aligned)."""

    delta: float
    horizon: float
    sample_horizons: tuple[float, ...] = ()

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("time step delta must be positive")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        hs = tuple(self.sample_horizons) if self.sample_horizons else (self.horizon,)
        object.__setattr__(self, "sample_horizons", hs)
        for t in hs:
            self.index_of(t)

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.delta))

    def times(self) -> np.ndarray:
        return np.arange(self.steps + 1, dtype=float) * self.delta

    def index_of(self, t: float) -> int:
        """Grid index of time t; rejects t off the grid or past the horizon."""
        j = round(t / self.delta)
        if abs(t - j * self.delta) > _GRID_ALIGN_TOL * max(1.0, abs(t)) or not (0 <= j <= self.steps):
            raise ValueError(f"time {t} is not on the grid (delta={self.delta}, horizon={self.horizon})")
        return int(j)

    def horizon_indices(self) -> list[int]:
        return [self.index_of(t) for t in self.sample_horizons]


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo run shape: trial count, master seed and a worker-count
    hint that never changes the output values."""

    trials: int
    master_seed: int
    parallelism: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, msg: str):
        self.violations.append(msg)


def validate_pool(pool: PoolSpec, cap: float = DEFAULT_PARAM_CAP) -> ValidationReport:
    """Check a pool against the standing boundedness assumptions.

    Nonnegativity of (alpha, lambda_bar, sigma, beta_c) and of every initial
    intensity, finiteness of all fields, |value| <= cap, and a nonempty pool.
    Returns a report rather than raising.
    """
    report = ValidationReport()
    if pool.total_names < 1:
        report.add("N = 0: pool has no names")
    for i, entry in enumerate(pool.entries):
        p = entry.params
        tag = f"entry {i}"
        for field_name in ("alpha", "lambda_bar", "sigma", "beta_c"):
            v = getattr(p, field_name)
            if not math.isfinite(v):
                report.add(f"{tag}: {field_name} not finite")
            elif v < 0:
                report.add(f"{tag}: {field_name} negative")
            elif v > cap:
                report.add(f"{tag}: {field_name} exceeds cap {cap}")
        if not math.isfinite(p.beta_s):
            report.add(f"{tag}: beta_s not finite")
        elif abs(p.beta_s) > cap:
            report.add(f"{tag}: |beta_s| exceeds cap {cap}")
        if not math.isfinite(entry.lambda0):
            report.add(f"{tag}: lambda0 not finite")
        elif entry.lambda0 < 0:
            report.add(f"{tag}: lambda0 negative")
        elif entry.lambda0 > cap:
            report.add(f"{tag}: lambda0 exceeds cap {cap}")
        if entry.weight < 1:
            report.add(f"{tag}: weight must be a positive integer")
    return report
