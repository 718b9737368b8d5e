"""Monte Carlo simulation of the finite-pool interacting default system.

Defaults occur on the grid via the time-scaling construction: each name
carries an Exp(1) clock and defaults once its accumulated hazard crosses
it.  Intensities follow a truncated Euler scheme and every default kicks
all intensities up by beta_c/N (weighted by loss given default when that
extension is on), so the names are coupled at step boundaries and must be
advanced synchronously; trials are independent and parallelize freely.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .params import PoolSpec, SimConfig, SystematicRiskModel, TimeGrid
from .risk import RiskPath, simulate_risk_paths
from .rng import PURPOSE_EXP_CLOCK, PURPOSE_LGD, PURPOSE_WIENER, derive_key64, derive_stream


@dataclass(frozen=True)
class LgdSpec:
    """Loss given default: unit losses, or per-name i.i.d. Uniform(lo, hi)
    rates with 0 < lo <= hi < 1."""

    kind: str = "unit"
    lo: float = 0.0
    hi: float = 0.0

    def __post_init__(self):
        if self.kind not in ("unit", "uniform"):
            raise ValueError(f"lgd kind must be 'unit' or 'uniform', got {self.kind!r}")
        if self.kind == "uniform" and not (0.0 < self.lo <= self.hi < 1.0):
            raise ValueError("uniform lgd requires 0 < lo <= hi < 1")

    @staticmethod
    def unit() -> "LgdSpec":
        return LgdSpec("unit")

    @staticmethod
    def uniform(lo: float, hi: float) -> "LgdSpec":
        return LgdSpec("uniform", lo, hi)


@dataclass(frozen=True)
class TrialNoise:
    """Pre-drawn randomness for one trial: idiosyncratic normals z (N, J),
    Exp(1) clocks (N,), and per-name loss rates ell (N,).

    Name n always owns row n of each block, so adding names or trials never
    perturbs the draws of existing ones, and default timing cannot shift
    any draw (everything is drawn up front).
    """

    z: np.ndarray
    clocks: np.ndarray
    ell: np.ndarray


@dataclass(frozen=True)
class TrialLossPath:
    """Loss trajectory of one trial plus the (name, grid time) defaults."""

    times: np.ndarray
    loss: np.ndarray
    defaults: tuple[tuple[int, float], ...]


def make_trial_noise(master_seed: int, trial: int, n_names: int, grid: TimeGrid,
                     lgd: LgdSpec) -> TrialNoise:
    """Draw the idiosyncratic noise blocks for one trial.

    The Wiener increments come from the counter-based gaussian generator
    keyed by ("wiener", trial) with one sub-stream per name (see gauss.py);
    clocks and loss rates use the per-purpose generator streams.
    """
    z = kernels.fill_normals(derive_key64(master_seed, (PURPOSE_WIENER, trial, 0)),
                             n_names, grid.steps)
    clocks = derive_stream(master_seed, (PURPOSE_EXP_CLOCK, trial, 0)).standard_exponential(n_names)
    if lgd.kind == "unit":
        ell = np.ones(n_names)
    else:
        u = derive_stream(master_seed, (PURPOSE_LGD, trial, 0)).random(n_names)
        ell = lgd.lo + (lgd.hi - lgd.lo) * u
    return TrialNoise(z=z, clocks=clocks, ell=ell)


def simulate_trial(pool: PoolSpec, risk: RiskPath, lgd: LgdSpec, grid: TimeGrid,
                   noise: TrialNoise, n_names: int | None = None) -> TrialLossPath:
    """Simulate one trial of the N-name system along a given risk path.

    Per step j: (1) tentative intensity by truncated Euler including the
    systematic increment, (2) default iff alive and the accumulated hazard
    delta*(sum lambda_{t_i} + tentative) crosses the clock, (3) one contagion
    jump beta_c * (sum of defaulters' loss rates)/N added to every intensity.
    """
    if pool.total_names < 1 and not n_names:
        raise ValueError("N = 0: pool has no names")
    names = pool.expand_names(n_names)
    n = len(names["lambda0"])
    if risk.steps != grid.steps:
        raise ValueError("risk path and time grid have different step counts")
    if noise.z.shape != (n, grid.steps):
        raise ValueError(f"noise block shaped {noise.z.shape}, expected {(n, grid.steps)}")

    dx = np.diff(risk.x)
    loss = np.empty(grid.steps + 1)
    default_step = np.empty(n, dtype=np.int64)
    kernels.finite_pool_trial(
        names["alpha"], names["lambda_bar"], names["sigma"],
        names["beta_c"], names["beta_s"], names["lambda0"],
        dx, noise.z, noise.clocks, noise.ell, grid.delta,
        loss, default_step,
    )
    defaults = tuple(
        (int(i), float(default_step[i] * grid.delta))
        for i in np.flatnonzero(default_step >= 0)
    )
    return TrialLossPath(times=grid.times(), loss=loss, defaults=defaults)


@dataclass(frozen=True)
class LossSamples:
    """Per-horizon Monte Carlo loss samples with the matched risk-factor
    values (for rank-correlation analysis)."""

    horizons: tuple[float, ...]
    losses: np.ndarray   # (H, M)
    x_values: np.ndarray  # (H, M)

    def at(self, horizon: float) -> tuple[np.ndarray, np.ndarray]:
        i = self.horizons.index(horizon)
        return self.losses[i], self.x_values[i]


def _resolve_workers(hint: int) -> int:
    return max(1, int(hint))


def run_finite_experiment(pool: PoolSpec, model: SystematicRiskModel, lgd: LgdSpec,
                          grid: TimeGrid, sim: SimConfig,
                          n_names: int | None = None) -> LossSamples:
    """M independent trials of the finite system; returns the loss and X
    samples at each requested horizon.

    Trial m draws its own risk path ("risk", m, 0) and noise blocks, so
    results are reproducible trial by trial and invariant to the
    parallelism hint (workers only partition the trial range).
    """
    n = n_names if n_names is not None else pool.total_names
    if n < 1:
        raise ValueError("N = 0: pool has no names")
    names = pool.expand_names(n)
    idx = grid.horizon_indices()
    losses = np.empty((len(idx), sim.trials))
    xs = np.empty((len(idx), sim.trials))

    def run_chunk(lo: int, hi: int):
        x, _dv = simulate_risk_paths(model, grid, sim.master_seed, hi - lo, trial_offset=lo)
        loss = np.empty(grid.steps + 1)
        default_step = np.empty(n, dtype=np.int64)
        for m in range(lo, hi):
            noise = make_trial_noise(sim.master_seed, m, n, grid, lgd)
            dx = np.diff(x[m - lo])
            kernels.finite_pool_trial(
                names["alpha"], names["lambda_bar"], names["sigma"],
                names["beta_c"], names["beta_s"], names["lambda0"],
                dx, noise.z, noise.clocks, noise.ell, grid.delta,
                loss, default_step,
            )
            for h, j in enumerate(idx):
                losses[h, m] = loss[j]
                xs[h, m] = x[m - lo, j]

    workers = _resolve_workers(sim.parallelism)
    chunk = 2048 if workers == 1 else max(64, -(-sim.trials // (workers * 4)))
    ranges = [(lo, min(lo + chunk, sim.trials)) for lo in range(0, sim.trials, chunk)]
    if workers == 1:
        for lo, hi in ranges:
            run_chunk(lo, hi)
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            list(ex.map(lambda r: run_chunk(*r), ranges))
    return LossSamples(horizons=tuple(grid.sample_horizons), losses=losses, x_values=xs)
