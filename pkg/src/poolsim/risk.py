"""Simulation of the systematic risk factor X and its driving increments.

All limiting-regime solvers consume a :class:`RiskPath`, so one common-noise
realization can be shared across solvers for per-path comparisons.  The
increments dv are drawn even when the factor is inert (kind "none"), which
keeps downstream draws aligned whether or not X is active.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import SystematicRiskModel, TimeGrid


@dataclass(frozen=True)
class RiskPath:
    """One realization of X on the grid: x has steps+1 points, dv the
    steps N(0, delta) increments of the driving Brownian motion."""

    times: np.ndarray
    x: np.ndarray
    dv: np.ndarray

    @property
    def steps(self) -> int:
        return len(self.dv)


def _euler_paths(model: SystematicRiskModel, delta: float, dv: np.ndarray) -> np.ndarray:
    """Euler paths for a batch of dv increment rows; truncation at zero for cir."""
    trials, steps = dv.shape
    x = np.empty((trials, steps + 1))
    x[:, 0] = model.x0
    if model.kind == "none":
        x[:, 1:] = model.x0
        return x
    for j in range(steps):
        xj = x[:, j]
        xn = xj + model.b0(xj) * delta + model.sigma0(xj) * dv[:, j]
        if model.kind == "cir":
            xn = np.maximum(xn, 0.0)
        x[:, j + 1] = xn
    return x


def simulate_risk_path(model: SystematicRiskModel, grid: TimeGrid, rng: np.random.Generator) -> RiskPath:
    """Simulate X on the grid with the truncated Euler scheme.

    X_{j+1} = X_j + b0(X_j)*delta + sigma0(X_j)*dv_j, clipped at zero for the
    cir kind; sigma0 is evaluated at the left endpoint.  dv is drawn first in
    every case so the stream layout does not depend on the factor kind.
    """
    dv = rng.standard_normal(grid.steps) * np.sqrt(grid.delta)
    x = _euler_paths(model, grid.delta, dv[None, :])[0]
    return RiskPath(times=grid.times(), x=x, dv=dv)


def simulate_risk_paths(
    model: SystematicRiskModel,
    grid: TimeGrid,
    master_seed: int,
    trials: int,
    trial_offset: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Batch of independent risk paths, one stream per trial index.

    Returns (x, dv) with shapes (trials, steps+1) and (trials, steps).
    Trial m uses the stream ("risk", trial_offset + m, 0), so the same path
    is reproduced whether trials are simulated singly or in a batch.
    """
    from .rng import PURPOSE_RISK, derive_stream

    sqdt = np.sqrt(grid.delta)
    dv = np.empty((trials, grid.steps))
    for m in range(trials):
        rng = derive_stream(master_seed, (PURPOSE_RISK, trial_offset + m, 0))
        dv[m] = rng.standard_normal(grid.steps)
    dv *= sqdt
    x = _euler_paths(model, grid.delta, dv)
    return x, dv
