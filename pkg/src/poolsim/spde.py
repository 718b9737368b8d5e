"""Explicit finite-difference solver for the limiting-density SPDE along a
common-noise path, with the stability-threshold and cost-ratio estimates.

An implicit scheme cannot be used here: the noise term must enter
non-anticipatively, so coefficients are built from the factor level and
Brownian increment of the previous time level and the update is explicit.
That buys conditional stability only; the threshold shrinks quadratically
with the mesh and like the inverse square of the systematic sensitivity.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .deterministic import project_point_masses
from .params import NameParams, PoolSpec, SystematicRiskModel
from .risk import RiskPath

UNDERSHOOT_FRACTION = 1e-3


class SpdeInstabilityError(RuntimeError):
    """Raised when the explicit update blows past the configured bound."""

    def __init__(self, step: int, time: float):
        super().__init__(f"instability detected at step {step} (t={time:.6g})")
        self.step = step
        self.time = time


@dataclass(frozen=True)
class SpdeFdConfig:
    """Mesh geometry and blow-up bound for the explicit scheme."""

    mesh_size: float
    lambda_max: float
    blowup: float = 1e6

    def __post_init__(self):
        if self.mesh_size <= 0 or self.lambda_max <= 0:
            raise ValueError("mesh_size and lambda_max must be positive")
        if round(self.lambda_max / self.mesh_size) < 3:
            raise ValueError("mesh must have at least three nodes")

    @property
    def nodes(self) -> np.ndarray:
        n = int(round(self.lambda_max / self.mesh_size))
        return np.arange(n + 1) * self.mesh_size


def stability_threshold(mesh_size: float, beta_s: float, lambda_max: float) -> float:
    """Largest safe time step, mesh_size^2 / (beta_s * lambda_max)^2."""
    if beta_s == 0.0:
        raise ValueError("stability criterion applies only for beta_s != 0; "
                         "use the deterministic solver instead")
    if lambda_max <= 0 or mesh_size <= 0:
        raise ValueError("mesh_size and lambda_max must be positive")
    return (mesh_size / (beta_s * lambda_max)) ** 2


def cost_ratio_estimate(mesh_points: int, n_moments: int, target_step: float,
                        mesh_size: float, beta_s: float, lambda_max: float) -> float:
    """Estimated cost(explicit FD) / cost(moment method) for accuracy
    O(target_step): (J/K) * min(target_step * (beta_s*lambda_max)^2 / mesh^2, 1).

    The min saturates at 1 once the accuracy-driven step is already below
    the stability threshold.
    """
    if mesh_points <= 0 or n_moments <= 0 or target_step <= 0:
        raise ValueError("mesh_points, n_moments and target_step must be positive")
    if mesh_size <= 0 or lambda_max <= 0:
        raise ValueError("mesh_size and lambda_max must be positive")
    return (mesh_points / n_moments) * min(
        target_step * (beta_s * lambda_max) ** 2 / mesh_size**2, 1.0)


@dataclass(frozen=True)
class SpdeSolution:
    """Loss path and final density of one explicit solve, with the density
    range seen along the way (undershoot monitoring)."""

    times: np.ndarray
    loss: np.ndarray
    mesh: np.ndarray
    density: np.ndarray
    min_density: float
    max_density: float

    @property
    def undershoot(self) -> bool:
        return self.min_density < -UNDERSHOOT_FRACTION * max(self.max_density, 0.0)


def solve_spde_explicit(pool: PoolSpec, model: SystematicRiskModel,
                        cfg: SpdeFdConfig, risk: RiskPath) -> SpdeSolution:
    """Advance the density by the explicit three-point stencil along one
    risk path; returns the loss path 1 - trapz(density) at every level.

    Coefficients are evaluated at X_{i-1} with the increment dV_i, the
    contagion integral by trapezoid from the previous level, and the
    boundary rows stay exactly zero.  Raises SpdeInstabilityError if any
    density value exceeds the blow-up bound or becomes non-finite.
    Negative undershoot is monitored, not enforced away (see
    SpdeSolution.undershoot).
    """
    params = pool.entries[0].params
    for e in pool.entries:
        if e.params != params:
            raise ValueError("explicit SPDE solver supports one parameter bucket "
                             "(heterogeneity is handled by the moment method)")
    steps = risk.steps
    if steps < 1:
        raise ValueError("risk path has no steps")
    delta_t = float(risk.times[1] - risk.times[0])
    if params.beta_s != 0.0:
        thr = stability_threshold(cfg.mesh_size, params.beta_s, cfg.lambda_max)
        if delta_t > thr:
            warnings.warn(
                f"time step {delta_t:.3g} exceeds the stability threshold {thr:.3g}; "
                "expect the run to be classified unstable", stacklevel=2)

    mesh = cfg.nodes
    v = project_point_masses(pool, cfg.mesh_size, cfg.lambda_max)
    b0 = np.asarray(model.b0(risk.x[:-1]), dtype=float)
    s0 = np.asarray(model.sigma0(risk.x[:-1]), dtype=float)
    loss = np.empty(steps + 1)

    status, failed_step, min_v, max_v = kernels.spde_explicit_path(
        params.sigma, params.alpha, params.lambda_bar, params.beta_c, params.beta_s,
        b0, s0, risk.dv, mesh, v, delta_t, cfg.mesh_size, cfg.blowup, loss)
    if status:
        raise SpdeInstabilityError(step=int(failed_step), time=float(failed_step * delta_t))

    sol = SpdeSolution(times=np.asarray(risk.times), loss=loss, mesh=mesh, density=v,
                       min_density=float(min_v), max_density=float(max_v))
    if sol.undershoot:
        warnings.warn(
            f"density undershoot: min {min_v:.3g} against peak {max_v:.3g} "
            "(explicit schemes for degenerate operators can undershoot)", stacklevel=2)
    return sol
