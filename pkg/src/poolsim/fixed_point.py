"""Mean-field fixed point: the constructive characterization of the limit.

Given one common-noise path, the pair (Q, lambda*) solves a coupled system:
lambda* follows a square-root diffusion with the extra inflow Q(t) and the
systematic term along the fixed path, and Q(t) is the contagion-weighted
mean default rate of lambda* conditional on the path.  Picard iteration on
Q converges by contraction; the inner conditional expectation is estimated
by Monte Carlo over the idiosyncratic noise, which is drawn once and frozen
across iterations (common random numbers), so each iteration is a
deterministic map and the sup-norm stopping rule is meaningful at finite
sample size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .params import PoolSpec, TimeGrid
from .risk import RiskPath
from .rng import PURPOSE_FP_INNER, derive_stream


class FixedPointNoConvergence(RuntimeError):
    """Raised when the Picard iteration fails to meet tol by max_iter."""

    def __init__(self, iterations: int, change: float, tol: float):
        super().__init__(
            f"no convergence: sup-norm change {change:.3g} after {iterations} "
            f"iterations (tol {tol:.3g})")
        self.iterations = iterations
        self.change = change


@dataclass(frozen=True)
class ContagionRate:
    """Fixed-point contagion-rate function Q on the grid, with the
    iteration diagnostics (sup-norm change per Picard iteration)."""

    q: np.ndarray
    iterations: int
    final_change: float
    changes: tuple[float, ...]


@dataclass(frozen=True)
class FixedPointResult:
    contagion: ContagionRate
    loss: np.ndarray      # limiting loss on the grid
    survival: np.ndarray  # bucket-weighted mean survival on the grid


def solve_fixed_point(pool: PoolSpec, risk: RiskPath, grid: TimeGrid,
                      inner_trials: int, tol: float = 1e-4, max_iter: int = 50,
                      *, master_seed: int, trial: int = 0) -> FixedPointResult:
    """Picard iteration for (Q, limiting loss) along one fixed risk path.

    Starting from Q = 0 (the no-contagion system), each iteration simulates
    ``inner_trials`` truncated-Euler paths of lambda* per bucket with the
    current Q, and re-estimates
    Q(t_j) = sum_b w_b beta_c_b mean[lambda*_{t_j} exp(-hazard_j)].
    Stops when the sup-norm change of Q drops below tol; raises
    FixedPointNoConvergence after max_iter.  Inner noise streams are
    ("fp-inner", trial, bucket), frozen across iterations.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if inner_trials < 1:
        raise ValueError("inner_trials must be >= 1")
    if risk.steps != grid.steps:
        raise ValueError("risk path and time grid have different step counts")

    steps = grid.steps
    w = pool.bucket_weights()
    dx = np.diff(risk.x)
    z_blocks = [
        derive_stream(master_seed, (PURPOSE_FP_INNER, trial, b)).standard_normal((inner_trials, steps))
        for b in range(len(pool.entries))
    ]
    lam_paths = np.empty((inner_trials, steps + 1))
    hazard = np.empty((inner_trials, steps + 1))

    q = np.zeros(steps + 1)
    changes: list[float] = []
    for it in range(1, max_iter + 1):
        q_new = np.zeros(steps + 1)
        surv = np.zeros(steps + 1)
        for b, entry in enumerate(pool.entries):
            p = entry.params
            kernels.fixed_point_inner_paths(
                p.alpha, p.lambda_bar, p.sigma, p.beta_s, entry.lambda0,
                q, dx, z_blocks[b], grid.delta, lam_paths, hazard)
            s = np.exp(-hazard)
            surv += w[b] * s.mean(axis=0)
            q_new += (w[b] * p.beta_c) * (lam_paths * s).mean(axis=0)
        change = float(np.abs(q_new - q).max())
        changes.append(change)
        q = q_new
        if change < tol:
            contagion = ContagionRate(q=q, iterations=it, final_change=change,
                                      changes=tuple(changes))
            return FixedPointResult(contagion=contagion, loss=1.0 - surv, survival=surv)
    raise FixedPointNoConvergence(iterations=max_iter, change=changes[-1], tol=tol)
