"""Reference solutions in the deterministic regime beta_s = 0.

With no systematic exposure the limiting density solves a quasi-linear
PDE.  Two routes are provided: the closed-form survival transform when
there is additionally no contagion (independent defaults), and a
Crank-Nicolson predictor-corrector finite-difference scheme that is
implicit in the differential operators and explicit in the contagion
integral, refined by inner substeps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .params import NameParams, PoolSpec, TimeGrid


@dataclass(frozen=True)
class RiccatiCoefficients:
    """Survival-transform exponents: P(tau > t) = exp(A(t) + B(t)*lambda0).

    B solves B' = sigma^2 B^2 / 2 - alpha B - 1 with B(0) = 0 and
    A' = alpha lambda_bar B with A(0) = 0; both in closed form through
    gamma = sqrt(alpha^2 + 2 sigma^2).
    """

    alpha: float
    lambda_bar: float
    sigma: float
    gamma: float
    c1: float
    c2: float
    d1: float
    d2: float

    def B(self, t: float) -> float:
        return (self.alpha + self.gamma * math.tanh(-0.5 * self.gamma * t + self.c1)) / self.sigma**2

    def A(self, t: float) -> float:
        num = math.cosh(-0.5 * self.gamma * t + self.c1)
        return -self.c2 * self.d2 * t + (2.0 * self.d1 * self.d2 / self.gamma) * math.log(num / math.cosh(self.c1))


def riccati_coefficients(params: NameParams) -> RiccatiCoefficients:
    if params.sigma <= 0:
        raise ValueError("closed form degenerates at sigma = 0; use the moment cascade instead")
    gamma = math.sqrt(params.alpha**2 + 2.0 * params.sigma**2)
    return RiccatiCoefficients(
        alpha=params.alpha,
        lambda_bar=params.lambda_bar,
        sigma=params.sigma,
        gamma=gamma,
        c1=math.atanh(-params.alpha / gamma),
        c2=params.alpha / params.sigma**2,
        d1=gamma / params.sigma**2,
        d2=-params.alpha * params.lambda_bar,
    )


def analytic_no_feedback_loss(pool: PoolSpec, t: float) -> float:
    """Closed-form limiting loss with beta_c = beta_s = 0:
    L_t = 1 - sum_b w_b exp(A_b(t) + B_b(t) lambda0_b)."""
    w = pool.bucket_weights()
    surv = 0.0
    for wb, entry in zip(w, pool.entries):
        p = entry.params
        if p.beta_c != 0.0 or p.beta_s != 0.0:
            raise ValueError("analytic solution requires beta_c = beta_s = 0")
        rc = riccati_coefficients(p)
        surv += wb * math.exp(rc.A(t) + rc.B(t) * entry.lambda0)
    return 1.0 - surv


def project_point_masses(pool: PoolSpec, mesh_size: float, lambda_max: float) -> np.ndarray:
    """Project the initial intensity mixture onto the mesh as normalized hat
    functions at the bracketing nodes (mass- and mean-preserving).

    Rejects masses that would load a pinned boundary row.
    """
    n_nodes = int(round(lambda_max / mesh_size))
    v = np.zeros(n_nodes + 1)
    w = pool.bucket_weights()
    for wb, entry in zip(w, pool.entries):
        lam0 = entry.lambda0
        if not (mesh_size <= lam0 <= lambda_max - mesh_size):
            raise ValueError(
                f"lambda0={lam0} too close to the mesh boundary for a zero-pinned hat "
                f"(mesh_size={mesh_size}, lambda_max={lambda_max})")
        pos = lam0 / mesh_size
        left = int(math.floor(pos + 1e-12))
        frac = pos - left
        if frac < 1e-12:
            v[left] += wb / mesh_size
        else:
            v[left] += (1.0 - frac) * wb / mesh_size
            v[left + 1] += frac * wb / mesh_size
    return v


def _trapz(f: np.ndarray, mesh_size: float) -> float:
    return mesh_size * (0.5 * (f[0] + f[-1]) + f[1:-1].sum())


@dataclass(frozen=True)
class DensityGrid:
    """Mesh and final solution of a density solve: nodes lambda_j = j*mesh,
    values at the last time level, the per-level loss path and the
    per-level first moment (the instantaneous default rate)."""

    mesh: np.ndarray
    mesh_size: float
    delta: float
    values: np.ndarray
    times: np.ndarray
    loss: np.ndarray
    first_moment: np.ndarray
    substep_changes: np.ndarray  # (steps, substeps-1) sup-norm gaps, empty if substeps = 1

    def mass(self) -> float:
        return _trapz(self.values, self.mesh_size)


def _flux_form_rows(params: NameParams, mesh: np.ndarray):
    """Tridiagonal rows of the conservative (flux-form) operator at the
    interior nodes, with the flux through the degenerate left edge set to
    its exact boundary value, zero.

    The intensity density behaves like lambda^(2 alpha lam_bar / sigma^2 - 1)
    at the origin; for Feller ratios near one the naive central stencil
    leaks mass across lambda = 0 at O(mesh) and loses an order globally.
    Writing the operator as -dF/dlambda - lambda*v with
    F = -(a v)' - c v, a = sigma^2 lambda / 2, c = alpha (lambda - lam_bar),
    and zeroing F at the left edge restores the discrete mass balance.
    """
    dl = mesh[1] - mesh[0]
    lam = mesh[1:-1]
    a = 0.5 * params.sigma**2 * mesh
    c_half = params.alpha * (mesh[:-1] + 0.5 * dl - params.lambda_bar)
    n_int = len(lam)
    c_lo = c_half[:n_int]       # c at l - 1/2
    c_hi = c_half[1:n_int + 1]  # c at l + 1/2
    sub0 = a[:-2] / dl**2 - c_lo / (2 * dl)
    dia0 = -2.0 * a[1:-1] / dl**2 + (c_hi - c_lo) / (2 * dl) - lam
    sup0 = a[2:] / dl**2 + c_hi / (2 * dl)
    # left edge: F_{1/2} := 0, so node 1 sees only the flux at 3/2
    sub0[0] = 0.0
    dia0[0] = -a[1] / dl**2 + c_hi[0] / (2 * dl) - lam[0]
    return sub0, dia0, sup0, dl


def solve_pde_predictor_corrector(pool: PoolSpec, grid: TimeGrid, mesh_size: float,
                                  lambda_max: float, substeps: int = 2) -> DensityGrid:
    """Predictor-corrector Crank-Nicolson solve of the beta_s = 0 PDE.

    Each of the ``substeps`` inner solves is implicit in the differential
    operator and uses the contagion integral evaluated from the previous
    iterate (the plain level for the first), sharpening the integral term
    without losing the tridiagonal structure.  Boundary rows stay pinned
    at zero.
    """
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    params = pool.entries[0].params
    for e in pool.entries:
        if e.params.beta_s != 0.0:
            raise ValueError("predictor-corrector scheme requires beta_s = 0")
        if e.params != params:
            raise ValueError("density solvers support one parameter bucket (heterogeneity is handled by the moment method)")

    v = project_point_masses(pool, mesh_size, lambda_max)
    n_nodes = len(v)
    mesh = np.arange(n_nodes) * mesh_size
    sub0, dia0, sup0, dl = _flux_form_rows(params, mesh)
    beta_c = params.beta_c
    half_dt = 0.5 * grid.delta
    n_int = n_nodes - 2

    def integral(f):
        return beta_c * _trapz(mesh * f, mesh_size)

    def banded_matrices(integ):
        # contagion advection in flux form: F += integ * v, edge flux stays 0
        sub = sub0 + integ / (2 * dl)
        sub[0] = 0.0
        dia = dia0.copy()
        dia[0] -= integ / (2 * dl)
        sup = sup0 - integ / (2 * dl)
        ab = np.zeros((3, n_int))
        ab[0, 1:] = -half_dt * sup[:-1]
        ab[1, :] = 1.0 - half_dt * dia
        ab[2, :-1] = -half_dt * sub[1:]
        return ab, sub, dia, sup

    times = grid.times()
    loss = np.empty(grid.steps + 1)
    first_moment = np.empty(grid.steps + 1)
    loss[0] = 1.0 - _trapz(v, mesh_size)
    first_moment[0] = _trapz(mesh * v, mesh_size)
    changes = np.zeros((grid.steps, max(0, substeps - 1)))

    for j in range(grid.steps):
        prev = None
        for m in range(substeps):
            f_for_integral = v if m == 0 else 0.5 * (prev + v)
            ab, sub, dia, sup = banded_matrices(integral(f_for_integral))
            rhs = v[1:-1] + half_dt * (sub * v[:-2] + dia * v[1:-1] + sup * v[2:])
            sol = solve_banded((1, 1), ab, rhs)
            cur = np.zeros(n_nodes)
            cur[1:-1] = sol
            if m >= 1:
                changes[j, m - 1] = np.abs(cur - prev).max()
            prev = cur
        v = prev
        loss[j + 1] = 1.0 - _trapz(v, mesh_size)
        first_moment[j + 1] = _trapz(mesh * v, mesh_size)

    return DensityGrid(mesh=mesh, mesh_size=mesh_size, delta=grid.delta, values=v,
                       times=times, loss=loss, first_moment=first_moment,
                       substep_changes=changes)
