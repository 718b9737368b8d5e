"""Truncated moment-SDE solver for the limiting portfolio loss.

The moments u_k(t) of the limiting intensity density follow a driven SDE
hierarchy closed at level K by u_{K+1} = u_K; the limiting loss is
L_t = 1 - u_0(t).  Three integration variants are provided:

  plain        Euler-Maruyama on the u_k directly (compiled kernel);
  transformed  integrates w_k = u_k * exp(-(beta_s^2/2) k(k-1) int sigma0^2),
               removing the quadratic growth term that destabilizes high
               moments for large beta_s (w_0 = u_0, w_1 = u_1);
  canonical    integrates (u_0, eta_k) with eta_k = X_t - log(u_k)/(k beta_s)
               as random ODEs (single driving noise absorbed into X);
               requires beta_s > 0 and strictly positive moments.

Heterogeneous pools integrate one moment block per bucket against the
shared risk path, coupled through the weighted first moment.  Negative
moments are clamped to zero after every step and the events counted.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .finite import LossSamples
from .params import NameParams, PoolSpec, SimConfig, SystematicRiskModel, TimeGrid
from .risk import simulate_risk_paths

VARIANTS = ("plain", "transformed", "canonical")

U0_UPPER_SLACK = 1e-6


@dataclass(frozen=True)
class MomentState:
    """Moment vector u_0..u_K with the clamp pattern of the last step."""

    u: np.ndarray
    clamped_flags: np.ndarray

    @property
    def order(self) -> int:
        return len(self.u) - 1

    @property
    def u0_in_range(self) -> bool:
        return 0.0 <= self.u[0] <= 1.0 + U0_UPPER_SLACK


def initial_moments(lambda0: float, order: int) -> MomentState:
    """Point-mass initial condition: u_k(0) = lambda0^k, built by repeated
    multiplication so dyadic intensities give exact powers."""
    u = np.empty(order + 1)
    u[0] = 1.0
    for k in range(order):
        u[k + 1] = u[k] * lambda0
    return MomentState(u=u, clamped_flags=np.zeros(order + 1, dtype=bool))


def moment_drift_diff(k: int, u: np.ndarray, params: NameParams, x: float = 0.0,
                      coupling: float | None = None,
                      model: SystematicRiskModel | None = None) -> tuple[float, float]:
    """Drift and dV-loading of moment k given the current moment vector.

    The copy-last closure supplies u_{K+1} = u_K; for homogeneous pools the
    contagion coupling defaults to the pool's own first moment.
    """
    order = len(u) - 1
    if not 0 <= k <= order:
        raise ValueError(f"moment index {k} outside 0..{order}")
    b0x = float(model.b0(x)) if model is not None else 0.0
    s0x = float(model.sigma0(x)) if model is not None else 0.0
    coup = float(u[1]) if coupling is None else float(coupling)
    kf = float(k)
    kk1 = kf * (kf - 1.0)
    u_k = u[k]
    u_km1 = u[k - 1] if k >= 1 else 0.0
    u_kp1 = u[k + 1] if k < order else u[order]
    bs_s0 = params.beta_s * s0x
    diag = -params.alpha * kf + params.beta_s * b0x * kf + 0.5 * bs_s0 * bs_s0 * kk1
    sub = 0.5 * params.sigma * params.sigma * kk1 + params.alpha * params.lambda_bar * kf \
        + params.beta_c * kf * coup
    drift = u_k * diag + u_km1 * sub - u_kp1
    load = bs_s0 * kf * u_k
    return float(drift), float(load)


def step_moments(state: MomentState, params: NameParams, x: float, dv: float,
                 delta: float, model: SystematicRiskModel | None = None,
                 coupling: float | None = None) -> MomentState:
    """One Euler-Maruyama step of the truncated system, negatives clamped."""
    if delta <= 0:
        raise ValueError("step size must be positive")
    u = state.u
    u_new = np.empty_like(u)
    for k in range(len(u)):
        drift, load = moment_drift_diff(k, u, params, x, coupling, model)
        u_new[k] = u[k] + drift * delta + load * dv
    clamped = u_new < 0.0
    u_new[clamped] = 0.0
    return MomentState(u=u_new, clamped_flags=clamped)


@dataclass(frozen=True)
class LimitRun:
    """Limiting-loss samples plus solver diagnostics.

    u0_paths/u1_paths are the weighted zeroth/first moments on the whole
    grid, retained only when requested (memory scales with trials*steps).
    """

    samples: LossSamples
    clamp_events: np.ndarray
    u0_flags: np.ndarray
    u0_paths: np.ndarray | None = None
    u1_paths: np.ndarray | None = None


def _pool_arrays(pool: PoolSpec, order: int):
    alpha = np.array([e.params.alpha for e in pool.entries], dtype=float)
    lam_bar = np.array([e.params.lambda_bar for e in pool.entries], dtype=float)
    sigma = np.array([e.params.sigma for e in pool.entries], dtype=float)
    beta_c = np.array([e.params.beta_c for e in pool.entries], dtype=float)
    beta_s = np.array([e.params.beta_s for e in pool.entries], dtype=float)
    w = pool.bucket_weights()
    u_init = np.stack([initial_moments(float(e.lambda0), order).u for e in pool.entries])
    return alpha, lam_bar, sigma, beta_c, beta_s, w, u_init


def _integrate_plain(pars, b0, s0, dv, delta):
    alpha, lam_bar, sigma, beta_c, beta_s, w, u_init = pars
    trials, steps = dv.shape
    u0 = np.empty((trials, steps + 1))
    u1 = np.empty((trials, steps + 1))
    clamps = np.zeros(trials, dtype=np.int64)
    flags = np.zeros(trials, dtype=np.uint8)
    u_final = np.empty((trials, u_init.shape[0], u_init.shape[1]))
    kernels.moment_paths(alpha, lam_bar, sigma, beta_c, beta_s, w, u_init,
                         b0, s0, dv, delta, u0, u1, clamps, flags, u_final)
    return u0, u1, clamps, flags


def _integrate_transformed(pars, b0, s0, dv, delta):
    """w_k-variable integration; the growth exponent is accumulated as a
    left-endpoint Riemann sum of sigma0(X)^2 on the same grid."""
    alpha, lam_bar, sigma, beta_c, beta_s, w, u_init = pars
    trials, steps = dv.shape
    n_buckets, n_mom = u_init.shape
    order = n_mom - 1

    wk = np.broadcast_to(u_init, (trials, n_buckets, n_mom)).copy()
    wk_new = np.empty_like(wk)
    integ_s2 = np.zeros(trials)  # int_0^t sigma0(X_s)^2 ds
    u0 = np.empty((trials, steps + 1))
    u1 = np.empty((trials, steps + 1))
    clamps = np.zeros(trials, dtype=np.int64)
    flags = np.zeros(trials, dtype=np.uint8)

    def weighted(col):
        acc = np.zeros(trials)
        for b in range(n_buckets):
            acc += w[b] * wk[:, b, col]
        return acc

    u0[:, 0] = weighted(0)
    u1[:, 0] = weighted(1)

    for j in range(steps):
        b0j = b0[:, j][:, None]
        s0j = s0[:, j][:, None]
        dvj = dv[:, j][:, None]
        it = integ_s2[:, None]
        coup = np.zeros((trials, 1))
        for b in range(n_buckets):
            coup[:, 0] += w[b] * wk[:, b, 1]
        bs_s0 = beta_s * s0j
        bs2_it = (beta_s * beta_s) * it
        for k in range(n_mom):
            kf = float(k)
            kk1 = kf * (kf - 1.0)
            w_k = wk[:, :, k]
            w_km1 = wk[:, :, k - 1] if k >= 1 else np.zeros((trials, n_buckets))
            e_down = np.exp(-bs2_it * (kf - 1.0)) if k >= 1 else 1.0
            if k < order:
                up_term = wk[:, :, k + 1] * np.exp(bs2_it * kf)
            else:
                up_term = wk[:, :, order]
            diag = -alpha * kf + beta_s * b0j * kf
            sub = (0.5 * sigma * sigma * kk1 + alpha * lam_bar * kf + beta_c * kf * coup) * e_down
            drift = w_k * diag + w_km1 * sub - up_term
            load = bs_s0 * kf * w_k
            wk_new[:, :, k] = w_k + drift * delta + load * dvj
        neg = wk_new < 0.0
        clamps += neg.sum(axis=(1, 2))
        wk_new[neg] = 0.0
        wk, wk_new = wk_new, wk
        integ_s2 = integ_s2 + s0[:, j] * s0[:, j] * delta
        w0 = wk[:, :, 0]
        flags |= ((w0 < 0.0) | (w0 > 1.0 + U0_UPPER_SLACK)).any(axis=1)
        u0[:, j + 1] = weighted(0)
        u1[:, j + 1] = weighted(1)

    return u0, u1, clamps, flags


def _integrate_canonical(pars, x_path, b0, s0, dv, delta):
    """(u_0, eta_k) random-ODE integration; requires beta_s > 0 everywhere
    and strictly positive moments (point masses at lambda0 > 0)."""
    alpha, lam_bar, sigma, beta_c, beta_s, w, u_init = pars
    trials, steps = dv.shape
    n_buckets, n_mom = u_init.shape
    order = n_mom - 1
    if np.any(beta_s <= 0.0):
        raise ValueError("canonical variant requires beta_s > 0 for every bucket")
    if np.any(u_init[:, 1:] <= 0.0):
        raise ValueError("canonical variant requires strictly positive moments (lambda0 > 0)")

    lam0 = u_init[:, 1]
    u0 = np.ones((trials, n_buckets))
    # eta_k(0) = x0 - log(u_k)/(k beta_s) = x0 - log(lambda0)/beta_s for point mass
    eta = np.empty((trials, n_buckets, order))
    eta[:] = x_path[:, 0][:, None, None] + (-np.log(lam0) / beta_s)[None, :, None]

    u0_out = np.empty((trials, steps + 1))
    u1_out = np.empty((trials, steps + 1))
    flags = np.zeros(trials, dtype=np.uint8)
    clamps = np.zeros(trials, dtype=np.int64)

    def record(col_u0, col_u1, j):
        acc0 = np.zeros(trials)
        acc1 = np.zeros(trials)
        for b in range(n_buckets):
            acc0 += w[b] * col_u0[:, b]
            acc1 += w[b] * col_u1[:, b]
        u0_out[:, j] = acc0
        u1_out[:, j] = acc1

    u1 = np.exp(beta_s * (x_path[:, 0][:, None] - eta[:, :, 0]))
    record(u0, u1, 0)

    for j in range(steps):
        xj = x_path[:, j][:, None]
        b0j = b0[:, j][:, None]
        s0j = s0[:, j][:, None]
        xe = beta_s * (xj - eta[:, :, 0])
        u1 = np.exp(xe)
        coup = np.zeros((trials, 1))
        for b in range(n_buckets):
            coup[:, 0] += w[b] * u1[:, b]
        eta_new = np.empty_like(eta)
        for k in range(1, order + 1):
            kf = float(k)
            kk1 = kf * (kf - 1.0)
            exp_k = kf * beta_s * (xj - eta[:, :, k - 1])
            if k == 1:
                r_down = u0 / u1
            else:
                exp_km1 = (kf - 1.0) * beta_s * (xj - eta[:, :, k - 2])
                r_down = np.exp(exp_km1 - exp_k)
            if k < order:
                exp_kp1 = (kf + 1.0) * beta_s * (xj - eta[:, :, k])
                r_up = np.exp(exp_kp1 - exp_k)
            else:
                r_up = 1.0
            bracket = r_down * (0.5 * sigma * sigma * kk1 + alpha * lam_bar * kf
                                + beta_c * kf * coup) - r_up
            deta = 0.5 * beta_s * s0j * s0j + alpha / beta_s - bracket / (kf * beta_s)
            eta_new[:, :, k - 1] = eta[:, :, k - 1] + deta * delta
        u0_new = u0 - u1 * delta
        u0, eta = u0_new, eta_new
        flags |= ((u0 <= 0.0) | (u0 > 1.0 + U0_UPPER_SLACK)).any(axis=1)
        xn = x_path[:, j + 1][:, None]
        u1n = np.exp(beta_s * (xn - eta[:, :, 0]))
        record(u0, u1n, j + 1)

    return u0_out, u1_out, clamps, flags


def integrate_moments_along_path(pool: PoolSpec, model: SystematicRiskModel,
                                 grid: TimeGrid, order: int, risk,
                                 variant: str = "plain"):
    """Integrate the moment system along one given risk path.

    Returns (u0_path, u1_path, clamp_events, u0_flag) on the grid; used for
    per-path comparisons against the other limiting-loss solvers.
    """
    if order < 1:
        raise ValueError("truncation level must be >= 1")
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    if risk.steps != grid.steps:
        raise ValueError("risk path and time grid have different step counts")
    pars = _pool_arrays(pool, order)
    x = np.asarray(risk.x)[None, :]
    dv = np.asarray(risk.dv)[None, :]
    b0 = model.b0(x[:, :-1])
    s0 = model.sigma0(x[:, :-1])
    if variant == "plain":
        u0, u1, cl, fl = _integrate_plain(pars, b0, s0, dv, grid.delta)
    elif variant == "transformed":
        u0, u1, cl, fl = _integrate_transformed(pars, b0, s0, dv, grid.delta)
    else:
        u0, u1, cl, fl = _integrate_canonical(pars, x, b0, s0, dv, grid.delta)
    return u0[0], u1[0], int(cl[0]), bool(fl[0])


def simulate_limiting_loss(pool: PoolSpec, model: SystematicRiskModel, grid: TimeGrid,
                           order: int, sim: SimConfig, variant: str = "plain",
                           keep_paths: bool = False) -> LimitRun:
    """Monte Carlo over common-noise paths of the limiting loss L = 1 - u_0.

    One risk path per trial (stream ("risk", m, 0), shared with the finite
    simulator for common-random-number comparisons); the moment system is
    integrated along it at truncation level ``order``.
    """
    if order < 1:
        raise ValueError("truncation level must be >= 1")
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    pars = _pool_arrays(pool, order)
    idx = grid.horizon_indices()
    trials = sim.trials

    losses = np.empty((len(idx), trials))
    xs = np.empty((len(idx), trials))
    clamps = np.empty(trials, dtype=np.int64)
    flags = np.empty(trials, dtype=np.uint8)
    u0_paths = np.empty((trials, grid.steps + 1)) if keep_paths else None
    u1_paths = np.empty((trials, grid.steps + 1)) if keep_paths else None

    def run_chunk(lo: int, hi: int):
        x, dv = simulate_risk_paths(model, grid, sim.master_seed, hi - lo, trial_offset=lo)
        b0 = model.b0(x[:, :-1])
        s0 = model.sigma0(x[:, :-1])
        if variant == "plain":
            u0, u1, cl, fl = _integrate_plain(pars, b0, s0, dv, grid.delta)
        elif variant == "transformed":
            u0, u1, cl, fl = _integrate_transformed(pars, b0, s0, dv, grid.delta)
        else:
            u0, u1, cl, fl = _integrate_canonical(pars, x, b0, s0, dv, grid.delta)
        for h, j in enumerate(idx):
            losses[h, lo:hi] = 1.0 - u0[:, j]
            xs[h, lo:hi] = x[:, j]
        clamps[lo:hi] = cl
        flags[lo:hi] = fl
        if keep_paths:
            u0_paths[lo:hi] = u0
            u1_paths[lo:hi] = u1

    workers = max(1, int(sim.parallelism))
    chunk = trials if workers == 1 else max(64, -(-trials // (workers * 4)))
    ranges = [(lo, min(lo + chunk, trials)) for lo in range(0, trials, chunk)]
    if workers == 1:
        for lo, hi in ranges:
            run_chunk(lo, hi)
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            list(ex.map(lambda r: run_chunk(*r), ranges))

    samples = LossSamples(horizons=tuple(grid.sample_horizons), losses=losses, x_values=xs)
    return LimitRun(samples=samples, clamp_events=clamps, u0_flags=flags.astype(bool),
                    u0_paths=u0_paths, u1_paths=u1_paths)
