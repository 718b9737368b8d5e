"""Pure numpy implementations of the hot inner loops.

These are the reference kernels; `_kernels.pyx` mirrors them statement for
statement (same expression trees, compiled with -ffp-contract=off), so the
finite-pool, moment and fixed-point kernels produce bit-identical doubles
under either backend.  The SPDE kernel contains a mesh reduction whose
summation order differs (numpy pairwise vs sequential C), so cross-backend
agreement there is near-exact rather than exact.

All kernels consume pre-drawn noise arrays: no RNG calls happen inside, so
a kernel is a deterministic function of its inputs.
"""

from __future__ import annotations

import numpy as np

from .gauss import fill_normals_python

BACKEND_NAME = "python"


def fill_normals(stream_key, n_names, steps):
    """Standard normals addressed by (stream_key, name, step); name n owns
    row n and never changes when names or steps are added."""
    return fill_normals_python(stream_key, n_names, steps)


def finite_pool_trial(alpha, lam_bar, sigma, beta_c, beta_s, lam0,
                      dx, z, clocks, ell, delta, loss, default_step):
    """One trial of the finite-pool default simulation.

    Per step: tentative truncated-Euler intensity, default test against the
    accumulated hazard, then one contagion jump applied to every name.

    Parameters are per-name float64 arrays of length N; dx the risk-factor
    increments (J,); z the idiosyncratic normals (N, J); clocks the Exp(1)
    thresholds (N,); ell per-name loss given default (N,).  Outputs are
    written into loss (J+1,) and default_step (N,), the latter holding the
    grid index of default or -1.
    """
    n_names = lam0.shape[0]
    steps = dx.shape[0]
    n_f = float(n_names)
    sqdt = np.sqrt(delta)

    lam = lam0.copy()
    cum = np.zeros(n_names)          # delta * sum_{i=1..j} lambda_{t_i}
    alive = np.ones(n_names, dtype=bool)
    default_step[:] = -1
    loss[0] = 0.0
    loss_level = 0.0

    for j in range(steps):
        lam_tilde = lam + alpha * (lam_bar - lam) * delta \
            + sigma * np.sqrt(np.maximum(lam, 0.0)) * sqdt * z[:, j] \
            + beta_s * lam * dx[j]
        lam_tilde = np.maximum(lam_tilde, 0.0)

        newly = np.flatnonzero(alive & (cum + delta * lam_tilde >= clocks))
        ell_sum = 0.0
        for i in newly:
            ell_sum += ell[i]
        jump = ell_sum / n_f

        lam = lam_tilde + beta_c * jump
        cum = cum + delta * lam
        if newly.size:
            alive[newly] = False
            default_step[newly] = j + 1
        loss_level = loss_level + jump
        loss[j + 1] = loss_level


def moment_paths(alpha, lam_bar, sigma, beta_c, beta_s, w, u_init,
                 b0, s0, dv, delta, u0_out, u1_out, clamp_out, u0_flag_out,
                 u_final):
    """Euler-Maruyama integration of the truncated moment system along a
    batch of common-noise paths, with copy-last closure u_{K+1} = u_K and
    negative moments clamped to zero after each step.

    Bucket parameters are (B,) arrays with normalized weights w; u_init is
    (B, K+1).  b0, s0, dv are (M, J) path arrays (drift and diffusion of X
    at the left endpoint, and the dV increments).  Outputs: u0_out and
    u1_out (M, J+1) hold the w-averaged zeroth and first moments, clamp_out
    (M,) the clamp-event counts, u0_flag_out (M,) whether the zeroth moment
    of any bucket left [0, 1+1e-6], u_final (M, B, K+1) the final state.
    """
    trials, steps = dv.shape
    n_buckets, n_mom = u_init.shape
    order = n_mom - 1

    u = np.broadcast_to(u_init, (trials, n_buckets, n_mom)).copy()
    u_new = np.empty_like(u)

    def weighted(col):
        acc = np.zeros(trials)
        for b in range(n_buckets):
            acc += w[b] * u[:, b, col]
        return acc

    u0_out[:, 0] = weighted(0)
    u1_out[:, 0] = weighted(1)
    clamp_out[:] = 0
    u0_flag_out[:] = 0

    for j in range(steps):
        b0j = b0[:, j][:, None]
        s0j = s0[:, j][:, None]
        dvj = dv[:, j][:, None]
        coup = np.zeros((trials, 1))
        for b in range(n_buckets):
            coup[:, 0] += w[b] * u[:, b, 1]
        bs_s0 = beta_s * s0j
        for k in range(n_mom):
            kf = float(k)
            kk1 = kf * (kf - 1.0)
            u_k = u[:, :, k]
            u_km1 = u[:, :, k - 1] if k >= 1 else np.zeros((trials, n_buckets))
            u_kp1 = u[:, :, k + 1] if k < order else u[:, :, order]
            diag = -alpha * kf + beta_s * b0j * kf + 0.5 * bs_s0 * bs_s0 * kk1
            sub = 0.5 * sigma * sigma * kk1 + alpha * lam_bar * kf + beta_c * kf * coup
            drift = u_k * diag + u_km1 * sub - u_kp1
            load = bs_s0 * kf * u_k
            u_new[:, :, k] = u_k + drift * delta + load * dvj
        neg = u_new < 0.0
        clamp_out += neg.sum(axis=(1, 2))
        u_new[neg] = 0.0
        u, u_new = u_new, u
        u0 = u[:, :, 0]
        u0_flag_out |= ((u0 < 0.0) | (u0 > 1.0 + 1e-6)).any(axis=1)
        u0_out[:, j + 1] = weighted(0)
        u1_out[:, j + 1] = weighted(1)

    u_final[...] = u


def fixed_point_inner_paths(alpha, lam_bar, sigma, beta_s, lam0,
                            q, dx, z, delta, lam_paths, hazard):
    """Truncated-Euler paths of the effective intensity under a given
    contagion-rate function q, along one fixed risk path.

    q has steps+1 grid values (left endpoint used per step); z is (m, J).
    Outputs: lam_paths and hazard, both (m, J+1), hazard holding
    delta * sum_{i=1..j} lambda_{t_i}.
    """
    m, steps = z.shape
    sqdt = np.sqrt(delta)
    lam = np.full(m, float(lam0))
    lam_paths[:, 0] = lam
    hazard[:, 0] = 0.0
    h = np.zeros(m)
    for j in range(steps):
        lt = lam + (-alpha * (lam - lam_bar) + q[j]) * delta \
            + sigma * np.sqrt(np.maximum(lam, 0.0)) * sqdt * z[:, j] \
            + beta_s * lam * dx[j]
        lam = np.maximum(lt, 0.0)
        h = h + delta * lam
        lam_paths[:, j + 1] = lam
        hazard[:, j + 1] = h


def spde_explicit_path(sigma, alpha, lam_bar, beta_c, beta_s,
                       b0, s0, dvs, grid_lam, v, delta_t, delta_l,
                       blowup, loss):
    """Explicit three-point finite-difference update of the limiting
    density along one risk path.

    b0, s0, dvs are per-step arrays (I,), evaluated non-anticipatively at
    the previous time level; grid_lam the mesh nodes (Jl+1,); v the initial
    density (modified in place); loss receives 1 - trapz(v) at every level.
    Returns (status, failed_step, min_v, max_v): status 1 means blow-up
    (|v| above the bound, or non-finite values) detected at failed_step.
    """
    n_steps = dvs.shape[0]
    n_nodes = grid_lam.shape[0]
    lam_in = grid_lam[1:-1]
    sig2 = sigma * sigma
    two_dl = 2.0 * delta_l
    dl2 = delta_l * delta_l

    def trapz(f):
        return delta_l * (0.5 * (f[0] + f[-1]) + f[1:-1].sum())

    loss[0] = 1.0 - trapz(v)
    min_v = v.min()
    max_v = v.max()

    for i in range(1, n_steps + 1):
        integ = beta_c * trapz(grid_lam * v)
        d = dvs[i - 1] / delta_t
        bs_s0 = beta_s * s0[i - 1]
        g = bs_s0 * bs_s0
        bsd = b0[i - 1] + s0[i - 1] * d
        sub = integ / two_dl - sig2 / two_dl + sig2 * lam_in / (2.0 * dl2) \
            + g * lam_in * lam_in / (2.0 * dl2) + alpha * (lam_bar - lam_in) / two_dl \
            + beta_s * lam_in / two_dl * bsd - g * lam_in / delta_l
        dia = 1.0 / delta_t + alpha - sig2 * lam_in / dl2 - g * lam_in * lam_in / dl2 \
            - lam_in - beta_s * bsd + g
        sup = -integ / two_dl + sig2 / two_dl + sig2 * lam_in / (2.0 * dl2) \
            + g * lam_in * lam_in / (2.0 * dl2) - alpha * (lam_bar - lam_in) / two_dl \
            - beta_s * lam_in / two_dl * bsd + g * lam_in / delta_l
        v_new = np.zeros(n_nodes)
        v_new[1:-1] = delta_t * (sub * v[:-2] + dia * v[1:-1] + sup * v[2:])
        v[:] = v_new

        hi = np.abs(v).max()
        if not np.isfinite(hi) or hi > blowup:
            return 1, i, min_v, max_v
        mn = v.min()
        mx = v.max()
        if mn < min_v:
            min_v = mn
        if mx > max_v:
            max_v = mx
        loss[i] = 1.0 - trapz(v)

    return 0, -1, min_v, max_v
