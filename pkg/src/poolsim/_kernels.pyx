# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twins of the `_kernels_py` hot loops.

Statement-for-statement mirrors of the numpy fallback (same expression
trees; the extension is compiled with -ffp-contract=off), so the finite,
moment and fixed-point kernels reproduce the fallback bit for bit.  The
SPDE kernel's mesh reduction is sequential here versus pairwise in numpy,
so it agrees to rounding rather than exactly.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, isfinite, log, sqrt
from libc.stdint cimport int64_t, uint64_t

from .gauss import MASK64, ZIG_LAYERS, ZIG_R, ZIG_RATIO, ZIG_X

cnp.import_array()

BACKEND_NAME = "cython"

# --- counter-based ziggurat (see gauss.py for the layout contract) -------

cdef uint64_t GOLDEN_C = 0x9E3779B97F4A7C15ULL
cdef uint64_t MIX1_C = 0xBF58476D1CE4E5B9ULL
cdef uint64_t MIX2_C = 0x94D049BB133111EBULL
cdef double TWO_M53_C = 2.0 ** -53
cdef double ZIG_R_C = ZIG_R
cdef int ZIG_LAYERS_C = ZIG_LAYERS

cdef double[129] _zig_x
cdef double[128] _zig_ratio
for _i in range(129):
    _zig_x[_i] = ZIG_X[_i]
for _i in range(128):
    _zig_ratio[_i] = ZIG_RATIO[_i]


cdef inline uint64_t _mix(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * MIX1_C
    z = (z ^ (z >> 27)) * MIX2_C
    return z ^ (z >> 31)


cdef inline uint64_t _raw(uint64_t key_n, uint64_t slot) nogil:
    return _mix(key_n + (slot + 1) * GOLDEN_C)


cdef inline double _normal(uint64_t key_n, uint64_t base) nogil:
    cdef int attempt, layer
    cdef uint64_t u, slot
    cdef double us, x, y, f0, f1, u1, u2
    for attempt in range(ZIG_LAYERS_C):
        slot = base + (<uint64_t>attempt << 2)
        u = _raw(key_n, slot)
        layer = <int>(u & 0x7F)
        us = 2.0 * ((<double><int64_t>(u >> 11)) * TWO_M53_C) - 1.0
        if fabs(us) < _zig_ratio[layer]:
            return us * _zig_x[layer]
        if layer == 0:
            u1 = (<double><int64_t>((_raw(key_n, slot + 1) >> 11) + 1)) * TWO_M53_C
            u2 = (<double><int64_t>((_raw(key_n, slot + 2) >> 11) + 1)) * TWO_M53_C
            x = -log(u1) / ZIG_R_C
            y = -log(u2)
            if 2.0 * y >= x * x:
                return -(ZIG_R_C + x) if us < 0.0 else (ZIG_R_C + x)
            continue
        x = us * _zig_x[layer]
        f0 = exp(-0.5 * (_zig_x[layer] * _zig_x[layer] - x * x))
        f1 = exp(-0.5 * (_zig_x[layer + 1] * _zig_x[layer + 1] - x * x))
        u2 = (<double><int64_t>(_raw(key_n, slot + 1) >> 11)) * TWO_M53_C
        if f1 + u2 * (f0 - f1) < 1.0:
            return x
    return 0.0  # unreachable: acceptance probability per attempt is ~0.985


def fill_normals(stream_key, Py_ssize_t n_names, Py_ssize_t steps):
    """Standard normals addressed by (stream_key, name, step); name n owns
    row n and never changes when names or steps are added."""
    cdef uint64_t key = <uint64_t>(int(stream_key) & MASK64)
    out_arr = np.empty((n_names, steps))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t n, j
    cdef uint64_t key_n
    with nogil:
        for n in range(n_names):
            key_n = _mix(key + (<uint64_t>n + 1) * GOLDEN_C)
            for j in range(steps):
                out[n, j] = _normal(key_n, <uint64_t>j << 9)
    return out_arr


def finite_pool_trial(double[::1] alpha, double[::1] lam_bar, double[::1] sigma,
                      double[::1] beta_c, double[::1] beta_s, double[::1] lam0,
                      double[::1] dx, double[:, ::1] z, double[::1] clocks,
                      double[::1] ell, double delta,
                      double[::1] loss, cnp.int64_t[::1] default_step):
    """One trial of the finite-pool default simulation (see _kernels_py)."""
    cdef Py_ssize_t n_names = lam0.shape[0]
    cdef Py_ssize_t steps = dx.shape[0]
    cdef double n_f = <double>n_names
    cdef double sqdt = sqrt(delta)
    cdef Py_ssize_t j, n
    cdef double lt, ell_sum, jump, dxj, loss_level

    lam_arr = np.empty(n_names)
    cum_arr = np.zeros(n_names)
    tilde_arr = np.empty(n_names)
    alive_arr = np.ones(n_names, dtype=np.uint8)
    cdef double[::1] lam = lam_arr
    cdef double[::1] cum = cum_arr
    cdef double[::1] tilde = tilde_arr
    cdef cnp.uint8_t[::1] alive = alive_arr

    with nogil:
        for n in range(n_names):
            lam[n] = lam0[n]
            default_step[n] = -1
        loss[0] = 0.0
        loss_level = 0.0

        for j in range(steps):
            dxj = dx[j]
            ell_sum = 0.0
            for n in range(n_names):
                lt = lam[n] + alpha[n] * (lam_bar[n] - lam[n]) * delta \
                    + sigma[n] * sqrt(max(lam[n], 0.0)) * sqdt * z[n, j] \
                    + beta_s[n] * lam[n] * dxj
                if lt < 0.0:
                    lt = 0.0
                tilde[n] = lt
                if alive[n] and cum[n] + delta * lt >= clocks[n]:
                    alive[n] = 0
                    default_step[n] = j + 1
                    ell_sum += ell[n]
            jump = ell_sum / n_f
            for n in range(n_names):
                lam[n] = tilde[n] + beta_c[n] * jump
                cum[n] = cum[n] + delta * lam[n]
            loss_level = loss_level + jump
            loss[j + 1] = loss_level


def moment_paths(double[::1] alpha, double[::1] lam_bar, double[::1] sigma,
                 double[::1] beta_c, double[::1] beta_s, double[::1] w,
                 double[:, ::1] u_init, double[:, ::1] b0, double[:, ::1] s0,
                 double[:, ::1] dv, double delta,
                 double[:, ::1] u0_out, double[:, ::1] u1_out,
                 cnp.int64_t[::1] clamp_out, cnp.uint8_t[::1] u0_flag_out,
                 double[:, :, ::1] u_final):
    """Truncated moment system along a batch of paths (see _kernels_py)."""
    cdef Py_ssize_t trials = dv.shape[0]
    cdef Py_ssize_t steps = dv.shape[1]
    cdef Py_ssize_t n_buckets = u_init.shape[0]
    cdef Py_ssize_t n_mom = u_init.shape[1]
    cdef Py_ssize_t order = n_mom - 1
    cdef Py_ssize_t m, j, b, k
    cdef double b0j, s0j, dvj, coup, bs_s0, kf, kk1
    cdef double u_k, u_km1, u_kp1, diag, sub, drift, load, val, acc
    cdef cnp.int64_t clamps
    cdef cnp.uint8_t flag

    u_arr = np.empty((n_buckets, n_mom))
    un_arr = np.empty((n_buckets, n_mom))
    cdef double[:, ::1] u = u_arr
    cdef double[:, ::1] un = un_arr

    with nogil:
        for m in range(trials):
            for b in range(n_buckets):
                for k in range(n_mom):
                    u[b, k] = u_init[b, k]
            clamps = 0
            flag = 0
            acc = 0.0
            for b in range(n_buckets):
                acc += w[b] * u[b, 0]
            u0_out[m, 0] = acc
            acc = 0.0
            for b in range(n_buckets):
                acc += w[b] * u[b, 1]
            u1_out[m, 0] = acc

            for j in range(steps):
                b0j = b0[m, j]
                s0j = s0[m, j]
                dvj = dv[m, j]
                coup = 0.0
                for b in range(n_buckets):
                    coup += w[b] * u[b, 1]
                for b in range(n_buckets):
                    bs_s0 = beta_s[b] * s0j
                    for k in range(n_mom):
                        kf = <double>k
                        kk1 = kf * (kf - 1.0)
                        u_k = u[b, k]
                        u_km1 = u[b, k - 1] if k >= 1 else 0.0
                        u_kp1 = u[b, k + 1] if k < order else u[b, order]
                        diag = -alpha[b] * kf + beta_s[b] * b0j * kf + 0.5 * bs_s0 * bs_s0 * kk1
                        sub = 0.5 * sigma[b] * sigma[b] * kk1 + alpha[b] * lam_bar[b] * kf + beta_c[b] * kf * coup
                        drift = u_k * diag + u_km1 * sub - u_kp1
                        load = bs_s0 * kf * u_k
                        val = u_k + drift * delta + load * dvj
                        if val < 0.0:
                            clamps += 1
                            val = 0.0
                        un[b, k] = val
                for b in range(n_buckets):
                    for k in range(n_mom):
                        u[b, k] = un[b, k]
                    if u[b, 0] < 0.0 or u[b, 0] > 1.0 + 1e-6:
                        flag = 1
                acc = 0.0
                for b in range(n_buckets):
                    acc += w[b] * u[b, 0]
                u0_out[m, j + 1] = acc
                acc = 0.0
                for b in range(n_buckets):
                    acc += w[b] * u[b, 1]
                u1_out[m, j + 1] = acc

            clamp_out[m] = clamps
            u0_flag_out[m] = flag
            for b in range(n_buckets):
                for k in range(n_mom):
                    u_final[m, b, k] = u[b, k]


def fixed_point_inner_paths(double alpha, double lam_bar, double sigma,
                            double beta_s, double lam0,
                            double[::1] q, double[::1] dx, double[:, ::1] z,
                            double delta,
                            double[:, ::1] lam_paths, double[:, ::1] hazard):
    """Truncated-Euler effective-intensity paths (see _kernels_py)."""
    cdef Py_ssize_t m = z.shape[0]
    cdef Py_ssize_t steps = z.shape[1]
    cdef double sqdt = sqrt(delta)
    cdef Py_ssize_t i, j
    cdef double lam, lt, h, qj, dxj

    with nogil:
        for i in range(m):
            lam = lam0
            h = 0.0
            lam_paths[i, 0] = lam
            hazard[i, 0] = 0.0
            for j in range(steps):
                qj = q[j]
                dxj = dx[j]
                lt = lam + (-alpha * (lam - lam_bar) + qj) * delta \
                    + sigma * sqrt(max(lam, 0.0)) * sqdt * z[i, j] \
                    + beta_s * lam * dxj
                lam = max(lt, 0.0)
                h = h + delta * lam
                lam_paths[i, j + 1] = lam
                hazard[i, j + 1] = h


def spde_explicit_path(double sigma, double alpha, double lam_bar,
                       double beta_c, double beta_s,
                       double[::1] b0, double[::1] s0, double[::1] dvs,
                       double[::1] grid_lam, double[::1] v,
                       double delta_t, double delta_l, double blowup,
                       double[::1] loss):
    """Explicit finite-difference SPDE update along one path (see _kernels_py)."""
    cdef Py_ssize_t n_steps = dvs.shape[0]
    cdef Py_ssize_t n_nodes = grid_lam.shape[0]
    cdef double sig2 = sigma * sigma
    cdef double two_dl = 2.0 * delta_l
    cdef double dl2 = delta_l * delta_l
    cdef Py_ssize_t i, jn
    cdef double integ, d, bs_s0, g, bsd, lam_j, sub, dia, sup
    cdef double hi, mn, mx, min_v, max_v, acc, val
    cdef int status = 0
    cdef Py_ssize_t failed = -1

    vn_arr = np.zeros(n_nodes)
    cdef double[::1] vn = vn_arr

    with nogil:
        acc = 0.0
        for jn in range(1, n_nodes - 1):
            acc += v[jn]
        loss[0] = 1.0 - delta_l * (0.5 * (v[0] + v[n_nodes - 1]) + acc)
        min_v = v[0]
        max_v = v[0]
        for jn in range(n_nodes):
            if v[jn] < min_v:
                min_v = v[jn]
            if v[jn] > max_v:
                max_v = v[jn]

        for i in range(1, n_steps + 1):
            acc = 0.0
            for jn in range(1, n_nodes - 1):
                acc += grid_lam[jn] * v[jn]
            integ = beta_c * (delta_l * (
                0.5 * (grid_lam[0] * v[0] + grid_lam[n_nodes - 1] * v[n_nodes - 1]) + acc))
            d = dvs[i - 1] / delta_t
            bs_s0 = beta_s * s0[i - 1]
            g = bs_s0 * bs_s0
            bsd = b0[i - 1] + s0[i - 1] * d
            vn[0] = 0.0
            vn[n_nodes - 1] = 0.0
            for jn in range(1, n_nodes - 1):
                lam_j = grid_lam[jn]
                sub = integ / two_dl - sig2 / two_dl + sig2 * lam_j / (2.0 * dl2) \
                    + g * lam_j * lam_j / (2.0 * dl2) + alpha * (lam_bar - lam_j) / two_dl \
                    + beta_s * lam_j / two_dl * bsd - g * lam_j / delta_l
                dia = 1.0 / delta_t + alpha - sig2 * lam_j / dl2 - g * lam_j * lam_j / dl2 \
                    - lam_j - beta_s * bsd + g
                sup = -integ / two_dl + sig2 / two_dl + sig2 * lam_j / (2.0 * dl2) \
                    + g * lam_j * lam_j / (2.0 * dl2) - alpha * (lam_bar - lam_j) / two_dl \
                    - beta_s * lam_j / two_dl * bsd + g * lam_j / delta_l
                vn[jn] = delta_t * (sub * v[jn - 1] + dia * v[jn] + sup * v[jn + 1])
            for jn in range(n_nodes):
                v[jn] = vn[jn]

            hi = 0.0
            mn = v[0]
            mx = v[0]
            for jn in range(n_nodes):
                val = fabs(v[jn])
                if val > hi:
                    hi = val
                if v[jn] < mn:
                    mn = v[jn]
                if v[jn] > mx:
                    mx = v[jn]
            if not isfinite(hi) or hi > blowup:
                status = 1
                failed = i
                break
            if mn < min_v:
                min_v = mn
            if mx > max_v:
                max_v = mx
            acc = 0.0
            for jn in range(1, n_nodes - 1):
                acc += v[jn]
            loss[i] = 1.0 - delta_l * (0.5 * (v[0] + v[n_nodes - 1]) + acc)

    return status, (failed if status else -1), min_v, max_v
