"""Counter-based gaussian noise for the per-name Wiener increments.

The finite-pool simulator consumes one standard normal per (name, step);
drawing them through a generator object costs more than the whole intensity
update, so the hot path uses a keyed counter scheme instead: every value
has the address (stream key, name, step, attempt) and is produced by a
splitmix64 mix feeding a 128-layer ziggurat.  Properties:

  - fully deterministic and collision-free by construction;
  - adding names, steps or attempts never perturbs other draws (each name
    owns a key, each step a 512-slot block within it);
  - both kernel backends reproduce the exact same doubles: the accept path
    is integer/table arithmetic, and the rare wedge/tail branches use libm
    exp/log on both sides.

Tables follow Doornik's ZIGNOR construction (128 layers); they are built
here once, in Python, and shared by both backends.
"""

from __future__ import annotations

import math

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB

ZIG_LAYERS = 128
ZIG_R = 3.442619855899
ZIG_V = 9.91256303526217e-3

TWO_M53 = 2.0 ** -53


def _build_tables() -> tuple[np.ndarray, np.ndarray]:
    """ZIGNOR tables: X[0..128] (layer right edges, X[0] the virtual base
    strip width including the tail) and the accept ratios X[i+1]/X[i]."""
    x = np.zeros(ZIG_LAYERS + 1)
    f = math.exp(-0.5 * ZIG_R * ZIG_R)
    x[0] = ZIG_V / f
    x[1] = ZIG_R
    x[ZIG_LAYERS] = 0.0
    for i in range(2, ZIG_LAYERS):
        x[i] = math.sqrt(-2.0 * math.log(ZIG_V / x[i - 1] + f))
        f = math.exp(-0.5 * x[i] * x[i])
    ratio = x[1:] / x[:-1]
    return x, ratio


ZIG_X, ZIG_RATIO = _build_tables()


def splitmix64(x: int) -> int:
    """Reference scalar mix (Python ints, wrapped to 64 bits)."""
    z = x & MASK64
    z = (z ^ (z >> 30)) * MIX1 & MASK64
    z = (z ^ (z >> 27)) * MIX2 & MASK64
    return z ^ (z >> 31)


def _mix_array(x: np.ndarray) -> np.ndarray:
    z = x.astype(np.uint64, copy=True)
    z ^= z >> np.uint64(30)
    z *= np.uint64(MIX1)
    z ^= z >> np.uint64(27)
    z *= np.uint64(MIX2)
    z ^= z >> np.uint64(31)
    return z


def name_key(stream_key: int, name: int) -> int:
    return splitmix64((stream_key + (name + 1) * GOLDEN) & MASK64)


def _raw(key_n: int, slot: int) -> int:
    return splitmix64((key_n + (slot + 1) * GOLDEN) & MASK64)


def _uniform_open(u: int) -> float:
    # (0, 1] for log arguments
    return ((u >> 11) + 1) * TWO_M53


def normal_from_counter(key_n: int, step: int) -> float:
    """One standard normal for (name key, step): the scalar reference used
    by the fallback's slow path and by tests.

    Attempt a occupies slots (step<<9)+4a .. +2; wedge and tail draws pull
    the extra uniforms from the same attempt's slots, so rejections never
    disturb neighbouring values.
    """
    base = step << 9
    for attempt in range(ZIG_LAYERS):
        u = _raw(key_n, base + (attempt << 2))
        layer = u & 0x7F
        u_signed = 2.0 * ((u >> 11) * TWO_M53) - 1.0
        if abs(u_signed) < ZIG_RATIO[layer]:
            return u_signed * ZIG_X[layer]
        if layer == 0:
            u1 = _uniform_open(_raw(key_n, base + (attempt << 2) + 1))
            u2 = _uniform_open(_raw(key_n, base + (attempt << 2) + 2))
            x = -math.log(u1) / ZIG_R
            y = -math.log(u2)
            if 2.0 * y >= x * x:
                return -(ZIG_R + x) if u_signed < 0 else (ZIG_R + x)
            continue
        x = u_signed * ZIG_X[layer]
        f0 = math.exp(-0.5 * (ZIG_X[layer] * ZIG_X[layer] - x * x))
        f1 = math.exp(-0.5 * (ZIG_X[layer + 1] * ZIG_X[layer + 1] - x * x))
        u2 = (_raw(key_n, base + (attempt << 2) + 1) >> 11) * TWO_M53
        if f1 + u2 * (f0 - f1) < 1.0:
            return x
    raise AssertionError("ziggurat rejected 128 attempts; broken tables")


def fill_normals_python(stream_key: int, n_names: int, steps: int) -> np.ndarray:
    """Vectorized fallback: the ~98.5% in-layer accepts are resolved with
    array arithmetic, the rest through the scalar reference (identical
    doubles either way)."""
    keys = _mix_array(
        np.uint64(stream_key & MASK64)
        + (np.arange(1, n_names + 1, dtype=np.uint64)) * np.uint64(GOLDEN))
    slots = (np.arange(steps, dtype=np.uint64) << np.uint64(9)) + np.uint64(1)
    raw = _mix_array(keys[:, None] + slots[None, :] * np.uint64(GOLDEN))
    layer = (raw & np.uint64(0x7F)).astype(np.intp)
    u_signed = 2.0 * ((raw >> np.uint64(11)).astype(np.float64) * TWO_M53) - 1.0
    out = u_signed * ZIG_X[layer]
    accept = np.abs(u_signed) < ZIG_RATIO[layer]
    for n, j in zip(*np.nonzero(~accept)):
        out[n, j] = normal_from_counter(int(keys[n]), int(j))
    return out
