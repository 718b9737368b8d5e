"""Deterministic stream derivation shared by all stochastic modules.

Every random draw in the package comes from a stream addressed by
(master_seed, purpose-tag, trial-index, name-index).  Distinct ids map to
statistically independent generators; the same id always reproduces the
same sequence, so adding trials or names never perturbs existing streams
and thread scheduling cannot change any output.
"""

from __future__ import annotations

import zlib

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF

# Purpose tags in use across the package.  The tags are hashed, so new ones
# can be added freely without shifting existing streams.
PURPOSE_RISK = "risk"            # common-noise increments dV, one per trial
PURPOSE_WIENER = "wiener"        # idiosyncratic normals, rows indexed by name
PURPOSE_EXP_CLOCK = "exp-clock"  # Exp(1) default thresholds, one per name
PURPOSE_LGD = "lgd"              # loss-given-default uniforms, one per name
PURPOSE_FP_INNER = "fp-inner"    # fixed-point inner Brownian increments


def _seed_sequence(master_seed: int, stream_id: tuple[str, int, int]) -> np.random.SeedSequence:
    tag, trial, name = stream_id
    if trial < 0 or name < 0:
        raise ValueError("trial and name indices must be nonnegative")
    return np.random.SeedSequence(
        entropy=int(master_seed) & _MASK64,
        spawn_key=(zlib.crc32(tag.encode("utf-8")), int(trial), int(name)),
    )


def derive_stream(master_seed: int, stream_id: tuple[str, int, int]) -> np.random.Generator:
    """Map (seed, (purpose-tag, trial, name)) to an independent PCG64 stream.

    The tag is folded in through crc32 (stable across platforms and runs);
    the full tuple feeds a SeedSequence so distinct ids cannot collide.
    """
    return np.random.Generator(np.random.PCG64(_seed_sequence(master_seed, stream_id)))


def derive_key64(master_seed: int, stream_id: tuple[str, int, int]) -> int:
    """64-bit stream key with the same addressing as derive_stream, for the
    counter-based gaussian generator (see gauss.py)."""
    return int(_seed_sequence(master_seed, stream_id).generate_state(1, np.uint64)[0])
