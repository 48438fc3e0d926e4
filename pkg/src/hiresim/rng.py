"""Counter-based keyed Gaussian streams.

Every draw is a pure function of ``(seed, run_index, round, slot, purpose,
component)``.  Nothing is consumed sequentially, so replications can run in
any order, on any worker, and any single round can be replayed on its own.

The generator hashes the counter tuple through the SplitMix64 finalizer
(three chained mixes per uniform) and converts pairs of 53-bit uniforms to
standard normals with the Box-Muller cosine branch.
"""

from __future__ import annotations

import numpy as np

from hiresim import backend

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15

# purpose tags
PURPOSE_X = 1
PURPOSE_EPS = 2
PURPOSE_ETA = 3

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_G = np.uint64(GAMMA)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_TWO_PI = 2.0 * np.pi
_INV_2_53 = 1.0 / 9007199254740992.0


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a Python int (reference scalar version)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _mix_arr(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def stream_key(seed: int, run_index: int) -> int:
    """64-bit key identifying one replication's streams."""
    if seed < 0 or run_index < 0:
        raise ValueError("seed and run_index must be nonnegative")
    return mix64(mix64(seed + GAMMA) ^ mix64((run_index + 1) * GAMMA & MASK64))


def _lane(purpose: int, comp: int, which: int) -> int:
    return (purpose << 20) | (comp << 1) | which


def scalar_normal(key: int, rnd: int, slot: int, purpose: int, comp: int = 0) -> float:
    """One standard normal, computed with Python integers and ``math``.

    Slow; used as the independent reference for the vectorized paths.
    """
    import math

    h0 = mix64(key + rnd * GAMMA)
    h1 = mix64(h0 + slot * GAMMA)
    u = []
    for which in (0, 1):
        h2 = mix64(h1 + _lane(purpose, comp, which) * GAMMA)
        u.append(((h2 >> 11) + 0.5) * _INV_2_53)
    return math.sqrt(-2.0 * math.log(u[0])) * math.cos(_TWO_PI * u[1])


def standard_normals(
    key: int,
    purpose: int,
    rounds: np.ndarray | range,
    n_slots: int,
    n_comp: int = 1,
) -> np.ndarray:
    """Standard normals of shape ``(len(rounds), n_slots, n_comp)``.

    Entry ``[r, s, c]`` depends only on ``(key, rounds[r], s, purpose, c)``.
    """
    rounds = np.asarray(rounds, dtype=np.uint64).reshape(-1, 1, 1)
    slots = np.arange(n_slots, dtype=np.uint64).reshape(1, -1, 1)
    comps = np.arange(n_comp, dtype=np.uint64).reshape(1, 1, -1)
    k = np.uint64(key)
    with np.errstate(over="ignore"):
        h0 = _mix_arr(k + rounds * _G)
        h1 = _mix_arr(h0 + slots * _G)
        base = (np.uint64(purpose) << np.uint64(20)) | (comps << np.uint64(1))
        h_a = _mix_arr(h1 + base * _G)
        h_b = _mix_arr(h1 + (base | np.uint64(1)) * _G)
    u1 = ((h_a >> _S11).astype(np.float64) + 0.5) * _INV_2_53
    u2 = ((h_b >> _S11).astype(np.float64) + 0.5) * _INV_2_53
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(_TWO_PI * u2)


def normals(key: int, purpose: int, rounds, n_slots: int, n_comp: int = 1) -> np.ndarray:
    """:func:`standard_normals`, via the compiled kernel when it is loaded."""
    if backend.use_compiled():
        r = np.ascontiguousarray(rounds, dtype=np.int64).ravel()
        return backend._core.standard_normals(key, purpose, r, n_slots, n_comp)
    return standard_normals(key, purpose, rounds, n_slots, n_comp)
