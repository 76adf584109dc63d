"""Counter-based random streams.

Every random draw is a pure function of ``(key, counter)``: the SplitMix64
finaliser applied to ``key + (counter + 1) * GOLDEN``. A task's stream can be
regenerated in isolation, in any order, on any worker. Gaussian variates use
Box-Muller on consecutive counter pairs, so one pair yields one isotropic
2D sample.
"""

from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    """SplitMix64 finaliser on a Python int."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def derive_seed(base: int, *components: int) -> int:
    """Fold integer components into a 64-bit task key. Order matters."""
    h = mix64(base + GOLDEN)
    for c in components:
        h = mix64(h ^ mix64((c & MASK64) + GOLDEN))
    return h


def stable_id(text: str) -> int:
    """64-bit identifier for a string, stable across processes and platforms."""
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "little")


def raw64(key: int, counters) -> np.ndarray:
    c = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(key & MASK64) + (c + np.uint64(1)) * np.uint64(GOLDEN)
    return _mix64_array(z)


def uniform(key: int, counters) -> np.ndarray:
    """Doubles in [0, 1) with 53 random bits."""
    return (raw64(key, counters) >> np.uint64(11)).astype(np.float64) * 2.0**-53


def normal_pairs(key: int, slots) -> np.ndarray:
    """Standard-normal 2-vectors, one per slot, shape ``slots.shape + (2,)``.

    Slot ``s`` consumes counters ``2s`` and ``2s + 1``.
    """
    s = np.asarray(slots, dtype=np.uint64)
    u1 = 1.0 - uniform(key, s * np.uint64(2))
    u2 = uniform(key, s * np.uint64(2) + np.uint64(1))
    r = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)
