"""Counter-based hashing used for every random draw in the package.

Each primitive value is a pure function of ``(seed, tag, a, b, c)``.  The
scalar functions operate on Python ints; the ``*_np`` variants operate on
``uint64`` arrays and return bit-identical results.
"""
from __future__ import annotations

import math

import numpy as np

MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

# stream tags
STEP = 0x51
HOLD = 0x52
BRAVE = 0x53
INIT = 0x54
INIT_U = 0x55
INIT_ALPHA = 0x56
INIT_BETA = 0x57
GW = 0x58
REPLICA = 0x59
IDLA = 0x5A
MISC = 0x5B

_TWO53 = 2.0 ** -53


def mix(z: int) -> int:
    """SplitMix64 finalizer on a Python int."""
    z = (z + _GOLDEN) & MASK
    z = ((z ^ (z >> 30)) * _M1) & MASK
    z = ((z ^ (z >> 27)) * _M2) & MASK
    return z ^ (z >> 31)


def hash64(seed: int, tag: int, a: int = 0, b: int = 0, c: int = 0) -> int:
    h = mix(seed & MASK)
    h = mix(h ^ tag)
    h = mix(h ^ (a & MASK))
    h = mix(h ^ (b & MASK))
    return mix(h ^ (c & MASK))


def uniform(seed: int, tag: int, a: int = 0, b: int = 0, c: int = 0) -> float:
    """Uniform draw on [0, 1) with 53 bits of resolution."""
    return (hash64(seed, tag, a, b, c) >> 11) * _TWO53


def index(h: int, n: int) -> int:
    """Map a 64-bit hash to ``{0, ..., n-1}`` with exact integer arithmetic."""
    return ((h >> 11) * n) >> 53


def exponential(seed: int, tag: int, a: int = 0, b: int = 0, c: int = 0) -> float:
    return -math.log1p(-uniform(seed, tag, a, b, c))


def derive_seed(master: int, *path: int) -> int:
    """Child seed for a replica or sub-stream; distinct paths decorrelate."""
    h = mix(master & MASK)
    for p in path:
        h = mix(h ^ mix(p & MASK))
    return h


def label_key(label) -> int:
    """Stable 64-bit key for an int or a tuple of ints."""
    if isinstance(label, tuple):
        h = mix(len(label))
        for part in label:
            h = mix(h ^ (int(part) & MASK))
        return h
    return int(label) & MASK


# --- numpy twins -----------------------------------------------------------

_U64 = np.uint64


def _as_u64(v) -> np.ndarray:
    if isinstance(v, np.ndarray):
        if v.dtype == np.uint64:
            return v
        return v.astype(np.int64).view(np.uint64) if v.dtype.kind == "i" else v.astype(np.uint64)
    return np.asarray(int(v) & MASK, dtype=np.uint64)


def mix_np(z: np.ndarray) -> np.ndarray:
    z = np.atleast_1d(z).astype(np.uint64, copy=True)
    with np.errstate(over="ignore"):
        z += _U64(_GOLDEN)
        z = (z ^ (z >> _U64(30))) * _U64(_M1)
        z = (z ^ (z >> _U64(27))) * _U64(_M2)
    return z ^ (z >> _U64(31))


def hash64_np(seed, tag: int, a=0, b=0, c=0) -> np.ndarray:
    h = mix_np(_as_u64(seed))
    h = mix_np(h ^ _U64(tag))
    h = mix_np(h ^ _as_u64(a))
    h = mix_np(h ^ _as_u64(b))
    return mix_np(h ^ _as_u64(c))


def uniform_np(seed, tag: int, a=0, b=0, c=0) -> np.ndarray:
    return (hash64_np(seed, tag, a, b, c) >> _U64(11)).astype(np.float64) * _TWO53


def index_np(h: np.ndarray, n: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return ((h >> _U64(11)) * np.asarray(n).astype(np.uint64)) >> _U64(53)


def derive_seed_np(master: int, idx: np.ndarray) -> np.ndarray:
    h = mix_np(_as_u64(master))
    return mix_np(h ^ mix_np(_as_u64(np.asarray(idx, dtype=np.int64))))
