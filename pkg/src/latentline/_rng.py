"""Counter-based uniforms keyed by (seed, stream, a, b).

Every draw is a pure function of its key, so generation can be split across
any number of workers without changing a single bit of the output.
"""
import numpy as np
import numba as nb

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0

STREAM_POSITIONS = 1
STREAM_EDGES = 2
STREAM_TRIAL = 3


@nb.njit(cache=True)
def mix64(z):
    z = np.uint64(z)
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@nb.njit(cache=True)
def key_hash(seed, stream, a, b):
    h = mix64(np.uint64(seed) + _GOLDEN * np.uint64(stream + 1))
    h = mix64(h ^ (np.uint64(a) * _GOLDEN + _M1))
    h = mix64(h ^ (np.uint64(b) * _M2 + _GOLDEN))
    return h


@nb.njit(cache=True)
def key_uniform(seed, stream, a, b):
    """Uniform double in [0, 1) with 53 random bits."""
    return float(key_hash(seed, stream, a, b) >> np.uint64(11)) * _INV53


def derive_seed(seed, *parts):
    """Deterministic child seed from a parent seed and integer labels."""
    h = int(seed) & 0xFFFFFFFFFFFFFFFF
    for p in parts:
        h = int(key_hash(np.uint64(h), STREAM_TRIAL, np.uint64(int(p) & 0xFFFFFFFFFFFFFFFF), np.uint64(0)))
    return h
