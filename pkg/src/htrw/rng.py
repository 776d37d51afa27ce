"""Reproducible per-replica random streams.

Every replica owns a xoshiro256** state derived from ``(seed, replica)``
by a counter-based construction: a 256-bit root key is expanded from the
seed with :class:`numpy.random.SeedSequence`, and word ``j`` of replica
``i`` is ``splitmix64(root[j] + (i + 1) * golden)``. The map is injective
in ``i`` for each word, so streams are distinct, and the result depends
only on ``(seed, i)``, never on how replicas are scheduled.
"""
from __future__ import annotations

import numpy as np
from numba import njit, uint64

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)

# (m + 1) * 2**-53 maps the top 53 bits of a word onto (0, 1]
DOUBLE_UNIT = 1.0 / 9007199254740992.0


def _splitmix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def derive_states(seed: int, replicas: int, first: int = 0) -> np.ndarray:
    """xoshiro256** states for replicas ``first .. first + replicas - 1``.

    Returns a ``(replicas, 4)`` uint64 array.
    """
    if seed < 0:
        raise ValueError("seed must be non-negative")
    root = np.random.SeedSequence(seed).generate_state(4, np.uint64)
    idx = np.arange(first + 1, first + replicas + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        states = _splitmix(root[None, :] + idx[:, None] * _GOLDEN)
    return np.ascontiguousarray(states)


@njit(inline="always")
def _rotl(x, k):
    return (x << uint64(k)) | (x >> uint64(64 - k))


@njit(inline="always")
def next_u64(s):
    """Advance the 4-word state ``s`` in place and return the next word."""
    s0 = s[0]
    s1 = s[1]
    s2 = s[2]
    s3 = s[3]
    result = _rotl(s1 * uint64(5), 7) * uint64(9)
    t = s1 << uint64(17)
    s2 ^= s0
    s3 ^= s1
    s1 ^= s2
    s0 ^= s3
    s2 ^= t
    s3 = _rotl(s3, 45)
    s[0] = s0
    s[1] = s1
    s[2] = s2
    s[3] = s3
    return result


@njit(inline="always")
def next_double(s):
    """Uniform double on (0, 1]."""
    return ((next_u64(s) >> uint64(11)) + uint64(1)) * DOUBLE_UNIT


@njit(cache=True)
def _fill_words(s, out):
    for i in range(out.shape[0]):
        out[i] = next_u64(s)


class Stream:
    """A single xoshiro256** stream for library-level sampling.

    Not thread-safe; give each thread its own stream.
    """

    def __init__(self, state: np.ndarray):
        state = np.asarray(state, dtype=np.uint64)
        if state.shape != (4,) or not state.any():
            raise ValueError("state must be 4 uint64 words, not all zero")
        self.state = state.copy()

    @classmethod
    def from_seed(cls, seed: int, index: int = 0) -> "Stream":
        return cls(derive_states(seed, 1, first=index)[0])

    def words(self, n: int) -> np.ndarray:
        out = np.empty(n, dtype=np.uint64)
        _fill_words(self.state, out)
        return out

    def uniforms(self, n: int) -> np.ndarray:
        """Doubles on (0, 1]."""
        return ((self.words(n) >> np.uint64(11)) + np.uint64(1)) * DOUBLE_UNIT
