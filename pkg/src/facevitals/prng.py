"""Portable counter-based random numbers.

Synthetic videos and random model weights must be identical across
implementations, so nothing here depends on numpy's generator internals.
The algorithm is SplitMix64 evaluated in counter mode:

    state_i = seed + (i + 1) * 0x9E3779B97F4A7C15          (mod 2**64)
    z = state_i
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9               (mod 2**64)
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB               (mod 2**64)
    out_i = z ^ (z >> 31)

Uniforms are ``((out_i >> 11) + 0.5) * 2**-53`` which lies strictly inside
(0, 1).  Normals use Box-Muller on consecutive uniform pairs
``(u_{2j}, u_{2j+1})``: ``r = sqrt(-2 ln u_{2j})``, giving
``r cos(2 pi u_{2j+1})`` then ``r sin(2 pi u_{2j+1})``.

Because element ``i`` depends only on ``(seed, i)``, any slice of a stream
can be produced without generating what precedes it.
"""

import numpy as np

GOLDEN = 0x9E3779B97F4A7C15
_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_MUL2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1


def splitmix64(seed, start, count):
    """Return ``count`` raw 64-bit outputs beginning at stream index ``start``."""
    idx = np.arange(start + 1, start + 1 + count, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & _MASK) + idx * np.uint64(GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * _MUL1
        z = (z ^ (z >> np.uint64(27))) * _MUL2
    return z ^ (z >> np.uint64(31))


def uniform(seed, start, count):
    raw = splitmix64(seed, start, count)
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def normal(seed, start, count):
    """Standard normals; ``start`` counts normals, not uniforms.

    ``start`` must be even so that Box-Muller pairs stay aligned.
    """
    if start % 2:
        raise ValueError("normal stream offsets must be even")
    pairs = (count + 1) // 2
    u = uniform(seed, start, 2 * pairs).reshape(pairs, 2)
    r = np.sqrt(-2.0 * np.log(u[:, 0]))
    theta = 2.0 * np.pi * u[:, 1]
    out = np.empty((pairs, 2))
    out[:, 0] = r * np.cos(theta)
    out[:, 1] = r * np.sin(theta)
    return out.reshape(-1)[:count]


class Stream:
    """Sequential reader over one seeded stream."""

    def __init__(self, seed):
        self.seed = seed
        self.position = 0

    def uniform(self, count):
        out = uniform(self.seed, self.position, count)
        self.position += count
        return out

    def normal(self, count):
        if self.position % 2:
            self.position += 1
        out = normal(self.seed, self.position, count)
        self.position += count + (count % 2)
        return out
