"""Counter-based random numbers.

Every draw is a pure function of ``(seed, counter)`` so fields can be
generated in any order, or in parallel, and still be bit-reproducible.
The mixer is the SplitMix64 finaliser.
"""

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def mix64(z):
    """SplitMix64 finaliser applied elementwise to a uint64 array."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def check_seed(seed):
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise TypeError(f"seed must be an integer, got {type(seed).__name__}")
    seed = int(seed)
    if not 0 <= seed <= _MASK64:
        raise ValueError(f"seed must fit in 64 unsigned bits, got {seed}")
    return seed


def derive_seed(master, *keys):
    """Mix a master seed with integer keys into a new 64-bit seed."""
    z = np.uint64(check_seed(master))
    for key in keys:
        with np.errstate(over="ignore"):
            z = mix64(z + _GOLDEN * np.uint64(int(key) & _MASK64) + np.uint64(1))
    return int(mix64(z))


def raw_bits(seed, counters):
    """64 pseudo-random bits for every counter in ``counters``."""
    key = mix64(np.uint64(check_seed(seed)))
    counters = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(key + (counters + np.uint64(1)) * _GOLDEN)


def uniforms(seed, counters):
    """Uniform draws on the open interval (0, 1), 53-bit resolution."""
    bits = raw_bits(seed, counters) >> np.uint64(11)
    return (bits.astype(np.float64) + 0.5) * 2.0**-53
