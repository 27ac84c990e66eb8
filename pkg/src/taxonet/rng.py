"""Deterministic seed derivation.

All stochastic components take an explicit integer seed and derive
per-component streams with SplitMix64, so results never depend on call
order or global RNG state.
"""

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(seed: int, index: int = 0) -> int:
    """Return the ``index``-th output of the SplitMix64 stream for ``seed``."""
    z = (seed + (index + 1) * _GAMMA) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def derive_seed(seed: int, *indices: int) -> int:
    """Chain SplitMix64 over ``indices`` to get an independent child seed."""
    out = seed & _MASK64
    for ix in indices:
        out = splitmix64(out, ix)
    return out
