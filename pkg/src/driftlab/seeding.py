"""Per-path seed derivation.

Each simulated path owns an independent RNG stream seeded by mixing the
master seed with the path index through splitmix64.  The construction is
order-free, so paths can be generated in any order (or on any worker)
and still reproduce byte-identically.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1


def mix64(z: int) -> int:
    """splitmix64 finalizer: a 64-bit bijective scramble."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return (z ^ (z >> 31)) & _MASK


def path_seed(master: int, index: int) -> int:
    """Seed for path ``index`` under ``master``; collision-free in index."""
    if index < 0:
        raise ValueError("path index must be nonnegative")
    return mix64((master & _MASK) ^ (index & _MASK))
