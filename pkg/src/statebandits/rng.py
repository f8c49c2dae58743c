"""Deterministic RNG substream derivation.

Every random quantity in the package is drawn from a named substream so that
results are reproducible from a single master seed and independent of how
work is scheduled across processes. A substream is addressed by a path of
integers and short strings, e.g. ``substream(seed, env_index, run_index,
"rewards")``; equal paths always yield identical generators.
"""

import zlib

import numpy as np


def _coerce(part) -> int:
    if isinstance(part, (bool, float)):
        raise TypeError(f"substream path parts must be int or str, got {part!r}")
    if isinstance(part, (int, np.integer)):
        # SeedSequence entropy must be non-negative; map via two's complement.
        return int(part) & ((1 << 64) - 1)
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    raise TypeError(f"substream path parts must be int or str, got {part!r}")


def substream(*path) -> np.random.Generator:
    """Return a Generator for the named substream. Same path, same stream."""
    if not path:
        raise TypeError("substream needs at least one path element")
    return np.random.default_rng(np.random.SeedSequence([_coerce(p) for p in path]))
