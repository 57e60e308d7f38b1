"""Deterministic stream derivation for all randomness in the package.

Every random quantity flows from a single user-supplied 64-bit seed through
a derivation tree keyed by integer/str path components, e.g.

    derive(seed, "predict", area_id)
    derive(seed, "sim", replicate, "bootstrap", b)

Streams are independent ``numpy`` Philox-backed generators keyed by a
``SeedSequence`` spawn key, so the result does not depend on the order in
which streams are created or consumed.  This is what makes parallel
execution (process pools over replicates or areas) bit-reproducible.
"""

from __future__ import annotations

import zlib

import numpy as np

__all__ = ["derive", "spawn_key"]


def _key_part(part: int | str) -> int:
    if isinstance(part, str):
        # crc32 is stable across platforms and processes, unlike hash().
        return zlib.crc32(part.encode("utf-8"))
    if part < 0:
        raise ValueError(f"negative path component {part!r} in rng derivation")
    return int(part)


def spawn_key(*path: int | str) -> tuple[int, ...]:
    """Map a derivation path to a SeedSequence spawn key."""
    return tuple(_key_part(p) for p in path)


def derive(seed: int, *path: int | str) -> np.random.Generator:
    """Return the generator at ``path`` in the derivation tree rooted at ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=spawn_key(*path))
    return np.random.Generator(np.random.Philox(ss))
