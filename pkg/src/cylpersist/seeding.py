"""Counter-based seed streams.

A single root seed expands into independent per-replication seeds by
hashing ``(root, *key)`` through :class:`numpy.random.SeedSequence`.  The
derived seed depends only on the key, never on how many seeds were drawn
before it, so replications can run in any order or on any worker.
"""

from __future__ import annotations

import numpy as np

_MASK63 = (1 << 63) - 1


def derive_seed(root: int, *key: int) -> int:
    """Return the 63-bit seed for stream ``key`` under ``root``."""
    ss = np.random.SeedSequence(entropy=int(root), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0]) & _MASK63


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def tag(name: str) -> int:
    """Stable integer for a short string, usable as a stream key component."""
    return int.from_bytes(name.encode("utf-8")[:8].ljust(8, b"\0"), "little") & _MASK63
