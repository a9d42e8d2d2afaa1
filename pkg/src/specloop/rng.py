"""Named deterministic random substreams.

Every source of randomness in a run is derived from one 64-bit root seed
plus a path of names (e.g. ("oracle",), ("replica", 3), ("trial", 7)).
Streams with different paths are statistically independent, and the same
(seed, path) always yields the same stream regardless of platform or of
which other streams were drawn from first.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["substream", "subseed"]


def _token(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFFFFFFFFFF
    digest = hashlib.sha256(str(part).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def subseed(seed: int, *path) -> int:
    """Derive a 64-bit child seed from a root seed and a name path."""
    h = hashlib.sha256()
    h.update(int(seed).to_bytes(16, "little", signed=True))
    for part in path:
        h.update(_token(part).to_bytes(8, "little"))
        h.update(b"/")
    return int.from_bytes(h.digest()[:8], "little")


def substream(seed: int, *path) -> np.random.Generator:
    """Independent generator for the given name path under a root seed."""
    return np.random.default_rng(np.random.SeedSequence(subseed(seed, *path)))
