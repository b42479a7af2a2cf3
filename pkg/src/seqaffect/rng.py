"""Named, reproducible random streams.

Every stochastic component draws from its own substream derived from a base
seed plus string tags, so adding or resizing one component never shifts the
draws of another.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MOD = 2**63


def substream(seed: int, *tags) -> np.random.Generator:
    """Generator seeded by ``seed`` and a stable hash of ``tags``."""
    digest = hashlib.sha256("|".join(str(t) for t in tags).encode("utf-8")).digest()
    words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
    entropy = [int(seed) % _MOD, *words]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
