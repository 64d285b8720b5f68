"""Named, independently seeded RNG streams.

Every randomized component draws from its own named stream so that toggling
one feature never perturbs another's draws.
"""

from __future__ import annotations

import hashlib

import numpy as np


def named_rng(seed: int, name: str) -> np.random.Generator:
    tag = int.from_bytes(hashlib.sha256(name.encode("utf-8")).digest()[:8], "little")
    return np.random.default_rng(np.random.SeedSequence([int(seed), tag]))
