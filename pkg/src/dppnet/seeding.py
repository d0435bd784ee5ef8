"""Named random substreams derived from a single master seed.

Every source of randomness in the package (splitting, parameter init,
held-out selection, negative sampling, bootstrap) draws from its own
substream so that changing one component does not perturb the others.
"""

import hashlib

import numpy as np


def _stream_key(name: str) -> int:
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def substream(seed: int, name: str) -> np.random.Generator:
    """Return a generator for the named substream of ``seed``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), _stream_key(name)]))
