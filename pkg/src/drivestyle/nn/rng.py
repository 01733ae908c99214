"""Seeded, labeled random streams on a counter-based generator.

Separate purposes (weight init, dropout masks, shuffling) get separate
Philox streams derived from one master seed plus a label, so adding draws
to one stream never perturbs the others.
"""

from __future__ import annotations

import zlib

import numpy as np


def rng_for(seed: int, label: str) -> np.random.Generator:
    """A Philox generator keyed by ``(seed, crc32(label))``."""
    stream = zlib.crc32(label.encode("utf-8"))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, stream])))
