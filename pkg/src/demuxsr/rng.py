"""Reproducible random substreams.

Repetition ``k`` of any experiment draws from a PCG64 generator seeded by
``SeedSequence(master_seed, spawn_key=(k,))``.  The stream therefore
depends only on the master seed and the repetition counter, never on how
many repetitions run or on which worker thread runs them.
"""

from __future__ import annotations

import numpy as np


def substream(seed: int, index: int, n_children: int | None = None):
    """Generator for repetition ``index``; with ``n_children`` a list of independent ones."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(index),))
    if n_children is None:
        return np.random.Generator(np.random.PCG64(ss))
    return [np.random.Generator(np.random.PCG64(child)) for child in ss.spawn(n_children)]
