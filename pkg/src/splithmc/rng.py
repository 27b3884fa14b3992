"""Seeding policy: counter-based Philox generators keyed by (seed, stream).

Every chain and every replica gets its own stream index, so parallel runs
are reproducible regardless of scheduling and a single seed pins down an
entire experiment.
"""

from __future__ import annotations

import numpy as np

__all__ = ["make_rng"]


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(ss))
