"""Seeded random streams keyed by (master seed, purpose, index...).

Each simulated window draws from its own Philox stream derived through
:class:`numpy.random.SeedSequence` spawn keys, so results do not depend on
the order (or the process) in which windows are generated.
"""
import numpy as np

# first spawn-key element, by purpose
COUNTS, DRIFT, BIAS, REPEATS = 0, 1, 2, 3


def stream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))
