"""Random streams.

Every stream is a counter-based Philox generator keyed by a ``SeedSequence``.
Replicate ``i`` of an experiment with master seed ``s`` always gets the stream
keyed by ``(s, spawn_key=(i,))``, independent of how replicates are scheduled.
"""
import numpy as np

__all__ = ["make_rng", "replicate_rng", "auxiliary_rng"]

# spawn-key prefix reserved for streams that are not replicates (reference samples etc.)
_AUX = 2**32 - 1


def make_rng(seed=None) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def replicate_rng(master_seed: int, index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(master_seed, spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(ss))


def auxiliary_rng(master_seed: int, tag: int) -> np.random.Generator:
    ss = np.random.SeedSequence(master_seed, spawn_key=(_AUX, int(tag)))
    return np.random.Generator(np.random.Philox(ss))
