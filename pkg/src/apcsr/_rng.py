import numpy as np


def rep_rng(seed: int, rep: int) -> np.random.Generator:
    """Independent generator for replication ``rep`` of an experiment.

    Streams depend only on ``(seed, rep)``, so serial and parallel execution
    produce identical draws.
    """
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(rep),)))


def sub_rng(seed: int, *path: int) -> np.random.Generator:
    """Generator for an arbitrary spawn path below ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in path)))
