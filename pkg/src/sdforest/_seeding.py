"""Seed derivation.

Every random draw in the package comes from a ``numpy.random.Generator``
seeded by a 64-bit integer derived from the root seed and an integer path,
e.g. ``derive_seed(root, level, slot, fold)``.  Any sub-task is therefore
reproducible in isolation, independent of execution order.
"""

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_seed(root: int, *path: int) -> int:
    ss = np.random.SeedSequence(entropy=int(root) & _MASK64,
                                spawn_key=tuple(int(p) & _MASK64 for p in path))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int, *path: int) -> np.random.Generator:
    if path:
        seed = derive_seed(seed, *path)
    return np.random.Generator(np.random.PCG64(int(seed) & _MASK64))
