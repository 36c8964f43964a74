"""Counter-based random streams keyed by ``(seed, index, stream)``.

Each path index gets its own Philox counter block, so a path never depends
on how many other paths were drawn, in which order, or on which worker.
"""

import numpy as np

# stream tags keep the samplers and the stopped-BM simulator independent
SAMPLER_STREAM = 0
AZEMA_YOR_STREAM = 1


def path_rng(seed: int, index: int, stream: int = SAMPLER_STREAM) -> np.random.Generator:
    if seed < 0 or index < 0:
        raise ValueError("seed and index must be non-negative")
    bitgen = np.random.Philox(key=int(seed), counter=[0, 0, int(index), int(stream)])
    return np.random.Generator(bitgen)
