"""Seed derivation for reproducible sub-streams.

Every random operation in the package draws from a generator derived as

    default_rng(SeedSequence([root_seed, STREAM_CODE, *indices]))

where STREAM_CODE is one of the constants below and ``indices`` are small
integers identifying a sub-task (epoch number, batch number, class index).
Derived streams are independent of call order, so reordering or skipping
sub-operations never perturbs the others.
"""

import numpy as np

STREAM_SUBSAMPLE = 1
STREAM_APPLY_NOISE = 2
STREAM_GAUSSIAN = 3
STREAM_POP_NOISE = 4
STREAM_KMEANS = 5
STREAM_PARAM_INIT = 6
STREAM_SHUFFLE = 7
STREAM_PEER = 8
STREAM_MC = 9
STREAM_BLOBS = 10
STREAM_MIDPOINT = 11


def derive_rng(root_seed: int, stream: int, *indices: int) -> np.random.Generator:
    """Generator for (root_seed, stream, *indices), stable across call order."""
    return np.random.default_rng(np.random.SeedSequence([int(root_seed), int(stream), *map(int, indices)]))
