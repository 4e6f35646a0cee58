"""Seeded random streams.

Every random quantity is drawn from a PCG64 generator whose seed sequence is
``SeedSequence(master_seed, spawn_key=(stream, *sub))``. The stream indices
below are part of the on-disk reproducibility contract; do not renumber them.

==========  =====  ==========================================
stream      index  sub-keys
==========  =====  ==========================================
WEIGHTS     0      none (internal connectivity W)
INPUT       1      none (input weights V)
DRIVE       2      none (driving signal)
INITIAL     3      replica index
NOISE       4      replica index (dynamical noise xi)
MEASURE     5      replica index (measurement noise lambda*xi)
TEST_SYSTEM 6      none (2-D test system coefficients)
REALIZATION 7      realization index (derives per-run seeds)
==========  =====  ==========================================
"""

import numpy as np

WEIGHTS = 0
INPUT = 1
DRIVE = 2
INITIAL = 3
NOISE = 4
MEASURE = 5
TEST_SYSTEM = 6
REALIZATION = 7


def stream(seed: int, *key: int) -> np.random.Generator:
    """Return the generator for ``(seed, key)``; identical arguments give identical streams."""
    if seed < 0:
        raise ValueError("seed must be a nonnegative integer")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, *key: int) -> int:
    """A 64-bit child seed, used when a whole sub-experiment needs its own master seed."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
