"""Counter-based random substreams.

Every random draw in a simulation run comes from a generator keyed by
(seed, round, purpose).  Streams for different purposes never share state,
so adding or removing instrumentation (or an extra draw in one module)
cannot perturb draws made elsewhere.  The same keying makes pools and
feedback coin flips common random numbers across algorithms run under the
same seed.
"""

from __future__ import annotations

import numpy as np

# Fixed salts keep run streams and environment-generation streams disjoint.
_RUN_SALT = 0x5EED_0001
_ENV_SALT = 0x5EED_0002

# Stable purpose codes; append only, never renumber.
POOL = 0
KEYTERM_SELECT = 1
KEYTERM_FEEDBACK = 2
ARM_SELECT = 3
ARM_FEEDBACK = 4
CHOICE_FEEDBACK = 5
KEYTERM_CHOICE_FEEDBACK = 6
ASSORTMENT_RANDOM = 7


def substream(seed: int, t: int, purpose: int) -> np.random.Generator:
    """Generator for one (seed, round, purpose) cell of a run."""
    ss = np.random.SeedSequence(entropy=(_RUN_SALT, int(seed), int(t), int(purpose)))
    return np.random.Generator(np.random.PCG64(ss))


def env_rng(seed: int) -> np.random.Generator:
    """Generator used for synthetic environment construction."""
    ss = np.random.SeedSequence(entropy=(_ENV_SALT, int(seed)))
    return np.random.Generator(np.random.PCG64(ss))


class RunStream:
    """Seed-bound factory handed to policies; ``at(t, purpose)`` opens a stream."""

    __slots__ = ("seed",)

    def __init__(self, seed: int):
        self.seed = int(seed)

    def at(self, t: int, purpose: int) -> np.random.Generator:
        return substream(self.seed, t, purpose)
