"""Counter-based seeding: every trial gets its own independent stream.

The generator for ``(base_seed, *keys)`` does not depend on how many other
trials ran before it, so trials can be executed in any order or in parallel.
"""

import numpy as np


def trial_seed(base_seed, *keys):
    """Seed sequence for the stream identified by ``keys``."""
    return np.random.SeedSequence(int(base_seed), spawn_key=tuple(int(k) for k in keys))


def trial_rng(base_seed, *keys):
    return np.random.default_rng(trial_seed(base_seed, *keys))
