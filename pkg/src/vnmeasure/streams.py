"""Enumerable random streams derived from a single master seed.

Every random object in the package is drawn from a generator obtained via
:func:`stream`, keyed by ``(master_seed, *index)``. Two calls with the same
key always give bit-identical draws, no matter which thread or in which
order they run.
"""

import numpy as np

__all__ = ["stream", "spawn"]


def stream(master_seed, *index):
    """Return the generator for sub-stream ``index`` of ``master_seed``."""
    seq = np.random.SeedSequence(int(master_seed) & (2**64 - 1),
                                 spawn_key=tuple(int(i) for i in index))
    return np.random.Generator(np.random.PCG64(seq))


def spawn(master_seed, count, *prefix):
    """List of ``count`` consecutive sub-streams under ``prefix``."""
    return [stream(master_seed, *prefix, i) for i in range(count)]
