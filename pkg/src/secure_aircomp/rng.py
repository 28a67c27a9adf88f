"""Deterministic random streams.

Every stream is keyed by ``(master_seed, purpose, *indices)`` and built with
:class:`numpy.random.SeedSequence`, whose hashing of the entropy and spawn key
is documented by NumPy. Any consumer that reproduces the key reproduces the
stream, regardless of which worker draws it.
"""

import numpy as np

PURPOSES = {
    "channel": 1,
    "inputs": 2,
    "design": 3,
    "check": 4,
    "acceptance": 5,
}


def stream(master_seed: int, purpose: str, *indices: int) -> np.random.Generator:
    key = (PURPOSES[purpose],) + tuple(int(i) for i in indices)
    seq = np.random.SeedSequence(entropy=int(master_seed) & (2**64 - 1), spawn_key=key)
    return np.random.Generator(np.random.PCG64(seq))
