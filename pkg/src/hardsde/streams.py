"""Counter-based random streams.

Each stream is a Philox generator keyed by the master seed and positioned by a
counter whose second word is the stream index and third word a purpose tag.
Streams with different (index, purpose) never overlap unless one of them draws
2**64 blocks. Normals come from numpy's ziggurat ``standard_normal``.
"""

from __future__ import annotations

import numpy as np

PURPOSE_EULER = 1
PURPOSE_DIRECT = 2
PURPOSE_STRATEGY = 3

_MASK64 = (1 << 64) - 1


def stream(master_seed: int, index: int, purpose: int = 0) -> np.random.Generator:
    if master_seed < 0 or index < 0 or purpose < 0:
        raise ValueError("seed, index and purpose must be non-negative")
    bitgen = np.random.Philox(key=master_seed & _MASK64, counter=[0, index & _MASK64, purpose & _MASK64, 0])
    return np.random.Generator(bitgen)


def replication_stream(master_seed: int, replication: int) -> np.random.Generator:
    return stream(master_seed, replication, PURPOSE_EULER)
