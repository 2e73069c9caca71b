"""Reproducible parallel random streams.

Every trajectory owns one Philox counter-based stream derived from a
128-bit key ``(master_seed << 64) | stream_index``.  Any worker can
recreate stream i without coordination, no two streams overlap, and the
worker count never changes which stream a trajectory uses.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

# Stream index layout.  A batch (one entry of an X0 sweep, or one stage of
# a two-species scenario) gets the high 32 bits; trajectories use the low
# bits.  Two-species trajectories consume two adjacent streams, one per
# species.
_BATCH_SHIFT = 32


def philox_key(master_seed: int, stream: int) -> int:
    """128-bit Philox key with the master seed in the high word."""
    return ((master_seed & _MASK64) << 64) | (stream & _MASK64)


def stream_generator(master_seed: int, stream: int) -> np.random.Generator:
    """Fresh generator for one stream; owned by exactly one worker."""
    return np.random.Generator(np.random.Philox(key=philox_key(master_seed, stream)))


def trajectory_stream(batch_index: int, trajectory_index: int) -> int:
    """Stream index of a single-species trajectory (== trajectory index for batch 0)."""
    if not 0 <= trajectory_index < (1 << _BATCH_SHIFT):
        raise ValueError("trajectory index out of range")
    return (batch_index << _BATCH_SHIFT) | trajectory_index

def pair_stream(batch_index: int, trajectory_index: int, species: int) -> int:
    """Stream index for one species (0 or 1) of a two-species trajectory."""
    if species not in (0, 1):
        raise ValueError("species must be 0 or 1")
    if not 0 <= trajectory_index < (1 << (_BATCH_SHIFT - 1)):
        raise ValueError("trajectory index out of range")
    return (batch_index << _BATCH_SHIFT) | (trajectory_index << 1) | species


class StreamPool:
    """Reusable bit generators for batch sampling.

    Resetting a Philox state in place is roughly an order of magnitude
    cheaper than constructing a fresh bit generator and produces the
    bit-identical stream, so cohort engines recycle one pool per worker.
    """

    def __init__(self, size: int):
        self._bitgens = [np.random.Philox(key=0) for _ in range(size)]
        self.generators = [np.random.Generator(bg) for bg in self._bitgens]

    def __len__(self):
        return len(self._bitgens)

    def reset(self, row: int, master_seed: int, stream: int) -> np.random.Generator:
        """Rewind row to the start of (master_seed, stream)."""
        self._bitgens[row].state = {
            "bit_generator": "Philox",
            "state": {
                "counter": np.zeros(4, np.uint64),
                "key": np.array([stream & _MASK64, master_seed & _MASK64], np.uint64),
            },
            "buffer": np.zeros(4, np.uint64),
            "buffer_pos": 4,
            "has_uint32": 0,
            "uinteger": 0,
        }
        return self.generators[row]
