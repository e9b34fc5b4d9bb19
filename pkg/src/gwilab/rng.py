"""Reproducible random-number streams for sharded Monte Carlo.

All stochastic code in this package draws from a counter-based 64-bit
generator (Philox), keyed by an explicit seed. Shard streams are derived
from a root seed by the splitting rule

    shard_seed(root, i) = mix64(root XOR i)

where ``mix64`` is the splitmix64 finalizer, a bijection on 64-bit words.
Distinct keys give statistically independent Philox streams, so shards can
run concurrently and still reduce to a bit-identical result when their
outputs are combined in shard order.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def mix64(x: int) -> int:
    """splitmix64 finalizer: a 64-bit mixing permutation."""
    x &= _MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK64
    x ^= x >> 31
    return x


def shard_seed(root: int, index: int) -> int:
    """Derive the seed of shard ``index`` from a root seed."""
    if index < 0:
        raise ValueError("shard index must be non-negative")
    return mix64((root & _MASK64) ^ index)


def rng_from_seed(seed: int) -> np.random.Generator:
    """Counter-based generator keyed by ``seed`` (deterministic per seed)."""
    return np.random.Generator(np.random.Philox(key=seed & _MASK64))
