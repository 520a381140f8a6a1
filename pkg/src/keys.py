"""Counter-based keyed random generation.

Every random quantity in the simulator is a pure function of a key tuple.
A 128-bit Philox key is derived once from ``(seed, stream, *words)`` and the
remaining coordinates go into the Philox counter, so values never depend on
evaluation order or on which worker computes them.
"""
from functools import lru_cache

from common import *
from exceptions import InputError

# Stream tags keep unrelated draws apart under the same seed.
STREAM_INSTANCE: int = 1
STREAM_INITIAL_POINT: int = 2
STREAM_MEASUREMENT: int = 3
STREAM_TRIAL: int = 4

# Counter word that marks receiver-independent draws.
SHARED_SLOT: int = 2**64 - 1


@lru_cache(maxsize=4096)
def derive_key(seed: int, stream: int, *words: int) -> Tuple[int, int]:
    """Derive a Philox key from a seed, a stream tag and extra key words."""
    entropy = (seed, stream, *words)
    if any(w < 0 for w in entropy):
        raise InputError(f"key words must be non-negative, got {entropy}")
    state = np.random.SeedSequence(list(entropy)).generate_state(2, dtype=np.uint64)
    return int(state[0]), int(state[1])


def keyed_generator(
    key: Tuple[int, int], counter: Sequence[int] = (0, 0, 0, 0)
) -> np.random.Generator:
    """Build a generator positioned at ``counter`` under ``key``.

    Draws advance the lowest counter word only, so counters that differ in
    any of the upper three words never overlap.
    """
    bit_generator = np.random.Philox(
        key=np.array(key, dtype=np.uint64),
        counter=np.array(counter, dtype=np.uint64),
    )
    return np.random.Generator(bit_generator)


def subseed(seed: int, *words: int) -> int:
    """Fold a seed and key words into one 63-bit integer seed."""
    hi, lo = derive_key(seed, STREAM_TRIAL, *words)
    return ((hi << 64) | lo) & (2**63 - 1)
