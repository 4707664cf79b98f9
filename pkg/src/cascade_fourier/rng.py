"""
Counter-based random numbers for cascade trees.

Philox-4x32-10 evaluated on whole numpy arrays of counters. A draw is a pure
function of (seed, level, index, slot, stream), so a tree can be deepened or
traversed in any order without ever resampling an ancestor.
"""

from typing import Union

import numpy as np

from cascade_fourier.errors import InvalidParams

PHILOX_M0 = np.uint64(0xD2511F53)
PHILOX_M1 = np.uint64(0xCD9E8D57)
PHILOX_W0 = np.uint64(0x9E3779B9)
PHILOX_W1 = np.uint64(0xBB67AE85)
PHILOX_ROUNDS = 10

MASK32 = np.uint64(0xFFFFFFFF)
SHIFT32 = np.uint64(32)
SHIFT11 = np.uint64(11)
INDEX_BITS = np.uint64(60)
STREAM_BITS = np.uint64(4)
MAX_INDEX = 2**60

# stream tags, low 4 bits of counter word 3
STREAM_WEIGHTS = 0
STREAM_MONTE_CARLO = 1

ArrayLike = Union[int, np.ndarray]


def _split_seed(seed: int) -> tuple[np.uint64, np.uint64]:
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    return np.uint64(seed & 0xFFFFFFFF), np.uint64(seed >> 32)


def philox4x32(
    seed: int,
    c0: ArrayLike,
    c1: ArrayLike,
    c2: ArrayLike,
    c3: ArrayLike,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Evaluate Philox-4x32-10 on broadcast arrays of 32-bit counter words.

    Args:
        seed: 64-bit key
        c0, c1, c2, c3: counter words (values below 2**32)

    Returns:
        Four uint64 arrays holding the 32-bit output words
    """
    k0, k1 = _split_seed(seed)
    x0, x1, x2, x3 = np.broadcast_arrays(
        np.asarray(c0, dtype=np.uint64),
        np.asarray(c1, dtype=np.uint64),
        np.asarray(c2, dtype=np.uint64),
        np.asarray(c3, dtype=np.uint64),
    )
    x0, x1, x2, x3 = x0 & MASK32, x1 & MASK32, x2 & MASK32, x3 & MASK32

    for _ in range(PHILOX_ROUNDS):
        prod0 = x0 * PHILOX_M0
        prod1 = x2 * PHILOX_M1
        hi0, lo0 = prod0 >> SHIFT32, prod0 & MASK32
        hi1, lo1 = prod1 >> SHIFT32, prod1 & MASK32
        x0, x1, x2, x3 = hi1 ^ x1 ^ k0, lo1, hi0 ^ x3 ^ k1, lo0
        k0 = (k0 + PHILOX_W0) & MASK32
        k1 = (k1 + PHILOX_W1) & MASK32

    return x0, x1, x2, x3


def uniforms(
    seed: int,
    level: ArrayLike,
    index: ArrayLike,
    slot: ArrayLike,
    stream: int = STREAM_WEIGHTS,
) -> np.ndarray:
    """
    Uniform draws in the open interval (0, 1), one per broadcast counter.

    The low 32 bits of the node index fill counter word 1; the high bits share
    word 3 with the stream tag, so every index below 2**60 gets its own counter.
    53 bits are taken from the first two output words, offset by half an ulp so
    that 0 and 1 are never produced (the normal quantile stays finite).

    Raises:
        InvalidParams: an index at or above 2**60
    """
    index = np.asarray(index, dtype=np.uint64)
    if np.any(index >> INDEX_BITS):
        raise InvalidParams(f"node index must be below 2**{int(INDEX_BITS)}")
    high = (index >> SHIFT32) << STREAM_BITS
    out0, out1, _, _ = philox4x32(seed, slot, index & MASK32, level, high | np.uint64(stream))
    bits = ((out0 << SHIFT32) | out1) >> SHIFT11
    return (bits.astype(np.float64) + 0.5) * 2.0**-53
