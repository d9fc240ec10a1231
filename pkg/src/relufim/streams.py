"""Counter-based random streams and deterministic chunked reduction.

Every draw is a pure function of ``(seed, stream, position)``: the 64-bit
words come from Philox4x64 keyed by ``(seed, stream)`` and seeked to the
block containing ``position``.  Standard normals use the cosine branch of
Box-Muller, one normal per pair of consecutive words, so normal number
``k`` of a stream always consumes words ``2k`` and ``2k + 1``.

Nothing here depends on how many workers consume the stream: chunk
boundaries are fixed by the caller and partial results are combined by
pairwise summation in chunk order.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from enum import IntEnum
from typing import Callable, Iterator, TypeVar

import numpy as np

U64_MAX = 2**64 - 1
_WORDS_PER_BLOCK = 4
_TWO_POW_M53 = 2.0**-53


class Stream(IntEnum):
    """Stream tags; a (seed, tag) pair selects an independent Philox key."""

    WEIGHTS = 1
    INPUTS = 2
    FIM_SAMPLES = 3
    ORACLE = 4
    TARGET = 5
    TRAIN_INPUTS = 6
    TRAIN_NOISE = 7
    BOOTSTRAP = 8


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed <= U64_MAX:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def raw_words(seed: int, stream: int, start: int, count: int) -> np.ndarray:
    """64-bit words ``start .. start+count-1`` of stream ``(seed, stream)``."""
    if count < 0 or start < 0:
        raise ValueError("start and count must be non-negative")
    block, offset = divmod(start, _WORDS_PER_BLOCK)
    bitgen = np.random.Philox(key=np.array([check_seed(seed), int(stream)], dtype=np.uint64))
    bitgen.advance(block)
    return bitgen.random_raw(offset + count)[offset:]


def uniforms(seed: int, stream: int, start: int, count: int) -> np.ndarray:
    """Uniforms on the open interval (0, 1), one per word, 53-bit resolution."""
    words = raw_words(seed, stream, start, count)
    return ((words >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_POW_M53


def normals(seed: int, stream: int, start: int, count: int) -> np.ndarray:
    """Standard normals ``start .. start+count-1`` (Box-Muller, cosine branch)."""
    u = uniforms(seed, stream, 2 * start, 2 * count)
    radius = np.sqrt(-2.0 * np.log(u[0::2]))
    return radius * np.cos(2.0 * np.pi * u[1::2])


def gaussian_rows(seed: int, stream: int, first_row: int, n_rows: int, dim: int) -> np.ndarray:
    """Rows ``first_row ..`` of an endless ``(∞, dim)`` matrix of IID N(0, 1)."""
    return normals(seed, stream, first_row * dim, n_rows * dim).reshape(n_rows, dim)


def chunk_bounds(n: int, chunk: int) -> list[tuple[int, int]]:
    return [(lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]


def default_chunk(width: int, budget: int = 2**21) -> int:
    """Rows per chunk so a ``(rows, width)`` float64 block stays near 16 MB."""
    return int(np.clip(budget // max(width, 1), 256, 16384))


T = TypeVar("T")


def pairwise_sum(parts: list[T]) -> T:
    """Sum in a fixed binary tree; the result depends only on the order of ``parts``."""
    if not parts:
        raise ValueError("nothing to sum")
    while len(parts) > 1:
        merged = [parts[i] + parts[i + 1] for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            merged.append(parts[-1])
        parts = merged
    return parts[0]


class PairwiseAccumulator:
    """Streaming equivalent of :func:`pairwise_sum` with O(log n) memory.

    Partials are merged like a binary counter, so feeding the same sequence
    always produces the same rounding, without holding every partial.
    """

    def __init__(self) -> None:
        self._levels: list[tuple[int, object]] = []

    def add(self, value) -> None:
        size = 1
        while self._levels and self._levels[-1][0] == size:
            _, prev = self._levels.pop()
            value = prev + value
            size *= 2
        self._levels.append((size, value))

    def total(self):
        if not self._levels:
            raise ValueError("nothing accumulated")
        parts = [v for _, v in self._levels]
        acc = parts[-1]
        for v in reversed(parts[:-1]):
            acc = v + acc
        return acc


def map_chunks(fn: Callable[[int, int], T], n: int, chunk: int, workers: int = 1) -> Iterator[T]:
    """Apply ``fn(lo, hi)`` to fixed chunks of ``range(n)``, yielding in chunk order."""
    bounds = chunk_bounds(n, chunk)
    if workers <= 1:
        for lo, hi in bounds:
            yield fn(lo, hi)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        yield from pool.map(lambda b: fn(*b), bounds)
