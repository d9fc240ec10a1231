from __future__ import annotations

import numpy as np
import pytest

from relufim.streams import (
    PairwiseAccumulator,
    Stream,
    chunk_bounds,
    default_chunk,
    gaussian_rows,
    map_chunks,
    normals,
    pairwise_sum,
    raw_words,
    uniforms,
)


def test_raw_words_are_seekable():
    full = raw_words(5, Stream.WEIGHTS, 0, 40)
    for start in (0, 1, 3, 4, 7, 13):
        np.testing.assert_array_equal(raw_words(5, Stream.WEIGHTS, start, 40 - start), full[start:])


def test_streams_and_seeds_are_independent():
    a = raw_words(1, Stream.INPUTS, 0, 8)
    assert not np.array_equal(a, raw_words(2, Stream.INPUTS, 0, 8))
    assert not np.array_equal(a, raw_words(1, Stream.ORACLE, 0, 8))


def test_uniforms_open_interval():
    u = uniforms(0, Stream.INPUTS, 0, 100_000)
    assert u.min() > 0.0 and u.max() < 1.0


def test_normals_moments():
    z = normals(3, Stream.ORACLE, 0, 400_000)
    se = 1 / np.sqrt(z.size)
    assert abs(z.mean()) < 5 * se
    assert abs(z.var() - 1) < 5 * np.sqrt(2) * se


def test_gaussian_rows_slicing_matches():
    full = gaussian_rows(9, Stream.INPUTS, 0, 50, 7)
    np.testing.assert_array_equal(gaussian_rows(9, Stream.INPUTS, 20, 10, 7), full[20:30])


def test_seed_range():
    with pytest.raises(ValueError):
        raw_words(-1, Stream.INPUTS, 0, 1)
    raw_words(2**64 - 1, Stream.INPUTS, 0, 1)


def test_chunking():
    assert chunk_bounds(10, 4) == [(0, 4), (4, 8), (8, 10)]
    assert chunk_bounds(0, 4) == []
    assert 256 <= default_chunk(10**7) <= default_chunk(1) <= 16384


def test_pairwise_accumulator_matches_pairwise_sum():
    parts = [np.full(3, float(k)) for k in range(37)]
    acc = PairwiseAccumulator()
    for p in parts:
        acc.add(p)
    np.testing.assert_allclose(acc.total(), pairwise_sum(parts))
    np.testing.assert_allclose(acc.total(), np.full(3, sum(range(37))))


@pytest.mark.parametrize("workers", [2, 4])
def test_map_chunks_worker_independent(workers):
    fn = lambda lo, hi: normals(1, Stream.FIM_SAMPLES, lo, hi - lo).sum()  # noqa: E731
    serial = list(map_chunks(fn, 10_000, 999, 1))
    parallel = list(map_chunks(fn, 10_000, 999, workers))
    assert serial == parallel
