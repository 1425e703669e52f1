import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seriesindex.summaries import (BreakpointTable, ISAXWord, QueryBounds,
                                   check_normalized, compute_isax, compute_paa,
                                   euclidean_distance_sq, isax_symbols,
                                   mindist_sq, root_buffer_index, root_indices)

from . import oracles


@pytest.fixture(scope="module")
def table():
    return BreakpointTable(8)


def test_classic_sax_breakpoints(table):
    np.testing.assert_allclose(table.thresholds(2), [-0.67, 0.0, 0.67], atol=0.01)
    np.testing.assert_allclose(
        table.thresholds(3), [-1.15, -0.67, -0.32, 0.0, 0.32, 0.67, 1.15], atol=0.01
    )


@pytest.mark.parametrize("bits", range(1, 9))
def test_breakpoints_match_direct_quantiles(table, bits):
    np.testing.assert_allclose(table.thresholds(bits), oracles.breakpoints(bits), atol=1e-9)


def test_breakpoints_nest(table):
    for b in range(1, 8):
        coarse = set(table.thresholds(b).tolist())
        assert coarse <= set(table.thresholds(b + 1).tolist())


def test_bad_bit_counts():
    with pytest.raises(ValueError):
        BreakpointTable(0)
    with pytest.raises(ValueError):
        BreakpointTable(4).thresholds(5)


def test_paa_matches_loop(rng):
    x = rng.standard_normal(64)
    np.testing.assert_allclose(compute_paa(x, 8), oracles.paa(x, 8))


def test_paa_batch_and_errors(rng):
    X = rng.standard_normal((5, 32))
    np.testing.assert_allclose(compute_paa(X, 4)[3], oracles.paa(X[3], 4))
    with pytest.raises(ValueError):
        compute_paa(np.zeros(10), 3)


@given(st.floats(-100, 100, allow_nan=False), st.integers(0, 2**31))
@settings(max_examples=50, deadline=None)
def test_paa_linearity(alpha, seed):
    x = np.random.default_rng(seed).standard_normal(32)
    np.testing.assert_allclose(compute_paa(alpha * x, 4), alpha * compute_paa(x, 4), atol=1e-9)


def test_isax_symbols_match_counting_oracle(table, rng):
    values = rng.standard_normal(300) * 1.5
    sym = isax_symbols(values, table)
    for v, s in zip(values[:60], sym[:60]):
        assert s == oracles.symbol(v, 8)
    for b in (1, 3, 5):
        word = compute_isax(values[:8], b, table)
        assert list(word.symbols) == [oracles.symbol(v, b) for v in values[:8]]


def test_tie_goes_to_region_above(table):
    t = table.thresholds(2)
    word = compute_isax([t[0], t[1], t[2], -5.0], 2, table)
    assert word.symbols == (1, 2, 3, 0)
    assert isax_symbols(np.array([table.full[10]]), table)[0] == 11


def test_full_symbols_coarsen_by_shift(table, rng):
    values = rng.standard_normal(200)
    full = isax_symbols(values, table)
    for b in range(1, 8):
        coarse = [compute_isax([v], b, table).symbols[0] for v in values]
        assert list(full >> (8 - b)) == coarse


def test_word_coarsen():
    w = ISAXWord((0b101, 0b1), (3, 1))
    assert w.coarsen(0, 1) == ISAXWord((1, 1), (1, 1))
    with pytest.raises(ValueError):
        w.coarsen(1, 2)
    assert str(w) == "101_3 1_1"


def test_figure_word_routes_to_buffer_5():
    assert root_buffer_index(ISAXWord((0b10, 0b00, 0b11), (2, 2, 2))) == 5


def test_bottom_half_routes_to_buffer_0(table):
    word = compute_isax([-3.0] * 8, 4, table)
    assert root_buffer_index(word) == 0


def test_root_index_oracle(rng):
    for _ in range(200):
        bits = rng.integers(1, 9, size=6)
        symbols = [int(rng.integers(0, 1 << b)) for b in bits]
        word = ISAXWord(tuple(symbols), tuple(int(b) for b in bits))
        assert root_buffer_index(word) == oracles.root_index(symbols, bits)


def test_root_indices_vectorised(rng, table):
    sym = isax_symbols(rng.standard_normal((50, 8)), table)
    for row, idx in zip(sym, root_indices(sym, 8)):
        assert idx == root_buffer_index(ISAXWord(tuple(int(s) for s in row), (8,) * 8))


def test_euclidean(rng):
    a, b = rng.standard_normal((2, 40))
    assert euclidean_distance_sq(a, b) == pytest.approx(oracles.ed_sq(a, b))
    with pytest.raises(ValueError):
        euclidean_distance_sq(a, b[:5])


def test_mindist_matches_oracle(table, rng):
    for _ in range(50):
        q = rng.standard_normal(32)
        qp = compute_paa(q, 4)
        bits = tuple(int(b) for b in rng.integers(1, 9, size=4))
        word = compute_isax(compute_paa(rng.standard_normal(32), 4), bits, table)
        assert mindist_sq(qp, word, 32, table) == pytest.approx(
            oracles.mindist_sq(qp, word.symbols, word.bits, 32), abs=1e-12
        )


def test_mindist_zero_for_own_word(table, rng):
    x = rng.standard_normal(64)
    p = compute_paa(x, 8)
    assert mindist_sq(p, compute_isax(p, 5, table), 64, table) == 0.0


@given(st.integers(0, 2**32 - 1), st.integers(1, 8))
@settings(max_examples=200, deadline=None)
def test_pruning_property(seed, bits):
    rng = np.random.default_rng(seed)
    table = BreakpointTable(8)
    s, q = np.cumsum(rng.standard_normal((2, 64)), axis=1)
    s = (s - s.mean()) / s.std()
    q = (q - q.mean()) / q.std()
    word = compute_isax(compute_paa(s, 8), bits, table)
    assert mindist_sq(compute_paa(q, 8), word, 64, table) <= euclidean_distance_sq(s, q) + 1e-9


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=100, deadline=None)
def test_coarsening_never_raises_bound(seed):
    rng = np.random.default_rng(seed)
    table = BreakpointTable(8)
    qp = compute_paa(rng.standard_normal(32), 4)
    word = compute_isax(compute_paa(rng.standard_normal(32), 4), 8, table)
    seg = int(rng.integers(0, 4))
    fine = mindist_sq(qp, word, 32, table)
    for b in range(7, 0, -1):
        word = word.coarsen(seg, b)
        coarse = mindist_sq(qp, word, 32, table)
        assert coarse <= fine + 1e-12
        fine = coarse


def test_query_bounds_agree_with_mindist(table, rng):
    q = rng.standard_normal(64)
    qp = compute_paa(q, 8)
    qb = QueryBounds(qp, 64, table)
    data = rng.standard_normal((30, 64))
    sym = isax_symbols(compute_paa(data, 8), table)
    series = qb.series(sym)
    for i in range(30):
        full = ISAXWord(tuple(int(s) for s in sym[i]), (8,) * 8)
        assert series[i] == pytest.approx(mindist_sq(qp, full, 64, table), abs=1e-9)
        mixed = full
        for seg in range(8):
            mixed = mixed.coarsen(seg, int(rng.integers(1, 9)))
        assert qb.word(mixed) == pytest.approx(mindist_sq(qp, mixed, 64, table), abs=1e-9)


def test_check_normalized_warns():
    good = np.random.default_rng(0).standard_normal((4, 100))
    good = (good - good.mean(1, keepdims=True)) / good.std(1, keepdims=True)
    assert check_normalized(good) == 0
    with pytest.warns(UserWarning):
        assert check_normalized(good * 5 + 3) == 4


def test_region_edges(table):
    lo, hi = table.region(1, 0)
    assert lo == -math.inf and hi == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        table.region(2, 4)
