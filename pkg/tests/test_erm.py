"""Candidate sets, empirical revenue, and ERM optimality/tie-break contracts."""

import zlib

import numpy as np
import pytest

import oracles
from auctionlearn import (CeilingExceeded, ClassSpec, PlayerReserves,
                          SampleSet, SingleReserve, candidate_count,
                          candidate_set, empirical_revenue, erm,
                          erm_with_value)


def sample(values, value_range=(0.0, 1.0)):
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1, 1)
    return SampleSet(arr, value_range)


SINGLE = ClassSpec("single-reserve")


def test_candidate_set_single_reserve():
    cs = candidate_set(SINGLE, sample([0.2, 0.5, 1.0]))
    assert [h.price for h in cs] == [0.2, 0.5, 1.0]
    assert cs.count == 3


def test_candidate_set_dedup():
    cs = candidate_set(SINGLE, sample([0.5, 0.5]))
    assert [h.price for h in cs] == [0.5]


def test_candidate_set_player_reserves_product():
    S = sample(np.array([[[0.3], [0.4]], [[0.7], [0.9]]]))
    cs = candidate_set(ClassSpec("player-reserves"), S)
    assert cs.count == 4
    assert [h.prices for h in cs] == [(0.3, 0.4), (0.3, 0.9), (0.7, 0.4), (0.7, 0.9)]


def test_candidate_set_tlevel_includes_no_sale_sentinel():
    S = sample(np.array([[[0.3], [0.4]], [[0.7], [0.9]]]))
    cs = candidate_set(ClassSpec("t-level", levels=1), S)
    rows = {h.thresholds for h in cs}
    # each bidder's pool is its own values plus the top of the range
    assert ((1.0,), (1.0,)) in rows
    assert cs.count == 9


def test_candidate_counts_respect_class_bounds():
    gen = np.random.default_rng(5)
    values = gen.random((4, 2, 2))
    S = SampleSet(values)
    m, n, k = 4, 2, 2
    assert candidate_count(ClassSpec("anonymous-second-price"),
                           sample(values[:, :, :1].reshape(m, n, 1))) <= n * m
    assert candidate_count(ClassSpec("player-reserves"),
                           sample(values[:, :, :1].reshape(m, n, 1))) <= m**n
    assert candidate_count(ClassSpec("bundle-price"), S) <= n * m
    assert candidate_count(ClassSpec("bundle-price", per_player=True), S) <= m**n
    assert candidate_count(ClassSpec("item-prices"), S) <= (n * m)**k
    assert candidate_count(ClassSpec("item-prices", per_player=True), S) <= m**(n * k)
    assert candidate_count(ClassSpec("best-of"), S) <= (n * m)**(k + 1)


def test_empirical_revenue_examples():
    S = sample([0.2, 0.5, 1.0])
    assert empirical_revenue(SingleReserve(0.5), S) == pytest.approx(1 / 3, abs=1e-15)
    assert empirical_revenue(SingleReserve(0.0), S) == 0.0
    assert empirical_revenue(SingleReserve(1.0), S) == pytest.approx(1 / 3, abs=1e-15)


def test_erm_tie_breaks_to_largest_parameter():
    h = erm(SINGLE, sample([0.2, 0.5, 1.0]))
    assert h == SingleReserve(1.0)


def test_erm_singleton():
    assert erm(SINGLE, sample([0.5])) == SingleReserve(0.5)


def test_erm_player_reserves_matches_brute_force():
    S = sample(np.array([[[0.3], [0.9]], [[0.7], [0.4]]]))
    spec = ClassSpec("player-reserves")
    h = erm(spec, S)
    cands = candidate_set(spec, S).materialize()
    best = max((empirical_revenue(c, S), c.param_vector()) for c in cands)
    assert (empirical_revenue(h, S), h.param_vector()) == best
    assert h == PlayerReserves((0.7, 0.9))


ALL_SPECS = [
    (ClassSpec("single-reserve"), 1, 1),
    (ClassSpec("anonymous-second-price"), 2, 1),
    (ClassSpec("player-reserves"), 2, 1),
    (ClassSpec("t-level", levels=1), 2, 1),
    (ClassSpec("t-level", levels=2), 1, 1),
    (ClassSpec("bundle-price"), 2, 2),
    (ClassSpec("bundle-price", per_player=True), 2, 2),
    (ClassSpec("item-prices"), 2, 2),
    (ClassSpec("item-prices", per_player=True), 2, 2),
    (ClassSpec("best-of"), 2, 2),
    (ClassSpec("best-of", per_player=True), 2, 2),
]


@pytest.mark.parametrize("spec,n,k", ALL_SPECS)
def test_erm_equals_exhaustive_enumeration(spec, n, k):
    """The fast per-class paths must agree with argmax over the materialized
    candidate set, including the largest-parameter tie-break."""
    gen = np.random.default_rng(zlib.crc32(spec.describe().encode()))
    for _ in range(8):
        m = int(gen.integers(1, 6))
        S = SampleSet(gen.random((m, n, k)))
        h = erm(spec, S)
        cands = candidate_set(spec, S).materialize()
        assert h in cands
        best_rev, best_key, best_h = -np.inf, None, None
        for c in cands:
            r = empirical_revenue(c, S)
            key = c.param_vector()
            if r > best_rev or (r == best_rev and key > best_key):
                best_rev, best_key, best_h = r, key, c
        assert h == best_h, f"{spec.describe()}: {h} vs {best_h}"


@pytest.mark.parametrize("spec,n,k", ALL_SPECS)
def test_erm_permutation_invariance_and_determinism(spec, n, k):
    gen = np.random.default_rng(zlib.crc32((spec.describe() + "-perm").encode()))
    for _ in range(5):
        m = int(gen.integers(2, 7))
        values = oracles.draw_grid_sample(gen, m, n, k)
        S = SampleSet(values)
        h = erm(spec, S)
        assert erm(spec, S) == h
        for _ in range(3):
            perm = gen.permutation(m)
            assert erm(spec, SampleSet(values[perm])) == h


def test_erm_ceiling_error():
    gen = np.random.default_rng(1)
    S = SampleSet(gen.random((10, 2, 1)))
    with pytest.raises(CeilingExceeded):
        erm(ClassSpec("player-reserves"), S, ceiling=50)
    with pytest.raises(CeilingExceeded):
        candidate_set(ClassSpec("player-reserves"), S).materialize(ceiling=50)


# ---------------------------------------------------------------------------
# sample-valued candidates attain the fine-grid maximum (small version of the
# acceptance criterion; values drawn on {0, 0.1, ..., 1.0})


def test_single_reserve_matches_fine_grid():
    gen = np.random.default_rng(77)
    for _ in range(25):
        m = int(gen.integers(1, 9))
        values = oracles.draw_grid_sample(gen, m, 1, 1)
        _, rev = erm_with_value(SINGLE, SampleSet(values))
        grid_max = oracles.posted_curve(values[:, 0, 0], oracles.FINE_GRID).max()
        assert abs(rev - grid_max) <= 1e-12


def test_tlevel_needs_the_sentinel_to_match_the_grid():
    # excluding bidder 0 via a threshold above its value is strictly optimal
    values = np.array([[[0.9], [1.0]]])
    spec = ClassSpec("t-level", levels=1)
    _, rev = erm_with_value(spec, SampleSet(values))
    grid_max = oracles.grid_max_tlevel_two_bidders_one_level(values[:, :, 0])
    assert rev == pytest.approx(1.0, abs=1e-15)
    assert abs(rev - grid_max) <= 1e-12


@pytest.mark.parametrize("spec,n,k,draw,oracle", [
    (ClassSpec("player-reserves"), 2, 1, oracles.draw_grid_sample,
     lambda v: oracles.grid_max_player_reserves(v[:, :, 0])),
    (ClassSpec("t-level", levels=1), 2, 1, oracles.draw_grid_sample,
     lambda v: oracles.grid_max_tlevel_two_bidders_one_level(v[:, :, 0])),
    # bundle draws use the eighth grid so additive totals stay exactly on the
    # thousandths oracle grid (tenths sums drift off it in floats)
    (ClassSpec("bundle-price"), 2, 2, oracles.draw_eighth_sample,
     lambda v: oracles.grid_max_bundle(v, False)),
    (ClassSpec("bundle-price", per_player=True), 2, 2, oracles.draw_eighth_sample,
     lambda v: oracles.grid_max_bundle(v, True)),
    (ClassSpec("item-prices", per_player=True), 2, 2, oracles.draw_grid_sample,
     lambda v: oracles.grid_max_item_prices(v, True)),
    (ClassSpec("best-of"), 2, 1, oracles.draw_grid_sample,
     lambda v: oracles.grid_max_best_of_single_item(v[:, :, 0])),
])
def test_product_class_matches_fine_grid(spec, n, k, draw, oracle):
    gen = np.random.default_rng(zlib.crc32((spec.describe() + "-grid").encode()))
    for _ in range(6):
        m = int(gen.integers(1, 9))
        values = draw(gen, m, n, k)
        _, rev = erm_with_value(spec, SampleSet(values))
        assert abs(rev - oracle(values)) <= 1e-12
