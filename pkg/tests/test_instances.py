import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sumparts.decomposition import SplitParams, half_split, sample_split
from sumparts.instances import (
    ParseError,
    QuboInstance,
    build_neighbor_lists,
    flip_delta_and_update,
    make_bitvector,
    make_tour,
    parse_orlib_bqp,
    parse_tsplib,
    qubo_value,
    random_qubo_instance,
    random_tsp_instance,
    synthetic_orlib_text,
    tour_cost,
    two_opt_delta,
)
from sumparts.search import TwoOptNeighborhood

UNIT_SQUARE = """NAME : square
TYPE : TSP
DIMENSION : 4
EDGE_WEIGHT_TYPE : EUC_2D
NODE_COORD_SECTION
1 0 0
2 1 0
3 1 1
4 0 1
EOF
"""

# same square scaled by 10 so the diagonal stays longer than the sides
SQUARE10 = UNIT_SQUARE.replace("1 0\n", "10 0\n").replace("1 1\n", "10 10\n").replace("0 1\n", "0 10\n")


class TestParseTsplib:
    def test_eil51_dimensions(self, eil51):
        assert eil51.n == 51
        assert eil51.costs.shape == (51, 51)
        assert eil51.metric_tag == "EUC_2D"

    def test_unit_square_rounding(self):
        # sides are 1; the sqrt(2) diagonal rounds down to 1 under the
        # nearest-integer convention
        inst = parse_tsplib(UNIT_SQUARE)
        assert inst.costs[0][1] == 1
        assert inst.costs[0][2] == 1
        assert inst.costs[1][3] == 1

    def test_two_city_file_rejected(self):
        text = UNIT_SQUARE.replace("DIMENSION : 4", "DIMENSION : 2")
        text = "\n".join(text.splitlines()[:7]) + "\nEOF\n"
        with pytest.raises(ValueError):
            parse_tsplib(text)

    def test_unsupported_weight_type_named(self):
        with pytest.raises(ParseError, match="GEO"):
            parse_tsplib(UNIT_SQUARE.replace("EUC_2D", "GEO"))

    def test_malformed_coordinate_reports_line(self):
        bad = UNIT_SQUARE.replace("3 1 1", "3 one 1")
        with pytest.raises(ParseError, match="line 8"):
            parse_tsplib(bad)

    def test_explicit_full_matrix(self):
        text = """NAME: m
DIMENSION: 4
EDGE_WEIGHT_TYPE: EXPLICIT
EDGE_WEIGHT_FORMAT: FULL_MATRIX
EDGE_WEIGHT_SECTION
0 2 3 4
2 0 5 6
3 5 0 7
4 6 7 0
EOF
"""
        inst = parse_tsplib(text)
        assert inst.costs[2][3] == 7
        assert tour_cost(inst, np.arange(4)) == 2 + 5 + 7 + 4

    def test_asymmetric_explicit_rejected(self):
        text = """DIMENSION: 4
EDGE_WEIGHT_TYPE: EXPLICIT
EDGE_WEIGHT_FORMAT: FULL_MATRIX
EDGE_WEIGHT_SECTION
0 2 3 4
9 0 5 6
3 5 0 7
4 6 7 0
"""
        with pytest.raises(ValueError, match="symmetric"):
            parse_tsplib(text)


class TestParseOrlib:
    def test_single_diagonal_term(self):
        inst = parse_orlib_bqp("2 1\n1 1 5\n")
        assert inst.n == 2
        assert qubo_value(inst, [1, 0]) == 5.0
        assert qubo_value(inst, [0, 1]) == 0.0

    def test_three_triples_against_enumeration(self):
        inst = parse_orlib_bqp("2 3\n1 1 1\n2 2 1\n1 2 2\n")
        # brute force over all four bit vectors; off-diagonal counts twice
        expected = {(0, 0): 0.0, (1, 0): 1.0, (0, 1): 1.0, (1, 1): 6.0}
        for bits, val in expected.items():
            assert qubo_value(inst, list(bits)) == val

    def test_synthetic_bqp1000_profile(self):
        text = synthetic_orlib_text(1000, seed=1)
        inst = parse_orlib_bqp(text)
        assert inst.n == 1000
        assert np.array_equal(inst.q, inst.q.T)
        density = np.count_nonzero(np.triu(inst.q)) / (1000 * 1001 / 2)
        assert 0.08 < density < 0.12

    def test_index_out_of_range(self):
        with pytest.raises(ParseError, match="out of"):
            parse_orlib_bqp("2 1\n3 1 5\n")

    def test_duplicate_pair_rejected(self):
        with pytest.raises(ParseError, match="duplicate"):
            parse_orlib_bqp("3 2\n1 2 5\n2 1 4\n")


class TestTourCost:
    def test_identity_tour_unit_square(self):
        inst = parse_tsplib(UNIT_SQUARE)
        assert tour_cost(inst, np.arange(4)) == 4.0

    def test_half_split_halves(self, eil51):
        split = half_split(eil51)
        t = make_tour(eil51, np.arange(51))
        f1, f2 = tour_cost(eil51, t, split)
        assert f1 == pytest.approx(t.cached_cost / 2, rel=1e-12)
        assert f2 == pytest.approx(t.cached_cost / 2, rel=1e-12)

    def test_sum_preservation_100_random_tours(self, eil51):
        split = sample_split(eil51, SplitParams(a=-3.0, seed=2))
        rng = np.random.default_rng(0)
        for _ in range(100):
            order = rng.permutation(51)
            f = tour_cost(eil51, order)
            f1, f2 = tour_cost(eil51, order, split)
            assert abs(f1 + f2 - f) <= 1e-9 * abs(f)


class TestTwoOptDelta:
    def test_degenerate_moves_zero(self, eil51):
        t = make_tour(eil51, np.arange(51))
        assert two_opt_delta(eil51, t, 3, 4) == 0.0
        assert two_opt_delta(eil51, t, 0, 50) == 0.0

    def test_matches_full_recomputation(self, eil51):
        rng = np.random.default_rng(7)
        t = make_tour(eil51, rng.permutation(51))
        for _ in range(200):
            i, j = sorted(rng.choice(51, size=2, replace=False))
            delta = two_opt_delta(eil51, t, int(i), int(j))
            order = t.order.copy()
            order[i + 1: j + 1] = order[i + 1: j + 1][::-1]
            full = tour_cost(eil51, order)
            assert delta == pytest.approx(full - t.cached_cost, abs=1e-9)

    def test_eil51_neighborhood_size(self, eil51):
        assert TwoOptNeighborhood(eil51).size == 1224

    @pytest.mark.parametrize("n", [5, 17, 42, 100])
    def test_move_count_formula(self, n):
        inst = random_tsp_instance(n, seed=0)
        assert TwoOptNeighborhood(inst).size == n * (n - 3) // 2

    def test_split_delta_pair(self, eil51):
        split = sample_split(eil51, SplitParams(a=2.0, seed=4))
        t = make_tour(eil51, np.random.default_rng(1).permutation(51))
        d1, d2 = two_opt_delta(eil51, t, 5, 20, split)
        d = two_opt_delta(eil51, t, 5, 20)
        assert d1 + d2 == pytest.approx(d, abs=1e-9)


class TestFlipDelta:
    def test_involution(self):
        inst = random_qubo_instance(20, seed=3, density=0.5)
        bv = make_bitvector(inst, np.zeros(20))
        before = bv.cached_value
        flip_delta_and_update(inst, bv, 7)
        flip_delta_and_update(inst, bv, 7)
        assert bv.cached_value == pytest.approx(before, abs=1e-9)
        assert bv.bits[7] == 0.0

    def test_delta_matches_full_recomputation(self):
        inst = random_qubo_instance(20, seed=5, density=0.6)
        rng = np.random.default_rng(2)
        bv = make_bitvector(inst, rng.integers(0, 2, 20).astype(float))
        for _ in range(100):
            i = int(rng.integers(20))
            before = qubo_value(inst, bv.bits)
            delta = flip_delta_and_update(inst, bv, i)
            after = qubo_value(inst, bv.bits)
            assert delta == pytest.approx(after - before, abs=1e-9)
            assert bv.cached_value == pytest.approx(after, abs=1e-9)

    def test_split_pair_returned(self):
        inst = random_qubo_instance(15, seed=1, density=0.5)
        split = sample_split(inst, SplitParams(a=0.0, seed=1))
        bv = make_bitvector(inst, np.ones(15), split)
        gain_before = float(bv.gains[3])
        d1, d2 = flip_delta_and_update(inst, bv, 3, split)
        assert d1 + d2 == pytest.approx(gain_before, abs=1e-9)
        assert bv.value1 == pytest.approx(qubo_value(inst, bv.bits, split.mat1), abs=1e-9)

    def test_neighborhood_size_is_n(self):
        text = synthetic_orlib_text(1000, seed=1)
        inst = parse_orlib_bqp(text)
        bv = make_bitvector(inst, np.zeros(1000))
        assert bv.gains.shape == (1000,)

    def test_gains_after_1000_random_flips(self):
        inst = random_qubo_instance(30, seed=9, density=0.3)
        split = sample_split(inst, SplitParams(a=2.0, seed=0))
        rng = np.random.default_rng(4)
        bv = make_bitvector(inst, rng.integers(0, 2, 30).astype(float), split)
        for _ in range(1000):
            flip_delta_and_update(inst, bv, int(rng.integers(30)))
        fresh = make_bitvector(inst, bv.bits, split)
        np.testing.assert_allclose(bv.gains, fresh.gains, atol=1e-8)
        np.testing.assert_allclose(bv.gains1, fresh.gains1, atol=1e-8)
        assert bv.cached_value == pytest.approx(fresh.cached_value, abs=1e-8)


class TestNeighborLists:
    def test_full_lists(self):
        inst = random_tsp_instance(9, seed=0)
        nl = build_neighbor_lists(inst, k=8)
        for city in range(9):
            assert sorted(nl.lists[city].tolist()) == [c for c in range(9) if c != city]

    def test_square_side_adjacency(self):
        inst = parse_tsplib(SQUARE10)
        nl = build_neighbor_lists(inst, k=2)
        side = {0: {1, 3}, 1: {0, 2}, 2: {1, 3}, 3: {0, 2}}
        for city, expect in side.items():
            assert set(nl.lists[city].tolist()) == expect

    def test_eil51_k20(self, eil51):
        nl = build_neighbor_lists(eil51, k=20)
        assert nl.lists.shape == (51, 20)
        for city in range(51):
            row = nl.lists[city]
            assert len(set(row.tolist())) == 20
            costs = eil51.costs[city, row]
            assert np.all(np.diff(costs) >= 0)

    def test_k_below_two_rejected(self, eil51):
        with pytest.raises(ValueError):
            build_neighbor_lists(eil51, k=1)

    def test_tie_break_by_index(self):
        inst = parse_tsplib(UNIT_SQUARE)  # all costs tie at 1
        nl = build_neighbor_lists(inst, k=2)
        assert nl.lists[0].tolist() == [1, 2]


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=5, max_value=12), st.integers(min_value=0, max_value=10_000))
def test_cumulative_two_opt_deltas_match_full_eval(n, seed):
    inst = random_tsp_instance(n, seed=seed % 17)
    rng = np.random.default_rng(seed)
    t = make_tour(inst, rng.permutation(n))
    for _ in range(20):
        i, j = sorted(rng.choice(n, size=2, replace=False))
        i, j = int(i), int(j)
        delta = two_opt_delta(inst, t, i, j)
        t.order[i + 1: j + 1] = t.order[i + 1: j + 1][::-1]
        t.cached_cost += delta
    assert t.cached_cost == pytest.approx(tour_cost(inst, t), rel=1e-9)
    assert sorted(t.order.tolist()) == list(range(n))


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=2, max_value=14), st.integers(min_value=0, max_value=10_000))
def test_cumulative_flip_deltas_match_full_eval(n, seed):
    inst = random_qubo_instance(n, seed=seed % 13, density=0.5)
    rng = np.random.default_rng(seed)
    bv = make_bitvector(inst, rng.integers(0, 2, n).astype(float))
    for _ in range(30):
        flip_delta_and_update(inst, bv, int(rng.integers(n)))
    assert bv.cached_value == pytest.approx(qubo_value(inst, bv.bits), abs=1e-9)
