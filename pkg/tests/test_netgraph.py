import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coevo.errors import DimensionMismatch, DisconnectedGraph, EmptyPartitionSide, InvalidProbability, TooManyInterLinks
from coevo.netgraph import (
    LayerMatrix,
    Partition,
    TwoLayerNetwork,
    gen_erdos_renyi_row_stochastic,
    gen_two_community,
    is_strongly_connected,
    metropolis_weights,
    partition_degree_bounds,
    random_connected_adjacency,
    uniform_degree_layer,
    validate_layer,
    within_group_sums,
)


def reach_by_powers(w):
    # independent oracle: (I + adj)^(n-1) is positive everywhere iff strongly connected
    n = w.shape[0]
    m = np.eye(n) + (w > 0)
    p = np.linalg.matrix_power(m, n - 1)
    return bool(np.all(p > 0))


class TestLayerMatrix:
    def test_copy_is_read_only(self):
        src = np.full((2, 2), 0.5)
        m = LayerMatrix(src)
        src[0, 0] = 9.0
        assert m.weights[0, 0] == 0.5
        with pytest.raises(ValueError):
            m.weights[0, 0] = 1.0

    def test_rejects_non_square(self):
        with pytest.raises((ValueError, DimensionMismatch)):
            LayerMatrix(np.ones((2, 3)))

    def test_equality_and_hash(self):
        a = LayerMatrix(np.eye(3))
        b = LayerMatrix(np.eye(3))
        assert a == b and hash(a) == hash(b)

    def test_network_size_mismatch(self):
        with pytest.raises(DimensionMismatch):
            TwoLayerNetwork(LayerMatrix(np.eye(2)), LayerMatrix(np.eye(3)))


class TestValidation:
    def test_asymmetric_layer_reports_pair_and_reachability(self):
        rep = validate_layer(LayerMatrix([[1.0, 0.0], [0.5, 0.5]]), require_symmetric=True)
        d = rep.as_dict()
        assert not rep.ok
        assert rep.violations == ["symmetric"]
        sym = next(c for c in d["checks"] if c["name"] == "symmetric")
        assert sym["offending"] == [[1, 2]]
        sc = next(c for c in d["checks"] if c["name"] == "strongly_connected")
        assert not sc["passed"] and not sc["required"] and sc["offending"] == [2]
        assert "strongly_connected" in rep.warnings

    def test_row_residual_reported(self):
        rep = validate_layer(LayerMatrix([[0.5, 0.4], [0.5, 0.5]]))
        c = rep["row_stochastic"]
        assert not c.passed and c.offending == (0,)
        assert c.max_residual == pytest.approx(0.1)

    def test_negative_entries(self):
        rep = validate_layer(LayerMatrix([[1.2, -0.2], [0.5, 0.5]]))
        assert not rep["nonnegative"].passed
        assert rep["nonnegative"].offending == ((0, 1),)

    def test_unrequested_checks_never_fail(self):
        rep = validate_layer(LayerMatrix([[0.0, 1.0], [1.0, 0.0]]))
        assert rep.ok
        assert "self_loops" in rep.warnings

    def test_assumption1_flags(self):
        lay = metropolis_weights(np.array([[0, 1], [1, 0]]))
        assert TwoLayerNetwork.coincident(lay).assumption1_compliant
        directed = LayerMatrix([[0.0, 1.0], [0.5, 0.5]])
        assert not TwoLayerNetwork.coincident(directed).assumption1_compliant


class TestStrongConnectivity:
    def test_cycle_and_path(self):
        cyc = np.roll(np.eye(4), 1, axis=1)
        assert is_strongly_connected(cyc)
        path = np.zeros((3, 3))
        path[0, 1] = path[1, 2] = path[2, 2] = 1.0
        assert not is_strongly_connected(path)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(2, 9), st.floats(0.05, 0.6), st.integers(0, 10_000))
    def test_matches_matrix_power_oracle(self, n, p, seed):
        w = gen_erdos_renyi_row_stochastic(n, p, seed).weights
        assert is_strongly_connected(w) == reach_by_powers(w)


class TestMetropolis:
    def test_three_node_path(self):
        adj = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]])
        w = metropolis_weights(adj).weights
        expected = np.array([[2 / 3, 1 / 3, 0], [1 / 3, 1 / 3, 1 / 3], [0, 1 / 3, 2 / 3]])
        np.testing.assert_allclose(w, expected, atol=1e-15)

    def test_disconnected_rejected(self):
        adj = np.zeros((4, 4), dtype=int)
        adj[0, 1] = adj[1, 0] = adj[2, 3] = adj[3, 2] = 1
        with pytest.raises(DisconnectedGraph):
            metropolis_weights(adj)

    @settings(max_examples=80, deadline=None)
    @given(st.integers(2, 25), st.floats(0.0, 1.0), st.integers(0, 2**31))
    def test_output_satisfies_every_check(self, n, p, seed):
        adj = random_connected_adjacency(n, p, np.random.default_rng(seed))
        rep = validate_layer(
            metropolis_weights(adj), require_symmetric=True, require_self_loops=True, require_strongly_connected=True
        )
        assert rep.ok, rep.violations


class TestGenerators:
    def test_two_community_has_two_cross_edges(self):
        lay = gen_two_community((10, 10), 0.2, 2, rng_seed=4)
        w = lay.weights
        assert lay.stochastic
        cross = np.count_nonzero(w[:10, 10:]) + np.count_nonzero(w[10:, :10])
        assert cross == 2

    def test_degenerate_pair(self):
        w = gen_two_community((1, 1), 1.0, 1, rng_seed=0).weights
        assert w.shape == (2, 2)
        assert np.allclose(w.sum(axis=1), 1.0)
        # one node points at the other; the other has no out-edge and keeps itself
        assert sorted(np.diag(w)) == [0.0, 1.0]

    def test_two_community_deterministic(self):
        assert gen_two_community((6, 7), 0.3, 3, 11) == gen_two_community((6, 7), 0.3, 3, 11)
        assert gen_two_community((6, 7), 0.3, 3, 11) != gen_two_community((6, 7), 0.3, 3, 12)

    def test_too_many_inter_links(self):
        with pytest.raises(TooManyInterLinks):
            gen_two_community((2, 2), 0.5, 5, 0)

    def test_bad_probability(self):
        with pytest.raises(InvalidProbability):
            gen_erdos_renyi_row_stochastic(5, 1.5, 0)

    def test_er_row_stochastic(self):
        lay = gen_erdos_renyi_row_stochastic(50, 0.1, rng_seed=3)
        assert lay.n == 50 and lay.stochastic
        assert validate_layer(lay).ok

    def test_er_edge_count_binomial(self):
        n, p = 60, 0.1
        w = gen_erdos_renyi_row_stochastic(n, p, rng_seed=21).weights
        off = w.copy()
        np.fill_diagonal(off, 0)
        edges = np.count_nonzero(off)
        mean = p * n * (n - 1)
        sd = np.sqrt(mean * (1 - p))
        assert abs(edges - mean) < 4 * sd

    def test_er_deterministic(self):
        assert gen_erdos_renyi_row_stochastic(12, 0.3, 5) == gen_erdos_renyi_row_stochastic(12, 0.3, 5)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 8), st.integers(1, 8), st.floats(1e-6, 1.0), st.integers(0, 2**31))
    def test_generators_always_row_stochastic(self, a, b, p, seed):
        links = min(a * b, 1 + seed % 3)
        assert gen_two_community((a, b), p, links, seed).stochastic
        assert gen_erdos_renyi_row_stochastic(a + b, p, seed).stochastic


class TestPartitionDegrees:
    def test_partition_errors(self):
        with pytest.raises(EmptyPartitionSide):
            Partition([], [0, 1])
        with pytest.raises(ValueError):
            Partition([0, 1], [1, 2])
        with pytest.raises(ValueError):
            Partition([0], [1]).pos_mask(3)

    def test_signs_round_trip(self):
        part = Partition.from_signs([1, -1, 1, -1])
        assert list(part.signs(4)) == [1, -1, 1, -1]

    def test_direct_summation(self):
        lay = gen_two_community((10, 10), 0.2, 2, 12)
        part = Partition.blocks(10, 10)
        w = lay.weights
        own = np.array([w[i, :10].sum() if i < 10 else w[i, 10:].sum() for i in range(20)])
        np.testing.assert_allclose(within_group_sums(lay, part), own, atol=1e-15)
        b = partition_degree_bounds(lay, part)
        assert b.d_p_min == pytest.approx(own[:10].min()) and b.d_n_max == pytest.approx(own[10:].max())

    @settings(max_examples=80, deadline=None)
    @given(st.integers(2, 15), st.integers(0, 2**31))
    def test_own_plus_cross_is_one_and_bounds_sandwich(self, n, seed):
        rng = np.random.default_rng(seed)
        w = gen_erdos_renyi_row_stochastic(n, float(rng.uniform(0.1, 0.9)), seed).weights
        signs = rng.choice([-1, 1], n)
        signs[0], signs[-1] = 1, -1
        part = Partition.from_signs(signs)
        own = within_group_sums(w, part)
        pos = signs > 0
        cross = np.where(pos, w[:, ~pos].sum(axis=1), w[:, pos].sum(axis=1))
        np.testing.assert_allclose(own + cross, 1.0, atol=1e-12)
        b = partition_degree_bounds(w, part)
        assert b.d_p_min <= own[pos].min() + 1e-15 and own[pos].max() <= b.d_p_max + 1e-15
        assert b.d_n_min <= own[~pos].min() + 1e-15 and own[~pos].max() <= b.d_n_max + 1e-15
        assert 0 <= b.d_p_min <= b.d_p_max <= 1 and 0 <= b.d_n_min <= b.d_n_max <= 1


class TestUniformDegree:
    @pytest.mark.parametrize("d", [0.6, 0.75, 0.9, 1.0])
    def test_exact_own_side_weight(self, d):
        lay = uniform_degree_layer((5, 5), d, np.random.default_rng(1))
        part = Partition.blocks(5, 5)
        np.testing.assert_allclose(within_group_sums(lay, part), d, atol=1e-14)
        rep = validate_layer(lay, require_symmetric=True, require_self_loops=True)
        assert rep.ok

    def test_unequal_sides_rejected(self):
        with pytest.raises(ValueError):
            uniform_degree_layer((3, 4), 0.8)
