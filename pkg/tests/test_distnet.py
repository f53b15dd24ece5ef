import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subspace_esd.distnet import (
    EXACT,
    ConsensusConfig,
    Scenario,
    SimMetrics,
    assign_weights,
    average_consensus,
    eval_pc_estimate,
    flood,
    generate_ba_graph,
    get_esd_d,
    graph_from_edges,
    init_states,
    load_scenario,
    power_iteration_d,
    save_scenario,
    stack_rows,
)
from subspace_esd.errors import ConnectivityError, ParameterError, SchemaError, UndefinedMetricError
from subspace_esd.ingest import synth_caida
from subspace_esd.linalg import IterationBudget, PrincipalComponent, covariance, exact_eigendecomposition, power_iteration
from subspace_esd.subspace import get_esd


def ba(n, seed=0, attach=2, perturb=0.0):
    return assign_weights(generate_ba_graph(n, attach, seed), seed=seed, perturb=perturb)


class TestGraph:
    def test_triangle(self):
        g = generate_ba_graph(3, 2, seed=0)
        assert g.adjacency.all()
        assert g.n_edges == 3 and g.max_degree == 2

    def test_edge_count_and_connectivity(self):
        g = generate_ba_graph(79, 2, seed=0)
        assert g.n_edges == 3 + 2 * (79 - 3)
        assert g.is_connected()
        assert np.all(np.diag(g.adjacency))

    def test_deterministic(self):
        assert np.array_equal(generate_ba_graph(30, 2, 5).adjacency, generate_ba_graph(30, 2, 5).adjacency)

    def test_heavy_tail(self):
        ratios = []
        for seed in range(50):
            d = generate_ba_graph(500, 2, seed).degrees
            ratios.append(d.max() / np.median(d))
        assert min(ratios) >= 10

    def test_bad_sizes(self):
        with pytest.raises(ParameterError):
            generate_ba_graph(2, 2)
        with pytest.raises(ParameterError):
            generate_ba_graph(5, 0)

    def test_two_node_metropolis(self):
        g = assign_weights(graph_from_edges(2, [(0, 1)]))
        np.testing.assert_allclose(g.weights, [[2 / 3, 1 / 3], [1 / 3, 2 / 3]])

    @pytest.mark.parametrize("perturb", [0.0, 0.3, 0.9])
    def test_doubly_stochastic(self, perturb):
        g = ba(40, seed=3, perturb=perturb)
        W = g.weights
        assert np.abs(W.sum(0) - 1).max() <= 1e-10 and np.abs(W.sum(1) - 1).max() <= 1e-10
        assert np.all(W >= 0)
        assert np.all(W[~g.adjacency] == 0)
        assert np.all(np.diag(W) > 0)
        assert g.second_eigenvalue() < 1

    def test_disconnected(self):
        with pytest.raises(ConnectivityError):
            assign_weights(graph_from_edges(4, [(0, 1), (2, 3)]))


class TestConsensus:
    def test_fixed_point(self):
        g = ba(20)
        est, _ = average_consensus(np.full(20, 3.5), g, rounds=17)
        np.testing.assert_allclose(est, 3.5)

    def test_two_node_hand_case(self):
        g = assign_weights(graph_from_edges(2, [(0, 1)]))
        est, _ = average_consensus(np.array([0.0, 2.0]), g, rounds=1)
        np.testing.assert_allclose(est, [2 / 3, 4 / 3])
        est, _ = average_consensus(np.array([0.0, 2.0]), g, rounds=200)
        np.testing.assert_allclose(est, [1, 1])

    def test_zero_rounds(self):
        g = ba(10)
        v = np.arange(10.0)
        est, ran = average_consensus(v, g, rounds=0)
        assert ran == 0 and np.array_equal(est, v)

    def test_79_nodes_within_five_percent(self):
        g = ba(79)
        v = np.random.default_rng(1).uniform(1, 2, 79)
        est, ran = average_consensus(v, g, config=ConsensusConfig(mode="adaptive", tol=1e-4))
        assert ran <= 200
        assert np.abs(est - v.mean()).max() <= 0.05 * abs(v.mean())

    def test_79_nodes_fixed_200_rounds(self):
        g = ba(79)
        v = np.random.default_rng(2).uniform(1, 2, 79)
        est, _ = average_consensus(v, g, rounds=200)
        assert np.abs(est - v.mean()).max() <= 0.05 * v.mean()

    def test_contraction(self):
        g = ba(30, seed=2)
        lam2 = g.second_eigenvalue()
        v = np.random.default_rng(0).standard_normal(30)
        err = np.linalg.norm(v - v.mean())
        for _ in range(20):
            v, _ = average_consensus(v, g, rounds=1)
            new = np.linalg.norm(v - v.mean())
            assert new <= lam2 * err + 1e-12
            err = new

    def test_exact_double(self):
        g = ba(12)
        v = np.random.default_rng(0).standard_normal((12, 3))
        m = SimMetrics(12)
        est, ran = average_consensus(v, g, config=EXACT, metrics=m)
        np.testing.assert_allclose(est, np.broadcast_to(v.mean(0), v.shape))
        assert ran == 0 and m.messages_total == 0

    def test_message_law(self):
        g = ba(25)
        m = SimMetrics(25)
        _, ran = average_consensus(np.ones((25, 4)), g, rounds=7, metrics=m)
        assert m.messages_total == 7 * g.degrees.sum()
        assert m.scalars.sum() == 7 * g.degrees.sum() * 4
        assert m.consensus_rounds == 7 and m.max_rounds_per_call == 7

    def test_adaptive_cap(self):
        g = ba(10)
        cfg = ConsensusConfig(mode="adaptive", tol=1e-300, max_rounds=5)
        _, ran = average_consensus(np.arange(10.0), g, config=cfg)
        assert ran == 5

    def test_bad_mode(self):
        with pytest.raises(ParameterError):
            ConsensusConfig(mode="gossip")

    def test_flood_max(self):
        g = ba(15, seed=1)
        v = np.zeros(15, dtype=int)
        v[7] = 1
        assert np.all(flood(v, g) == 1)


class TestPowerIterationD:
    def test_rank_one_two_nodes(self):
        M = 50
        t = np.random.default_rng(0).standard_normal(M)
        X = np.vstack([2 * t, t])
        g = assign_weights(graph_from_edges(2, [(0, 1)]))
        x, xh = stack_rows(init_states(X))
        pc, _ = power_iteration_d(x, xh, g, consensus=EXACT)
        truth = np.array([2.0, 1.0]) / np.sqrt(5)
        assert abs(pc.entries @ truth) / np.linalg.norm(pc.entries) >= 0.999

    @pytest.mark.parametrize("seed", range(4))
    def test_exact_matches_centralized(self, seed):
        X = np.random.default_rng(seed).standard_normal((12, 80)) * np.linspace(3, 0.5, 12)[:, None]
        g = ba(12, seed)
        x, xh = stack_rows(init_states(X))
        pc, _ = power_iteration_d(x, xh, g, IterationBudget(1e-12, 2000), EXACT, seed=seed)
        ref = power_iteration(covariance(X), IterationBudget(1e-12, 2000))
        assert abs(pc.entries @ ref.vector) >= 1 - 1e-9

    def test_nodes_agree_on_sign(self):
        X = synth_caida(0, 300, 16)
        g = ba(20)
        x, xh = stack_rows(init_states(X))
        pc, _ = power_iteration_d(x, xh, g, IterationBudget(1e-6, 200))
        first = pc.entries[np.abs(pc.entries) > 1e-12][0]
        assert first >= 0

    def test_nonconvergence_warning(self):
        X = np.random.default_rng(0).standard_normal((6, 40))
        g = ba(6)
        x, xh = stack_rows(init_states(X))
        pc, _ = power_iteration_d(x, xh, g, IterationBudget(1e-15, 2), EXACT)
        assert not pc.converged and "max_iters" in pc.warning

    def test_message_log_monotone(self):
        X = synth_caida(0, 200, 16)
        g = ba(20)
        x, xh = stack_rows(init_states(X))
        pc, m = power_iteration_d(x, xh, g, IterationBudget(1e-6, 100))
        assert pc.messages == sorted(pc.messages)
        assert pc.messages[-1] <= m.messages_total
        assert m.messages_total == sum(r * d for r, d in m.round_log)

    def test_node_state_init(self):
        s = init_states(np.arange(6.0).reshape(2, 3))
        assert np.array_equal(s[0].x_row, s[0].x_hat)
        np.testing.assert_allclose(s[1].x_row, [-1, 0, 1])


class TestEvalPC:
    def test_identity(self):
        t = np.array([0.6, 0.8])
        assert eval_pc_estimate(t, t) == pytest.approx((1.0, 0.0))

    def test_sign_invariant(self):
        t = np.array([0.6, 0.8])
        assert eval_pc_estimate(-t, PrincipalComponent(t, 1.0)) == pytest.approx((1.0, 0.0))

    def test_orthogonal(self):
        n = 4
        bias, mse = eval_pc_estimate(np.eye(n)[0], np.eye(n)[1])
        assert bias == 0 and mse == pytest.approx(2 / n)

    def test_zero_vector(self):
        with pytest.raises(UndefinedMetricError):
            eval_pc_estimate(np.zeros(3), np.ones(3))


def _pair(seed, n, m=200):
    r = np.random.default_rng(seed)
    scale = np.sort(r.uniform(0.2, 3.0, n))[::-1][:, None]
    X = scale * r.standard_normal((n, m))
    Y = scale * r.standard_normal((n, m))
    Y[: n // 3] *= 1.5
    return X, Y


class TestGetESDD:
    def test_identical_datasets(self):
        X, _ = _pair(0, 10)
        d = get_esd_d(X, X, ba(10), consensus=EXACT)
        assert d.result.theta_max_deg <= 1e-3

    @pytest.mark.parametrize("seed", range(3))
    def test_exact_equivalence(self, seed):
        X, Y = _pair(seed, 12)
        budget = IterationBudget(1e-10, 3000)
        d = get_esd_d(X, Y, ba(12, seed), budget, EXACT, seed=seed)
        c = get_esd(covariance(X), covariance(Y), budget, seed=seed)
        assert d.result.esd == c.esd
        assert abs(d.result.theta_max_deg - c.theta_max_deg) <= 1e-6
        assert d.all_agree

    def test_real_consensus_agreement(self):
        X, Y = _pair(5, 15)
        budget = IterationBudget(1e-8, 500)
        d = get_esd_d(X, Y, ba(15, 5), budget, ConsensusConfig(tol=1e-9), seed=0)
        c = get_esd(covariance(X), covariance(Y), budget, seed=0)
        assert d.result.esd == c.esd
        assert abs(d.result.theta_max_deg - c.theta_max_deg) <= 1e-3
        assert d.agree_within(1e-3)
        assert d.metrics.messages_total == sum(r * g for r, g in d.metrics.round_log)

    def test_components_orthogonal(self):
        X, Y = _pair(2, 10)
        d = get_esd_d(X, Y, ba(10, 2), IterationBudget(1e-10, 3000), EXACT)
        A = np.column_stack([pc.vector for pc in d.result.basis_a])
        np.testing.assert_allclose(A.T @ A, np.eye(A.shape[1]), atol=1e-6)

    def test_zero_data(self):
        d = get_esd_d(np.zeros((4, 10)), np.ones((4, 10)), ba(4))
        assert d.result.degenerate and d.result.esd == 0

    def test_size_mismatch(self):
        with pytest.raises(ParameterError):
            get_esd_d(np.ones((5, 10)), np.ones((5, 10)), ba(6))

    def test_to_dict_is_json(self):
        X, Y = _pair(1, 8)
        d = get_esd_d(X, Y, ba(8), consensus=EXACT)
        json.dumps(d.to_dict())


class TestScenario:
    def test_round_trip(self, tmp_path):
        sc = Scenario(n_nodes=20, seed=3, weight_scheme="metropolis-perturbed",
                      consensus={"mode": "fixed", "S_or_tol": 40})
        save_scenario(sc, tmp_path / "s.json")
        back = load_scenario(tmp_path / "s.json")
        assert back == sc
        assert back.consensus_config() == ConsensusConfig(mode="fixed", rounds=40)
        g = back.build_graph()
        assert g.n_nodes == 20 and g.weights is not None

    def test_rejects_unknown_keys(self, tmp_path):
        (tmp_path / "s.json").write_text(json.dumps({"n_nodes": 5, "colour": "red"}))
        with pytest.raises(SchemaError):
            load_scenario(tmp_path / "s.json")

    def test_rejects_bad_mode(self):
        with pytest.raises(SchemaError):
            Scenario(consensus={"mode": "psychic"})

    def test_rejects_bad_json(self, tmp_path):
        (tmp_path / "s.json").write_text("{not json")
        with pytest.raises(SchemaError):
            load_scenario(tmp_path / "s.json")


@settings(max_examples=15, deadline=None)
@given(st.integers(3, 25), st.integers(1, 3), st.integers(0, 1000))
def test_ba_graph_properties(n, attach, seed):
    if n < attach + 1:
        return
    g = assign_weights(generate_ba_graph(n, attach, seed), seed=seed, perturb=0.5)
    assert g.is_connected()
    assert np.allclose(g.weights.sum(0), 1, atol=1e-10) and np.allclose(g.weights.sum(1), 1, atol=1e-10)
    assert np.array_equal(g.adjacency, g.adjacency.T)
