"""Regression construction, dictionaries and the lag layout."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import arxnet as ax


class TestArxRegression:
    def test_hand_example_k1(self):
        # p=1, m=0, k=1, y = [1,2,3]: target [y(3), y(2)] = [3,2], Phi = [-2; -1]
        data = ax.TimeSeriesData(y=np.array([[1.0, 2.0, 3.0]]), u=np.zeros((0, 3)), t=3)
        prob = ax.build_arx_regression(data, 0, 1)
        np.testing.assert_allclose(prob.y, [3.0, 2.0])
        np.testing.assert_allclose(prob.phi, [[-2.0], [-1.0]])

    def test_all_zero_data(self):
        data = ax.TimeSeriesData(y=np.zeros((2, 10)), u=np.zeros((1, 10)), t=10)
        prob = ax.build_arx_regression(data, 1, 3)
        assert np.all(prob.phi == 0) and np.all(prob.y == 0)

    def test_dimensions_paper_settings(self):
        rng = np.random.default_rng(0)
        data = ax.TimeSeriesData(
            y=rng.standard_normal((10, 100)), u=rng.standard_normal((10, 100)), t=100
        )
        prob = ax.build_arx_regression(data, 0, 8)
        assert prob.phi.shape == (92, 160)
        assert prob.groups.n_groups == 20
        assert all(s == 8 for s in prob.groups.group_sizes)

    def test_insufficient_data(self):
        data = ax.TimeSeriesData(y=np.ones((1, 4)), u=np.zeros((0, 4)), t=4)
        with pytest.raises(ax.InsufficientData):
            ax.build_arx_regression(data, 0, 4)

    def test_reconstruction_identity(self):
        # noise-free data from a known network reproduces y = Phi w exactly
        rng = np.random.default_rng(4)
        net = ax.gen_random_network(4, 4, 0.4, (1, 3), rng)
        u = rng.standard_normal((4, 60))
        data = ax.simulate(net, u, 60)
        for node in range(4):
            prob = ax.build_arx_regression(data, node, 6)
            w_true = ax.true_arx_weight_vector(net, node, 6)
            np.testing.assert_allclose(prob.phi @ w_true, prob.y, atol=1e-10)

    def test_causality(self):
        rng = np.random.default_rng(1)
        y = rng.standard_normal((2, 30))
        data = ax.TimeSeriesData(y=y, u=np.zeros((0, 30)), t=30)
        prob = ax.build_arx_regression(data, 0, 4)
        tau = 14  # perturb time index 15 (1-based)
        y2 = y.copy()
        y2[1, tau] += 1.0
        prob2 = ax.build_arx_regression(ax.TimeSeriesData(y=y2, u=np.zeros((0, 30)), t=30), 0, 4)
        diff_rows = np.nonzero(np.any(prob.phi != prob2.phi, axis=1))[0]
        # rows are ordered t..k+1 descending; row r targets time t-r
        target_times = 30 - diff_rows
        assert np.all(target_times > tau + 1)

    def test_epsilon_policy(self):
        data = ax.TimeSeriesData(y=np.ones((1, 10)), u=np.zeros((0, 10)), t=10)
        prob = ax.build_arx_regression(data, 0, 2, epsilon_norm=1e-3)
        assert np.linalg.norm(prob.epsilon) == pytest.approx(1e-3)
        prob0 = ax.build_arx_regression(data, 0, 2)
        assert np.all(prob0.epsilon == 0)


class TestGroupStructure:
    @given(sizes=st.lists(st.integers(1, 6), min_size=1, max_size=8))
    @settings(max_examples=40, deadline=None)
    def test_split_concat_roundtrip(self, sizes):
        groups = ax.GroupStructure(tuple(sizes), tuple(("node", r) for r in range(len(sizes))))
        w = np.arange(groups.dim, dtype=float)
        np.testing.assert_array_equal(np.concatenate(groups.split(w)), w)

    def test_expand_and_group_of(self):
        groups = ax.GroupStructure((2, 3), (("node", 0), ("input", 0)))
        np.testing.assert_array_equal(groups.expand(np.array([5.0, 7.0])), [5, 5, 7, 7, 7])
        np.testing.assert_array_equal(groups.group_of, [0, 0, 1, 1, 1])

    def test_group_norms(self):
        groups = ax.GroupStructure((2, 2), (("node", 0), ("node", 1)))
        norms = groups.group_norms(np.array([3.0, 4.0, 0.0, 0.0]))
        np.testing.assert_allclose(norms, [5.0, 0.0])


class TestDictionaries:
    def test_hill_count(self):
        assert ax.hill_dictionary(4).size == 9
        assert ax.hill_dictionary(1).size == 3

    def test_hill_symmetry_at_one(self):
        d = ax.hill_dictionary(2)
        act = [f for f in d.descriptors if f.kind == "hill_act" and f.param == 2][0]
        rep = [f for f in d.descriptors if f.kind == "hill_rep" and f.param == 2][0]
        assert act.evaluate(np.array([1.0]))[0] == pytest.approx(0.5)
        assert rep.evaluate(np.array([1.0]))[0] == pytest.approx(0.5)

    def test_mm_grid_counts(self):
        grid = np.arange(0.5, 5.01, 0.5)
        d = ax.mm_dictionary(grid)
        assert d.size == 20
        assert not d.include_self

    def test_mm_at_k_equals_half(self):
        d = ax.mm_dictionary([2.0])
        for f in d.descriptors:
            assert f.evaluate(np.array([2.0]))[0] == pytest.approx(0.5)

    @given(st.floats(0.05, 50), st.floats(0.5, 5))
    @settings(max_examples=40, deadline=None)
    def test_mm_act_plus_rep_is_one(self, x, k):
        act = ax.regression.BasisFunction("mm_act", k)
        rep = ax.regression.BasisFunction("mm_rep", k)
        total = act.evaluate(np.array([x]))[0] + rep.evaluate(np.array([x]))[0]
        assert total == pytest.approx(1.0)

    def test_bad_grid_rejected(self):
        with pytest.raises(ValueError):
            ax.mm_dictionary([])
        with pytest.raises(ValueError):
            ax.mm_dictionary([0.5, -1.0])


class TestNarxRegression:
    def test_repressilator_dimension_55(self):
        data = ax.simulate_repressilator(50, 0.0, 0.01)
        prob = ax.build_narx_regression(data, 0, ax.hill_dictionary(4), known_input=0)
        assert prob.dim == 55
        assert prob.groups.n_groups == 7
        assert prob.n_rows == 49

    def test_millar_style_dimension_120(self):
        rng = np.random.default_rng(0)
        data = ax.TimeSeriesData(
            y=np.abs(rng.standard_normal((7, 30))) + 0.1, u=np.zeros((0, 30)), t=30
        )
        grid = np.arange(0.5, 5.01, 0.5)
        prob = ax.build_narx_regression(data, 2, ax.mm_dictionary(grid))
        assert prob.dim == 120
        assert prob.groups.n_groups == 6

    def test_constant_zero_regulator_columns(self):
        y = np.vstack([np.zeros(20), np.abs(np.random.default_rng(0).standard_normal(20)) + 0.5])
        data = ax.TimeSeriesData(y=y, u=np.zeros((0, 20)), t=20)
        prob = ax.build_narx_regression(data, 1, ax.hill_dictionary(2))
        sl = prob.groups.slices()[0]  # regulator 0 is identically zero
        block = prob.phi[:, sl]
        descs = ax.hill_dictionary(2).descriptors
        for col, f in zip(block.T, descs):
            if f.kind == "linear" or f.kind == "hill_act":
                assert np.all(col == 0)
            else:
                assert np.all(col == 1.0)

    def test_empty_dictionary(self):
        data = ax.simulate_repressilator(10, 0.0, 0.0)
        with pytest.raises(ax.EmptyDictionary):
            ax.build_narx_regression(data, 0, ax.BasisDictionary((), include_self=True))

    def test_one_step_causality(self):
        data = ax.simulate_repressilator(20, 0.0, 0.01)
        prob = ax.build_narx_regression(data, 0, ax.hill_dictionary(1))
        # row 0 targets time t; its regressors come from time t-1
        assert prob.y[0] == data.y[0, -1]
        lin_col = prob.phi[:, 0]
        np.testing.assert_allclose(lin_col, data.y[0, 18::-1])

    def test_exact_representation(self):
        # the true repressilator dynamics live in the dictionary span
        data = ax.simulate_repressilator(40, 0.0, 0.01)
        from arxnet.harness import ExperimentConfig, build_problem, repressilator_truth_weights
        from arxnet.solvers import InferenceResult, estimate_orders
        from arxnet.priors import init_hyperparameters

        cfg = ExperimentConfig(experiment="repressilator", t=40, noise_var=0.0, snr_db=None)
        for node in range(6):
            prob = build_problem(cfg, data, node)
            hyper = init_hyperparameters(prob.groups, "gesbl", 1.0)
            res = InferenceResult(
                w=np.zeros(prob.dim),
                group_norms=np.zeros(prob.groups.n_groups),
                hyper=hyper,
                cost_trajectory=np.zeros(0),
                iterations=0,
                converged=True,
                estimated_orders=estimate_orders(np.zeros(prob.dim), prob.groups),
                groups=prob.groups,
                node_index=node,
            )
            w_true = repressilator_truth_weights(res)
            np.testing.assert_allclose(prob.phi @ w_true, prob.y, atol=1e-10)
