"""Generators, stability and simulators."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import arxnet as ax
from arxnet.model import companion_matrix, spectral_radius


def diag_net(p, coeff, b_coeff=1.0, noise=0.0):
    a = np.zeros((p, p, 1))
    b = np.zeros((p, p, 1))
    for i in range(p):
        a[i, i, 0] = coeff
        b[i, i, 0] = b_coeff
    return ax.ArxNetwork(p, p, a, b, np.full(p, noise))


class TestStablePoly:
    def test_order_one_bounded(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            c = ax.gen_stable_poly(1, rng)
            assert c.shape == (1,)
            assert abs(c[0]) <= 0.95

    def test_order_zero_rejected(self):
        with pytest.raises(ValueError):
            ax.gen_stable_poly(0, np.random.default_rng(0))

    def test_roots_inside_cap_order5(self):
        rng = np.random.default_rng(7)
        coeffs = ax.gen_stable_poly(5, rng)
        roots = np.roots(np.concatenate([[1.0], coeffs]))
        assert np.all(np.abs(roots) < 1.0)
        assert np.all(np.abs(roots) <= 0.95 + 1e-9)

    @given(order=st.integers(1, 6), seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=40, deadline=None)
    def test_roots_inside_cap_property(self, order, seed):
        coeffs = ax.gen_stable_poly(order, np.random.default_rng(seed))
        roots = np.roots(np.concatenate([[1.0], coeffs]))
        assert np.all(np.abs(roots) <= 0.95 + 1e-9)


class TestStability:
    def test_diagonal_stable(self):
        # A = I - 0.5 I z^-1: poles at 0.5
        net = diag_net(2, -0.5)
        assert ax.is_stable(net)

    def test_diagonal_unstable(self):
        net = diag_net(2, -1.1)
        assert not ax.is_stable(net)

    def test_scalar_agrees_with_roots(self):
        rng = np.random.default_rng(3)
        for _ in range(120):
            order = int(rng.integers(1, 6))
            coeffs = rng.uniform(-0.8, 0.8, order)
            a = coeffs.reshape(1, 1, order)
            net = ax.ArxNetwork(1, 0, a, np.zeros((1, 0, 1)), np.zeros(1))
            roots = np.roots(np.concatenate([[1.0], coeffs]))
            assert ax.is_stable(net) == bool(np.all(np.abs(roots) < 1.0))

    def test_companion_shape(self):
        net = diag_net(3, -0.5)
        assert companion_matrix(net).shape == (3, 3)


class TestRandomNetwork:
    def test_generated_network_is_stable(self):
        rng = np.random.default_rng(1)
        net = ax.gen_random_network(5, 5, 0.4, (1, 5), rng)
        assert ax.is_stable(net)

    def test_edge_prob_mean_link_count(self):
        # edge_prob 0.4 puts about 36 of the 90 possible links in play
        rng = np.random.default_rng(0)
        counts = [
            ax.Topology.from_network(
                ax.gen_random_network(10, 10, 0.4, (1, 5), rng)
            ).offdiag_link_count()
            for _ in range(10)
        ]
        assert 25 <= np.mean(counts) <= 46

    def test_diagonal_and_b_structure(self):
        rng = np.random.default_rng(2)
        net = ax.gen_random_network(6, 6, 0.4, (1, 5), rng)
        top = ax.Topology.from_network(net)
        assert np.all(np.diag(top.a_edges))
        assert np.all(np.diag(top.b_edges))
        offdiag_b = top.b_edges & ~np.eye(6, dtype=bool)
        assert not offdiag_b.any()

    def test_degenerate_edge_prob_exhausts_budget(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ax.GenerationBudgetExceeded):
            ax.gen_random_network(4, 4, 1e-9, (1, 3), rng, max_attempts=30)

    def test_seed_determinism(self):
        n1 = ax.gen_random_network(5, 5, 0.4, (1, 5), np.random.default_rng(11))
        n2 = ax.gen_random_network(5, 5, 0.4, (1, 5), np.random.default_rng(11))
        np.testing.assert_array_equal(n1.a_coeffs, n2.a_coeffs)
        np.testing.assert_array_equal(n1.b_coeffs, n2.b_coeffs)


class TestRingNetwork:
    def test_link_count_is_p(self):
        rng = np.random.default_rng(3)
        net = ax.gen_ring_network(10, (1, 5), rng)
        top = ax.Topology.from_network(net)
        assert top.offdiag_link_count() == 10

    def test_smallest_ring(self):
        rng = np.random.default_rng(0)
        net = ax.gen_ring_network(2, (1, 2), rng)
        top = ax.Topology.from_network(net)
        assert top.a_edges[0, 1] and top.a_edges[1, 0]

    def test_ring_stable(self):
        net = ax.gen_ring_network(10, (1, 5), np.random.default_rng(3))
        assert ax.is_stable(net)
        assert spectral_radius(net) < 0.9

    def test_single_input_on_first_node(self):
        net = ax.gen_ring_network(7, (1, 4), np.random.default_rng(5))
        assert net.m == 1
        top = ax.Topology.from_network(net)
        assert top.b_edges[0, 0]
        assert top.b_edges.sum() == 1


class TestSimulate:
    def test_zero_everything_gives_zero(self):
        net = diag_net(2, -0.5)
        data = ax.simulate(net, np.zeros((2, 20)), 20)
        assert np.all(data.y == 0)

    def test_hand_recursion_step_input(self):
        # y(t) = 0.5 y(t-1) + u(t-1), unit step: 0, 1, 1.5, 1.75, ...
        a = np.array([[[-0.5]]])
        b = np.array([[[1.0]]])
        net = ax.ArxNetwork(1, 1, a, b, np.zeros(1))
        u = np.ones((1, 5))
        data = ax.simulate(net, u, 5)
        np.testing.assert_allclose(data.y[0], [0.0, 1.0, 1.5, 1.75, 1.875])

    def test_snr_calibration(self):
        rng = np.random.default_rng(8)
        net = ax.gen_random_network(3, 3, 0.4, (1, 3), rng)
        net = net.with_noise_var(ax.noise_var_for_snr(1.0, 10.0))
        t = 10_000
        u = rng.standard_normal((3, t))
        data = ax.simulate(net, u, t, rng)
        # recover the injected noise exactly from the recursion
        e = np.array(
            [
                data.y[:, idx]
                + sum(
                    net.a_coeffs[:, :, lag - 1] @ data.y[:, idx - lag]
                    for lag in range(1, net.order_a + 1)
                    if idx - lag >= 0
                )
                - sum(
                    net.b_coeffs[:, :, lag - 1] @ data.u[:, idx - lag]
                    for lag in range(1, net.order_b + 1)
                    if idx - lag >= 0
                )
                for idx in range(t)
            ]
        ).T
        snr_hat = 10 * np.log10(np.var(data.u) / np.var(e))
        assert abs(snr_hat - 10.0) < 1.0

    def test_noise_variance_calibration(self):
        net = diag_net(1, -0.3, noise=0.04)
        rng = np.random.default_rng(5)
        t = 100_000
        data = ax.simulate(net, np.zeros((1, t)), t, rng)
        e = data.y[0, 1:] - 0.3 * data.y[0, :-1]
        assert abs(np.var(e) - 0.04) / 0.04 < 0.05

    def test_seed_determinism(self):
        net = diag_net(2, -0.5, noise=0.1)
        u = np.random.default_rng(1).standard_normal((2, 30))
        d1 = ax.simulate(net, u, 30, np.random.default_rng(42))
        d2 = ax.simulate(net, u, 30, np.random.default_rng(42))
        np.testing.assert_array_equal(d1.y, d2.y)

    def test_unstable_warns(self):
        net = diag_net(1, -1.2)
        with pytest.warns(UserWarning):
            ax.simulate(net, np.zeros((1, 5)), 5)

    def test_dimension_mismatch(self):
        net = diag_net(2, -0.5)
        with pytest.raises(ax.DimensionMismatch):
            ax.simulate(net, np.zeros((3, 10)), 10)


class TestNoiseVarForSnr:
    def test_zero_db(self):
        assert ax.noise_var_for_snr(1.0, 0.0) == 1.0

    def test_twenty_db(self):
        assert ax.noise_var_for_snr(1.0, 20.0) == pytest.approx(0.01)

    def test_formula(self):
        assert ax.noise_var_for_snr(4.0, 10.0) == pytest.approx(0.4)

    @given(st.floats(0.01, 100), st.floats(-30, 40))
    @settings(max_examples=30, deadline=None)
    def test_positive_and_monotone(self, u_var, snr):
        v = ax.noise_var_for_snr(u_var, snr)
        assert v > 0
        assert ax.noise_var_for_snr(u_var, snr + 1) < v


class TestRepressilator:
    def test_parameters_echoed(self):
        from arxnet.model import (
            REPRESSILATOR_ALPHA,
            REPRESSILATOR_BETA,
            REPRESSILATOR_DELTA,
            REPRESSILATOR_HILL_N,
        )

        assert REPRESSILATOR_DELTA == (0.3, 0.4, 0.5, 0.2, 0.4, 0.6)
        assert REPRESSILATOR_ALPHA == (4.0, 3.0, 5.0)
        assert REPRESSILATOR_BETA == (1.4, 1.5, 1.6)
        assert REPRESSILATOR_HILL_N == (1, 2, 2)

    def test_hand_step_from_zero_state(self):
        data = ax.simulate_repressilator(3, 0.0, u_amplitude=0.0)
        # x1(2) = alpha1 / (1 + x6(1)^1) with x6(1) = 0
        assert data.y[0, 1] == pytest.approx(4.0)
        assert data.y[1, 1] == pytest.approx(3.0)
        assert data.y[2, 1] == pytest.approx(5.0)

    def test_deterministic_without_noise(self):
        d1 = ax.simulate_repressilator(50, 0.0, 0.01)
        d2 = ax.simulate_repressilator(50, 0.0, 0.01)
        np.testing.assert_array_equal(d1.y, d2.y)

    def test_oscillates(self):
        data = ax.simulate_repressilator(50, 0.0, 0.01)
        x1 = data.y[0]
        interior = x1[1:-1]
        maxima = np.sum((interior > x1[:-2]) & (interior > x1[2:]))
        assert maxima >= 2
        assert np.any(np.diff(x1) < 0) and np.any(np.diff(x1) > 0)

    def test_truth_topology(self):
        top = ax.repressilator_truth_topology()
        assert top.offdiag_link_count() == 6
        assert top.a_edges[0, 5] and top.a_edges[3, 0]


class TestSerialization:
    def test_network_json_roundtrip(self, tmp_path):
        net = ax.gen_random_network(4, 4, 0.4, (1, 3), np.random.default_rng(0))
        path = tmp_path / "net.json"
        net.save(path)
        back = ax.ArxNetwork.load(path)
        np.testing.assert_array_equal(net.a_coeffs, back.a_coeffs)
        np.testing.assert_array_equal(net.b_coeffs, back.b_coeffs)
        np.testing.assert_array_equal(net.noise_var, back.noise_var)
        # byte-identical on re-save
        net.save(tmp_path / "net2.json")
        assert (tmp_path / "net.json").read_bytes() == (tmp_path / "net2.json").read_bytes()

    def test_timeseries_csv_roundtrip(self, tmp_path):
        rng = np.random.default_rng(1)
        data = ax.TimeSeriesData(y=rng.standard_normal((3, 17)), u=rng.standard_normal((2, 17)), t=17)
        path = tmp_path / "d.csv"
        data.to_csv(path)
        header = path.read_text().splitlines()[0]
        assert header == "t,y1,y2,y3,u1,u2"
        back = ax.TimeSeriesData.from_csv(path)
        np.testing.assert_array_equal(data.y, back.y)
        np.testing.assert_array_equal(data.u, back.u)
        back.to_csv(tmp_path / "d2.csv")
        assert path.read_bytes() == (tmp_path / "d2.csv").read_bytes()
