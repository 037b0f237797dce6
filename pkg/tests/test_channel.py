import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csma_backoff import (ChannelParams, DomainError, channel_stationary, channel_transitions,
                          channel_walk, success_probs, throughput, time_avg_success)

from oracles import channel_matrix, channel_solve

A_GRID = (0.01, 0.05, 0.1)
G_GRID = np.linspace(0.01, 10.0, 200)


def _eq2_mp(a, G):
    """Transition probabilities in 50-digit arithmetic."""
    with mpmath.workdps(50):
        a, G = mpmath.mpf(a), mpmath.mpf(G)
        e1, e2 = mpmath.exp(-a * G), mpmath.exp(-(1 + a) * G)
        return [float(v) for v in (
            e1, a * G * e1, 1 - e1 - a * G * e1,
            e2, (1 + a) * G * e2, 1 - e2 - (1 + a) * G * e2,
        )]


# [DERIVED] 50-digit evaluation at (a=0.1, G=1), frozen
EQ2_FROZEN = (
    0.90483741803595957316, 0.090483741803595957316, 0.0046788401604444695193,
    0.33287108369807955329, 0.36615819206788750862, 0.30097072423403293809,
)


class TestParams:
    def test_rejects_non_integer_minislots(self):
        with pytest.raises(DomainError):
            ChannelParams(0.3, 1.0)

    @pytest.mark.parametrize("a,G", [(0.0, 1.0), (-0.1, 1.0), (0.1, -1.0)])
    def test_domain(self, a, G):
        with pytest.raises(DomainError):
            ChannelParams(a, G)

    def test_M(self):
        assert ChannelParams(0.05, 1.0).M == 20


class TestTransitions:
    def test_zero_rate(self):
        t = channel_transitions(ChannelParams(0.1, 0.0))
        assert (t.idle_idle, t.idle_suc1, t.idle_col) == (1.0, 0.0, 0.0)

    def test_saturated(self):
        t = channel_transitions(ChannelParams(0.1, 800.0))
        assert t.idle_idle < 1e-30
        assert t.idle_col == pytest.approx(1.0)

    def test_high_precision(self):
        t = channel_transitions(ChannelParams(0.1, 1.0))
        got = (t.idle_idle, t.idle_suc1, t.idle_col, t.busy_idle, t.busy_suc2, t.busy_col)
        np.testing.assert_allclose(got, EQ2_FROZEN, rtol=0, atol=1e-15)
        np.testing.assert_allclose(got, _eq2_mp(0.1, 1.0), rtol=0, atol=1e-15)

    @pytest.mark.parametrize("a", A_GRID)
    def test_rows_are_distributions(self, a):
        for G in G_GRID:
            P = channel_transitions(ChannelParams(a, G)).matrix()
            assert np.all(P >= 0) and np.all(P <= 1)
            np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)

    def test_matrix_matches_arc_construction(self):
        np.testing.assert_allclose(channel_transitions(ChannelParams(0.05, 2.0)).matrix(),
                                   channel_matrix(0.05, 2.0), atol=1e-15)


class TestStationary:
    @pytest.mark.parametrize("a", A_GRID)
    def test_normalised_and_balanced(self, a):
        for G in G_GRID:
            params = ChannelParams(a, G)
            pi = channel_stationary(params).as_array()
            assert abs(pi.sum() - 1.0) < 1e-12
            P = channel_transitions(params).matrix()
            assert np.abs(pi @ P - pi).max() < 1e-10

    def test_matches_linear_solve(self):
        for a in A_GRID:
            for G in (0.1, 1.0, 5.0):
                np.testing.assert_allclose(channel_stationary(ChannelParams(a, G)).as_array(),
                                           channel_solve(a, G), atol=1e-12)

    def test_zero_rate_branch(self):
        s = channel_stationary(ChannelParams(0.1, 0.0))
        assert (s.pi_idle, s.pi_suc1, s.pi_suc2, s.pi_col) == (1.0, 0.0, 0.0, 0.0)

    def test_small_rate_limit(self):
        s = channel_stationary(ChannelParams(0.1, 1e-9))
        assert s.pi_idle == pytest.approx(1.0, abs=1e-8)

    def test_sojourns(self):
        s = channel_stationary(ChannelParams(0.1, 1.0))
        assert s.t_idle == 0.1
        assert s.t_suc1 == s.t_suc2 == s.t_col == pytest.approx(1.1)

    def test_monte_carlo(self):
        params = ChannelParams(0.1, 1.0)
        visits, times = channel_walk(params, 10**7, seed=7)
        expected = channel_stationary(params).as_array()
        assert np.abs(visits.mean - expected).max() < 1e-3
        assert np.all(np.abs(visits.mean - expected) <= 3 * visits.stderr + 1e-12)
        assert abs(times.mean[1] + times.mean[2] - time_avg_success(params)) < 1e-3


class TestThroughput:
    def test_zero(self):
        assert throughput(ChannelParams(0.1, 0.0)) == 0.0
        assert time_avg_success(ChannelParams(0.1, 0.0)) == 0.0

    @pytest.mark.parametrize("G", [0.347, 1.981])
    def test_anchor_points(self, G):
        assert throughput(ChannelParams(0.1, G)) == pytest.approx(0.3, abs=2e-3)

    def test_definitional_forms(self):
        a = 0.1
        params = ChannelParams(a, 1.0)
        s = channel_stationary(params)
        succ = s.pi_suc1 + s.pi_suc2
        direct = (1 + a) * succ / ((1 + a) * (succ + s.pi_col) + a * s.pi_idle)
        assert time_avg_success(params) == pytest.approx(direct, abs=1e-14)
        assert throughput(params) == pytest.approx(time_avg_success(params) / (1 + a), abs=1e-14)

    @pytest.mark.parametrize("a", A_GRID)
    def test_equals_G_times_p(self, a):
        for G in G_GRID:
            params = ChannelParams(a, G)
            assert abs(throughput(params) - G * success_probs(params).p) < 1e-12

    @pytest.mark.parametrize("a", A_GRID)
    def test_unimodal(self, a):
        G = np.logspace(-3, 2, 2000)
        y = np.array([throughput(ChannelParams(a, g)) for g in G])
        signs = np.sign(np.diff(y))
        signs = signs[signs != 0]
        assert signs[0] > 0 and signs[-1] < 0
        assert np.count_nonzero(np.diff(signs)) == 1

    def test_small_G_is_accurate(self):
        # expm1 keeps the leading order G for tiny attempt rates
        assert throughput(ChannelParams(0.01, 1e-10)) == pytest.approx(1e-10, rel=1e-8)


@settings(max_examples=200, deadline=None)
@given(st.sampled_from([1, 2, 5, 10, 20, 50, 100]),
       st.floats(min_value=1e-6, max_value=50.0))
def test_stationary_properties(M, G):
    params = ChannelParams(1.0 / M, G)
    pi = channel_stationary(params).as_array()
    assert np.all(pi >= 0) and np.all(pi <= 1)
    assert abs(pi.sum() - 1.0) < 1e-12
    P = channel_transitions(params).matrix()
    assert np.abs(pi @ P - pi).max() < 1e-10
    assert 0.0 <= throughput(params) <= 1.0
    assert math.isfinite(time_avg_success(params))
