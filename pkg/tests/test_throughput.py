"""Shared-rate model and congestion expectation against brute-force oracles."""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wifishare.throughput import (
    IEEE_80211G,
    ThroughputParams,
    avg_rate,
    congestion_distribution,
    expected_rate,
)


def rate_by_hand(n: float, p: ThroughputParams) -> float:
    # independent one-line transcription of the shared-rate closed form
    tb = 1.0 - p.tau
    succ = p.tau * tb ** (n - 1)
    denom = (
        tb**n * p.t_backoff
        + ((1 - tb**n) - n * succ) * p.t_collision
        + n * succ * p.t_success
    )
    return succ * p.payload / denom


def pmf_by_enumeration(sigmas) -> np.ndarray:
    # sum over explicit subsets: exponential, test-only oracle
    m = len(sigmas)
    pmf = np.zeros(m + 1)
    for included in itertools.product((0, 1), repeat=m):
        prob = 1.0
        for s, inc in zip(sigmas, included):
            prob *= s if inc else 1.0 - s
        pmf[sum(included)] += prob
    return pmf


class TestAvgRate:
    def test_single_user_value(self):
        assert avg_rate(1, IEEE_80211G) == pytest.approx(rate_by_hand(1, IEEE_80211G))
        # 802.11g solo goodput lands in the usual ~14 Mbps ballpark
        assert 10.0 < avg_rate(1, IEEE_80211G) < 20.0

    def test_strictly_decreasing_up_to_50(self):
        rates = avg_rate(np.arange(1, 51, dtype=float), IEEE_80211G)
        assert np.all(np.diff(rates) < 0.0)

    def test_real_argument_matches_integer(self):
        assert avg_rate(3, IEEE_80211G) == pytest.approx(avg_rate(3.0, IEEE_80211G))

    def test_fractional_argument_interpolates_monotonically(self):
        r = [avg_rate(x, IEEE_80211G) for x in (1.0, 1.5, 2.0)]
        assert r[0] > r[1] > r[2]

    def test_rejects_below_one(self):
        with pytest.raises(ValueError):
            avg_rate(0.5, IEEE_80211G)
        with pytest.raises(ValueError):
            avg_rate(np.array([2.0, 0.0]), IEEE_80211G)

    def test_param_validation(self):
        with pytest.raises(ValueError):
            ThroughputParams(tau=0.0, payload=1, t_backoff=1, t_collision=1, t_success=1)
        with pytest.raises(ValueError):
            ThroughputParams(tau=0.1, payload=-1, t_backoff=1, t_collision=1, t_success=1)


class TestCongestionDistribution:
    def test_no_others(self):
        assert congestion_distribution([]).probs == pytest.approx([1.0])

    def test_certain_congestion(self):
        probs = congestion_distribution([1.0, 1.0]).probs
        assert probs == pytest.approx([0.0, 0.0, 1.0])

    def test_fair_coins(self):
        probs = congestion_distribution([0.5, 0.5]).probs
        assert probs == pytest.approx([0.25, 0.5, 0.25])

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            congestion_distribution([0.5, 1.2])

    @settings(max_examples=60, deadline=None)
    @given(
        st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=0, max_size=10)
    )
    def test_matches_subset_enumeration(self, sigmas):
        probs = congestion_distribution(sigmas).probs
        assert np.max(np.abs(probs - pmf_by_enumeration(sigmas))) <= 1e-12

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=1, max_size=8))
    def test_normalized(self, sigmas):
        assert congestion_distribution(sigmas).probs.sum() == pytest.approx(1.0)


class TestExpectedRate:
    def test_alone(self):
        assert expected_rate([], IEEE_80211G) == pytest.approx(avg_rate(1, IEEE_80211G))

    def test_certain_sharing(self):
        assert expected_rate([1.0], IEEE_80211G) == pytest.approx(avg_rate(2, IEEE_80211G))

    def test_two_point_mixture(self):
        want = 0.5 * avg_rate(1, IEEE_80211G) + 0.5 * avg_rate(2, IEEE_80211G)
        assert expected_rate([0.5], IEEE_80211G) == pytest.approx(want)

    @settings(max_examples=40, deadline=None)
    @given(
        st.lists(st.floats(min_value=0.0, max_value=0.99), min_size=1, max_size=6),
        st.integers(min_value=0, max_value=5),
        st.floats(min_value=0.01, max_value=1.0),
    )
    def test_monotone_in_each_coordinate(self, sigmas, idx, bump):
        idx %= len(sigmas)
        bumped = list(sigmas)
        bumped[idx] = min(1.0, bumped[idx] + bump)
        assert expected_rate(bumped, IEEE_80211G) <= expected_rate(sigmas, IEEE_80211G) + 1e-12
