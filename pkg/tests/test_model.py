"""Scenario construction, validation, and config-file round trips."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wifishare.model import (
    EvaluationSpec,
    MobilitySpec,
    NetworkModel,
    PriceScheme,
    MembershipProfile,
    ScenarioSpec,
    User,
    UserKind,
    load_scenario,
    save_scenario,
    scenario_from_dict,
    scenario_to_dict,
    synth_scenario,
    validate_model,
)
from wifishare.throughput import IEEE_80211G, avg_rate


def tiny_model(eta_11=0.5) -> NetworkModel:
    subs = (
        User(0, UserKind.SUBSCRIBER, 1.0, [0.25, eta_11, 0.75 - eta_11]),
        User(1, UserKind.SUBSCRIBER, 2.0, [1 / 3, 1 / 3, 1 / 3]),
    )
    aliens = (User(2, UserKind.ALIEN, 1.5, [0.2, 0.4, 0.4]),)
    return NetworkModel(subs, aliens, delta=0.5, horizon=5, throughput=IEEE_80211G)


class TestValidateModel:
    def test_well_formed(self):
        assert validate_model(tiny_model()) == []

    def test_probability_out_of_range(self):
        bad = NetworkModel(
            (User(0, UserKind.SUBSCRIBER, 1.0, [-0.2, 1.2]),),
            (),
            delta=0.5,
            horizon=1,
            throughput=IEEE_80211G,
        )
        report = validate_model(bad)
        assert any("out of range" in viol for viol in report)

    def test_row_sum_violation(self):
        bad = NetworkModel(
            (User(0, UserKind.SUBSCRIBER, 1.0, [0.4, 0.5]),),
            (),
            delta=0.5,
            horizon=1,
            throughput=IEEE_80211G,
        )
        assert any("sum" in viol for viol in validate_model(bad))

    def test_alien_with_home_rate_flagged(self):
        bad = NetworkModel(
            (User(0, UserKind.SUBSCRIBER, 1.0, [0.0, 1.0]),),
            (User(1, UserKind.ALIEN, 1.0, [0.5, 0.5], home_rate=3.0),),
            delta=0.5,
            horizon=1,
            throughput=IEEE_80211G,
        )
        assert any("home rate" in viol for viol in validate_model(bad))

    def test_misplaced_uid_flagged(self):
        bad = NetworkModel(
            (User(3, UserKind.SUBSCRIBER, 1.0, [0.0, 1.0]),),
            (),
            delta=0.5,
            horizon=1,
            throughput=IEEE_80211G,
        )
        assert any("uid" in viol for viol in validate_model(bad))


class TestSynthScenario:
    def test_small_uniform_scenario(self):
        spec = ScenarioSpec(subscribers=2, aliens=1, mobility=MobilitySpec(kind="uniform"))
        model = synth_scenario(spec, 0)
        for user in model.users:
            assert user.mobility == pytest.approx([1 / 3, 1 / 3, 1 / 3])
        assert validate_model(model) == []

    def test_single_ap_degenerate(self):
        spec = ScenarioSpec(
            subscribers=1,
            aliens=0,
            mobility=MobilitySpec(kind="custom", rows=((0.0, 1.0),)),
        )
        model = synth_scenario(spec, 1)
        assert model.num_users == 1
        assert model.subscribers[0].mobility[1] == 1.0

    def test_gaussian_determinism(self):
        spec = ScenarioSpec(
            subscribers=4,
            aliens=2,
            subscriber_eval=EvaluationSpec(kind="gaussian", mean=4.0, var=2.0),
            alien_eval=EvaluationSpec(kind="gaussian", mean=4.0, var=2.0),
        )
        a = synth_scenario(spec, 7)
        b = synth_scenario(spec, 7)
        assert [u.evaluation for u in a.users] == [u.evaluation for u in b.users]
        c = synth_scenario(spec, 8)
        assert [u.evaluation for u in a.users] != [u.evaluation for u in c.users]

    def test_gaussian_truncated_at_zero(self):
        spec = ScenarioSpec(
            subscribers=50,
            aliens=0,
            subscriber_eval=EvaluationSpec(kind="gaussian", mean=0.1, var=4.0),
        )
        model = synth_scenario(spec, 3)
        assert all(u.evaluation >= 0.0 for u in model.users)

    def test_hotness_ramp_rows(self):
        spec = ScenarioSpec(
            subscribers=5,
            aliens=0,
            mobility=MobilitySpec(kind="hotness-ramp", uncovered=0.2, low=1.0, high=4.0),
        )
        model = synth_scenario(spec, 0)
        row = model.subscribers[0].mobility
        assert row[0] == pytest.approx(0.2)
        assert np.all(np.diff(row[1:]) > 0)
        assert row.sum() == pytest.approx(1.0)

    def test_invalid_specs_rejected(self):
        with pytest.raises(ValueError):
            synth_scenario(ScenarioSpec(subscribers=0, aliens=0), 0)
        with pytest.raises(ValueError):
            synth_scenario(ScenarioSpec(subscribers=1, aliens=-1), 0)
        with pytest.raises(ValueError):
            synth_scenario(
                ScenarioSpec(
                    subscribers=1,
                    aliens=0,
                    subscriber_eval=EvaluationSpec(kind="gaussian", var=-1.0),
                ),
                0,
            )

    @settings(max_examples=25, deadline=None)
    @given(
        st.integers(min_value=1, max_value=6),
        st.integers(min_value=0, max_value=4),
        st.integers(min_value=0, max_value=2**31 - 1),
    )
    def test_generated_models_valid(self, k, ka, seed):
        spec = ScenarioSpec(
            subscribers=k,
            aliens=ka,
            mobility=MobilitySpec(kind="hotness-ramp", uncovered=0.1),
            subscriber_eval=EvaluationSpec(kind="gaussian", mean=4, var=2),
        )
        model = synth_scenario(spec, seed)
        assert validate_model(model) == []
        rows = model.mobility_matrix()
        assert np.all(rows >= 0) and np.all(rows <= 1)
        assert np.max(np.abs(rows.sum(axis=1) - 1.0)) <= 1e-9


class TestPriceScheme:
    def test_group_backed_consistency(self):
        scheme = PriceScheme.from_groups([2.0, 5.0], [(0, 2), (1, 3)])
        assert scheme.prices == pytest.approx([2.0, 5.0, 2.0, 5.0])
        for price, members in zip(scheme.group_prices, scheme.groups):
            for ap in members:
                assert scheme.prices[ap] == price

    def test_uniform(self):
        scheme = PriceScheme.uniform(1.5, 3)
        assert scheme.prices == pytest.approx([1.5, 1.5, 1.5])

    def test_clamped(self):
        scheme = PriceScheme(prices=[5.0, 0.5]).clamped(2.0)
        assert scheme.prices == pytest.approx([2.0, 0.5])

    def test_group_count_mismatch(self):
        with pytest.raises(ValueError):
            PriceScheme.from_groups([1.0], [(0,), (1,)])


class TestMembershipProfile:
    def test_exactly_one_side(self):
        with pytest.raises(ValueError):
            MembershipProfile()
        with pytest.raises(ValueError):
            MembershipProfile(pure=(0, 1), mixed=np.array([0.5]))

    def test_mixed_bounds(self):
        with pytest.raises(ValueError):
            MembershipProfile(mixed=np.array([0.5, 1.2]))
        profile = MembershipProfile(mixed=np.array([0.0, 1.0]))
        assert profile.mixed == pytest.approx([0.0, 1.0])


class TestModelAccessors:
    def test_home_rate_defaults_to_solo_rate(self):
        model = tiny_model()
        assert model.home_rate(0) == pytest.approx(avg_rate(1, IEEE_80211G))

    def test_home_rate_override(self):
        spec = ScenarioSpec(subscribers=1, aliens=0, home_rate=3.0)
        model = synth_scenario(spec, 0)
        assert model.home_rate(0) == 3.0

    def test_visit_probability(self):
        model = tiny_model()
        assert model.visit_probability(2, 0) == pytest.approx(0.4)


class TestScenarioFiles:
    def test_round_trip(self, tmp_path):
        spec = ScenarioSpec(
            subscribers=3,
            aliens=2,
            delta=0.25,
            horizon=7,
            mobility=MobilitySpec(kind="hotness-ramp", uncovered=0.15, low=2.0, high=3.0),
            subscriber_eval=EvaluationSpec(kind="ramp", low=0.5, high=2.0),
            alien_eval=EvaluationSpec(kind="constant", value=4.0),
        )
        path = tmp_path / "scenario.yaml"
        save_scenario(spec, path)
        loaded = load_scenario(path)
        assert loaded == spec
        assert validate_model(synth_scenario(loaded, 5)) == []

    def test_round_trip_custom_rows(self, tmp_path):
        rows = ((0.1, 0.9), (0.3, 0.7))
        spec = ScenarioSpec(
            subscribers=1,
            aliens=1,
            mobility=MobilitySpec(kind="custom", rows=rows),
        )
        path = tmp_path / "scenario.yaml"
        save_scenario(spec, path)
        assert load_scenario(path).mobility.rows == rows

    def test_dict_round_trip(self):
        spec = ScenarioSpec(subscribers=2, aliens=0)
        assert scenario_from_dict(scenario_to_dict(spec)) == spec

    def test_non_mapping_rejected(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("- just\n- a list\n")
        with pytest.raises(ValueError):
            load_scenario(path)
