import math

import numpy as np
import pytest

from mppcausal.estimate import (
    EstimatedPositivityError,
    OutcomeFunctional,
    fit_discrete_atoms,
    gformula_mc,
    ipw_estimate,
    joint_potential_mean,
    martingale_residuals,
)
from mppcausal.oracle import oracle_g_formula, to_continuous
from mppcausal.scenario import parse_config
from mppcausal.simulate import RandomizerStream, simulate_observed
from mppcausal.trajectory import Baseline, Trajectory

from conftest import one_period_scenario

B = Baseline()


def draw_sample(sc, n, seed):
    return [simulate_observed(sc, RandomizerStream(seed, i)) for i in range(n)]


class TestOutcomeFunctional:
    def test_survival(self):
        sc = to_continuous(one_period_scenario())
        y = sc.space.component_index("y")
        f = OutcomeFunctional("survival", y, 4.0)
        empty = Trajectory(sc.space, (), 4.0)
        hit = Trajectory(sc.space, ((3.0, sc.space.mark_index("y")),), 4.0)
        assert f(empty) == 1.0
        assert f(hit) == 0.0

    def test_count_cap(self):
        sc = to_continuous(one_period_scenario())
        y_mark = sc.space.mark_index("y")
        f = OutcomeFunctional("count", sc.space.component_index("y"), 4.0, cap=1)
        hit = Trajectory(sc.space, ((3.0, y_mark),), 4.0)
        assert f(hit) == 1.0

    def test_unknown_kind(self):
        f = OutcomeFunctional("median", 0, 1.0)
        sc = to_continuous(one_period_scenario())
        with pytest.raises(ValueError):
            f(Trajectory(sc.space, (), 4.0))


class TestIpwTrivialCases:
    def test_zero_treatment_hazard_prevent_gives_naive_mean(self):
        # if treatment never fires, everyone is a follower with weight 1,
        # and the weighted mean equals the plain mean
        sc = parse_config(
            {
                "type": "continuous",
                "horizon": 2.0,
                "components": [
                    {"name": "a", "rate": {"base": 0.0}},
                    {"name": "y", "rate": {"base": 0.4}},
                ],
                "interventions": [{"target": "a", "kind": "prevent"}],
                "outcome": {"kind": "survival", "component": "y", "t": 2.0},
            }
        )
        sample = draw_sample(sc, 400, 31)
        rep = ipw_estimate(sc, sample, sc.outcome, 2.0)
        naive = np.mean([sc.outcome(traj) for _, traj in sample])
        assert rep.value == pytest.approx(float(naive), abs=1e-12)

    def test_all_deviators_gives_zero(self):
        # deterministic immediate treatment makes every subject deviate
        sc = parse_config(
            {
                "type": "continuous",
                "horizon": 2.0,
                "components": [
                    {"name": "a", "atoms": [{"time": 0.5, "prob": 1.0}]},
                    {"name": "y", "rate": {"base": 0.4}},
                ],
                "interventions": [{"target": "a", "kind": "prevent"}],
                "outcome": {"kind": "survival", "component": "y", "t": 2.0},
            }
        )
        sample = draw_sample(sc, 50, 32)
        rep = ipw_estimate(sc, sample, sc.outcome, 2.0)
        assert rep.value == 0.0
        assert rep.se == 0.0

    def test_unknown_weights_mode(self, one_period):
        sc = to_continuous(one_period)
        sample = draw_sample(sc, 5, 33)
        with pytest.raises(ValueError):
            ipw_estimate(sc, sample, sc.outcome, sc.horizon, weights="bogus")


class TestAgreementWithOracle:
    def test_three_estimators_near_truth(self, one_period):
        sc = to_continuous(one_period)
        truth = oracle_g_formula(one_period)
        n = 8000
        sample = draw_sample(sc, n, 34)
        t = sc.horizon
        for rep in (
            ipw_estimate(sc, sample, sc.outcome, t),
            gformula_mc(sc, n, sc.outcome, t, seed=35),
            joint_potential_mean(sc, n, sc.outcome, t, seed=36),
        ):
            assert abs(rep.value - truth) < 4 * rep.se, rep


class TestFittedAtoms:
    def test_recovers_conditional_frequencies(self, one_period):
        sc = to_continuous(one_period)
        n = 20_000
        sample = draw_sample(sc, n, 37)
        fitted = fit_discrete_atoms(sample, one_period)
        # A fires with prob 0.3 when L=0 and 0.7 when L=1
        for l_bit, p in ((0, 0.3), (1, 0.7)):
            est = fitted.probs[(2.0, (l_bit,))]
            se = math.sqrt(p * (1 - p) / (n / 2))
            assert abs(est - p) < 5 * se

    def test_empty_follower_cell_errors(self, one_period):
        sc = to_continuous(one_period)
        # a tiny sample where L=1 never occurs leaves that follower cell empty
        sample = [
            (B, t)
            for _, t in draw_sample(sc, 200, 38)
            if not any(sc.space.mark_component[m] == 0 for _, m in t.events)
        ]
        with pytest.raises(EstimatedPositivityError):
            fit_discrete_atoms(sample, one_period)

    def test_estimated_weights_match_truth_in_large_sample(self, one_period):
        sc = to_continuous(one_period)
        truth = oracle_g_formula(one_period)
        n = 20_000
        sample = draw_sample(sc, n, 39)
        fitted = fit_discrete_atoms(sample, one_period)
        rep = ipw_estimate(
            sc, sample, sc.outcome, sc.horizon,
            weights="estimated-discrete", fitted_tables=fitted,
        )
        assert abs(rep.value - truth) < 4 * rep.se


class TestMartingaleResiduals:
    def test_correct_model_residuals_centered(self, one_period):
        sc = to_continuous(one_period)
        sample = draw_sample(sc, 5000, 40)
        grid = [1.5, 2.5, 3.5]
        for which in (0, 1, "deviation"):
            rep = martingale_residuals(sc, sample, which, grid)
            for z in rep.z_scores():
                assert abs(z) < 3.5

    def test_doubled_rate_detected(self):
        truth = parse_config(
            {
                "type": "continuous",
                "horizon": 2.0,
                "components": [{"name": "a", "rate": {"base": 0.8}}],
                "outcome": {"kind": "count", "component": "a", "t": 2.0},
            }
        )
        wrong = parse_config(
            {
                "type": "continuous",
                "horizon": 2.0,
                "components": [{"name": "a", "rate": {"base": 1.6}}],
                "outcome": {"kind": "count", "component": "a", "t": 2.0},
            }
        )
        sample = draw_sample(truth, 4000, 41)
        ok = martingale_residuals(truth, sample, 0, [1.0, 2.0])
        bad = martingale_residuals(wrong, sample, 0, [1.0, 2.0])
        assert all(abs(z) < 3.5 for z in ok.z_scores())
        assert any(abs(z) > 5.0 for z in bad.z_scores())


def test_report_counts_sample_size(one_period):
    sc = to_continuous(one_period)
    sample = draw_sample(sc, 17, 42)
    rep = ipw_estimate(sc, sample, sc.outcome, sc.horizon)
    assert rep.n == 17
    assert rep.method == "ipw"
