"""Seeded simulation: determinism, estimator consistency, belief tracking,
guarantee audits."""

import numpy as np
import pytest

import rgsolve as rg
from rgsolve.simulator import UniformP1, UniformP2
from rgsolve.values import play_of_markov_strategy

from conftest import make_k1_spec


class NonRevealingPlan:
    def __init__(self, nK, row):
        self.a = np.tile(np.asarray(row, float), (nK, 1))

    def stacked_action(self, t, p):
        return self.a


class TestDeterminism:
    def test_bit_identical_runs(self, am_aux):
        sigma = rg.extract_p1_markov(am_aux, n=2, resolution=8)
        tau = rg.build_p2_cyclic(am_aux, 2, resolution=8)
        cfg = rg.PlayoutConfig(horizon=32, replications=30, seed=123)
        s1 = rg.simulate(am_aux, sigma, tau, cfg)
        s2 = rg.simulate(am_aux, sigma, tau, cfg)
        assert s1.mean == s2.mean
        assert s1.stderr == s2.stderr
        assert np.array_equal(s1.stage_means, s2.stage_means)

    def test_seed_changes_samples(self, am_aux):
        sigma = rg.extract_p1_markov(am_aux, n=2, resolution=8)
        tau = rg.build_p2_cyclic(am_aux, 2, resolution=8)
        s1 = rg.simulate(am_aux, sigma, tau, rg.PlayoutConfig(32, 30, seed=1))
        s2 = rg.simulate(am_aux, sigma, tau, rg.PlayoutConfig(32, 30, seed=2))
        assert s1.mean != s2.mean

    def test_trace_records_stages(self, am_aux):
        sigma = rg.extract_p1_markov(am_aux, n=2, resolution=8)
        tau = rg.build_p2_cyclic(am_aux, 2, resolution=8)
        trace = []
        rg.simulate(am_aux, sigma, tau, rg.PlayoutConfig(4, 3, seed=0), trace=trace)
        assert len(trace) == 12
        rep, stage, k, i, j, g = trace[0]
        assert (rep, stage) == (0, 1)


class TestEstimator:
    def test_constant_payoff_zero_stderr(self):
        spec = make_k1_spec(np.array([[0.7, 0.7], [0.7, 0.7]]))
        aux = rg.auxiliary_game(spec)
        sigma = rg.extract_p1_markov(aux, n=1)
        stats = rg.simulate(aux, sigma, UniformP2(2), rg.PlayoutConfig(16, 20, seed=3))
        # constant tables rescale to a constant; exact mean, zero spread
        assert stats.stderr == 0.0
        assert spec.to_original_scale(stats.mean) == pytest.approx(0.7, abs=1e-12)

    def test_k1_consistency_meta(self):
        spec = make_k1_spec(np.array([[1.0, 0.0], [0.0, 1.0]]))
        aux = rg.auxiliary_game(spec)
        sigma = rg.extract_p1_markov(aux, n=1)
        tau = rg.build_p2_cyclic(aux, 1)
        hits = 0
        for seed in range(100):
            stats = rg.simulate(aux, sigma, tau, rg.PlayoutConfig(64, 40, seed=seed))
            if abs(stats.mean - 0.5) <= max(3 * stats.stderr, 1e-12):
                hits += 1
        assert hits >= 99

    def test_mean_within_unit_interval(self, random_corpus):
        spec = random_corpus[0]
        aux = rg.auxiliary_game(spec)
        sigma = rg.extract_p1_markov(aux, n=2, resolution=8)
        stats = rg.simulate(aux, sigma, UniformP2(aux.nJ), rg.PlayoutConfig(16, 10, seed=1))
        assert 0.0 <= stats.mean <= 1.0
        assert stats.ci_halfwidth == pytest.approx(1.96 * stats.stderr)


class TestBeliefTracker:
    def test_matches_plan_dynamics_along_signal_path(self, random_corpus):
        # under a declared plan, the tracked belief must follow one atom of
        # the deterministic measure recursion at every stage
        spec = random_corpus[7]
        aux = rg.auxiliary_game(spec)
        plan = NonRevealingPlan(aux.nK, np.full(aux.nI, 1.0 / aux.nI))
        play = play_of_markov_strategy(aux, aux.pihat, plan, horizon=5)

        class Recorder:
            def __init__(self):
                self.beliefs = []

            def mixture(self, t, p):
                self.beliefs.append(np.asarray(p, float).copy())
                return np.full(aux.nJ, 1.0 / aux.nJ)

        rec = Recorder()
        rg.simulate(aux, plan, rec, rg.PlayoutConfig(horizon=5, replications=1, seed=9))
        # stage t >= 2 belief must be an atom of the step-(t-1) measure
        for t, belief in enumerate(rec.beliefs[1:], start=1):
            atoms = play[t - 1][0].atoms
            assert np.abs(atoms - belief).sum(axis=1).min() <= 1e-9


class TestGuaranteeCheck:
    def test_k1_optimal_passes(self):
        spec = make_k1_spec(np.array([[1.0, 0.0], [0.0, 1.0]]))
        aux = rg.auxiliary_game(spec)
        sigma = rg.extract_p1_markov(aux, n=4)
        report = rg.guarantee_check(
            aux, sigma, target=0.5, epsilon=0.02, horizons=[64, 128],
            config=rg.PlayoutConfig(horizon=64, replications=60, seed=21),
        )
        assert report.passed

    def test_negative_control_fails(self):
        # uniform play guarantees only 0.45 in this game of value 0.5
        spec = make_k1_spec(np.array([[0.9, 0.1], [0.2, 0.8]]))
        aux = rg.auxiliary_game(spec)
        sigma = UniformP1(aux.nK, aux.nI)
        oracle = rg.matrix_game_value(spec.payoff[0]).value
        report = rg.guarantee_check(
            aux, sigma, target=oracle, epsilon=0.02, horizons=[256],
            config=rg.PlayoutConfig(horizon=256, replications=60, seed=22),
        )
        assert not report.passed

    def test_player2_mode_direction(self):
        spec = make_k1_spec(np.array([[1.0, 0.0], [0.0, 1.0]]))
        aux = rg.auxiliary_game(spec)
        tau = rg.build_p2_cyclic(aux, 1)
        report = rg.guarantee_check(
            aux, tau, target=0.5, epsilon=0.02, horizons=[128],
            config=rg.PlayoutConfig(horizon=128, replications=60, seed=23),
            player=2,
        )
        assert report.passed

    def test_invalid_strategy_distribution_rejected(self, am_aux):
        class Broken:
            def stacked_action(self, t, p):
                return np.array([[0.5, 0.2], [0.5, 0.5]])

        with pytest.raises(ValueError, match="invalid distribution"):
            rg.simulate(
                am_aux, Broken(), UniformP2(2), rg.PlayoutConfig(4, 2, seed=0)
            )
