#!/usr/bin/env python3
"""
Tests for the classical birth-death chain on Fock states
"""

from collections import Counter

import numpy as np
import pytest

from oamsim.birth_death import (CEMETERY, ChainState, OutcomeWord, build_kernel,
                                detailed_balance_residual, draw_outcome, evolve_fock_word,
                                extinction_time, gibbs_measure, occupation_histogram,
                                sample_chain, stationarity_residual, step_chain)
from oamsim.exceptions import NoInvariantStateError, ParameterError
from oamsim.fock_ops import Outcome
from oamsim.trajectory import trajectory_rng


class TestKernel:
    """Test the tridiagonal transition kernel"""

    def test_rows_are_probabilities(self, baseline_params):
        kernel = build_kernel(baseline_params, 30)
        np.testing.assert_allclose(kernel.down + kernel.up + kernel.stay, 1.0)
        assert kernel.down[0] == 0.0
        assert np.all(kernel.stay >= -1e-15)

    def test_top_row_loses_defect(self, baseline_params):
        """The level-d row of P sums to 1 - up[d]"""
        kernel = build_kernel(baseline_params, 20)
        P = kernel.transition_matrix()
        np.testing.assert_allclose(P[:-1].sum(axis=1), 1.0, atol=1e-14)
        assert P[-1].sum() == pytest.approx(1.0 - kernel.up[20], abs=1e-14)
        assert kernel.up[20] > 0

    def test_resonance_blocks_transitions(self, squares_params):
        """alpha vanishes at the squares, so the chain cannot cross them"""
        kernel = build_kernel(squares_params, 12)
        assert kernel.down[4] == 0.0
        assert kernel.up[3] == 0.0


class TestGibbsMeasure:
    """Test the invariant Gibbs measure"""

    def test_weights_and_tail(self):
        gibbs = gibbs_measure(np.log(2.0), 10)
        assert gibbs.weights[0] == pytest.approx(0.5)
        assert gibbs.weights.sum() + gibbs.tail_mass == pytest.approx(1.0, abs=1e-15)

    def test_requires_positive_theta(self):
        with pytest.raises(NoInvariantStateError):
            gibbs_measure(0.0, 10)
        with pytest.raises(NoInvariantStateError):
            gibbs_measure(-1.0, 10)

    def test_balance_and_stationarity(self, baseline_params):
        d = 64
        kernel = build_kernel(baseline_params, d)
        gibbs = gibbs_measure(baseline_params.theta, d)
        assert detailed_balance_residual(gibbs, kernel) <= 1e-13
        assert stationarity_residual(gibbs, kernel) <= 1e-13

    def test_stationarity_length_mismatch(self, baseline_params):
        kernel = build_kernel(baseline_params, 10)
        with pytest.raises(ParameterError):
            stationarity_residual(np.ones(5) / 5, kernel)


class TestOutcomeWord:
    """Test outcome words"""

    def test_parse_and_format(self):
        word = OutcomeWord.parse("--, +-,++")
        assert word.letters == (Outcome.MM, Outcome.PM, Outcome.PP)
        assert str(word) == "--,+-,++"
        assert len(OutcomeWord.parse("  ")) == 0

    def test_shifts(self):
        word = OutcomeWord.of(["+-", "+-", "-+"])
        assert word.shifts == [1, 1, -1]
        assert word.total_shift == 1


class TestFockEvolution:
    """Test N_t(k, word) and extinction"""

    def test_evolve_along_word(self, baseline_params):
        word = OutcomeWord.of(["+-", "++", "-+", "-+"])
        assert evolve_fock_word(2, word, baseline_params) == ChainState(1)
        assert extinction_time(2, word, baseline_params) is None

    def test_annihilated_by_resonance(self, squares_params):
        """Level 1 is a square, so |0> cannot absorb a photon"""
        word = OutcomeWord.of(["+-"])
        assert evolve_fock_word(0, word, squares_params).is_dead
        assert extinction_time(0, word, squares_params) == 1

    def test_emission_from_vacuum_dies(self, baseline_params):
        word = OutcomeWord.of(["--", "-+"])
        assert evolve_fock_word(0, word, baseline_params).level == CEMETERY
        assert extinction_time(0, word, baseline_params) == 2

    def test_negative_start(self, baseline_params):
        with pytest.raises(ParameterError):
            evolve_fock_word(-1, OutcomeWord(), baseline_params)


class TestSampling:
    """Test outcome draws and chain paths"""

    def test_zero_weight_never_drawn(self):
        rng = np.random.default_rng(0)
        drawn = {draw_outcome([0.0, 0.5, 0.0, 0.5], rng)[0] for _ in range(2000)}
        assert drawn == {1, 3}

    def test_total_weight(self):
        _, total = draw_outcome([0.1, 0.2, 0.3, 0.3], np.random.default_rng(1))
        assert total == pytest.approx(0.9)

    def test_nearest_neighbour_steps(self, baseline_params):
        kernel = build_kernel(baseline_params, 40)
        path = sample_chain(3, kernel, 500, trajectory_rng(7))
        assert path.levels[0] == 3
        assert np.all(np.abs(np.diff(path.levels)) <= 1)
        assert np.all((path.levels >= 0) & (path.levels <= 40))
        assert len(path.outcomes) == 500

    def test_deterministic(self, baseline_params):
        kernel = build_kernel(baseline_params, 40)
        first = sample_chain(2, kernel, 300, trajectory_rng(11, 4))
        second = sample_chain(2, kernel, 300, trajectory_rng(11, 4))
        np.testing.assert_array_equal(first.levels, second.levels)
        assert first.outcomes == second.outcomes

    def test_cemetery_cannot_step(self, baseline_params):
        kernel = build_kernel(baseline_params, 5)
        with pytest.raises(ParameterError):
            step_chain(ChainState(CEMETERY), kernel, np.random.default_rng(0))

    def test_occupation_histogram(self):
        hist = occupation_histogram([0, 0, 1, 2], 3)
        np.testing.assert_allclose(hist, [0.5, 0.25, 0.25, 0.0])


@pytest.mark.slow
class TestChainStatistics:
    """Sampled chains against the kernel and the Gibbs measure"""

    def test_transition_frequencies(self, baseline_params):
        kernel = build_kernel(baseline_params, 40)
        P = kernel.transition_matrix()
        rng = np.random.default_rng(2024)
        draws = 20_000
        for k in (0, 3, 7):
            counts = Counter(step_chain(ChainState(k), kernel, rng)[0].level
                             for _ in range(draws))
            assert sum(counts[j] for j in range(max(0, k - 1), k + 2)) == draws
            for j in range(max(0, k - 1), k + 2):
                p = P[k, j]
                sigma = np.sqrt(p * (1.0 - p) / draws)
                assert abs(counts[j] / draws - p) <= 4.0 * sigma + 1e-12

    def test_ergodic_occupation_matches_gibbs(self, baseline_params):
        """Batch means of the occupation stay within 4 standard errors of mu_Gibbs"""
        d, T = 40, 100_000
        path = sample_chain(0, build_kernel(baseline_params, d), T, trajectory_rng(5))
        g = gibbs_measure(baseline_params.theta, d)
        gibbs = g.weights / g.weights.sum()

        batches = np.array([occupation_histogram(chunk, d)
                            for chunk in np.array_split(path.levels[1:], 20)])
        mean = batches.mean(axis=0)
        stderr = batches.std(axis=0, ddof=1) / np.sqrt(len(batches))
        for n in np.flatnonzero(gibbs >= 0.01):
            assert abs(mean[n] - gibbs[n]) <= 4.0 * stderr[n] + 1e-3
