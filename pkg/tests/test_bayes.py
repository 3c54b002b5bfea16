"""Posterior density and the two interchangeable Metropolis walkers."""
from __future__ import annotations

import numpy as np
import pytest

from voromc.bayes import (Chain, PosteriorProblem, cell_probabilities,
                          chain_from_callable, log_posterior, make_draws,
                          metropolis_hastings, paired_chains)
from voromc.domain import ParameterSpace

from helpers import build_surrogate, unit_space


def flat_posterior(dim=1, n_out=1):
    space = unit_space(dim)
    return PosteriorProblem(space, np.zeros(n_out), np.ones(n_out))


class TestLogPosterior:
    def test_outside_box_is_minus_infinity(self):
        post = flat_posterior(2)
        assert log_posterior(post, np.zeros(1), np.array([1.5, 0.5])) == -np.inf

    def test_perfect_fit_has_zero_misfit(self):
        post = PosteriorProblem(unit_space(1), np.array([0.7]), np.array([0.1]))
        assert log_posterior(post, np.array([0.7]), np.array([0.5])) == 0.0

    def test_gaussian_misfit_value(self):
        post = PosteriorProblem(unit_space(1), np.array([1.0]), np.array([0.5]))
        # residual 0.5 with sigma 0.5 gives -(1)^2/2
        assert log_posterior(post, np.array([0.5]), np.array([0.5])) == \
            pytest.approx(-0.5)

    def test_scalar_sigma_broadcasts(self):
        post = PosteriorProblem(unit_space(1), np.array([1.0, 2.0]),
                                np.array(0.5))
        assert post.sigma.shape == (2,)

    def test_nonpositive_sigma_rejected(self):
        with pytest.raises(ValueError):
            PosteriorProblem(unit_space(1), np.array([1.0]), np.array([0.0]))


class TestDraws:
    def test_shapes_and_determinism(self):
        space = unit_space(3)
        a_inc, a_log = make_draws(space, 100, 0.1, np.random.default_rng(4))
        b_inc, b_log = make_draws(space, 100, 0.1, np.random.default_rng(4))
        assert a_inc.shape == (100, 3) and a_log.shape == (100,)
        np.testing.assert_array_equal(a_inc, b_inc)
        np.testing.assert_array_equal(a_log, b_log)
        assert np.all(a_log <= 0.0)

    def test_step_scales_with_box_width(self):
        wide = ParameterSpace(np.array([[0.0, 10.0]]))
        narrow = ParameterSpace(np.array([[0.0, 1.0]]))
        inc_w, _ = make_draws(wide, 50_000, 0.1, np.random.default_rng(1))
        inc_n, _ = make_draws(narrow, 50_000, 0.1, np.random.default_rng(1))
        assert inc_w.std() == pytest.approx(10 * inc_n.std(), rel=1e-12)


class TestWalkers:
    def test_chain_length_and_fields(self):
        post = flat_posterior()
        s = build_surrogate(post.space, [[0.5]], lambda g: [0.0])
        chain = metropolis_hastings(post, s, False, 500, 100, 0.2, 11)
        assert isinstance(chain, Chain)
        assert chain.length == 400
        assert chain.states.shape == (400, 1)
        assert 0.0 <= chain.acceptance_rate <= 1.0
        assert post.space.contains(chain.states).all()

    def test_same_seed_reproduces_bitwise(self):
        post = flat_posterior()
        s = build_surrogate(post.space, [[0.3], [0.7]], lambda g: [g[0]])
        a = metropolis_hastings(post, s, False, 2000, 200, 0.2, 5)
        b = metropolis_hastings(post, s, False, 2000, 200, 0.2, 5)
        np.testing.assert_array_equal(a.states, b.states)
        c = metropolis_hastings(post, s, False, 2000, 200, 0.2, 6)
        assert not np.array_equal(a.states, c.states)

    def test_compiled_walker_matches_python_walker_bitwise(self, rng):
        # dual route: the jit kernel on packed arrays against the plain
        # python walker driving surrogate.eval, identical draw consumption
        for trial in range(5):
            dim = int(rng.integers(1, 4))
            space = unit_space(dim)
            post = PosteriorProblem(space, rng.normal(size=2),
                                    np.full(2, 0.5))
            gens = rng.random((int(rng.integers(2, 9)), dim))
            order = int(rng.integers(0, 2))
            s = build_surrogate(
                space, gens,
                lambda g: [float(g.sum()), float(g[0] - 1.0)],
                error_fn=lambda g: [0.05 * g[0], -0.02],
                order=order,
                jac_fn=(lambda g: np.vstack([np.ones(dim), -np.ones(dim)]))
                if order == 1 else None)
            seed = int(rng.integers(1 << 30))
            for enhanced in (False, True):
                fast = metropolis_hastings(post, s, enhanced, 800, 100, 0.25,
                                           seed)
                slow = chain_from_callable(
                    post, lambda lam: s.eval(lam, enhanced=enhanced),
                    800, 100, 0.25, seed)
                np.testing.assert_array_equal(fast.states, slow.states)
                assert fast.acceptance_rate == slow.acceptance_rate

    def test_burn_in_validation(self):
        post = flat_posterior()
        s = build_surrogate(post.space, [[0.5]], lambda g: [0.0])
        with pytest.raises(ValueError):
            metropolis_hastings(post, s, False, 100, 100, 0.2, 0)
        with pytest.raises(ValueError):
            metropolis_hastings(post, s, False, 100, 200, 0.2, 0)


class TestPairedChains:
    def test_zero_errors_collapse_the_pair(self):
        post = PosteriorProblem(unit_space(2), np.array([0.4]),
                                np.array([0.2]))
        s = build_surrogate(post.space, [[0.3, 0.3], [0.7, 0.7]],
                            lambda g: [g[0]])
        plain, enhanced = paired_chains(post, s, 3000, 500, 0.2, 17)
        np.testing.assert_array_equal(plain.states, enhanced.states)

    def test_nonzero_errors_separate_the_pair(self):
        post = PosteriorProblem(unit_space(2), np.array([0.4]),
                                np.array([0.2]))
        s = build_surrogate(post.space, [[0.3, 0.3], [0.7, 0.7]],
                            lambda g: [g[0]], error_fn=lambda g: [0.3])
        plain, enhanced = paired_chains(post, s, 3000, 500, 0.2, 17)
        assert not np.array_equal(plain.states, enhanced.states)

    def test_plain_member_matches_solo_run_with_same_seed(self):
        post = PosteriorProblem(unit_space(1), np.array([0.2]),
                                np.array([0.3]))
        s = build_surrogate(post.space, [[0.25], [0.75]], lambda g: [g[0]],
                            error_fn=lambda g: [0.1])
        plain, _ = paired_chains(post, s, 1000, 100, 0.2, 23)
        solo = metropolis_hastings(post, s, False, 1000, 100, 0.2, 23)
        np.testing.assert_array_equal(plain.states, solo.states)


class TestStationaryDistribution:
    def test_two_equal_cells_split_evenly(self):
        # flat likelihood over a symmetric two-cell tessellation
        post = flat_posterior(1)
        s = build_surrogate(post.space, [[0.25], [0.75]], lambda g: [0.0])
        chain = metropolis_hastings(post, s, False, 120_000, 20_000, 0.3, 3)
        probs = cell_probabilities(chain, s.tess)
        np.testing.assert_allclose(probs, [0.5, 0.5], atol=0.02)

    def test_likelihood_ratio_matches_boltzmann_weight(self):
        # values 0 and 1 with sigma 1 and data 0: P(B)/P(A) = exp(-1/2)
        post = PosteriorProblem(unit_space(1), np.array([0.0]),
                                np.array([1.0]))
        s = build_surrogate(post.space, [[0.25], [0.75]],
                            lambda g: [0.0 if g[0] < 0.5 else 1.0])
        chain = metropolis_hastings(post, s, False, 400_000, 50_000, 0.4, 9)
        probs = cell_probabilities(chain, s.tess)
        want_ratio = np.exp(-0.5)
        assert probs[1] / probs[0] == pytest.approx(want_ratio, abs=0.03)

    def test_posterior_concentrates_on_matching_cell(self):
        post = PosteriorProblem(unit_space(1), np.array([1.0]),
                                np.array([0.05]))
        s = build_surrogate(post.space, [[0.25], [0.75]],
                            lambda g: [0.0 if g[0] < 0.5 else 1.0])
        chain = metropolis_hastings(post, s, False, 50_000, 5_000, 0.4, 7)
        probs = cell_probabilities(chain, s.tess)
        assert probs[1] > 0.99


class TestCellProbabilities:
    def test_sums_to_one_and_counts_states(self, rng):
        space = unit_space(2)
        post = PosteriorProblem(space, np.array([0.3]), np.array([0.3]))
        s = build_surrogate(space, rng.random((6, 2)), lambda g: [g[0]])
        chain = metropolis_hastings(post, s, False, 5000, 1000, 0.2, 1)
        probs = cell_probabilities(chain, s.tess)
        assert probs.shape == (6,)
        assert probs.sum() == pytest.approx(1.0)
        manual = np.bincount(s.tess.assign(chain.states), minlength=6) / 4000
        np.testing.assert_allclose(probs, manual)
