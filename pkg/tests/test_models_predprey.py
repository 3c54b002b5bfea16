"""Predator-prey model: equilibrium oracle, step convergence, adjoint data."""
from __future__ import annotations

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from voromc.models.predprey import PredPrey, initial_ratio


def rhs(t, z, lam):
    a, b, d, g = lam[:4]
    x, y = z
    return [a * x - b * x * y, d * x * y - g * y]


def reference_outputs(lam):
    sol = solve_ivp(rhs, (0.0, 10.0), lam[4:], args=(lam,), method="LSODA",
                    rtol=1e-10, atol=1e-12, dense_output=True)
    x5, y5 = sol.sol(5.0)
    x10, y10 = sol.sol(10.0)
    return np.array([x5, y5, x10, y10])


class TestEquilibrium:
    def test_constant_solution_at_unit_parameters(self):
        # x = g/d, y = a/b; all ones sits exactly on the fixed point
        model = PredPrey()
        lam = np.ones(6)
        for level in range(1, 5):
            rec = model.evaluate(lam, level)
            np.testing.assert_allclose(rec.values, np.ones(4), atol=1e-9)

    def test_all_levels_agree_at_equilibrium(self):
        model = PredPrey()
        lam = np.ones(6)
        outs = [model.evaluate(lam, level).values for level in range(1, 5)]
        for q in outs[1:]:
            np.testing.assert_allclose(q, outs[0], atol=1e-9)

    def test_scaled_equilibrium(self):
        # x = g/d = 1.5/1.2, y = a/b = 1.8/1.5 stays put when started there
        lam = np.array([1.8, 1.5, 1.2, 1.5, 1.25, 1.2])
        rec = PredPrey().evaluate(lam, 3)
        np.testing.assert_allclose(rec.values, [1.25, 1.2, 1.25, 1.2],
                                   atol=1e-8)


class TestConvergence:
    def test_fine_levels_approach_continuous_solution(self, rng):
        model = PredPrey()
        for _ in range(4):
            lam = rng.uniform(1.0, 2.0, 6)
            ref = reference_outputs(lam)
            errs = [np.abs(model.evaluate(lam, level).values - ref).max()
                    for level in range(1, 5)]
            assert all(a > b for a, b in zip(errs, errs[1:]))
            assert errs[3] < 5e-2  # dt = 1e-3, first-order stepper
            assert errs[3] < 0.05 * errs[0]

    def test_error_estimate_reduces_the_gap(self, rng):
        # enhancement must beat the plain value in norm at every level
        model = PredPrey()
        for _ in range(8):
            lam = rng.uniform(1.0, 2.0, 6)
            ref = reference_outputs(lam)
            for level in (1, 2, 3):
                rec = model.evaluate(lam, level)
                raw = np.linalg.norm(rec.values - ref)
                corrected = np.linalg.norm(rec.values + rec.error - ref)
                assert corrected < raw


class TestGradient:
    def test_matches_finite_differences_at_fine_steps(self, rng):
        # the adjoint is consistent with the time-continuous sensitivity, so
        # agreement with differences of the stepper tightens as dt shrinks
        model = PredPrey()
        step = 1e-6
        for _ in range(3):
            lam = rng.uniform(1.0, 2.0, 6)
            jac = model.evaluate(lam, 4, want_gradient=True).jacobian
            assert jac.shape == (4, 6)
            fd = np.empty_like(jac)
            for j in range(6):
                dl = np.zeros(6)
                dl[j] = step
                fd[:, j] = (model.evaluate(lam + dl, 4).values
                            - model.evaluate(lam - dl, 4).values) / (2 * step)
            assert np.abs(jac - fd).max() / np.abs(fd).max() < 2e-2

    def test_initial_value_columns_present(self, rng):
        # outputs depend on x0, y0, so those jacobian columns must be nonzero
        lam = rng.uniform(1.0, 2.0, 6)
        jac = PredPrey().evaluate(lam, 3, want_gradient=True).jacobian
        assert np.abs(jac[:, 4]).max() > 0.0
        assert np.abs(jac[:, 5]).max() > 0.0


class TestInterface:
    def test_no_closed_form(self):
        with pytest.raises(NotImplementedError):
            PredPrey().exact_qoi(np.ones(6))

    def test_ladder_override(self):
        model = PredPrey(steps=(0.25, 0.05))
        assert model.n_levels == 2

    def test_initial_ratio_target(self):
        pts = np.array([[1, 1, 1, 1, 1.5, 1.2], [1, 1, 1, 1, 2.0, 1.0]])
        np.testing.assert_allclose(initial_ratio(pts), [1.25, 2.0])
        assert initial_ratio(pts[0]) == pytest.approx(1.25)

    def test_default_bounds(self):
        np.testing.assert_array_equal(PredPrey().default_bounds,
                                      np.tile([1.0, 2.0], (6, 1)))

    def test_invalid_level_rejected(self):
        with pytest.raises(ValueError):
            PredPrey().evaluate(np.ones(6), 5)
