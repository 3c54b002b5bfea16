"""Piecewise-polynomial surrogate evaluation and serialization."""
from __future__ import annotations

import numpy as np
import pytest

from voromc.domain import ParameterSpace, Tessellation, sample_uniform
from voromc.surrogate import Surrogate, SurrogateCell

from helpers import build_surrogate, unit_space


def random_surrogate(rng, dim=None, n_cells=None, n_out=None) -> Surrogate:
    dim = dim or int(rng.integers(1, 5))
    n_cells = n_cells or int(rng.integers(1, 30))
    n_out = n_out or int(rng.integers(1, 4))
    lo = rng.uniform(-2, 1, dim)
    space = ParameterSpace(np.column_stack([lo, lo + rng.uniform(1, 3, dim)]))
    gens = sample_uniform(space, n_cells, rng)
    cells = []
    for g in gens:
        order = int(rng.integers(0, 2))
        cells.append(SurrogateCell(
            generator=g,
            level=int(rng.integers(1, 6)),
            order=order,
            values=rng.standard_normal(n_out),
            error=rng.standard_normal(n_out) * 0.1,
            jacobian=rng.standard_normal((n_out, dim)) if order == 1 else None,
        ))
    return Surrogate(Tessellation(space, gens), cells)


class TestCellValidation:
    def test_order_one_requires_jacobian(self):
        g = np.array([0.5, 0.5])
        with pytest.raises(ValueError):
            SurrogateCell(g, 1, 1, np.array([1.0]), np.array([0.0]), None)

    def test_shape_mismatch_rejected(self):
        g = np.array([0.5, 0.5])
        with pytest.raises(ValueError):
            SurrogateCell(g, 1, 0, np.array([1.0, 2.0]), np.array([0.0]), None)
        with pytest.raises(ValueError):
            SurrogateCell(g, 1, 1, np.array([1.0]), np.array([0.0]),
                          np.ones((2, 2)))

    def test_order_must_be_zero_or_one(self):
        g = np.array([0.5])
        with pytest.raises(ValueError):
            SurrogateCell(g, 1, 2, np.array([1.0]), np.array([0.0]),
                          np.ones((1, 1)))


class TestEval:
    def test_constant_pieces_return_nearest_value(self):
        space = unit_space(2)
        s = build_surrogate(space, [[0.25, 0.5], [0.75, 0.5]],
                            lambda g: [g[0]])
        assert s.eval(np.array([0.1, 0.9]))[0] == 0.25
        assert s.eval(np.array([0.9, 0.1]))[0] == 0.75

    def test_linear_piece_adds_taylor_term(self):
        space = unit_space(2)
        g = np.array([0.5, 0.5])
        jac = np.array([[2.0, -1.0]])
        s = build_surrogate(space, [g], lambda _: [3.0], order=1,
                            jac_fn=lambda _: jac)
        x = np.array([0.6, 0.8])
        expected = 3.0 + jac[0] @ (x - g)
        assert s.eval(x)[0] == pytest.approx(expected)

    def test_enhanced_adds_error(self):
        space = unit_space(1)
        s = build_surrogate(space, [[0.2], [0.8]], lambda g: [1.0, 2.0],
                            error_fn=lambda g: [0.5, -0.25])
        x = np.array([0.1])
        np.testing.assert_allclose(s.eval(x, enhanced=True) - s.eval(x),
                                   [0.5, -0.25])

    def test_batch_eval_matches_pointwise(self, rng):
        # the batched Taylor term may reassociate the dot product; agreement
        # is to the last ulp, not bitwise
        for trial in range(15):
            s = random_surrogate(rng)
            pts = sample_uniform(s.tess.space, 40, rng)
            for enhanced in (False, True):
                batch = s.batch_eval(pts, enhanced=enhanced)
                single = np.array([s.eval(p, enhanced=enhanced) for p in pts])
                np.testing.assert_allclose(batch, single, rtol=1e-14, atol=1e-14)


class TestArrays:
    def test_packed_arrays_are_read_only(self, rng):
        s = random_surrogate(rng)
        for arr in (s.levels, s.orders, s.values, s.errors):
            with pytest.raises(ValueError):
                arr[0] = 0

    def test_with_updates_replaces_without_mutating(self, rng):
        s = random_surrogate(rng, dim=2, n_cells=5, n_out=1)
        old_levels = s.levels.copy()
        bumped = s.with_updates(levels=s.levels + 1)
        np.testing.assert_array_equal(s.levels, old_levels)
        np.testing.assert_array_equal(bumped.levels, old_levels + 1)
        np.testing.assert_array_equal(bumped.values, s.values)
        assert bumped.tess is s.tess

    def test_cell_accessor_round_trips(self, rng):
        s = random_surrogate(rng)
        i = s.n_cells - 1
        c = s.cell(i)
        assert c.level == s.levels[i]
        assert c.order == s.orders[i]
        np.testing.assert_array_equal(c.values, s.values[i])


class TestSerialization:
    def test_round_trip_identity_on_random_instances(self, rng):
        # floats survive via repr, so equality is exact
        for trial in range(100):
            s = random_surrogate(rng)
            t = Surrogate.from_dict(s.to_dict())
            assert t.n_cells == s.n_cells
            np.testing.assert_array_equal(t.tess.generators, s.tess.generators)
            np.testing.assert_array_equal(t.tess.space.bounds, s.tess.space.bounds)
            np.testing.assert_array_equal(t.levels, s.levels)
            np.testing.assert_array_equal(t.orders, s.orders)
            np.testing.assert_array_equal(t.values, s.values)
            np.testing.assert_array_equal(t.errors, s.errors)
            for i in range(s.n_cells):
                if s.orders[i] == 1:
                    np.testing.assert_array_equal(t.cell(i).jacobian,
                                                  s.cell(i).jacobian)

    def test_round_trip_through_json(self, rng):
        import json
        s = random_surrogate(rng, dim=3, n_cells=12, n_out=2)
        t = Surrogate.from_dict(json.loads(json.dumps(s.to_dict())))
        np.testing.assert_array_equal(t.values, s.values)
        np.testing.assert_array_equal(t.errors, s.errors)
