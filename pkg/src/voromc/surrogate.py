"""Piecewise-polynomial surrogates over implicit Voronoi tessellations.

Each cell carries the model output at its generator, an error estimate for
that output, a polynomial order (0 = constant, 1 = linear), the level the
output was computed at, and, for order-1 cells, the output jacobian. The
plain surrogate evaluates the cellwise polynomial; the enhanced variant adds
the cell's error estimate on top.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import Tessellation

__all__ = ["SurrogateCell", "Surrogate"]


@dataclass(frozen=True)
class SurrogateCell:
    """State of one Voronoi cell.

    generator : (n,) cell seed point
    level     : 1-based discretization level the outputs were computed at
    order     : 0 for a constant cell, 1 for a linear cell
    values    : (m,) model outputs at the generator
    error     : (m,) output error estimates at the generator
    jacobian  : (m, n) output jacobian, required exactly when order == 1
    """

    generator: np.ndarray
    level: int
    order: int
    values: np.ndarray
    error: np.ndarray
    jacobian: np.ndarray | None = None

    def __post_init__(self):
        if self.order not in (0, 1):
            raise ValueError(f"order must be 0 or 1, got {self.order}")
        if self.level < 1:
            raise ValueError(f"level must be >= 1, got {self.level}")
        if self.values.shape != self.error.shape:
            raise ValueError("values and error must have matching shapes")
        if self.order == 1:
            if self.jacobian is None:
                raise ValueError("an order-1 cell requires a jacobian")
            m, n = self.values.shape[0], self.generator.shape[0]
            if self.jacobian.shape != (m, n):
                raise ValueError(
                    f"jacobian must have shape ({m}, {n}), got {self.jacobian.shape}"
                )


class Surrogate:
    """Cellwise polynomial response surface bound to a tessellation.

    Stores the per-cell data in packed arrays so chains can evaluate it
    without touching Python objects. Instances are immutable; refinement
    builds new ones.
    """

    def __init__(self, tess: Tessellation, cells: list[SurrogateCell]):
        if len(cells) != tess.n_cells:
            raise ValueError(
                f"got {len(cells)} cells for a tessellation with {tess.n_cells} generators"
            )
        m = cells[0].values.shape[0]
        n = tess.dim
        for i, c in enumerate(cells):
            if c.values.shape[0] != m:
                raise ValueError("all cells must have the same number of outputs")
            if not np.array_equal(c.generator, tess.generators[i]):
                raise ValueError(f"cell {i} generator does not match the tessellation")
        self.tess = tess
        self.n_outputs = m
        self.levels = np.array([c.level for c in cells], dtype=np.int64)
        self.orders = np.array([c.order for c in cells], dtype=np.int64)
        self.values = np.array([c.values for c in cells], dtype=float)
        self.errors = np.array([c.error for c in cells], dtype=float)
        self.jacobians = np.zeros((len(cells), m, n), dtype=float)
        for i, c in enumerate(cells):
            if c.jacobian is not None:
                self.jacobians[i] = c.jacobian
        for a in (self.levels, self.orders, self.values, self.errors, self.jacobians):
            a.setflags(write=False)

    @property
    def n_cells(self) -> int:
        return self.tess.n_cells

    @property
    def dim(self) -> int:
        return self.tess.dim

    def cell(self, i: int) -> SurrogateCell:
        """Materialize cell i as a SurrogateCell."""
        jac = self.jacobians[i].copy() if self.orders[i] == 1 else None
        return SurrogateCell(
            generator=self.tess.generators[i].copy(),
            level=int(self.levels[i]),
            order=int(self.orders[i]),
            values=self.values[i].copy(),
            error=self.errors[i].copy(),
            jacobian=jac,
        )

    def cells(self) -> list[SurrogateCell]:
        return [self.cell(i) for i in range(self.n_cells)]

    def eval(self, point: np.ndarray, enhanced: bool = False) -> np.ndarray:
        """Surrogate outputs at one point, shape (m,)."""
        p = np.asarray(point, dtype=float)
        i = self.tess.nearest_cell(p)
        out = self.values[i].copy()
        if self.orders[i] == 1:
            out += self.jacobians[i] @ (p - self.tess.generators[i])
        if enhanced:
            out += self.errors[i]
        return out

    def batch_eval(self, points: np.ndarray, enhanced: bool = False) -> np.ndarray:
        """Surrogate outputs at a batch of points, shape (M, m)."""
        p = np.asarray(points, dtype=float)
        idx = self.tess.assign(p)
        out = self.values[idx].copy()
        linear = self.orders[idx] == 1
        if np.any(linear):
            rows = np.flatnonzero(linear)
            delta = p[rows] - self.tess.generators[idx[rows]]
            out[rows] += np.einsum("kmn,kn->km", self.jacobians[idx[rows]], delta)
        if enhanced:
            out += self.errors[idx]
        return out

    def with_updates(
        self,
        levels: np.ndarray | None = None,
        orders: np.ndarray | None = None,
        values: np.ndarray | None = None,
        errors: np.ndarray | None = None,
        jacobians: np.ndarray | None = None,
    ) -> "Surrogate":
        """Copy with whole arrays replaced; used by refinement transactions."""
        new = object.__new__(Surrogate)
        new.tess = self.tess
        new.n_outputs = self.n_outputs
        new.levels = np.array(self.levels if levels is None else levels, dtype=np.int64)
        new.orders = np.array(self.orders if orders is None else orders, dtype=np.int64)
        new.values = np.array(self.values if values is None else values, dtype=float)
        new.errors = np.array(self.errors if errors is None else errors, dtype=float)
        new.jacobians = np.array(
            self.jacobians if jacobians is None else jacobians, dtype=float
        )
        for a in (new.levels, new.orders, new.values, new.errors, new.jacobians):
            a.setflags(write=False)
        return new

    def to_dict(self) -> dict:
        """JSON-ready representation (floats survive a round trip via repr)."""
        return {
            "bounds": self.tess.space.bounds.tolist(),
            "generators": self.tess.generators.tolist(),
            "levels": self.levels.tolist(),
            "orders": self.orders.tolist(),
            "values": self.values.tolist(),
            "errors": self.errors.tolist(),
            "jacobians": [
                self.jacobians[i].tolist() if self.orders[i] == 1 else None
                for i in range(self.n_cells)
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Surrogate":
        from .domain import ParameterSpace

        space = ParameterSpace(np.asarray(data["bounds"], dtype=float))
        tess = Tessellation(space, np.asarray(data["generators"], dtype=float))
        cells = []
        for i in range(tess.n_cells):
            jac = data["jacobians"][i]
            cells.append(
                SurrogateCell(
                    generator=tess.generators[i],
                    level=int(data["levels"][i]),
                    order=int(data["orders"][i]),
                    values=np.asarray(data["values"][i], dtype=float),
                    error=np.asarray(data["errors"][i], dtype=float),
                    jacobian=None if jac is None else np.asarray(jac, dtype=float),
                )
            )
        return cls(tess, cells)
