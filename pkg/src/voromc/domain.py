"""Parameter boxes, implicit Voronoi tessellations, and emulation point sets.

Cells are never constructed geometrically. A tessellation is just the
generator set plus a nearest-neighbor rule; membership of any point is decided
by an exact nearest-generator query with ties broken to the smallest generator
index.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

__all__ = [
    "ParameterSpace",
    "Tessellation",
    "EmulationSet",
    "sample_uniform",
    "nearest_cell_linear",
    "cell_volume_fractions",
]


@dataclass(frozen=True)
class ParameterSpace:
    """Axis-aligned box domain with the Euclidean metric.

    bounds has shape (n, 2) with strictly increasing rows [lo, hi].
    """

    bounds: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bounds, dtype=float)
        if b.ndim != 2 or b.shape[1] != 2:
            raise ValueError(f"bounds must have shape (n, 2), got {b.shape}")
        if not np.all(b[:, 0] < b[:, 1]):
            raise ValueError("each bounds row must satisfy lo < hi")
        object.__setattr__(self, "bounds", b)

    @property
    def dim(self) -> int:
        return self.bounds.shape[0]

    @property
    def lower(self) -> np.ndarray:
        return self.bounds[:, 0]

    @property
    def upper(self) -> np.ndarray:
        return self.bounds[:, 1]

    @property
    def widths(self) -> np.ndarray:
        return self.bounds[:, 1] - self.bounds[:, 0]

    @property
    def volume(self) -> float:
        return float(np.prod(self.widths))

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Boolean membership for one point (n,) or a batch (M, n)."""
        p = np.asarray(points, dtype=float)
        single = p.ndim == 1
        p = np.atleast_2d(p)
        if p.shape[1] != self.dim:
            raise ValueError(f"points have dimension {p.shape[1]}, space has {self.dim}")
        inside = np.all((p >= self.lower) & (p <= self.upper), axis=1)
        return bool(inside[0]) if single else inside


def sample_uniform(space: ParameterSpace, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw count points uniformly in the box; shape (count, n)."""
    if count < 1:
        raise ValueError(f"count must be positive, got {count}")
    u = rng.random((count, space.dim))
    return space.lower + u * space.widths


def nearest_cell_linear(generators: np.ndarray, point: np.ndarray) -> int:
    """Reference nearest-generator lookup by linear scan.

    np.argmin returns the first (smallest) index among exact ties, which is
    the tie rule the tree-backed path must reproduce.
    """
    d2 = np.sum((generators - point) ** 2, axis=1)
    return int(np.argmin(d2))


class Tessellation:
    """Implicit Voronoi tessellation of a box: generators plus a lookup rule.

    Generators must lie inside the box and be pairwise distinct. Lookups use
    a kd-tree; exact distance ties are resolved to the smallest generator
    index, matching the linear-scan reference.
    """

    def __init__(self, space: ParameterSpace, generators: np.ndarray):
        g = np.asarray(generators, dtype=float)
        if g.ndim != 2 or g.shape[1] != space.dim:
            raise ValueError(f"generators must have shape (N, {space.dim}), got {g.shape}")
        if g.shape[0] < 1:
            raise ValueError("at least one generator is required")
        if not np.all(space.contains(g)):
            raise ValueError("all generators must lie inside the parameter space")
        # Pairwise distinctness: duplicates would create empty cells.
        _, counts = np.unique(g, axis=0, return_counts=True)
        if np.any(counts > 1):
            raise ValueError("generators must be pairwise distinct")
        self.space = space
        self.generators = g
        self.generators.setflags(write=False)
        self._tree = cKDTree(g)

    @property
    def n_cells(self) -> int:
        return self.generators.shape[0]

    @property
    def dim(self) -> int:
        return self.generators.shape[1]

    def nearest_cell(self, point: np.ndarray) -> int:
        """Index of the cell containing point (ties to the smallest index)."""
        p = np.asarray(point, dtype=float)
        if p.shape != (self.dim,):
            raise ValueError(f"point must have shape ({self.dim},), got {p.shape}")
        k = min(self.n_cells, 4)
        d, idx = self._tree.query(p, k=k)
        d = np.atleast_1d(d)
        idx = np.atleast_1d(idx)
        if k > 1 and d[-1] == d[0]:
            # All k returned neighbors tie; only the full scan is safe.
            return nearest_cell_linear(self.generators, p)
        return int(idx[d == d[0]].min())

    def assign(self, points: np.ndarray) -> np.ndarray:
        """Cell indices for a batch of points, shape (M,), tie rule included."""
        p = np.asarray(points, dtype=float)
        if p.ndim != 2 or p.shape[1] != self.dim:
            raise ValueError(f"points must have shape (M, {self.dim}), got {p.shape}")
        if self.n_cells == 1:
            return np.zeros(p.shape[0], dtype=np.int64)
        d, idx = self._tree.query(p, k=2)
        out = idx[:, 0].astype(np.int64)
        tied = d[:, 0] == d[:, 1]
        for j in np.flatnonzero(tied):
            out[j] = self.nearest_cell(p[j])
        return out

    def neighborhood(self, cell: int, size: int) -> np.ndarray:
        """Indices of the size nearest generators to generator `cell` (itself included)."""
        if not 0 <= cell < self.n_cells:
            raise ValueError(f"cell index {cell} out of range")
        k = min(size, self.n_cells)
        _, idx = self._tree.query(self.generators[cell], k=k)
        return np.atleast_1d(idx).astype(np.int64)

    def insert(self, new_points: np.ndarray) -> "Tessellation":
        """New tessellation with the given generators appended (originals keep their indices)."""
        pts = np.atleast_2d(np.asarray(new_points, dtype=float))
        return Tessellation(self.space, np.vstack([self.generators, pts]))


@dataclass(frozen=True)
class EmulationSet:
    """Uniform sample of the box with its cell assignment frozen in.

    Used for cell volume fractions, the scaling factor of probability-error
    indicators, and cell radius estimates. Assignments always agree with
    Tessellation.nearest_cell on the tessellation they were built against.
    """

    points: np.ndarray
    cells: np.ndarray
    n_cells: int
    counts: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.points.ndim != 2:
            raise ValueError("points must be a 2d array")
        if self.cells.shape != (self.points.shape[0],):
            raise ValueError("cells must be one index per point")
        counts = np.bincount(self.cells, minlength=self.n_cells).astype(np.int64)
        object.__setattr__(self, "counts", counts)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @classmethod
    def draw(cls, tess: Tessellation, count: int, rng: np.random.Generator) -> "EmulationSet":
        pts = sample_uniform(tess.space, count, rng)
        return cls(points=pts, cells=tess.assign(pts), n_cells=tess.n_cells)

    def reassign(self, tess: Tessellation) -> "EmulationSet":
        """Same points, memberships recomputed against a new tessellation."""
        return EmulationSet(points=self.points, cells=tess.assign(self.points), n_cells=tess.n_cells)


def cell_volume_fractions(emulation: EmulationSet) -> np.ndarray:
    """Per-cell volume fractions estimated by emulation-point counting.

    Fractions sum to 1 by construction. Cells without any emulation point get
    fraction 0; callers that need a positive volume must treat those as
    degenerate.
    """
    if emulation.size == 0:
        raise ValueError("emulation set is empty")
    return emulation.counts / float(emulation.size)
