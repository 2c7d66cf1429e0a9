"""Shielding neighbourhood construction.

Given a locally optimal coupling, builds the sparse arc set whose local
optimum is globally optimal: the support, one target pair per shield
candidate, and the miss set of target points no candidate strictly
shields.  Miss sets come either from a hierarchical search over the
target tree or, on full lattices, from axis-aligned rectangles located
by bisection.  Both paths apply the identical pointwise predicate, so
they return identical neighbourhoods on the same inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import _kernels, costs
from .core import Neighbourhood, SparseCoupling
from .hierarchy import HierarchicalPartition


@dataclass(frozen=True)
class GridAxes:
    """Shield candidates: lattice neighbours along each axis."""


@dataclass(frozen=True)
class KNearest:
    """Shield candidates: k nearest source points (self excluded)."""

    k: int | None = None

    def resolve(self, dim: int) -> int:
        return self.k if self.k is not None else 2 * dim + 2


def parse_scheme(text):
    """Turn "axes", "knn", or "knn:<k>" into a candidate scheme."""
    if text is None or isinstance(text, (GridAxes, KNearest)):
        return text
    if text == "auto":
        return None
    if text == "axes":
        return GridAxes()
    if text == "knn":
        return KNearest()
    if isinstance(text, str) and text.startswith("knn:"):
        try:
            return KNearest(int(text.split(":", 1)[1]))
        except ValueError:
            pass
    raise ValueError(f"bad candidate scheme {text!r}")


@dataclass
class ShieldStats:
    bound_calls: int = 0
    n_miss: int = 0
    n_pairs: int = 0


@dataclass
class GridLevel:
    """Full rectangular lattice structure of a point layer."""

    shape: tuple[int, ...]
    spacing: float
    lat: np.ndarray       # (n, dim) lattice multi-indices, int64
    cell_of: np.ndarray   # flat lattice index -> local point id
    strides: np.ndarray   # row-major strides, int64


def grid_level(points: np.ndarray) -> GridLevel | None:
    """Detect a full axis-aligned lattice; None when points are not one."""
    pts = np.asarray(points, dtype=np.float64)
    n, dim = pts.shape
    axes = []
    for d in range(dim):
        axes.append(np.unique(pts[:, d]))
    shape = tuple(len(a) for a in axes)
    if int(np.prod(shape)) != n:
        return None
    steps = []
    for a in axes:
        if len(a) > 1:
            diffs = np.diff(a)
            if not np.all(diffs == diffs[0]):
                return None
            steps.append(float(diffs[0]))
    if steps and max(steps) != min(steps):
        return None
    spacing = steps[0] if steps else 1.0
    lat = np.empty((n, dim), dtype=np.int64)
    for d in range(dim):
        lat[:, d] = np.searchsorted(axes[d], pts[:, d])
    strides = np.ones(dim, dtype=np.int64)
    for d in range(dim - 2, -1, -1):
        strides[d] = strides[d + 1] * shape[d + 1]
    flat = lat @ strides
    if len(np.unique(flat)) != n:
        return None
    cell_of = np.empty(int(np.prod(shape)), dtype=np.int64)
    cell_of[flat] = np.arange(n, dtype=np.int64)
    return GridLevel(shape, spacing, lat, cell_of, strides)


@dataclass
class CandidateSet:
    """Static per-level shield candidates in ragged-row form."""

    indptr: np.ndarray   # int64[n_rows + 1]
    xs: np.ndarray       # int64[nc], source point ids
    axis: np.ndarray     # int8[nc], lattice axis (grid scheme only)
    direction: np.ndarray  # int8[nc], +1 / -1 along the axis


def axis_candidates(grid: GridLevel, usable: np.ndarray) -> CandidateSet:
    """Lattice-neighbour candidates for every row, skipping unusable ones."""
    n, dim = grid.lat.shape
    indptr = np.zeros(n + 1, dtype=np.int64)
    xs, ax, dr = [], [], []
    for r in range(n):
        cnt = 0
        for d in range(dim):
            for s in (-1, 1):
                j = grid.lat[r, d] + s
                if j < 0 or j >= grid.shape[d]:
                    continue
                flat = int(grid.lat[r] @ grid.strides) + s * int(grid.strides[d])
                c = int(grid.cell_of[flat])
                if not usable[c]:
                    continue
                xs.append(c)
                ax.append(d)
                dr.append(s)
                cnt += 1
        indptr[r + 1] = indptr[r] + cnt
    return CandidateSet(indptr, np.array(xs, dtype=np.int64),
                        np.array(ax, dtype=np.int8),
                        np.array(dr, dtype=np.int8))


def knn_candidates(points: np.ndarray, k: int,
                   usable: np.ndarray) -> CandidateSet:
    """Nearest-neighbour candidates (chordal metric, self excluded)."""
    n, dim = points.shape
    k_eff = min(k, max(int(usable.sum()) - 1, 0))
    indptr = np.zeros(n + 1, dtype=np.int64)
    if k_eff == 0:
        empty = np.empty(0, dtype=np.int64)
        return CandidateSet(indptr, empty, empty.astype(np.int8),
                            empty.astype(np.int8))
    pool = np.flatnonzero(usable)
    tree = cKDTree(points[pool])
    q = min(k_eff + 1, pool.shape[0])
    _, nbr = tree.query(points, k=q)
    nbr = pool[np.atleast_2d(nbr.reshape(n, q))]
    xs = []
    for r in range(n):
        row = [int(c) for c in nbr[r] if c != r][:k_eff]
        xs.extend(row)
        indptr[r + 1] = indptr[r] + len(row)
    xs = np.array(xs, dtype=np.int64)
    zero = np.zeros(xs.shape[0], dtype=np.int8)
    return CandidateSet(indptr, xs, zero, zero)


def target_map(pi: SparseCoupling) -> np.ndarray:
    """Per row, the support column of maximal mass (ties: lowest column).

    Rows without support get -1.
    """
    t = np.full(pi.n_rows, -1, dtype=np.int64)
    for r in range(pi.n_rows):
        a, b = pi.indptr[r], pi.indptr[r + 1]
        if b > a:
            t[r] = pi.cols[a + int(np.argmax(pi.mass[a:b]))]
    return t


class Shielder:
    """Rebuilds the shielding neighbourhood for successive couplings.

    Everything independent of the coupling (points, candidates, search
    structure, slacks) is prepared once; ``__call__`` only recomputes the
    target map and the miss sets.
    """

    def __init__(self, spec, x_points, y_points, masses_x, scheme,
                 *, y_tree: HierarchicalPartition | None = None,
                 level: int = 0,
                 grid_x: GridLevel | None = None,
                 grid_y: GridLevel | None = None,
                 include_noise: bool = True,
                 guard: float = 0.0):
        self.spec = spec
        self.code, self.p = costs.family_code(spec)
        self.x_points = np.ascontiguousarray(x_points, dtype=np.float64)
        self.y_points = np.ascontiguousarray(y_points, dtype=np.float64)
        usable = np.asarray(masses_x) > 0
        if isinstance(scheme, GridAxes):
            if grid_x is None:
                grid_x = grid_level(self.x_points)
            if grid_x is None:
                raise ValueError("grid candidates need a full source "
                                 "lattice")
            self.cands = axis_candidates(grid_x, usable)
        elif isinstance(scheme, KNearest):
            k = scheme.resolve(self.x_points.shape[1])
            self.cands = knn_candidates(self.x_points, k, usable)
        else:
            raise TypeError(f"unknown candidate scheme {scheme!r}")
        self.grid_y = grid_y
        self.y_tree = y_tree
        self.level = level
        if grid_y is None and y_tree is None:
            raise ValueError("need a target tree or a target lattice")
        if grid_y is not None and not isinstance(scheme, GridAxes):
            raise ValueError("lattice miss search needs axis candidates")
        if grid_y is not None and self.code != 0:
            raise ValueError("lattice miss search is only sound for "
                             "squared-Euclidean geometry")
        rows = np.repeat(np.arange(self.x_points.shape[0]),
                         np.diff(self.cands.indptr))
        self.cand_rows = rows
        self.slack = costs.shielding_slacks(
            spec, self.x_points[rows], self.x_points[self.cands.xs],
            include_noise) + guard

    def __call__(self, pi: SparseCoupling):
        t = target_map(pi)
        cand_ys = t[self.cands.xs]
        ok = cand_ys >= 0
        if not ok.all():
            # drop candidates whose source row lost its support
            keep = np.flatnonzero(ok)
            indptr = np.zeros_like(self.cands.indptr)
            np.add.at(indptr[1:], self.cand_rows[keep], 1)
            indptr = np.cumsum(indptr)
            cs = CandidateSet(indptr, self.cands.xs[keep],
                              self.cands.axis[keep],
                              self.cands.direction[keep])
            cand_ys = cand_ys[keep]
            slack = self.slack[keep]
            rows = self.cand_rows[keep]
        else:
            cs, slack, rows = self.cands, self.slack, self.cand_rows
        if self.grid_y is not None:
            g = self.grid_y
            miss, miss_ptr, calls = _kernels.grid_miss_rows(
                self.code, self.p, self.x_points, self.y_points,
                cs.indptr, cs.xs, cand_ys, cs.axis, cs.direction, slack,
                g.lat, g.cell_of, np.array(g.shape, dtype=np.int64),
                g.strides)
        else:
            tr = self.y_tree
            miss, miss_ptr, calls = _kernels.search_tree_rows(
                self.code, self.p, self.x_points, cs.indptr, cs.xs,
                cand_ys, slack, self.y_points, tr.level_of, tr.child_ptr,
                tr.child_idx, tr.rep, tr.rad, tr.root, self.level,
                tr.level_start[self.level], tr.n_cells + 8)
        sup_rows = pi.row_indices()
        all_rows = np.concatenate([sup_rows, rows,
                                   np.repeat(np.arange(pi.n_rows),
                                             np.diff(miss_ptr))])
        all_cols = np.concatenate([pi.cols, cand_ys, miss])
        nbh = Neighbourhood.from_pairs(pi.n_rows, pi.n_cols, all_rows,
                                       all_cols)
        stats = ShieldStats(int(calls), int(miss.shape[0]), nbh.nnz)
        return nbh, stats
