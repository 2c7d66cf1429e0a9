"""Hierarchical 2^n-tree partitions and multi-scale measures.

Layer K holds the full point set in one cell; each layer below splits
every cell into up to 2^dim subcubes (empty ones are dropped) until layer
1; layer 0 is one singleton cell per point, indexed by the original point
order.  Cells holding at most ``leaf_bucket`` points stop subdividing and
are copied down unchanged, so every layer partitions the whole set.

Cell representatives are cube centers (half-diagonal radii).  On the
sphere, representatives are renormalised to unit length and radii are
recomputed as geodesic covering radii of the member points, padded so
that each cell also covers the representatives of all its descendants
(coarse solves treat those as the points of the layer).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DiscreteMeasure
from .costs import cost


@dataclass
class HierarchicalPartition:
    depth: int
    dim: int
    n_points: int
    sphere: bool
    root_lo: np.ndarray
    root_side: float
    level_start: np.ndarray   # cells of layer k occupy [level_start[k], level_start[k+1])
    level_of: np.ndarray
    parent: np.ndarray
    child_ptr: np.ndarray
    child_idx: np.ndarray
    leaf_start: np.ndarray    # per cell: slice of perm holding its points
    leaf_count: np.ndarray
    perm: np.ndarray
    rep: np.ndarray
    rad: np.ndarray

    @property
    def n_cells(self) -> int:
        return self.level_of.shape[0]

    def n_cells_at(self, k: int) -> int:
        return int(self.level_start[k + 1] - self.level_start[k])

    def cells_at(self, k: int) -> range:
        return range(int(self.level_start[k]), int(self.level_start[k + 1]))

    def level_points(self, k: int) -> np.ndarray:
        """Representative coordinates of layer k (the original points at k=0)."""
        return self.rep[self.level_start[k] : self.level_start[k + 1]]

    def children_local(self, k: int, local: int) -> np.ndarray:
        """Local child indices (in layer k-1) of a layer-k cell."""
        c = int(self.level_start[k]) + local
        kids = self.child_idx[self.child_ptr[c] : self.child_ptr[c + 1]]
        return kids - self.level_start[k - 1]

    def members(self, cell: int) -> np.ndarray:
        """Original point indices contained in a cell."""
        s = int(self.leaf_start[cell])
        return self.perm[s : s + int(self.leaf_count[cell])]

    @property
    def root(self) -> int:
        return int(self.level_start[self.depth])


def default_depth_grid(shape) -> int:
    return max(1, math.ceil(math.log2(max(shape))) - 2)


def default_depth_cloud(n_points: int, dim: int) -> int:
    return max(1, math.ceil(math.log2(max(n_points, 2)) / dim))


class _Node:
    __slots__ = ("level", "lo", "side", "start", "count", "children", "cid")

    def __init__(self, level, lo, side, start, count):
        self.level = level
        self.lo = lo
        self.side = side
        self.start = start
        self.count = count
        self.children = []
        self.cid = -1


def build_tree(points, depth: int, leaf_bucket: int = 1,
               sphere: bool = False) -> HierarchicalPartition:
    """Build a 2^n-tree partition of the given points with layers 0..depth."""
    pts = np.ascontiguousarray(np.asarray(points, dtype=np.float64))
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ValueError("points must be a nonempty (n, dim) array")
    if not np.isfinite(pts).all():
        raise ValueError("points must be finite")
    if depth < 1:
        raise ValueError("depth must be at least 1")
    if leaf_bucket < 1:
        raise ValueError("leaf_bucket must be at least 1")
    n, dim = pts.shape

    lo_pt = pts.min(axis=0)
    hi_pt = pts.max(axis=0)
    extent = float((hi_pt - lo_pt).max())
    # power-of-two side keeps every cube boundary and centre exactly
    # representable for integer grids, so coarse reps are dyadic
    if extent > 0.0:
        side = 2.0 ** math.ceil(math.log2(extent * (1.0 + 2.0**-20)))
    else:
        side = 1.0
    center = (lo_pt + hi_pt) / 2.0
    root_lo = center - side / 2.0

    perm = np.arange(n, dtype=np.int64)
    root = _Node(depth, root_lo.copy(), side, 0, n)
    by_level: dict[int, list[_Node]] = {k: [] for k in range(1, depth + 1)}
    by_level[depth].append(root)

    stack = [root]
    while stack:
        node = stack.pop()
        if node.level == 1:
            continue
        if node.count <= leaf_bucket:
            child = _Node(node.level - 1, node.lo, node.side,
                          node.start, node.count)
            node.children.append(child)
            by_level[child.level].append(child)
            stack.append(child)
            continue
        half = node.side / 2.0
        mid = node.lo + half
        sl = slice(node.start, node.start + node.count)
        sub = pts[perm[sl]]
        codes = np.zeros(node.count, dtype=np.int64)
        for d in range(dim):
            codes |= (sub[:, d] > mid[d]).astype(np.int64) << d
        order = np.argsort(codes, kind="stable")
        perm[sl] = perm[sl][order]
        codes = codes[order]
        bounds = np.flatnonzero(np.diff(codes)) + 1
        starts = np.concatenate([[0], bounds, [node.count]])
        for b in range(len(starts) - 1):
            c0, c1 = int(starts[b]), int(starts[b + 1])
            code = int(codes[c0])
            clo = node.lo.copy()
            for d in range(dim):
                if code >> d & 1:
                    clo[d] += half
            child = _Node(node.level - 1, clo, half,
                          node.start + c0, c1 - c0)
            node.children.append(child)
            by_level[child.level].append(child)
            stack.append(child)

    # assign cell ids: layer 0 first (original point order), then layers 1..K
    # in construction order
    level_start = np.zeros(depth + 2, dtype=np.int64)
    level_start[1] = n
    for k in range(1, depth + 1):
        level_start[k + 1] = level_start[k] + len(by_level[k])
    n_cells = int(level_start[depth + 1])
    for k in range(1, depth + 1):
        for i, node in enumerate(by_level[k]):
            node.cid = int(level_start[k]) + i

    level_of = np.empty(n_cells, dtype=np.int64)
    parent = np.full(n_cells, -1, dtype=np.int64)
    leaf_start = np.empty(n_cells, dtype=np.int64)
    leaf_count = np.empty(n_cells, dtype=np.int64)
    rep = np.empty((n_cells, dim), dtype=np.float64)
    rad = np.zeros(n_cells, dtype=np.float64)
    child_ptr = np.zeros(n_cells + 1, dtype=np.int64)
    child_lists: list[np.ndarray] = [np.empty(0, dtype=np.int64)] * n_cells

    pos = np.empty(n, dtype=np.int64)
    pos[perm] = np.arange(n, dtype=np.int64)
    level_of[:n] = 0
    leaf_start[:n] = pos
    leaf_count[:n] = 1
    rep[:n] = pts
    half_diag = math.sqrt(dim) / 2.0
    for k in range(1, depth + 1):
        for node in by_level[k]:
            c = node.cid
            level_of[c] = k
            leaf_start[c] = node.start
            leaf_count[c] = node.count
            rep[c] = node.lo + node.side / 2.0
            rad[c] = node.side * half_diag
            if k == 1:
                kids = np.sort(perm[node.start : node.start + node.count])
            else:
                kids = np.array([ch.cid for ch in node.children],
                                dtype=np.int64)
            child_lists[c] = kids
            for ch in kids:
                parent[ch] = c
    np.cumsum([0] + [child_lists[c].shape[0] for c in range(n_cells)],
              out=child_ptr)
    child_idx = (np.concatenate(child_lists) if n_cells else
                 np.empty(0, dtype=np.int64))

    tree = HierarchicalPartition(depth, dim, n, sphere, root_lo, side,
                                 level_start, level_of, parent, child_ptr,
                                 child_idx, leaf_start, leaf_count, perm,
                                 rep, rad)
    if sphere:
        _spherify(tree, pts)
    return tree


def _spherify(tree: HierarchicalPartition, pts: np.ndarray):
    """Move representatives onto the unit sphere and recompute radii.

    Radii become geodesic covering radii of the member points, padded so
    every cell also covers its descendants' representatives.
    """
    for k in range(1, tree.depth + 1):
        for c in tree.cells_at(k):
            r = tree.rep[c]
            nrm = float(np.sqrt(r @ r))
            if nrm < 1e-9:
                r = pts[tree.members(c)[0]]
                nrm = float(np.sqrt(r @ r))
            tree.rep[c] = r / nrm
    for k in range(1, tree.depth + 1):
        for c in tree.cells_at(k):
            kids = tree.child_idx[tree.child_ptr[c] : tree.child_ptr[c + 1]]
            d = np.arccos(np.clip(tree.rep[kids] @ tree.rep[c], -1.0, 1.0))
            # arccos amplifies dot-product rounding near parallel
            # vectors; the pad keeps the radius a true covering radius
            tree.rad[c] = float((d + tree.rad[kids]).max()) + 1e-7


@dataclass
class MultiScaleMeasure:
    """A measure coarsened along a hierarchical partition."""

    tree: HierarchicalPartition
    masses: list[np.ndarray]  # per layer, local cell order
    mass_scale: int

    def level_measure(self, k: int) -> DiscreteMeasure:
        return DiscreteMeasure(self.tree.level_points(k).copy(),
                               self.masses[k].copy(), self.mass_scale)


def coarsen_measure(measure: DiscreteMeasure,
                    tree: HierarchicalPartition) -> MultiScaleMeasure:
    """Sum masses over cells, layer by layer."""
    if len(measure) != tree.n_points:
        raise ValueError("measure and tree size mismatch")
    levels = [np.asarray(measure.masses, dtype=np.int64).copy()]
    for k in range(1, tree.depth + 1):
        nk = tree.n_cells_at(k)
        mk = np.zeros(nk, dtype=np.int64)
        below = levels[k - 1]
        base = int(tree.level_start[k])
        for local in range(nk):
            kids = tree.children_local(k, local)
            mk[local] = below[kids].sum()
        levels.append(mk)
    return MultiScaleMeasure(tree, levels, measure.mass_scale)


def hierarchical_cost(spec, tree_x: HierarchicalPartition, cell_x: int,
                      tree_y: HierarchicalPartition, cell_y: int) -> float:
    """Cost between two cells, evaluated at their representatives.

    The per-pair noise term of the noisy family only applies when both
    cells are layer-0 singletons (their ids are the leaf indices).
    """
    if tree_x.level_of[cell_x] == 0 and tree_y.level_of[cell_y] == 0:
        return cost(spec, tree_x.rep[cell_x], tree_y.rep[cell_y],
                    ix=int(cell_x), iy=int(cell_y))
    return cost(spec, tree_x.rep[cell_x], tree_y.rep[cell_y])
