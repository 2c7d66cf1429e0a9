"""Core data types for discrete transport problems.

Measures carry integer masses on a fixed unit scale so that solver
arithmetic, termination tests and certificates are exact.  Couplings and
neighbourhoods are stored in a canonical compressed row layout: rows in
ascending order, column indices strictly increasing within each row.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

DEFAULT_MASS_SCALE = 10**9
DEFAULT_COST_SCALE = 10**9


def round_half_away(values: np.ndarray | float) -> np.ndarray | int:
    """Round to the nearest integer, ties away from zero.

    Works for any magnitude (no ``floor(x + 0.5)`` artefacts once the
    spacing of floats exceeds 1).
    """
    x = np.asarray(values, dtype=np.float64)
    f = np.floor(x)
    r = x - f  # exact: both operands share an exponent range
    up = (r > 0.5) | ((r == 0.5) & (x > 0))
    out = (f + up).astype(np.int64)
    if np.isscalar(values) or getattr(values, "ndim", 1) == 0:
        return int(out)
    return out


def quantize_cost(values: np.ndarray | float, cost_scale: int = DEFAULT_COST_SCALE):
    """Map real cost values to integer units: round_half_away(value * scale)."""
    if cost_scale <= 0:
        raise ValueError("cost_scale must be positive")
    x = np.asarray(values, dtype=np.float64) * float(cost_scale)
    return round_half_away(x if not np.isscalar(values) else float(x))


@dataclass
class DiscreteMeasure:
    """Weighted point cloud with integer masses summing to ``mass_scale``.

    points : (n, dim) float64 array
    masses : (n,) int64 array, nonnegative
    """

    points: np.ndarray
    masses: np.ndarray
    mass_scale: int = DEFAULT_MASS_SCALE

    def __post_init__(self):
        self.points = np.ascontiguousarray(np.asarray(self.points, dtype=np.float64))
        if self.points.ndim != 2:
            raise ValueError("points must be a 2-d array of shape (n, dim)")
        self.masses = np.ascontiguousarray(np.asarray(self.masses, dtype=np.int64))
        if self.masses.ndim != 1 or self.masses.shape[0] != self.points.shape[0]:
            raise ValueError("masses must be a 1-d array matching points")
        if np.any(self.masses < 0):
            raise ValueError("masses must be nonnegative")
        if int(self.mass_scale) <= 0:
            raise ValueError("mass_scale must be positive")
        self.mass_scale = int(self.mass_scale)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def total_mass(self) -> int:
        return int(self.masses.sum(dtype=object))

    def validate_total(self):
        if self.total_mass != self.mass_scale:
            raise ValueError(
                f"masses sum to {self.total_mass}, expected mass_scale={self.mass_scale}"
            )


@dataclass
class ProblemInstance:
    """A transport problem: source and target measures plus a cost description."""

    mu: DiscreteMeasure
    nu: DiscreteMeasure
    cost: "object"  # a CostSpec from sparseot.costs
    cost_scale: int = DEFAULT_COST_SCALE

    def __post_init__(self):
        if self.mu.mass_scale != self.nu.mass_scale:
            raise ValueError("mu and nu must share one mass_scale")
        if self.mu.total_mass != self.nu.total_mass:
            raise ValueError("mu and nu must have equal total mass")
        self.cost_scale = int(self.cost_scale)

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.mu), len(self.nu))


class _RowStructure:
    """Shared helpers for compressed-row containers."""

    n_rows: int
    n_cols: int
    indptr: np.ndarray
    cols: np.ndarray

    def row(self, i: int) -> np.ndarray:
        return self.cols[self.indptr[i] : self.indptr[i + 1]]

    @property
    def nnz(self) -> int:
        return int(self.cols.shape[0])

    def contains(self, i: int, j: int) -> bool:
        r = self.row(i)
        k = np.searchsorted(r, j)
        return bool(k < r.shape[0] and r[k] == j)

    def pairs(self) -> Iterable[tuple[int, int]]:
        for i in range(self.n_rows):
            for j in self.row(i):
                yield i, int(j)


def _canonical_rows(n_rows, n_cols, rows, cols, vals=None):
    """Sort (row, col) pairs, merge duplicates, drop zeros; returns CSR arrays."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    if rows.shape != cols.shape:
        raise ValueError("row and column index arrays must match")
    if rows.size and (rows.min() < 0 or rows.max() >= n_rows):
        raise ValueError("row index out of range")
    if cols.size and (cols.min() < 0 or cols.max() >= n_cols):
        raise ValueError("column index out of range")
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    if vals is not None:
        vals = np.asarray(vals, dtype=np.int64)
        if np.any(vals < 0):
            raise ValueError("coupling masses must be nonnegative")
        vals = vals[order]
        # merge duplicate coordinates by summing
        if rows.size:
            keep = np.ones(rows.size, dtype=bool)
            keep[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
            if not keep.all():
                group = np.cumsum(keep) - 1
                summed = np.zeros(int(group[-1]) + 1, dtype=np.int64)
                np.add.at(summed, group, vals)
                rows, cols, vals = rows[keep], cols[keep], summed
        pos = vals > 0
        rows, cols, vals = rows[pos], cols[pos], vals[pos]
    else:
        if rows.size:
            keep = np.ones(rows.size, dtype=bool)
            keep[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
            rows, cols = rows[keep], cols[keep]
    indptr = np.zeros(n_rows + 1, dtype=np.int64)
    np.add.at(indptr, rows + 1, 1)
    np.cumsum(indptr, out=indptr)
    return indptr, cols, vals


@dataclass
class SparseCoupling(_RowStructure):
    """Transport plan in canonical compressed-row form with integer masses.

    Every stored entry has strictly positive mass; column indices are
    strictly increasing within each row.
    """

    n_rows: int
    n_cols: int
    indptr: np.ndarray
    cols: np.ndarray
    mass: np.ndarray
    mass_scale: int = DEFAULT_MASS_SCALE

    @classmethod
    def from_entries(cls, n_rows, n_cols, rows, cols, mass,
                     mass_scale=DEFAULT_MASS_SCALE) -> "SparseCoupling":
        """Build a canonical coupling from unsorted entries (duplicates summed)."""
        indptr, ccols, vals = _canonical_rows(n_rows, n_cols, rows, cols, mass)
        return cls(n_rows, n_cols, indptr, ccols, vals, int(mass_scale))

    def row_mass(self, i: int) -> np.ndarray:
        return self.mass[self.indptr[i] : self.indptr[i + 1]]

    def row_indices(self) -> np.ndarray:
        """Expanded row index per stored entry."""
        out = np.empty(self.nnz, dtype=np.int64)
        for i in range(self.n_rows):
            out[self.indptr[i] : self.indptr[i + 1]] = i
        return out

    def marginals(self) -> tuple[np.ndarray, np.ndarray]:
        mu = np.zeros(self.n_rows, dtype=np.int64)
        nu = np.zeros(self.n_cols, dtype=np.int64)
        for i in range(self.n_rows):
            sl = slice(self.indptr[i], self.indptr[i + 1])
            mu[i] = self.mass[sl].sum()
            np.add.at(nu, self.cols[sl], self.mass[sl])
        return mu, nu

    def support(self) -> "Neighbourhood":
        return Neighbourhood(self.n_rows, self.n_cols,
                             self.indptr.copy(), self.cols.copy())


@dataclass
class Neighbourhood(_RowStructure):
    """Sparse set of admissible pairs (x, y) in compressed-row form."""

    n_rows: int
    n_cols: int
    indptr: np.ndarray
    cols: np.ndarray

    @classmethod
    def from_pairs(cls, n_rows, n_cols, rows, cols) -> "Neighbourhood":
        indptr, ccols, _ = _canonical_rows(n_rows, n_cols, rows, cols)
        return cls(n_rows, n_cols, indptr, ccols)

    @classmethod
    def full(cls, n_rows, n_cols) -> "Neighbourhood":
        indptr = np.arange(n_rows + 1, dtype=np.int64) * n_cols
        cols = np.tile(np.arange(n_cols, dtype=np.int64), n_rows)
        return cls(n_rows, n_cols, indptr, cols)

    def union(self, other: "Neighbourhood") -> "Neighbourhood":
        if (self.n_rows, self.n_cols) != (other.n_rows, other.n_cols):
            raise ValueError("shape mismatch")
        rows = np.concatenate([self_row_expand(self), self_row_expand(other)])
        cols = np.concatenate([self.cols, other.cols])
        return Neighbourhood.from_pairs(self.n_rows, self.n_cols, rows, cols)

    def contains_support(self, pi: SparseCoupling) -> bool:
        for i in range(self.n_rows):
            mine = self.row(i)
            theirs = pi.row(i)
            if np.setdiff1d(theirs, mine, assume_unique=True).size:
                return False
        return True


def self_row_expand(s: _RowStructure) -> np.ndarray:
    out = np.empty(s.nnz, dtype=np.int64)
    for i in range(s.n_rows):
        out[s.indptr[i] : s.indptr[i + 1]] = i
    return out


@dataclass
class DualPotentials:
    """Integer dual variables (alpha on rows, beta on columns) in cost units."""

    alpha: np.ndarray
    beta: np.ndarray
    cost_scale: int = DEFAULT_COST_SCALE

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=np.int64)
        self.beta = np.asarray(self.beta, dtype=np.int64)
        if self.alpha.ndim != 1 or self.beta.ndim != 1:
            raise ValueError("dual potentials must be one value per point")


def objective(pi: SparseCoupling, cost_fn: Callable[[int, int], int]) -> int:
    """Total cost sum(c(i,j) * mass(i,j)) as an exact Python integer.

    ``cost_fn`` must return integer cost units for an index pair.
    """
    total = 0
    for i in range(pi.n_rows):
        sl = slice(pi.indptr[i], pi.indptr[i + 1])
        for j, m in zip(pi.cols[sl], pi.mass[sl]):
            total += int(cost_fn(i, int(j))) * int(m)
    return total


def objective_from_costs(pi: SparseCoupling, arc_costs: np.ndarray) -> int:
    """Objective when ``arc_costs`` aligns with the coupling's stored entries."""
    if arc_costs.shape[0] != pi.nnz:
        raise ValueError("arc cost array does not match coupling entries")
    return int(sum(int(c) * int(m) for c, m in zip(arc_costs, pi.mass)))


def extract_map(pi: SparseCoupling) -> np.ndarray:
    """Per-row representative target: the column with maximal mass.

    Ties pick the smallest column index; empty rows yield -1.
    """
    t = np.full(pi.n_rows, -1, dtype=np.int64)
    for i in range(pi.n_rows):
        sl = slice(pi.indptr[i], pi.indptr[i + 1])
        m = pi.mass[sl]
        if m.shape[0]:
            # argmax returns the first maximal entry; columns are ascending
            t[i] = pi.cols[sl][int(np.argmax(m))]
    return t
