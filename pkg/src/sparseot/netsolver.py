"""Exact sparse transport solves on a restricted arc set.

``solve_local`` minimises sum c(x, y) pi(x, y) over couplings supported
on a given neighbourhood, with integer masses and integer costs, using
the network simplex kernel.  It can start cold (artificial basis), from
a previous spanning-tree basis, or from previous dual potentials (costs
are rebased by a feasible shift of the duals, which keeps the optimal
couplings unchanged).
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from . import _simplex
from .core import (DEFAULT_MASS_SCALE, DualPotentials, Neighbourhood,
                   SparseCoupling)

DEFAULT_BLAND_FACTOR = 10


class TransportInfeasible(RuntimeError):
    """The restricted problem admits no feasible coupling."""


@dataclass
class SparseTransportLP:
    """Arc-set transport problem with integer data."""

    supplies: np.ndarray   # int64[nX]
    demands: np.ndarray    # int64[nY]
    indptr: np.ndarray     # int64[nX + 1]
    cols: np.ndarray       # int64[nnz], ascending within each row
    costs: np.ndarray      # int64[nnz]
    mass_scale: int = DEFAULT_MASS_SCALE

    def __post_init__(self):
        self.supplies = np.asarray(self.supplies, dtype=np.int64)
        self.demands = np.asarray(self.demands, dtype=np.int64)
        self.indptr = np.asarray(self.indptr, dtype=np.int64)
        self.cols = np.asarray(self.cols, dtype=np.int64)
        self.costs = np.asarray(self.costs, dtype=np.int64)
        if self.costs.shape != self.cols.shape:
            raise ValueError("costs must align with arcs")
        if int(self.supplies.sum(dtype=object)) != int(self.demands.sum(dtype=object)):
            raise ValueError("total supply must equal total demand")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.supplies.shape[0], self.demands.shape[0])

    @classmethod
    def from_neighbourhood(cls, mu_masses, nu_masses, nbh: Neighbourhood,
                           arc_costs,
                           mass_scale: int = DEFAULT_MASS_SCALE,
                           ) -> "SparseTransportLP":
        return cls(mu_masses, nu_masses, nbh.indptr, nbh.cols, arc_costs,
                   mass_scale)


@dataclass
class Basis:
    """Spanning-tree basis, portable across arc sets.

    Per node: parent link, the arc to the parent encoded as an (x, y)
    index pair (``arc_x == -1`` marks an artificial root arc whose
    direction is ``art_dir``: 1 for root -> node), and the node potential.
    """

    parent: np.ndarray
    arc_x: np.ndarray
    arc_y: np.ndarray
    art_dir: np.ndarray
    potentials: np.ndarray


@dataclass
class LocalSolution:
    coupling: SparseCoupling
    duals: DualPotentials
    basis: Basis
    objective: int
    pivots: int
    degenerate_pivots: int
    n_arcs: int
    repaired: int = 0


def _expand_rows(indptr: np.ndarray, nnz: int) -> np.ndarray:
    return np.repeat(np.arange(indptr.shape[0] - 1, dtype=np.int64),
                     np.diff(indptr))


def _find_arcs(indptr, cols, ax, ay):
    """Arc ids for pairs (ax[k], ay[k]) or -1 when absent."""
    out = np.empty(ax.shape[0], dtype=np.int64)
    for k in range(ax.shape[0]):
        lo = indptr[ax[k]]
        hi = indptr[ax[k] + 1]
        pos = lo + np.searchsorted(cols[lo:hi], ay[k])
        if pos < hi and cols[pos] == ay[k]:
            out[k] = pos
        else:
            out[k] = -1
    return out


def solve_local(lp: SparseTransportLP, warm=None, pivot_block=None,
                bland_factor: int = DEFAULT_BLAND_FACTOR, cost_fn=None,
                mass_scale=None, cost_scale=None,
                max_pivots: int = 2_000_000_000) -> LocalSolution:
    """Solve the restricted problem exactly.

    ``warm`` may be a :class:`Basis`, a :class:`DualPotentials`, or None
    (cold start).  Basic arcs that vanished from the arc set are re-added
    at their true cost via ``cost_fn(x, y) -> int`` provided they carried
    no flow; a warm basis incompatible with the supplies falls back to a
    cold start.
    """
    nX, nY = lp.shape
    n_nodes = nX + nY + 1
    root = n_nodes - 1
    m_csr = lp.cols.shape[0]

    if isinstance(warm, DualPotentials):
        return _solve_warm_dual(lp, warm, pivot_block, bland_factor,
                                max_pivots)

    # ---- arc arrays: CSR arcs [+ repairs] + artificial arcs
    repairs: list[tuple[int, int]] = []
    arc_pos = None
    if isinstance(warm, Basis):
        real = warm.arc_x >= 0
        real[root] = False
        arc_pos = np.full(n_nodes, -1, dtype=np.int64)
        found = _find_arcs(lp.indptr, lp.cols, warm.arc_x[real],
                           warm.arc_y[real])
        arc_pos[np.flatnonzero(real)] = found
        for v in np.flatnonzero(real):
            if arc_pos[v] < 0:
                repairs.append((int(warm.arc_x[v]), int(warm.arc_y[v])))
    n_rep = len(repairs)
    if n_rep and cost_fn is None:
        raise ValueError("warm basis needs vanished arcs re-added; "
                         "pass cost_fn to price them")
    m_real = m_csr + n_rep
    m_tot = m_real + n_nodes - 1

    S = np.empty(m_tot, dtype=np.int64)
    T = np.empty(m_tot, dtype=np.int64)
    C = np.empty(m_tot, dtype=np.int64)
    S[:m_csr] = _expand_rows(lp.indptr, m_csr)
    T[:m_csr] = nX + lp.cols
    C[:m_csr] = lp.costs
    for k, (ax, ay) in enumerate(repairs):
        S[m_csr + k] = ax
        T[m_csr + k] = nX + ay
        C[m_csr + k] = int(cost_fn(ax, ay))

    max_c = int(np.abs(C[:m_real]).max()) if m_real else 0
    if max_c > (2**62) // (3 * (n_nodes + 1)):
        raise OverflowError("cost magnitudes too large for exact pivoting")
    big_m = 1 + (n_nodes + 1) * max(max_c, 1)

    # artificial arc for node v has id m_real + v; direction by warm basis
    # or by node imbalance sign (strong feasibility)
    art_dir = np.zeros(n_nodes - 1, dtype=np.int8)
    art_dir[nX : nX + nY] = (lp.demands > 0).astype(np.int8)
    if isinstance(warm, Basis):
        art = (warm.arc_x[:root] == -1) & (warm.parent[:root] >= 0)
        art_dir[art] = warm.art_dir[:root][art]
    for v in range(n_nodes - 1):
        a = m_real + v
        if art_dir[v]:
            S[a], T[a] = root, v
        else:
            S[a], T[a] = v, root
        C[a] = big_m

    x = np.zeros(m_tot, dtype=np.int64)
    pi = np.zeros(n_nodes, dtype=np.int64)
    parent = np.empty(n_nodes, dtype=np.int64)
    edge = np.empty(n_nodes, dtype=np.int64)
    size = np.empty(n_nodes, dtype=np.int64)
    nxt = np.empty(n_nodes, dtype=np.int64)
    prv = np.empty(n_nodes, dtype=np.int64)
    last = np.empty(n_nodes, dtype=np.int64)

    warm_ok = False
    if isinstance(warm, Basis) and warm.parent.shape[0] == n_nodes:
        parent[:] = warm.parent
        parent[root] = -1
        pred = np.empty(n_nodes, dtype=np.int64)
        pred[root] = -1
        ok = True
        for v in range(n_nodes - 1):
            if parent[v] < 0:
                ok = False
                break
            pred[v] = arc_pos[v] if warm.arc_x[v] >= 0 else m_real + v
        if ok:
            # repaired arcs keep their stored tree position
            r = 0
            for v in range(n_nodes - 1):
                if warm.arc_x[v] >= 0 and arc_pos[v] < 0:
                    pred[v] = m_csr + r
                    r += 1
            b = np.zeros(n_nodes, dtype=np.int64)
            b[:nX] = lp.supplies
            b[nX : nX + nY] = -lp.demands
            edge[:] = pred
            edge[root] = -1
            status = _simplex.warm_tree_arrays(parent, root, pred, S, T, C,
                                               b, x, pi, size, nxt, prv, last)
            warm_ok = status == 0
    if not warm_ok:
        # cold start: every node hangs off the root by its artificial arc
        parent[:] = root
        parent[root] = -1
        edge[:root] = m_real + np.arange(n_nodes - 1)
        edge[root] = -1
        size[:] = 1
        size[root] = n_nodes
        nxt[root] = 0
        nxt[: root - 1] = np.arange(1, root)
        nxt[root - 1] = root
        prv[1:root] = np.arange(root - 1)
        prv[0] = root
        prv[root] = root - 1
        last[:] = np.arange(n_nodes)
        last[root] = root - 1
        x[:m_real] = 0
        art_dir_cold = np.zeros(n_nodes - 1, dtype=np.int8)
        art_dir_cold[nX : nX + nY] = (lp.demands > 0).astype(np.int8)
        if isinstance(warm, Basis):
            # directions may have been overridden; rebuild for cold rule
            for v in range(n_nodes - 1):
                a = m_real + v
                if art_dir_cold[v]:
                    S[a], T[a] = root, v
                else:
                    S[a], T[a] = v, root
            art_dir = art_dir_cold
        x[m_real : m_real + nX] = lp.supplies
        x[m_real + nX :] = lp.demands
        pi[:root] = np.where(art_dir == 1, -big_m, big_m)
        pi[root] = 0

    if pivot_block is None:
        pivot_block = max(1, math.isqrt(m_real) + (m_real > 0))
    bland_after = max(50, bland_factor * m_real)

    status, pivots, degen = _simplex.simplex_loop(
        S, T, C, x, pi, parent, edge, size, nxt, prv, last,
        m_real, int(pivot_block), int(bland_after), int(max_pivots))
    if status == _simplex.STATUS_PIVOT_LIMIT:
        raise RuntimeError("pivot limit reached without convergence")
    if status == _simplex.STATUS_UNBOUNDED:
        raise RuntimeError("unbounded restricted problem (invalid data)")
    if x[m_real:].any():
        raise TransportInfeasible("restricted problem infeasible")

    return _extract(lp, S, T, C, x, pi, parent, edge, nX, nY, m_csr, m_real,
                    repairs, pivots, degen)


def _extract(lp, S, T, C, x, pi, parent, edge, nX, nY, m_csr, m_real,
             repairs, pivots, degen) -> LocalSolution:
    n_nodes = nX + nY + 1
    root = n_nodes - 1
    pos = np.flatnonzero(x[:m_real] > 0)
    coupling = SparseCoupling.from_entries(nX, nY, S[pos], T[pos] - nX,
                                           x[pos], mass_scale=lp.mass_scale)
    alpha = pi[:nX].copy()
    beta = -pi[nX : nX + nY]
    duals = DualPotentials(alpha, beta)
    arc_x = np.full(n_nodes, -2, dtype=np.int64)
    arc_y = np.full(n_nodes, -2, dtype=np.int64)
    art_dir = np.zeros(n_nodes, dtype=np.int8)
    for v in range(n_nodes - 1):
        a = edge[v]
        if a >= m_real:
            arc_x[v] = -1
            art_dir[v] = 1 if S[a] == root else 0
        else:
            arc_x[v] = S[a]
            arc_y[v] = T[a] - nX
    basis = Basis(parent.copy(), arc_x, arc_y, art_dir, pi.copy())
    objective = int(sum(int(C[a]) * int(x[a]) for a in pos))
    return LocalSolution(coupling, duals, basis, objective, int(pivots),
                         int(degen), int(m_real), len(repairs))


def _solve_warm_dual(lp, warm: DualPotentials, pivot_block, bland_factor,
                     max_pivots) -> LocalSolution:
    """Rebase costs by feasible duals, then cold-start on the residuals."""
    nX, nY = lp.shape
    rows = _expand_rows(lp.indptr, lp.cols.shape[0])
    alpha = warm.alpha.astype(np.int64).copy()
    beta = warm.beta.astype(np.int64)
    if lp.cols.shape[0]:
        viol = alpha[rows] + beta[lp.cols] - lp.costs
        row_max = np.zeros(nX, dtype=np.int64)
        np.maximum.at(row_max, rows, viol)
        np.maximum(row_max, 0, out=row_max)
        alpha -= row_max
        rebased = lp.costs - alpha[rows] - beta[lp.cols]
    else:
        rebased = lp.costs
    sub = SparseTransportLP(lp.supplies, lp.demands, lp.indptr, lp.cols,
                            rebased, lp.mass_scale)
    sol = solve_local(sub, warm=None, pivot_block=pivot_block,
                      bland_factor=bland_factor, max_pivots=max_pivots)
    duals = DualPotentials(sol.duals.alpha + alpha, sol.duals.beta + beta)
    node_pi = np.concatenate([duals.alpha, -duals.beta, [0]]).astype(np.int64)
    basis = Basis(sol.basis.parent, sol.basis.arc_x, sol.basis.arc_y,
                  sol.basis.art_dir, node_pi)
    rows_sup = sol.coupling.row_indices()
    arc_costs = lp.costs[_find_arcs(lp.indptr, lp.cols, rows_sup,
                                    sol.coupling.cols)]
    objective = int(sum(int(c) * int(m)
                        for c, m in zip(arc_costs, sol.coupling.mass)))
    return LocalSolution(sol.coupling, duals, basis, objective, sol.pivots,
                         sol.degenerate_pivots, sol.n_arcs, sol.repaired)
