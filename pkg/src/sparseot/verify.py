"""Executable optimality and shielding oracles.

Everything here re-derives properties from first principles: a dense
reference solve, dual-feasibility scans, exhaustive shielding-validity
checks, and explicit short-cut path construction.  Certification
comparisons run on quantized integer costs so results are
bit-reproducible.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from . import costs
from .core import (DualPotentials, Neighbourhood, ProblemInstance,
                   SparseCoupling, quantize_cost)
from .netsolver import SparseTransportLP, solve_local

DENSE_ARC_CAP = 10**7


class DenseCapExceeded(RuntimeError):
    """The full product would exceed the configured arc cap."""


class ShortcutError(RuntimeError):
    """No valid short-cut path exists (invalid neighbourhood)."""


@dataclass
class Certificate:
    kind: str
    problem_hash: str
    objective: int
    witness: dict | None = None

    def to_json(self) -> str:
        out = {"kind": self.kind, "problem": self.problem_hash,
               "objective": int(self.objective)}
        if self.witness is not None:
            out["witness"] = self.witness
        return json.dumps(out, sort_keys=True, separators=(",", ":"))


@dataclass
class RegularityDiagnostics:
    measured_L: float
    measured_D: float
    measured_q: float


def problem_hash(problem: ProblemInstance) -> str:
    h = hashlib.sha256()
    h.update(problem.mu.points.tobytes())
    h.update(problem.mu.masses.tobytes())
    h.update(problem.nu.points.tobytes())
    h.update(problem.nu.masses.tobytes())
    h.update(json.dumps(costs.spec_to_dict(problem.cost),
                        sort_keys=True).encode())
    h.update(str(problem.mu.mass_scale).encode())
    h.update(str(problem.cost_scale).encode())
    return h.hexdigest()[:16]


def quantized_block(problem: ProblemInstance, rows=None) -> np.ndarray:
    """Quantized cost block for the given source rows (default: all)."""
    X = problem.mu.points if rows is None else problem.mu.points[rows]
    xi = None if rows is None else np.asarray(rows)
    c = costs.pairwise_cost(problem.cost, X, problem.nu.points, x_idx=xi)
    return quantize_cost(c, problem.cost_scale)


def quantized_pairs(problem: ProblemInstance, rows, cols) -> np.ndarray:
    c = costs.cost_for_pairs(problem.cost, problem.mu.points,
                             problem.nu.points, rows, cols)
    return quantize_cost(c, problem.cost_scale)


def dense_solve(problem: ProblemInstance, arc_cap: int = DENSE_ARC_CAP):
    """Exact optimum over the full product arc set (the oracle)."""
    nX = problem.mu.points.shape[0]
    nY = problem.nu.points.shape[0]
    if nX * nY > arc_cap:
        raise DenseCapExceeded(f"{nX}x{nY} exceeds the {arc_cap} arc cap")
    indptr = np.arange(0, nX * nY + 1, nY, dtype=np.int64)
    cols = np.tile(np.arange(nY, dtype=np.int64), nX)
    arc_costs = quantized_block(problem).ravel()
    lp = SparseTransportLP(problem.mu.masses, problem.nu.masses, indptr,
                           cols, arc_costs, problem.mu.mass_scale)
    sol = solve_local(lp)
    return sol.coupling, sol.duals


def check_local_duals(problem: ProblemInstance, nbh: Neighbourhood,
                      pi: SparseCoupling, duals: DualPotentials,
                      detail: list | None = None) -> bool:
    """Dual feasibility on the arc set plus slackness on the support."""
    if not nbh.contains_support(pi):
        if detail is not None:
            detail.append({"reason": "support outside neighbourhood"})
        return False
    rows = np.repeat(np.arange(nbh.n_rows, dtype=np.int64),
                     np.diff(nbh.indptr))
    c = quantized_pairs(problem, rows, nbh.cols)
    slack = c - duals.alpha[rows] - duals.beta[nbh.cols]
    bad = np.flatnonzero(slack < 0)
    if bad.size:
        if detail is not None:
            k = int(bad[0])
            detail.append({"reason": "dual constraint violated",
                           "x": int(rows[k]), "y": int(nbh.cols[k]),
                           "violation": int(-slack[k])})
        return False
    sup_rows = pi.row_indices()
    cs = quantized_pairs(problem, sup_rows, pi.cols)
    gap = cs - duals.alpha[sup_rows] - duals.beta[pi.cols]
    bad = np.flatnonzero(gap != 0)
    if bad.size:
        if detail is not None:
            k = int(bad[0])
            detail.append({"reason": "complementary slackness violated",
                           "x": int(sup_rows[k]), "y": int(pi.cols[k]),
                           "gap": int(gap[k])})
        return False
    return True


def check_full_duals(problem: ProblemInstance, duals: DualPotentials,
                     detail: list | None = None,
                     chunk: int = 256) -> bool:
    """Dual feasibility over every pair, scanned in row chunks."""
    nX = problem.mu.points.shape[0]
    for lo in range(0, nX, chunk):
        hi = min(lo + chunk, nX)
        rows = np.arange(lo, hi)
        c = quantized_block(problem, rows)
        slack = c - duals.alpha[rows, None] - duals.beta[None, :]
        if (slack < 0).any():
            if detail is not None:
                i, j = np.unravel_index(int(np.argmin(slack)), slack.shape)
                detail.append({"reason": "dual constraint violated",
                               "x": int(rows[i]), "y": int(j),
                               "violation": int(-slack[i, j])})
            return False
    return True


def check_shielding(problem: ProblemInstance, pi: SparseCoupling,
                    nbh: Neighbourhood, slack_fn=None,
                    detail: list | None = None) -> bool:
    """Exhaustive shielding validity of an arc set for a coupling.

    For every pair outside the arc set there must be a support pair
    (x_s, y_s) with (x_A, y_s) inside it whose shielding inequality
    holds strictly on the true (float) cost, beyond ``slack_fn(xA, xs)``
    if given.
    """
    if not nbh.contains_support(pi):
        if detail is not None:
            detail.append({"reason": "support outside neighbourhood"})
        return False
    spec = problem.cost
    X, Y = problem.mu.points, problem.nu.points
    nX, nY = X.shape[0], Y.shape[0]
    C = costs.pairwise_cost(spec, X, Y)
    sup_rows = pi.row_indices()
    sup_cols = pi.cols
    for a in range(nX):
        ncols = nbh.row(a)
        inside = np.zeros(nY, dtype=bool)
        inside[ncols] = True
        outside = np.flatnonzero(~inside)
        if outside.size == 0:
            continue
        usable = inside[sup_cols] & (sup_rows != a)
        cand = np.flatnonzero(usable)
        if cand.size == 0:
            if detail is not None:
                detail.append({"reason": "no usable support pair", "x": a,
                               "y": int(outside[0])})
            return False
        xs = sup_rows[cand]
        ys = sup_cols[cand]
        if slack_fn is None:
            slack = np.zeros(cand.size)
        else:
            slack = np.array([slack_fn(a, int(s)) for s in xs])
        # psi(a, xs, y) = C[a, y] - C[xs, y]; shields iff
        # psi(yB) > psi(ys) + slack
        lhs = C[a, outside][None, :] - C[xs][:, outside]
        rhs = (C[a, ys] - C[xs, ys] + slack)[:, None]
        covered = (lhs > rhs).any(axis=0)
        if not covered.all():
            if detail is not None:
                j = int(outside[int(np.flatnonzero(~covered)[0])])
                detail.append({"reason": "unshielded pair", "x": a, "y": j})
            return False
    return True


def build_shortcut(problem: ProblemInstance, pi: SparseCoupling,
                   nbh: Neighbourhood, pair) -> list[tuple[int, int]]:
    """Chain of support pairs shielding a pair outside the arc set.

    Follows the shielding relation from (x_1, y_B) until a link
    (x_n, y_B) lies inside the arc set, choosing at each step the
    nearest shielding support point (ties: lowest index).  Validates the
    telescoped inequality in integer units before returning.
    """
    x1, yB = int(pair[0]), int(pair[1])
    if nbh.contains(x1, yB):
        raise ShortcutError("pair inside N")
    X, Y = problem.mu.points, problem.nu.points
    sup_rows = pi.row_indices()
    sup_cols = pi.cols
    cB = quantized_pairs(problem, sup_rows, np.full_like(sup_rows, yB))
    cS = quantized_pairs(problem, sup_rows, sup_cols)
    chain: list[tuple[int, int]] = []
    visited = set()
    xc = x1
    for _ in range(pi.n_rows + 1):
        if nbh.contains(xc, yB):
            return chain
        ncols = nbh.row(xc)
        inside = np.zeros(pi.n_cols, dtype=bool)
        inside[ncols] = True
        cA_B = int(quantized_pairs(problem, [xc], [yB])[0])
        cA_s = quantized_pairs(problem, np.full_like(sup_rows, xc), sup_cols)
        ok = inside[sup_cols] & (sup_rows != xc)
        # integer-strict shielding of (xc, yB) by (xs, ys)
        ok &= (cA_B - cB) > (cA_s - cS)
        cand = np.flatnonzero(ok)
        if cand.size == 0:
            raise ShortcutError(f"no shielding support pair for "
                                f"({xc}, {yB})")
        d = np.linalg.norm(X[sup_rows[cand]] - X[xc], axis=1)
        best = cand[int(np.argmin(d))]
        step = (int(sup_rows[best]), int(sup_cols[best]))
        if step in visited:
            raise ShortcutError(f"cycle at support pair {step}")
        visited.add(step)
        chain.append(step)
        xc = step[0]
    raise ShortcutError("path exceeded the number of source points")


def shortcut_gap(problem: ProblemInstance, pair, chain) -> int:
    """Integer slack of the telescoped short-cut inequality (> 0 valid).

    The inequality chains one shielding step per link: replacing the
    outside pair by the first link and shifting every chain assignment
    one link forward costs strictly less.
    """
    x1, yB = int(pair[0]), int(pair[1])
    xs = [x1] + [c[0] for c in chain]
    ys = [None] + [c[1] for c in chain]
    n = len(chain)
    total = 0
    for i in range(n):
        # step i: (xs[i+1], ys[i+1]) shields xs[i] from yB
        a, b = xs[i], xs[i + 1]
        t = ys[i + 1]
        lhs = int(quantized_pairs(problem, [a], [yB])[0]) - \
            int(quantized_pairs(problem, [b], [yB])[0])
        rhs = int(quantized_pairs(problem, [a], [t])[0]) - \
            int(quantized_pairs(problem, [b], [t])[0])
        total += lhs - rhs
    return total


def measure_regularity(problem: ProblemInstance, pi: SparseCoupling,
                       cand_indptr: np.ndarray, cand_xs: np.ndarray,
                       max_pairs: int = 10**5,
                       seed: int = 0) -> RegularityDiagnostics:
    """Diagnostic constants of a coupling and its candidate scheme.

    Lipschitz ratio of the target map over sampled point pairs, the
    largest candidate distance, and the worst angular coverage of any
    candidate set (exact in 2-d, sampled directions otherwise).  Purely
    informational.
    """
    from .shield import target_map

    X = problem.mu.points
    Y = problem.nu.points
    t = target_map(pi)
    rows = np.flatnonzero(t >= 0)
    rng = np.random.default_rng(np.random.Philox(seed))
    L = 0.0
    if rows.size >= 2:
        m = min(max_pairs, rows.size * (rows.size - 1) // 2)
        a = rows[rng.integers(0, rows.size, size=m)]
        b = rows[rng.integers(0, rows.size, size=m)]
        keep = a != b
        a, b = a[keep], b[keep]
        dx = np.linalg.norm(X[a] - X[b], axis=1)
        dt = np.linalg.norm(Y[t[a]] - Y[t[b]], axis=1)
        pos = dx > 0
        if pos.any():
            L = float((dt[pos] / dx[pos]).max())
    D = 0.0
    q = 1.0
    measured = False
    n, dim = X.shape
    probe = _sphere_probe(dim)
    for r in range(n):
        cs = cand_xs[cand_indptr[r] : cand_indptr[r + 1]]
        if cs.size == 0:
            continue
        d = X[cs] - X[r]
        norms = np.linalg.norm(d, axis=1)
        D = max(D, float(norms.max()))
        ok = norms > 0
        if not ok.any():
            continue
        measured = True
        u = d[ok] / norms[ok, None]
        if dim == 2:
            ang = np.sort(np.arctan2(u[:, 1], u[:, 0]))
            gaps = np.diff(np.concatenate([ang, [ang[0] + 2 * np.pi]]))
            q = min(q, math.cos(float(gaps.max()) / 2.0))
        else:
            cosmax = (probe @ u.T).max(axis=1)
            q = min(q, float(cosmax.min()))
    if not measured:
        q = -1.0
    return RegularityDiagnostics(L, D, q)


def _sphere_probe(dim: int, count: int = 512) -> np.ndarray:
    """Deterministic roughly uniform directions (Fibonacci for 3-d)."""
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        a = np.linspace(0.0, 2 * np.pi, count, endpoint=False)
        return np.stack([np.cos(a), np.sin(a)], axis=1)
    i = np.arange(count) + 0.5
    phi = np.arccos(1 - 2 * i / count)
    theta = np.pi * (1 + 5**0.5) * i
    pts = np.stack([np.sin(phi) * np.cos(theta),
                    np.sin(phi) * np.sin(theta), np.cos(phi)], axis=1)
    if dim == 3:
        return pts
    rng = np.random.default_rng(np.random.Philox(1))
    v = rng.normal(size=(count, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def certificate_global(problem: ProblemInstance, pi: SparseCoupling,
                       duals: DualPotentials,
                       detail: list | None = None) -> Certificate | None:
    """Full optimality certificate, or None with the failure reason."""
    rm, cm = pi.marginals()
    if not (np.array_equal(rm, problem.mu.masses)
            and np.array_equal(cm, problem.nu.masses)):
        if detail is not None:
            detail.append({"reason": "marginals do not match"})
        return None
    nbh = Neighbourhood.from_pairs(pi.n_rows, pi.n_cols, pi.row_indices(),
                                   pi.cols)
    if not check_local_duals(problem, nbh, pi, duals, detail):
        return None
    if not check_full_duals(problem, duals, detail):
        return None
    sup_rows = pi.row_indices()
    obj = int(sum(int(c) * int(m) for c, m in
                  zip(quantized_pairs(problem, sup_rows, pi.cols),
                      pi.mass)))
    return Certificate("globally_optimal", problem_hash(problem), obj)
