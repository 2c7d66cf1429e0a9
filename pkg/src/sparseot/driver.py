"""Solve drivers: sparse fixed-point iteration and coarse-to-fine scheme.

``solve_sparse`` alternates exact restricted solves with shielding
neighbourhood rebuilds until the objective stops improving; the last
restricted solve then carries globally valid dual potentials.
``solve_multiscale`` runs that iteration per layer of a hierarchical
partition, propagating each optimal support down one layer as the next
initial arc set.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import costs, verify
from .core import (DEFAULT_MASS_SCALE, DualPotentials, Neighbourhood,
                   ProblemInstance, SparseCoupling, quantize_cost)
from .hierarchy import (HierarchicalPartition, build_tree, coarsen_measure,
                        default_depth_cloud, default_depth_grid)
from .netsolver import SparseTransportLP, solve_local
from .shield import GridAxes, KNearest, Shielder, grid_level

QUANT_GUARD_UNITS = 3


@dataclass
class LevelTrace:
    k: int
    iters: int
    objectives: list[int]
    N_sizes: list[int]
    psi_hat_calls: int
    t_solve_ms: float
    t_shield_ms: float
    pivots: list[int] = field(default_factory=list)

    def to_dict(self, include_timings: bool = True) -> dict:
        return {
            "k": self.k,
            "iters": self.iters,
            "objectives": [int(v) for v in self.objectives],
            "N_sizes": [int(v) for v in self.N_sizes],
            "pivots": [int(v) for v in self.pivots],
            "psi_hat_calls": int(self.psi_hat_calls),
            "t_solve_ms": self.t_solve_ms if include_timings else 0.0,
            "t_shield_ms": self.t_shield_ms if include_timings else 0.0,
        }


@dataclass
class SolveReport:
    problem: dict
    levels: list[LevelTrace] = field(default_factory=list)
    final_objective: int = 0
    certified: bool | None = None

    def to_dict(self, include_timings: bool = True) -> dict:
        return {
            "problem": self.problem,
            "levels": [lv.to_dict(include_timings) for lv in self.levels],
            "final_objective": int(self.final_objective),
            "certified": self.certified,
        }

    def to_json(self, include_timings: bool = True) -> str:
        return json.dumps(self.to_dict(include_timings), sort_keys=True,
                          separators=(",", ":"))


@dataclass
class SolveResult:
    coupling: SparseCoupling
    duals: DualPotentials
    objective: int
    report: SolveReport


def solve_sparse(supplies, demands, nbh0: Neighbourhood, arc_cost_fn,
                 shielder: Shielder, *, warm: str = "basis",
                 watchdog: int = 1000, scalar_cost_fn=None,
                 on_iteration=None, mass_scale: int = DEFAULT_MASS_SCALE):
    """Iterate restricted solves over shielding neighbourhoods.

    Stops once two consecutive solves agree on the objective; the
    earlier of the two couplings then already was optimal on a
    neighbourhood shielding it, which makes the final duals globally
    feasible.  Returns the last solution and a :class:`LevelTrace`.
    """
    if warm not in ("basis", "dual", "none"):
        raise ValueError("warm must be basis, dual, or none")
    trace = LevelTrace(shielder.level, 0, [], [], 0, 0.0, 0.0)
    nbh = nbh0
    warm_state = None
    prev_obj = None
    sol = None
    for _ in range(watchdog):
        rows = np.repeat(np.arange(nbh.n_rows, dtype=np.int64),
                         np.diff(nbh.indptr))
        arc_costs = arc_cost_fn(rows, nbh.cols)
        lp = SparseTransportLP(supplies, demands, nbh.indptr, nbh.cols,
                               arc_costs, mass_scale)
        t0 = time.perf_counter()
        sol = solve_local(lp, warm=warm_state, cost_fn=scalar_cost_fn)
        trace.t_solve_ms += (time.perf_counter() - t0) * 1e3
        trace.iters += 1
        trace.objectives.append(sol.objective)
        trace.N_sizes.append(nbh.nnz)
        trace.pivots.append(sol.pivots)
        if on_iteration is not None:
            on_iteration(trace.iters, sol, nbh)
        if prev_obj is not None:
            if sol.objective > prev_obj:
                raise AssertionError("objective increased on a superset of "
                                     "the previous support")
            if sol.objective == prev_obj:
                return sol, trace
        t0 = time.perf_counter()
        nbh, st = shielder(sol.coupling)
        trace.t_shield_ms += (time.perf_counter() - t0) * 1e3
        trace.psi_hat_calls += st.bound_calls
        prev_obj = sol.objective
        if warm == "basis":
            warm_state = sol.basis
        elif warm == "dual":
            warm_state = sol.duals
    raise RuntimeError(f"no fixed point within {watchdog} iterations")


def _refine_support(pi: SparseCoupling, tree_x: HierarchicalPartition,
                    tree_y: HierarchicalPartition, k: int) -> Neighbourhood:
    """Children products of a layer-(k+1) support, as layer-k arc set."""
    rows_out = []
    cols_out = []
    sup_rows = pi.row_indices()
    for cx, cy in zip(sup_rows, pi.cols):
        chx = tree_x.children_local(k + 1, int(cx))
        chy = tree_y.children_local(k + 1, int(cy))
        rows_out.append(np.repeat(chx, chy.shape[0]))
        cols_out.append(np.tile(chy, chx.shape[0]))
    n_rows = tree_x.n_cells_at(k)
    n_cols = tree_y.n_cells_at(k)
    return Neighbourhood.from_pairs(n_rows, n_cols,
                                    np.concatenate(rows_out),
                                    np.concatenate(cols_out))


def _level_cost_fns(spec, xp, yp, leaf: bool, cost_scale: int):
    def arc_costs(rows, cols):
        c = costs.cost_for_pairs(spec, xp, yp, rows, cols,
                                 include_noise=leaf)
        return quantize_cost(c, cost_scale)

    def scalar(i, j):
        ix, iy = (int(i), int(j)) if leaf else (-1, -1)
        c = costs.cost(spec, xp[i], yp[j], ix=ix, iy=iy)
        return int(quantize_cost(c, cost_scale))

    return arc_costs, scalar


def resolve_depth(problem: ProblemInstance, grid_shape=None) -> int:
    if grid_shape is not None:
        return default_depth_grid(grid_shape)
    n = max(problem.mu.points.shape[0], problem.nu.points.shape[0])
    return default_depth_cloud(n, problem.mu.points.shape[1])


def solve_multiscale(problem: ProblemInstance, *, depth: int | None = None,
                     shield_method: str = "auto", candidates=None,
                     warm: str = "basis", grid_shape=None,
                     watchdog: int = 1000, certify: bool = False,
                     on_level=None, on_iteration=None) -> SolveResult:
    """Coarse-to-fine solve of a transport problem to exact optimality.

    ``shield_method`` is "grid" (lattice rectangles, needs axis
    candidates and fully occupied lattices on both sides), "tree"
    (hierarchical search), or "auto" (grid when both sides are lattices
    and no candidate scheme other than axes was asked for).
    """
    spec = problem.cost
    cost_scale = problem.cost_scale
    sphere = costs.family_code(spec)[0] == 2
    if depth is None:
        depth = resolve_depth(problem, grid_shape)
    tree_x = build_tree(problem.mu.points, depth, sphere=sphere)
    tree_y = build_tree(problem.nu.points, depth, sphere=sphere)
    ms_x = coarsen_measure(problem.mu, tree_x)
    ms_y = coarsen_measure(problem.nu, tree_y)

    if shield_method == "auto":
        if isinstance(candidates, KNearest):
            shield_method = "tree"
        else:
            # lattice rectangles rely on the axis-separable predicate of
            # squared-Euclidean geometry
            lattice = (costs.family_code(spec)[0] == 0
                       and grid_level(problem.mu.points) is not None
                       and grid_level(problem.nu.points) is not None)
            shield_method = "grid" if lattice else "tree"
    if candidates is None:
        candidates = GridAxes() if shield_method == "grid" else KNearest()
    if shield_method == "grid" and not isinstance(candidates, GridAxes):
        raise ValueError("grid shielding requires axis candidates")

    guard = QUANT_GUARD_UNITS / cost_scale
    report = SolveReport(problem={
        "n_x": int(problem.mu.points.shape[0]),
        "n_y": int(problem.nu.points.shape[0]),
        "cost": costs.spec_to_dict(spec),
        "mass_scale": int(problem.mu.mass_scale),
        "cost_scale": int(cost_scale),
        "depth": int(depth),
        "shield": shield_method,
        "candidates": ("axes" if isinstance(candidates, GridAxes)
                       else f"knn:{candidates.resolve(problem.mu.points.shape[1])}"),
        "warm": warm,
    })

    # top layer: a single cell per side, solved densely (one arc)
    xp = tree_x.level_points(depth)
    yp = tree_y.level_points(depth)
    arc_fn, _ = _level_cost_fns(spec, xp, yp, depth == 0, cost_scale)
    top = Neighbourhood.full(xp.shape[0], yp.shape[0])
    rows = np.repeat(np.arange(xp.shape[0], dtype=np.int64),
                     np.diff(top.indptr))
    lp = SparseTransportLP(ms_x.masses[depth], ms_y.masses[depth],
                           top.indptr, top.cols, arc_fn(rows, top.cols),
                           problem.mu.mass_scale)
    t0 = time.perf_counter()
    sol = solve_local(lp)
    report.levels.append(LevelTrace(depth, 1, [sol.objective], [top.nnz],
                                    0, (time.perf_counter() - t0) * 1e3,
                                    0.0, [sol.pivots]))
    if on_level is not None:
        on_level(depth, sol, report.levels[-1])

    for k in range(depth - 1, -1, -1):
        xp = tree_x.level_points(k)
        yp = tree_y.level_points(k)
        leaf = k == 0
        arc_fn, scalar_fn = _level_cost_fns(spec, xp, yp, leaf, cost_scale)
        nbh0 = _refine_support(sol.coupling, tree_x, tree_y, k)
        gx = gy = None
        if shield_method == "grid":
            gx = grid_level(xp)
            gy = grid_level(yp)
            if gx is None or gy is None:
                raise ValueError("grid shielding needs lattice layers; "
                                 "use the tree search for this input")
        shielder = Shielder(spec, xp, yp, ms_x.masses[k], candidates,
                            y_tree=None if shield_method == "grid" else tree_y,
                            level=k, grid_x=gx, grid_y=gy,
                            include_noise=leaf, guard=guard)
        level_cb = None
        if on_iteration is not None:
            def level_cb(it, s, nbh, _k=k):
                on_iteration(_k, it, s, nbh)
        sol, trace = solve_sparse(ms_x.masses[k], ms_y.masses[k], nbh0,
                                  arc_fn, shielder, warm=warm,
                                  watchdog=watchdog,
                                  scalar_cost_fn=scalar_fn,
                                  on_iteration=level_cb,
                                  mass_scale=problem.mu.mass_scale)
        report.levels.append(trace)
        if on_level is not None:
            on_level(k, sol, trace)

    report.final_objective = sol.objective
    if certify:
        report.certified = (verify.certificate_global(
            problem, sol.coupling, sol.duals) is not None)
    return SolveResult(sol.coupling, sol.duals, sol.objective, report)
