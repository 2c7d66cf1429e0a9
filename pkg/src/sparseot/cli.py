"""Command-line surface: generate, solve, verify, benchmark.

Exit codes: 0 success, 2 usage, 3 file I/O or format, 4 infeasible
problem data, 5 verification failure.
"""

from __future__ import annotations

import csv
import sys
from dataclasses import dataclass, field

import click
import numpy as np

from . import costs, driver, fileio, gen, verify
from .core import (DEFAULT_COST_SCALE, DEFAULT_MASS_SCALE, ProblemInstance)
from .netsolver import TransportInfeasible
from .shield import GridAxes, KNearest, parse_scheme

EXIT_IO = 3
EXIT_INFEASIBLE = 4
EXIT_VERIFY = 5


def _die(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _build_spec(cost, p, eta, lam, noise_seed):
    if cost == "sqeucl":
        if eta or lam:
            return costs.NoisySqEuclidean(eta=eta, lam=lam,
                                          noise_seed=noise_seed)
        return costs.SqEuclidean()
    if eta or lam:
        raise click.UsageError("--eta/--lambda apply to --cost sqeucl only")
    if cost == "peucl":
        return costs.PowerEuclidean(p)
    if cost == "sphere":
        return costs.SphereGeodesicSq()
    raise click.UsageError(f"unknown cost {cost}")


def _cost_options(f):
    for opt in reversed([
        click.option("--cost", type=click.Choice(["sqeucl", "peucl",
                                                  "sphere"]),
                     default="sqeucl", show_default=True,
                     help="Cost family."),
        click.option("--p", type=float, default=2.0, show_default=True,
                     help="Exponent for --cost peucl."),
        click.option("--eta", type=float, default=0.0,
                     help="Bounded-noise amplitude (sqeucl only)."),
        click.option("--lambda", "lam", type=float, default=0.0,
                     help="Lipschitz-field weight (sqeucl only)."),
        click.option("--noise-seed", type=int, default=0,
                     help="Seed of the pairwise noise term."),
    ]):
        f = opt(f)
    return f


def _load_measure(path: str):
    try:
        if path.endswith(".dgrid"):
            measure, shape = fileio.read_dgrid(path)
            return measure, shape
        return fileio.read_pts(path), None
    except (fileio.FormatError, OSError) as e:
        _die(EXIT_IO, f"{path}: {e}")


def _load_problem(mu_path, nu_path, spec, cost_scale):
    mu, shape_x = _load_measure(mu_path)
    nu, shape_y = _load_measure(nu_path)
    if isinstance(spec, costs.SphereGeodesicSq):
        for name, m in ((mu_path, mu), (nu_path, nu)):
            norms = np.linalg.norm(m.points, axis=1)
            if m.points.shape[1] != 3 or np.abs(norms - 1.0).max() > 1e-6:
                _die(EXIT_IO, f"{name}: sphere costs need unit 3-vectors")
    try:
        problem = ProblemInstance(mu, nu, spec, cost_scale=cost_scale)
    except ValueError as e:
        _die(EXIT_INFEASIBLE, str(e))
    grid_shape = shape_x if shape_x is not None and shape_x == shape_y \
        else None
    return problem, grid_shape


def _parse_candidates(text):
    try:
        return parse_scheme(text)
    except ValueError as e:
        raise click.UsageError(str(e))


def _parse_size(text):
    parts = text.lower().split("x")
    try:
        dims = [int(v) for v in parts]
    except ValueError:
        raise click.UsageError(f"bad --size value {text!r}")
    if any(v < 1 for v in dims):
        raise click.UsageError("--size entries must be positive")
    return tuple(dims)


@click.group()
def main():
    """Exact sparse solver for discrete optimal transport."""


@main.command("gen")
@click.option("--size", required=True,
              help="Grid shape like 32x32, or a point count for sphere.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--cost", type=click.Choice(["sqeucl", "sphere"]),
              default="sqeucl", show_default=True,
              help="sphere draws points on S2 instead of a grid.")
@click.option("--gaussians", type=int, default=3, show_default=True)
@click.option("--mask", type=click.Choice(["halfplane", "disc"]),
              default=None)
@click.option("--mass-scale", type=int, default=DEFAULT_MASS_SCALE,
              show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def cmd_gen(size, seed, cost, gaussians, mask, mass_scale, out):
    """Write a seeded random measure to a .dgrid or .pts file."""
    shape = _parse_size(size)
    try:
        if cost == "sphere":
            if len(shape) != 1:
                raise click.UsageError("sphere takes a point count, "
                                       "e.g. --size 500")
            measure = gen.gen_sphere_measure(shape[0], seed, bumps=gaussians,
                                             mass_scale=mass_scale)
            fileio.write_pts(out, measure)
        else:
            measure = gen.gen_grid_measure(shape, seed, gaussians=gaussians,
                                           mask=mask, mass_scale=mass_scale)
            fileio.write_dgrid(out, measure.masses, shape, mass_scale)
    except ValueError as e:
        raise click.UsageError(str(e))
    except OSError as e:
        _die(EXIT_IO, str(e))


@main.command("solve")
@click.argument("mu_path", type=click.Path(exists=False))
@click.argument("nu_path", type=click.Path(exists=False))
@_cost_options
@click.option("--shield", "shield_method",
              type=click.Choice(["auto", "grid", "tree"]), default="auto",
              show_default=True)
@click.option("--candidates", default="auto", show_default=True,
              help="axes, knn, or knn:<k>.")
@click.option("--depth", type=int, default=None,
              help="Hierarchy depth (default derived from the input).")
@click.option("--warm", type=click.Choice(["basis", "dual", "none"]),
              default="basis", show_default=True)
@click.option("--cost-scale", type=int, default=DEFAULT_COST_SCALE,
              show_default=True)
@click.option("--dense", is_flag=True,
              help="Solve the full product instead (oracle mode).")
@click.option("--certify", is_flag=True,
              help="Check the duals against every pair afterwards.")
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write the optimal coupling here (.cpl).")
@click.option("--report", "report_path", type=click.Path(dir_okay=False),
              default=None, help="Write the report JSON here (default "
              "stdout).")
@click.option("--no-timings", is_flag=True,
              help="Zero out wall-clock fields in the report.")
def cmd_solve(mu_path, nu_path, cost, p, eta, lam, noise_seed,
              shield_method, candidates, depth, warm, cost_scale, dense,
              certify, out, report_path, no_timings):
    """Solve the transport problem between two measure files."""
    spec = _build_spec(cost, p, eta, lam, noise_seed)
    problem, grid_shape = _load_problem(mu_path, nu_path, spec, cost_scale)
    cand = _parse_candidates(candidates)
    if dense:
        try:
            coupling, duals = verify.dense_solve(problem)
        except verify.DenseCapExceeded as e:
            raise click.UsageError(str(e))
        sup = coupling.row_indices()
        objective = int(sum(
            int(c) * int(m) for c, m in
            zip(verify.quantized_pairs(problem, sup, coupling.cols),
                coupling.mass)))
        report = driver.SolveReport(problem={
            "n_x": int(problem.mu.points.shape[0]),
            "n_y": int(problem.nu.points.shape[0]),
            "cost": costs.spec_to_dict(spec),
            "mass_scale": int(problem.mu.mass_scale),
            "cost_scale": int(cost_scale),
            "depth": 0,
            "shield": "dense",
            "candidates": "none",
            "warm": "none",
        }, final_objective=objective)
        if certify:
            report.certified = (verify.certificate_global(
                problem, coupling, duals) is not None)
        result = driver.SolveResult(coupling, duals, objective, report)
    else:
        try:
            result = driver.solve_multiscale(
                problem, depth=depth, shield_method=shield_method,
                candidates=cand, warm=warm, grid_shape=grid_shape,
                certify=certify)
        except TransportInfeasible as e:
            _die(EXIT_INFEASIBLE, str(e))
        except ValueError as e:
            raise click.UsageError(str(e))
    if out is not None:
        try:
            fileio.write_cpl(out, result.coupling)
        except OSError as e:
            _die(EXIT_IO, str(e))
    text = result.report.to_json(include_timings=not no_timings)
    if report_path is not None:
        try:
            with open(report_path, "w") as fh:
                fh.write(text + "\n")
        except OSError as e:
            _die(EXIT_IO, str(e))
    else:
        click.echo(text)
    if certify and not result.report.certified:
        _die(EXIT_VERIFY, "dual certificate failed the full scan")


@main.command("verify")
@click.argument("mu_path")
@click.argument("nu_path")
@click.argument("cpl_path")
@_cost_options
@click.option("--cost-scale", type=int, default=DEFAULT_COST_SCALE,
              show_default=True)
@click.option("--shield-check", is_flag=True,
              help="Also validate a shielding neighbourhood of the "
              "coupling (exhaustive; small problems).")
def cmd_verify(mu_path, nu_path, cpl_path, cost, p, eta, lam, noise_seed,
               cost_scale, shield_check):
    """Certify a coupling file: marginals, optimality, optionally shields.

    Recomputes dual potentials independently, so a passing run is a
    machine-checked proof of optimality for the stored coupling.
    """
    spec = _build_spec(cost, p, eta, lam, noise_seed)
    problem, grid_shape = _load_problem(mu_path, nu_path, spec, cost_scale)
    try:
        pi = fileio.read_cpl(cpl_path)
    except (fileio.FormatError, OSError) as e:
        _die(EXIT_IO, f"{cpl_path}: {e}")
    nX = problem.mu.points.shape[0]
    nY = problem.nu.points.shape[0]
    if (pi.n_rows, pi.n_cols) != (nX, nY):
        _die(EXIT_VERIFY, "coupling shape does not match the measures")
    if pi.mass_scale != problem.mu.mass_scale:
        _die(EXIT_VERIFY, "coupling mass scale does not match the measures")
    rm, cm = pi.marginals()
    if not (np.array_equal(rm, problem.mu.masses)
            and np.array_equal(cm, problem.nu.masses)):
        _die(EXIT_VERIFY, "marginals violated")
    result = driver.solve_multiscale(problem, grid_shape=grid_shape)
    detail: list = []
    if not verify.check_full_duals(problem, result.duals, detail):
        _die(EXIT_VERIFY, f"recomputed duals infeasible: {detail}")
    sup = pi.row_indices()
    cq = verify.quantized_pairs(problem, sup, pi.cols)
    gap = cq - result.duals.alpha[sup] - result.duals.beta[pi.cols]
    if (gap != 0).any():
        k = int(np.flatnonzero(gap)[0])
        _die(EXIT_VERIFY, f"coupling is not optimal: support pair "
             f"({int(sup[k])}, {int(pi.cols[k])}) is not tight")
    if shield_check:
        if nX * nY > 4_000_000:
            _die(EXIT_VERIFY, "--shield-check needs |X|*|Y| <= 4e6")
        nbh, _ = _fresh_shield(problem, pi, grid_shape)
        detail = []
        if not verify.check_shielding(problem, pi, nbh, detail=detail):
            _die(EXIT_VERIFY, f"shielding neighbourhood invalid: {detail}")
    objective = int(sum(int(c) * int(m) for c, m in zip(cq, pi.mass)))
    cert = verify.Certificate("globally_optimal",
                              verify.problem_hash(problem), objective)
    click.echo(cert.to_json())


def _fresh_shield(problem, pi, grid_shape):
    from .hierarchy import build_tree
    from .shield import Shielder, grid_level

    spec = problem.cost
    sphere = costs.family_code(spec)[0] == 2
    depth = driver.resolve_depth(problem, grid_shape)
    guard = driver.QUANT_GUARD_UNITS / problem.cost_scale
    gx = grid_level(problem.mu.points) if not sphere else None
    gy = grid_level(problem.nu.points) if not sphere else None
    use_grid = (costs.family_code(spec)[0] == 0 and gx is not None
                and gy is not None and (problem.mu.masses > 0).all())
    if use_grid:
        sh = Shielder(spec, problem.mu.points, problem.nu.points,
                      problem.mu.masses, GridAxes(), grid_x=gx, grid_y=gy,
                      include_noise=True, guard=guard)
    else:
        tree_y = build_tree(problem.nu.points, depth, sphere=sphere)
        sh = Shielder(spec, problem.mu.points, problem.nu.points,
                      problem.mu.masses, KNearest(), y_tree=tree_y,
                      level=0, include_noise=True, guard=guard)
    return sh(pi)


@dataclass
class BenchmarkConfig:
    """One benchmark sweep: a cost setup run over sizes x seeds x modes."""

    name: str
    sizes: list
    cost_family: str = "sqeucl"
    cost_params: dict = field(default_factory=dict)
    seeds: int = 3
    repetitions: int = 1
    modes: list = field(default_factory=lambda: [("sparse-grid", "basis")])

    def __post_init__(self):
        if not self.sizes:
            raise ValueError("sizes must be nonempty")
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")


def _presets(seeds: int) -> dict[str, list[BenchmarkConfig]]:
    return {
        "scaling": [BenchmarkConfig(
            "scaling", sizes=[(32, 32), (64, 64), (96, 96)], seeds=seeds,
            modes=[("sparse-grid", "basis"), ("dense", "none")])],
        "noise": [BenchmarkConfig(
            "noise", sizes=[(16, 16)],
            cost_params={"eta": e, "lambda": l}, seeds=seeds,
            modes=[("sparse-tree", "basis")])
            for e in (0.0, 5.0, 10.0, 15.0) for l in (0.0, 5.0, 10.0, 15.0)],
        "warm": [BenchmarkConfig(
            "warm", sizes=[(64, 64)], seeds=seeds,
            modes=[("sparse-grid", "basis"), ("sparse-grid", "dual"),
                   ("sparse-grid", "none")])],
    }


@main.command("bench")
@click.option("--preset", type=click.Choice(["scaling", "noise", "warm"]),
              required=True)
@click.option("--seeds", type=int, default=3, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def cmd_bench(preset, seeds, out):
    """Run a benchmark preset and write per-run metrics as CSV."""
    rows = []
    for cfg in _presets(seeds)[preset]:
        spec = _bench_spec(cfg)
        for size in cfg.sizes:
            for seed in range(cfg.seeds):
                mu = gen.gen_grid_measure(size, 2 * seed)
                nu = gen.gen_grid_measure(size, 2 * seed + 1)
                problem = ProblemInstance(mu, nu, spec)
                for mode, warm in cfg.modes:
                    for rep in range(cfg.repetitions):
                        row = _bench_run(cfg, problem, size, seed, rep,
                                         mode, warm)
                        if row is not None:
                            rows.append(row)
    fields = ["preset", "family", "eta", "lambda", "size", "seed", "rep",
              "mode", "warm", "n_x", "n_y", "final_objective",
              "iters_finest", "max_N", "psi_hat_calls", "pivots",
              "t_total_ms"]
    try:
        with open(out, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=fields)
            w.writeheader()
            w.writerows(rows)
    except OSError as e:
        _die(EXIT_IO, str(e))
    click.echo(f"wrote {len(rows)} rows to {out}")


def _bench_spec(cfg: BenchmarkConfig):
    params = cfg.cost_params
    if params.get("eta") or params.get("lambda"):
        return costs.NoisySqEuclidean(eta=params.get("eta", 0.0),
                                      lam=params.get("lambda", 0.0))
    return costs.SqEuclidean()


def _bench_run(cfg, problem, size, seed, rep, mode, warm):
    import time

    t0 = time.perf_counter()
    if mode == "dense":
        try:
            coupling, _duals = verify.dense_solve(problem)
        except verify.DenseCapExceeded:
            return None
        sup = coupling.row_indices()
        objective = int(sum(
            int(c) * int(m) for c, m in
            zip(verify.quantized_pairs(problem, sup, coupling.cols),
                coupling.mass)))
        iters, max_n, calls, pivots = 1, coupling.n_rows * coupling.n_cols, \
            0, 0
    else:
        method = "grid" if mode == "sparse-grid" else "tree"
        result = driver.solve_multiscale(problem, shield_method=method,
                                         warm=warm, grid_shape=size)
        objective = result.objective
        levels = result.report.levels
        iters = levels[-1].iters
        max_n = max(max(lv.N_sizes) for lv in levels)
        calls = sum(lv.psi_hat_calls for lv in levels)
        pivots = sum(sum(lv.pivots) for lv in levels)
    t_total = (time.perf_counter() - t0) * 1e3
    return {
        "preset": cfg.name, "family": cfg.cost_family,
        "eta": cfg.cost_params.get("eta", 0.0),
        "lambda": cfg.cost_params.get("lambda", 0.0),
        "size": "x".join(str(s) for s in size), "seed": seed, "rep": rep,
        "mode": mode, "warm": warm,
        "n_x": problem.mu.points.shape[0],
        "n_y": problem.nu.points.shape[0],
        "final_objective": objective, "iters_finest": iters,
        "max_N": max_n, "psi_hat_calls": calls, "pivots": pivots,
        "t_total_ms": round(t_total, 3),
    }


if __name__ == "__main__":
    main()
