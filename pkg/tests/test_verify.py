import json

import numpy as np
import pytest

from helpers import dense_objective, grid_problem
from sparseot import driver, fileio, verify
from sparseot.core import (DiscreteMeasure, DualPotentials, Neighbourhood,
                           ProblemInstance, SparseCoupling)
from sparseot.costs import NoisySqEuclidean, SqEuclidean
from sparseot.shield import (GridAxes, Shielder, axis_candidates,
                             grid_level)
from sparseot.verify import (Certificate, DenseCapExceeded, ShortcutError,
                             build_shortcut, certificate_global,
                             check_full_duals, check_local_duals,
                             check_shielding, dense_solve,
                             measure_regularity, problem_hash,
                             shortcut_gap)


def solved_grid(shape=(8, 8), seed=0, spec=None):
    problem = grid_problem(shape, seed, spec=spec)
    res = driver.solve_multiscale(problem, grid_shape=shape)
    return problem, res


def test_problem_hash_sensitivity():
    p1 = grid_problem((4, 4), 0)
    p2 = grid_problem((4, 4), 0)
    assert problem_hash(p1) == problem_hash(p2)
    assert len(problem_hash(p1)) == 16
    p3 = grid_problem((4, 4), 1)
    assert problem_hash(p1) != problem_hash(p3)
    p4 = ProblemInstance(p1.mu, p1.nu, NoisySqEuclidean(eta=1.0))
    assert problem_hash(p1) != problem_hash(p4)
    p5 = ProblemInstance(p1.mu, p1.nu, SqEuclidean(), cost_scale=10**6)
    assert problem_hash(p1) != problem_hash(p5)


def test_dense_solve_respects_cap():
    problem = grid_problem((8, 8), 1)
    with pytest.raises(DenseCapExceeded):
        dense_solve(problem, arc_cap=100)


def test_dense_solve_is_optimal():
    problem = grid_problem((6, 6), 2)
    pi, duals = dense_solve(problem)
    rm, cm = pi.marginals()
    assert np.array_equal(rm, problem.mu.masses)
    assert np.array_equal(cm, problem.nu.masses)
    assert check_full_duals(problem, duals)


def test_check_local_duals_witnesses():
    problem, res = solved_grid(seed=3)
    nbh = res.coupling.support()
    assert check_local_duals(problem, nbh, res.coupling, res.duals)
    bad = DualPotentials(res.duals.alpha + 1, res.duals.beta.copy(),
                         res.duals.cost_scale)
    detail = []
    assert not check_local_duals(problem, nbh, res.coupling, bad,
                                 detail=detail)
    assert detail
    # support outside the arc set is refused outright
    empty = Neighbourhood.from_pairs(len(problem.mu), len(problem.nu),
                                     [0], [0])
    detail2 = []
    assert not check_local_duals(problem, empty, res.coupling, res.duals,
                                 detail=detail2)


def test_check_full_duals_finds_single_violation():
    problem, res = solved_grid(seed=4)
    assert check_full_duals(problem, res.duals)
    bumped = res.duals.alpha.copy()
    bumped[17] += 10**12
    detail = []
    assert not check_full_duals(
        problem, DualPotentials(bumped, res.duals.beta, res.duals.cost_scale),
        detail=detail)
    assert detail[0]["x"] == 17


def emitted_shield(problem, res):
    g = grid_level(problem.mu.points)
    sh = Shielder(problem.cost, problem.mu.points, problem.nu.points,
                  problem.mu.masses, GridAxes(), grid_x=g, grid_y=g,
                  guard=driver.QUANT_GUARD_UNITS / problem.cost_scale)
    return sh(res.coupling)[0]


def test_check_shielding_slack_fn_tightens():
    problem, res = solved_grid(seed=5)
    nbh = emitted_shield(problem, res)
    assert check_shielding(problem, res.coupling, nbh)
    # demanding a huge margin everywhere must fail
    assert not check_shielding(problem, res.coupling, nbh,
                               slack_fn=lambda a, s: 1e9)


def test_build_shortcut_inside_pair_raises():
    problem, res = solved_grid(seed=6)
    nbh = emitted_shield(problem, res)
    rows = np.repeat(np.arange(nbh.n_rows), np.diff(nbh.indptr))
    inside = (int(rows[0]), int(nbh.cols[0]))
    with pytest.raises(ShortcutError, match="inside"):
        build_shortcut(problem, res.coupling, nbh, inside)


def test_build_shortcut_chains_are_valid():
    problem, res = solved_grid(seed=7)
    nbh = emitted_shield(problem, res)
    n_rows, n_cols = nbh.n_rows, nbh.n_cols
    rng = np.random.default_rng(8)
    checked = 0
    while checked < 25:
        a = int(rng.integers(0, n_rows))
        b = int(rng.integers(0, n_cols))
        if nbh.contains(a, b):
            continue
        chain = build_shortcut(problem, res.coupling, nbh, (a, b))
        assert chain, "outside pair must need at least one link"
        assert len(set(chain)) == len(chain)
        # the walk ends inside the arc set
        assert nbh.contains(chain[-1][0], b)
        gap = shortcut_gap(problem, (a, b), chain)
        assert isinstance(gap, int) and gap > 0
        # the chained constraints imply the skipped dual constraint
        c_ab = int(verify.quantized_pairs(problem, [a], [b])[0])
        lhs = int(res.duals.alpha[a]) + int(res.duals.beta[b])
        assert lhs <= c_ab
        checked += 1


def test_build_shortcut_prefers_nearest_support_row():
    # collinear sources at 0, 1, 5, 9; identity plan; both (1,1) and
    # (2,2) shield the outside pair (0,3), and the nearer row wins
    line = np.array([[0.0, 0.0], [1.0, 0.0], [5.0, 0.0], [9.0, 0.0]])
    mu = DiscreteMeasure(line, np.array([1, 1, 1, 1]), 4)
    nu = DiscreteMeasure(line.copy(), np.array([1, 1, 1, 1]), 4)
    problem = ProblemInstance(mu, nu, SqEuclidean(), cost_scale=1000)
    pi = SparseCoupling.from_entries(4, 4, [0, 1, 2, 3], [0, 1, 2, 3],
                                     [1, 1, 1, 1], mass_scale=4)
    nbh = Neighbourhood.from_pairs(
        4, 4,
        [0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 3, 3],
        [0, 1, 2, 0, 1, 2, 3, 1, 2, 3, 2, 3])
    chain = build_shortcut(problem, pi, nbh, (0, 3))
    assert chain == [(1, 1)]
    assert shortcut_gap(problem, (0, 3), chain) == 16 * 1000


def test_measure_regularity_grid_interior():
    problem, res = solved_grid((5, 5), seed=9)
    g = grid_level(problem.mu.points)
    cand = axis_candidates(g, np.ones(25, dtype=bool))
    # keep only interior rows: each has all four axis neighbours at
    # spacing 1, so the worst angular gap of the cross is a quarter turn
    xs_rows = []
    indptr = np.zeros(26, dtype=np.int64)
    for r in range(25):
        i, j = divmod(r, 5)
        row = (cand.xs[cand.indptr[r]:cand.indptr[r + 1]]
               if 1 <= i <= 3 and 1 <= j <= 3
               else np.empty(0, dtype=cand.xs.dtype))
        xs_rows.append(row)
        indptr[r + 1] = indptr[r] + row.size
    diag = measure_regularity(problem, res.coupling, indptr,
                              np.concatenate(xs_rows))
    assert diag.measured_q == pytest.approx(np.cos(np.pi / 4))
    assert diag.measured_D == pytest.approx(1.0)
    assert diag.measured_L > 0
    # with border rows included a corner cross leaves a 3/4-turn gap
    full = measure_regularity(problem, res.coupling, cand.indptr, cand.xs)
    assert full.measured_q == pytest.approx(np.cos(3 * np.pi / 4))


def test_measure_regularity_map_ratio():
    problem, _ = solved_grid((4, 4), seed=12)
    n = 16
    no_cand = np.zeros(n + 1, dtype=np.int64)
    empty = np.empty(0, dtype=np.int64)
    ident = SparseCoupling.from_entries(
        n, n, np.arange(n), np.arange(n), problem.mu.masses,
        mass_scale=problem.mu.mass_scale)
    diag = measure_regularity(problem, ident, no_cand, empty)
    assert diag.measured_L == 1.0
    const = SparseCoupling.from_entries(
        n, n, np.arange(n), np.zeros(n, dtype=np.int64), problem.mu.masses,
        mass_scale=problem.mu.mass_scale)
    diag = measure_regularity(problem, const, no_cand, empty)
    assert diag.measured_L == 0.0


def test_measure_regularity_empty_candidates():
    problem, res = solved_grid((4, 4), seed=10)
    indptr = np.zeros(17, dtype=np.int64)
    diag = measure_regularity(problem, res.coupling, indptr,
                              np.empty(0, dtype=np.int64))
    assert diag.measured_q == -1.0
    assert diag.measured_D == 0.0


def test_certificate_global_pass_and_fail():
    problem, res = solved_grid(seed=11)
    cert = certificate_global(problem, res.coupling, res.duals)
    assert cert is not None
    assert cert.kind == "globally_optimal"
    assert cert.problem_hash == problem_hash(problem)
    assert cert.objective == res.objective
    payload = json.loads(cert.to_json())
    assert set(payload) == {"kind", "problem", "objective"}
    bad = DualPotentials(res.duals.alpha + 1, res.duals.beta,
                         res.duals.cost_scale)
    assert certificate_global(problem, res.coupling, bad) is None


def test_certificate_rejects_wrong_marginals():
    problem, res = solved_grid(seed=12)
    pi = res.coupling
    mass = pi.mass.copy()
    mass[0] += 1
    broken = SparseCoupling(pi.n_rows, pi.n_cols, pi.indptr.copy(),
                            pi.cols.copy(), mass, pi.mass_scale)
    assert certificate_global(problem, broken, res.duals) is None


def test_certificate_serialization_is_deterministic():
    c = Certificate("globally_optimal", "ab" * 8, 42)
    assert c.to_json() == c.to_json()
    assert c.to_json().startswith('{"kind":')
    w = Certificate("shortcut_found", "cd" * 8, 0,
                    witness={"chain": [[1, 2]]})
    assert json.loads(w.to_json())["witness"] == {"chain": [[1, 2]]}
