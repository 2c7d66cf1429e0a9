import networkx as nx
import numpy as np
import pytest

from sparseot.core import Neighbourhood, SparseCoupling
from sparseot.netsolver import (SparseTransportLP, TransportInfeasible,
                                solve_local)


def random_instance(rng, nx_=6, ny_=6, density=0.5, cmax=50):
    """Sparse instance that is feasible by construction.

    Demands are the column sums of a hidden flow routed over the
    sampled arcs, so a transport plan always exists.
    """
    supplies = rng.integers(1, 30, size=nx_)
    rows, cols = [], []
    demands = np.zeros(ny_, dtype=np.int64)
    for i in range(nx_):
        picked = np.flatnonzero(rng.random(ny_) < density)
        if picked.size == 0:
            picked = rng.integers(0, ny_, size=1)
        rows += [i] * picked.size
        cols += picked.tolist()
        share = rng.multinomial(supplies[i], np.full(picked.size,
                                                     1.0 / picked.size))
        np.add.at(demands, picked, share)
    nbh = Neighbourhood.from_pairs(nx_, ny_, rows, cols)
    arc_rows = np.repeat(np.arange(nx_), np.diff(nbh.indptr))
    costs = rng.integers(0, cmax, size=nbh.nnz).astype(np.int64)
    return supplies, demands, nbh, arc_rows, costs


def oracle(supplies, demands, nbh, costs):
    g = nx.DiGraph()
    for i, s in enumerate(supplies):
        g.add_node(("s", i), demand=-int(s))
    for j, d in enumerate(demands):
        g.add_node(("t", j), demand=int(d))
    k = 0
    for i in range(len(supplies)):
        for j in nbh.row(i):
            g.add_edge(("s", i), ("t", int(j)), weight=int(costs[k]))
            k += 1
    return nx.network_simplex(g)


def check_optimal(lp, sol):
    rm, cm = sol.coupling.marginals()
    assert np.array_equal(rm, lp.supplies)
    assert np.array_equal(cm, lp.demands)
    rows = sol.coupling.row_indices()
    # dual feasibility on every arc, tightness on the support
    arc_rows = np.repeat(np.arange(lp.supplies.shape[0]),
                         np.diff(lp.indptr))
    red = lp.costs - sol.duals.alpha[arc_rows] - sol.duals.beta[lp.cols]
    assert red.min() >= 0
    for k in range(sol.coupling.nnz):
        i, j = int(rows[k]), int(sol.coupling.cols[k])
        a = np.flatnonzero((arc_rows == i) & (lp.cols == j))[0]
        assert red[a] == 0


def test_against_networkx_corpus():
    rng = np.random.default_rng(12)
    for _ in range(200):
        supplies, demands, nbh, arc_rows, costs = random_instance(rng)
        lp = SparseTransportLP(supplies, demands, nbh.indptr, nbh.cols,
                               costs)
        sol = solve_local(lp)
        want, _ = oracle(supplies, demands, nbh, costs)
        assert sol.objective == want
        check_optimal(lp, sol)


def test_infeasible_instance_detected():
    # the only column reachable from row 0 has too little capacity
    supplies = np.array([5, 5], dtype=np.int64)
    demands = np.array([2, 8], dtype=np.int64)
    nbh = Neighbourhood.from_pairs(2, 2, [0, 1], [0, 1])
    lp = SparseTransportLP(supplies, demands, nbh.indptr, nbh.cols,
                           np.array([1, 1], dtype=np.int64))
    with pytest.raises(TransportInfeasible):
        solve_local(lp)
    with pytest.raises(nx.NetworkXUnfeasible):
        oracle(supplies, demands, nbh, np.array([1, 1]))


def test_zero_supply_rows_are_isolated():
    supplies = np.array([5, 0, 5], dtype=np.int64)
    demands = np.array([10, 0], dtype=np.int64)
    nbh = Neighbourhood.from_pairs(3, 2, [0, 1, 2], [0, 1, 0])
    lp = SparseTransportLP(supplies, demands, nbh.indptr, nbh.cols,
                           np.array([1, 99, 2], dtype=np.int64))
    sol = solve_local(lp)
    assert sol.objective == 5 * 1 + 5 * 2
    rm, _ = sol.coupling.marginals()
    assert rm[1] == 0


def test_pivot_block_does_not_change_objective():
    rng = np.random.default_rng(13)
    for _ in range(20):
        supplies, demands, nbh, arc_rows, costs = random_instance(rng, 8, 8)
        lp = SparseTransportLP(supplies, demands, nbh.indptr, nbh.cols,
                               costs)
        try:
            a = solve_local(lp, pivot_block=1)
        except TransportInfeasible:
            continue
        b = solve_local(lp, pivot_block=lp.costs.shape[0])
        assert a.objective == b.objective


def test_warm_same_basis_needs_no_pivots():
    rng = np.random.default_rng(14)
    supplies, demands, nbh, arc_rows, costs = random_instance(rng, 10, 10,
                                                              density=0.8)
    lp = SparseTransportLP(supplies, demands, nbh.indptr, nbh.cols, costs)
    cold = solve_local(lp)
    warm = solve_local(lp, warm=cold.basis)
    assert warm.pivots == 0
    assert warm.objective == cold.objective


def test_warm_on_grown_arc_set():
    rng = np.random.default_rng(15)
    supplies, demands, nbh, arc_rows, costs = random_instance(rng, 10, 10,
                                                              density=0.4)
    lp = SparseTransportLP(supplies, demands, nbh.indptr, nbh.cols, costs)
    try:
        cold = solve_local(lp)
    except TransportInfeasible:
        pytest.skip("sampled instance infeasible")
    # grow to the full product with fresh costs for the new arcs
    table = rng.integers(0, 50, size=(10, 10)).astype(np.int64)
    k = 0
    for i in range(10):
        for j in nbh.row(i):
            table[i, j] = costs[k]
            k += 1
    full = Neighbourhood.full(10, 10)
    rows_f = np.repeat(np.arange(10), 10)
    lp2 = SparseTransportLP(supplies, demands, full.indptr, full.cols,
                            table[rows_f, full.cols])
    warm = solve_local(lp2, warm=cold.basis,
                       cost_fn=lambda i, j: int(table[i, j]))
    cold2 = solve_local(lp2)
    assert warm.objective == cold2.objective
    check_optimal(lp2, warm)
    assert warm.pivots <= cold2.pivots


def test_warm_basis_with_vanished_arc_repairs():
    """Basic arcs missing from the new set come back as repairs."""
    supplies = np.array([4, 4], dtype=np.int64)
    demands = np.array([4, 4], dtype=np.int64)
    full = Neighbourhood.full(2, 2)
    costs_a = np.array([0, 5, 5, 0], dtype=np.int64)
    lp_a = SparseTransportLP(supplies, demands, full.indptr, full.cols,
                             costs_a)
    sol_a = solve_local(lp_a)
    # drop the (1, 1) arc the old basis uses
    nbh_b = Neighbourhood.from_pairs(2, 2, [0, 0, 1], [0, 1, 0])
    costs_b = np.array([0, 5, 5], dtype=np.int64)
    lp_b = SparseTransportLP(supplies, demands, nbh_b.indptr, nbh_b.cols,
                             costs_b)
    with pytest.raises(ValueError):
        solve_local(lp_b, warm=sol_a.basis)
    # repairs re-add the vanished arc at its true price, so the solve
    # covers the original full arc set again
    sol_b = solve_local(lp_b, warm=sol_a.basis,
                        cost_fn=lambda i, j: int(costs_a[2 * i + j]))
    assert sol_b.repaired >= 1
    assert sol_b.objective == sol_a.objective
    rm, cm = sol_b.coupling.marginals()
    assert np.array_equal(rm, supplies) and np.array_equal(cm, demands)


def test_warm_dual_shift():
    rng = np.random.default_rng(16)
    supplies, demands, nbh, arc_rows, costs = random_instance(rng, 12, 12,
                                                              density=0.7)
    lp = SparseTransportLP(supplies, demands, nbh.indptr, nbh.cols, costs)
    try:
        cold = solve_local(lp)
    except TransportInfeasible:
        pytest.skip("sampled instance infeasible")
    warm = solve_local(lp, warm=cold.duals)
    assert warm.objective == cold.objective
    check_optimal(lp, warm)


def test_pivot_limit_raises():
    rng = np.random.default_rng(17)
    supplies, demands, nbh, arc_rows, costs = random_instance(rng, 10, 10,
                                                              density=0.9)
    lp = SparseTransportLP(supplies, demands, nbh.indptr, nbh.cols, costs)
    with pytest.raises(RuntimeError, match="pivot limit"):
        solve_local(lp, max_pivots=1)


def test_lp_validation():
    with pytest.raises(ValueError, match="supply"):
        SparseTransportLP(np.array([2]), np.array([3]),
                          np.array([0, 1]), np.array([0]),
                          np.array([1]))
    with pytest.raises(ValueError, match="align"):
        SparseTransportLP(np.array([2]), np.array([2]),
                          np.array([0, 1]), np.array([0]),
                          np.array([1, 2]))


def test_degenerate_mass_heavy_ties():
    """Many zero-cost ties and equal masses still terminate and agree."""
    n = 12
    supplies = np.full(n, 3, dtype=np.int64)
    demands = np.full(n, 3, dtype=np.int64)
    full = Neighbourhood.full(n, n)
    rows = np.repeat(np.arange(n), n)
    costs = ((rows + full.cols) % 2).astype(np.int64)
    lp = SparseTransportLP(supplies, demands, full.indptr, full.cols, costs)
    sol = solve_local(lp)
    want, _ = oracle(supplies, demands, full, costs)
    assert sol.objective == want == 0
