"""Exact sparse solver for discrete optimal transport.

Large dense transport problems are solved to provable global optimality
by iterating small restricted problems whose supports are grown through
shielding neighbourhoods, embedded in a coarse-to-fine sweep over a
hierarchical partition of both point sets.  All certification arithmetic
runs in integer units so results are reproducible bit for bit.
"""

from .core import (DEFAULT_COST_SCALE, DEFAULT_MASS_SCALE, DiscreteMeasure,
                   DualPotentials, Neighbourhood, ProblemInstance,
                   SparseCoupling, extract_map, objective, quantize_cost)
from .costs import (NoisySqEuclidean, PowerEuclidean, SphereGeodesicSq,
                    SqEuclidean, pairwise_cost, psi, psi_hat, shields)
from .driver import (SolveReport, SolveResult, solve_multiscale,
                     solve_sparse)
from .estimator import SparseTransport
from .fileio import (FormatError, read_cpl, read_dgrid, read_pts, write_cpl,
                     write_dgrid, write_pts)
from .gen import gen_grid_measure, gen_sphere_measure, quantize_shares
from .hierarchy import HierarchicalPartition, build_tree, coarsen_measure
from .netsolver import (LocalSolution, SparseTransportLP,
                        TransportInfeasible, solve_local)
from .shield import GridAxes, KNearest, Shielder
from .verify import (Certificate, DenseCapExceeded, RegularityDiagnostics,
                     ShortcutError, build_shortcut, certificate_global,
                     check_full_duals, check_local_duals, check_shielding,
                     dense_solve, measure_regularity, problem_hash)

__version__ = "0.1.0"

__all__ = [
    "Certificate", "DEFAULT_COST_SCALE", "DEFAULT_MASS_SCALE",
    "DenseCapExceeded", "DiscreteMeasure", "DualPotentials", "FormatError",
    "GridAxes", "HierarchicalPartition", "KNearest", "LocalSolution",
    "Neighbourhood", "NoisySqEuclidean", "PowerEuclidean",
    "ProblemInstance", "RegularityDiagnostics", "Shielder", "ShortcutError",
    "SolveReport", "SolveResult", "SparseCoupling", "SparseTransport",
    "SparseTransportLP", "SphereGeodesicSq", "SqEuclidean",
    "TransportInfeasible", "build_shortcut", "build_tree",
    "certificate_global", "check_full_duals", "check_local_duals",
    "check_shielding", "coarsen_measure", "dense_solve", "extract_map",
    "gen_grid_measure", "gen_sphere_measure", "measure_regularity",
    "objective", "pairwise_cost", "problem_hash", "psi", "psi_hat",
    "quantize_cost", "quantize_shares", "read_cpl", "read_dgrid",
    "read_pts", "shields", "solve_local", "solve_multiscale",
    "solve_sparse", "write_cpl", "write_dgrid", "write_pts",
]
