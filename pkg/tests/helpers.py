"""Shared problem builders for the test suite."""

import numpy as np

from sparseot import gen
from sparseot.core import DEFAULT_MASS_SCALE, DiscreteMeasure, ProblemInstance
from sparseot.costs import SqEuclidean


def grid_problem(shape, seed, spec=None, gaussians=3,
                 mass_scale=DEFAULT_MASS_SCALE):
    mu = gen.gen_grid_measure(shape, 2 * seed, gaussians=gaussians,
                              mass_scale=mass_scale)
    nu = gen.gen_grid_measure(shape, 2 * seed + 1, gaussians=gaussians,
                              mass_scale=mass_scale)
    return ProblemInstance(mu, nu, spec if spec is not None else SqEuclidean())


def sphere_problem(n, seed, spec, mass_scale=DEFAULT_MASS_SCALE):
    mu = gen.gen_sphere_measure(n, 2 * seed, mass_scale=mass_scale)
    nu = gen.gen_sphere_measure(n, 2 * seed + 1, mass_scale=mass_scale)
    return ProblemInstance(mu, nu, spec)


def cloud_problem(n, seed, spec, dim=2, mass_scale=DEFAULT_MASS_SCALE):
    rng = np.random.default_rng(np.random.Philox(seed))
    pts_x = gen.gen_cloud_points(n, 2 * seed, dim=dim)
    pts_y = gen.gen_cloud_points(n, 2 * seed + 1, dim=dim)
    mu = DiscreteMeasure(pts_x, gen.quantize_shares(rng.random(n) + 0.1,
                                                    mass_scale), mass_scale)
    nu = DiscreteMeasure(pts_y, gen.quantize_shares(rng.random(n) + 0.1,
                                                    mass_scale), mass_scale)
    return ProblemInstance(mu, nu, spec)


def dense_objective(problem):
    """Integer objective of an independent full-product solve."""
    from sparseot import verify

    coupling, _ = verify.dense_solve(problem)
    sup = coupling.row_indices()
    cq = verify.quantized_pairs(problem, sup, coupling.cols)
    return int(sum(int(c) * int(m) for c, m in zip(cq, coupling.mass)))
