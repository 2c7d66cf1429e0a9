"""Scikit-learn style front end for the sparse transport solver."""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import costs, driver
from .core import (DEFAULT_COST_SCALE, DEFAULT_MASS_SCALE, DiscreteMeasure,
                   ProblemInstance)
from .gen import quantize_shares
from .shield import grid_level, parse_scheme


class SparseTransport(BaseEstimator):
    """Exact optimal transport between two weighted point sets.

    ``fit`` computes a globally optimal coupling between the rows of
    ``X`` (sources) and ``Y`` (targets); ``transform`` then maps points
    to the barycentre of their transport targets.  Weights may be
    floats, which are rounded onto a common integer grid of
    ``mass_scale`` units, or left out for uniform measures.

    Parameters mirror the ``solve`` command of the CLI.  ``candidates``
    is "axes", "knn", "knn:<k>", or None for an automatic choice.
    """

    def __init__(self, cost="sqeucl", p=2.0, eta=0.0, lam=0.0,
                 noise_seed=0, depth=None, shield="auto", candidates=None,
                 warm="basis", mass_scale=DEFAULT_MASS_SCALE,
                 cost_scale=DEFAULT_COST_SCALE, certify=False):
        self.cost = cost
        self.p = p
        self.eta = eta
        self.lam = lam
        self.noise_seed = noise_seed
        self.depth = depth
        self.shield = shield
        self.candidates = candidates
        self.warm = warm
        self.mass_scale = mass_scale
        self.cost_scale = cost_scale
        self.certify = certify

    def _spec(self):
        if self.cost == "sqeucl":
            if self.eta or self.lam:
                return costs.NoisySqEuclidean(eta=self.eta, lam=self.lam,
                                              noise_seed=self.noise_seed)
            return costs.SqEuclidean()
        if self.eta or self.lam:
            raise ValueError("eta/lam apply to cost='sqeucl' only")
        if self.cost == "peucl":
            return costs.PowerEuclidean(self.p)
        if self.cost == "sphere":
            return costs.SphereGeodesicSq()
        raise ValueError(f"unknown cost {self.cost!r}")

    def _masses(self, weights, n):
        if weights is None:
            weights = np.ones(n)
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (n,):
            raise ValueError("weights must be one value per point")
        return quantize_shares(weights, self.mass_scale)

    def fit(self, X, Y, mu=None, nu=None):
        """Solve the transport problem from rows of X to rows of Y."""
        X = check_array(X, dtype=np.float64)
        Y = check_array(Y, dtype=np.float64)
        if X.shape[1] != Y.shape[1]:
            raise ValueError("X and Y must share a dimension")
        spec = self._spec()
        mu_m = DiscreteMeasure(X, self._masses(mu, X.shape[0]),
                               self.mass_scale)
        nu_m = DiscreteMeasure(Y, self._masses(nu, Y.shape[0]),
                               self.mass_scale)
        problem = ProblemInstance(mu_m, nu_m, spec,
                                  cost_scale=self.cost_scale)
        grid_shape = None
        if costs.family_code(spec)[0] != 2:
            gx, gy = grid_level(X), grid_level(Y)
            if gx is not None and gy is not None and gx.shape == gy.shape:
                grid_shape = gx.shape
        result = driver.solve_multiscale(
            problem, depth=self.depth, shield_method=self.shield,
            candidates=parse_scheme(self.candidates), warm=self.warm,
            grid_shape=grid_shape, certify=self.certify)
        self.n_features_in_ = X.shape[1]
        self.source_points_ = X
        self.coupling_ = result.coupling
        self.duals_ = result.duals
        self.report_ = result.report
        self.objective_units_ = result.objective
        self.objective_ = result.objective / (
            self.mass_scale * self.cost_scale)
        self.n_iter_ = result.report.levels[-1].iters
        bary = np.zeros_like(X)
        mass = np.zeros(X.shape[0])
        rows = result.coupling.row_indices()
        np.add.at(bary, rows,
                  result.coupling.mass[:, None] * Y[result.coupling.cols])
        np.add.at(mass, rows, result.coupling.mass)
        keep = mass > 0
        bary[keep] /= mass[keep, None]
        bary[~keep] = X[~keep]
        self.image_points_ = bary
        return self

    def transform(self, X=None):
        """Barycentric transport map, via nearest fitted source point."""
        check_is_fitted(self, "coupling_")
        if X is None:
            return self.image_points_.copy()
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError("X does not match the fitted dimension")
        if (X.shape == self.source_points_.shape
                and np.array_equal(X, self.source_points_)):
            return self.image_points_.copy()
        _, idx = cKDTree(self.source_points_).query(X)
        return self.image_points_[idx]

    def fit_transform(self, X, Y, mu=None, nu=None):
        return self.fit(X, Y, mu=mu, nu=nu).transform()
