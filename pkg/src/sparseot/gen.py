"""Seeded test-measure generators.

All randomness flows through a counter-based 64-bit generator (Philox)
so outputs are bit-identical across platforms for a given seed.
Densities are turned into integer masses by reserving one unit per cell
(full support) and distributing the rest by largest remainder, so every
measure sums exactly to its mass scale.
"""

from __future__ import annotations

import numpy as np

from .core import DEFAULT_MASS_SCALE, DiscreteMeasure
from .fileio import grid_points

EIG_LOW = 1.8
EIG_HIGH = 100.0


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.Philox(seed))


def quantize_shares(weights: np.ndarray, mass_scale: int) -> np.ndarray:
    """Integer masses: floor of one unit per cell, largest remainder.

    Nonpositive total weight falls back to uniform shares.
    """
    w = np.asarray(weights, dtype=np.float64)
    n = w.size
    if mass_scale < n:
        raise ValueError(f"mass_scale {mass_scale} cannot cover {n} cells")
    w = np.where(np.isfinite(w) & (w > 0), w, 0.0)
    total = w.sum()
    if total <= 0:
        w = np.ones(n)
        total = float(n)
    budget = mass_scale - n
    shares = w / total * budget
    base = np.floor(shares).astype(np.int64)
    frac = shares - base
    rem = budget - int(base.sum())
    extra = np.zeros(n, dtype=np.int64)
    if rem > 0:
        take = np.argsort(-frac, kind="stable")[:rem]
        extra[take] = 1
    return base + extra + 1


def _random_covariance(rng: np.random.Generator, dim: int) -> np.ndarray:
    eig = rng.uniform(EIG_LOW, EIG_HIGH, size=dim)
    if dim == 2:
        a = rng.uniform(0.0, 2 * np.pi)
        R = np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
    else:
        q, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
        R = q
    return (R * eig) @ R.T


def _gaussian_density(rng: np.random.Generator, pts: np.ndarray,
                      count: int) -> np.ndarray:
    n, dim = pts.shape
    dens = np.zeros(n)
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    for _ in range(count):
        amp = rng.uniform(0.5, 1.5)
        mean = rng.uniform(lo, hi)
        cov = _random_covariance(rng, dim)
        prec = np.linalg.inv(cov)
        d = pts - mean
        expo = np.einsum("ni,ij,nj->n", d, prec, d)
        dens += amp * np.exp(-0.5 * expo)
    return dens


def _apply_mask(rng: np.random.Generator, pts: np.ndarray,
                dens: np.ndarray, mask: str) -> np.ndarray:
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    if mask == "halfplane":
        normal = rng.normal(size=pts.shape[1])
        normal /= np.linalg.norm(normal)
        anchor = rng.uniform(lo, hi)
        keep = (pts - anchor) @ normal > 0
    elif mask == "disc":
        center = rng.uniform(lo, hi)
        radius = rng.uniform(0.2, 0.5) * float((hi - lo).max())
        keep = np.linalg.norm(pts - center, axis=1) <= radius
    else:
        raise ValueError(f"unknown mask {mask!r}")
    return np.where(keep, dens, 0.0)


def gen_grid_measure(shape, seed: int, gaussians: int = 3,
                     mask: str | None = None,
                     mass_scale: int = DEFAULT_MASS_SCALE) -> DiscreteMeasure:
    """Random full-support measure on a Cartesian grid.

    Density is a sum of ``gaussians`` anisotropic bumps whose covariance
    eigenvalues are drawn uniformly from [1.8, 100] (in cell units),
    optionally cut by a sharp binary mask ("halfplane" or "disc").
    """
    shape = tuple(int(s) for s in shape)
    if len(shape) not in (2, 3):
        raise ValueError("grid measures are 2- or 3-dimensional")
    if any(s < 2 for s in shape):
        raise ValueError("each axis needs at least 2 cells")
    rng = _rng(seed)
    pts = grid_points(shape).astype(np.float64)
    dens = (_gaussian_density(rng, pts, gaussians) if gaussians > 0
            else np.ones(pts.shape[0]))
    if mask is not None:
        dens = _apply_mask(rng, pts, dens, mask)
    masses = quantize_shares(dens, mass_scale)
    return DiscreteMeasure(pts, masses, mass_scale=mass_scale)


def gen_sphere_measure(count: int, seed: int, bumps: int = 3,
                       mass_scale: int = DEFAULT_MASS_SCALE) -> DiscreteMeasure:
    """Random measure on uniform points of the unit 2-sphere.

    Density is a sum of radial pseudo-Gaussians
    A * exp(-d(x0, x)^2 / (2 sigma)) in geodesic distance.
    """
    if count < 1:
        raise ValueError("count must be positive")
    rng = _rng(seed)
    pts = rng.normal(size=(count, 3))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    if bumps > 0:
        dens = np.zeros(count)
        for _ in range(bumps):
            amp = rng.uniform(0.5, 1.5)
            center = rng.normal(size=3)
            center /= np.linalg.norm(center)
            sigma = rng.uniform(0.05, 0.5)
            d = np.arccos(np.clip(pts @ center, -1.0, 1.0))
            dens += amp * np.exp(-d * d / (2.0 * sigma))
    else:
        dens = np.ones(count)
    masses = quantize_shares(dens, mass_scale)
    return DiscreteMeasure(pts, masses, mass_scale=mass_scale)


def gen_cloud_points(count: int, seed: int, dim: int = 2,
                     clusters: int = 3) -> np.ndarray:
    """Clustered random points in the unit box (test helper)."""
    rng = _rng(seed)
    centers = rng.uniform(0.2, 0.8, size=(max(clusters, 1), dim))
    labels = rng.integers(0, max(clusters, 1), size=count)
    pts = centers[labels] + rng.normal(scale=0.08, size=(count, dim))
    return np.clip(pts, 0.0, 1.0)
