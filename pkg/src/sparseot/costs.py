"""Cost families, shielding predicate and hierarchical lower bounds.

Four families are supported:

* ``SqEuclidean``: |x - y|^2.
* ``PowerEuclidean(p)``: |x - y|^p for p > 1.
* ``SphereGeodesicSq``: squared geodesic distance on the unit sphere S^2
  (points are unit vectors in R^3).
* ``NoisySqEuclidean(eta, lam, ...)``: |x - y|^2 + eta * noise(i, j)
  + lam * lipschitz(x, y), where the noise term is an arbitrary per-pair
  value in [0, 1] (a seeded counter-based hash by default) and the
  Lipschitz term has Lipschitz constant 1 in its first argument.

``psi``, ``shields`` and ``psi_hat`` always refer to the noise-free part
of the cost; for the noisy family the extra terms are absorbed into the
shielding slack (see :func:`shielding_slack`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _kernels
from ._kernels import NO_SHIELD

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)


@dataclass(frozen=True)
class SqEuclidean:
    family = "sqeucl"


@dataclass(frozen=True)
class PowerEuclidean:
    p: float
    family = "peucl"

    def __post_init__(self):
        if not self.p > 1.0:
            raise ValueError("PowerEuclidean requires p > 1")


@dataclass(frozen=True)
class SphereGeodesicSq:
    family = "sphere"


@dataclass(frozen=True, eq=False)
class NoisySqEuclidean:
    eta: float = 0.0
    lam: float = 0.0
    noise_seed: int = 0
    noise_table: np.ndarray | None = None
    lipschitz_fn: Callable | None = None
    family = "noisy-sqeucl"

    def __post_init__(self):
        if self.eta < 0.0 or self.lam < 0.0:
            raise ValueError("noise amplitudes must be nonnegative")


CostSpec = SqEuclidean | PowerEuclidean | SphereGeodesicSq | NoisySqEuclidean


def family_code(spec) -> tuple[int, float]:
    """(kernel family code, power exponent) of the noise-free part."""
    if isinstance(spec, (SqEuclidean, NoisySqEuclidean)):
        return 0, 2.0
    if isinstance(spec, PowerEuclidean):
        return 1, float(spec.p)
    if isinstance(spec, SphereGeodesicSq):
        return 2, 2.0
    raise TypeError(f"unknown cost spec {spec!r}")


def spec_to_dict(spec) -> dict:
    out = {"family": spec.family}
    if isinstance(spec, PowerEuclidean):
        out["p"] = spec.p
    if isinstance(spec, NoisySqEuclidean):
        out["eta"] = spec.eta
        out["lambda"] = spec.lam
        out["noise_seed"] = spec.noise_seed
    return out


def spec_from_dict(d: dict) -> CostSpec:
    fam = d.get("family")
    if fam == "sqeucl":
        return SqEuclidean()
    if fam == "peucl":
        return PowerEuclidean(p=float(d["p"]))
    if fam == "sphere":
        return SphereGeodesicSq()
    if fam == "noisy-sqeucl":
        return NoisySqEuclidean(eta=float(d.get("eta", 0.0)),
                                lam=float(d.get("lambda", 0.0)),
                                noise_seed=int(d.get("noise_seed", 0)))
    raise ValueError(f"unknown cost family {fam!r}")


# ---------------------------------------------------------------------------
# noise and Lipschitz perturbations


def _mix64(z: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer, vectorised over uint64 arrays."""
    z = (z + np.uint64(0x9E3779B97F4A7C15)) & _MASK64
    z ^= z >> np.uint64(30)
    z = (z * np.uint64(0xBF58476D1CE4E5B9)) & _MASK64
    z ^= z >> np.uint64(27)
    z = (z * np.uint64(0x94D049BB133111EB)) & _MASK64
    z ^= z >> np.uint64(31)
    return z


def pair_noise(seed: int, i, j) -> np.ndarray:
    """Deterministic per-pair noise values in [0, 1)."""
    i = np.asarray(i, dtype=np.uint64)
    j = np.asarray(j, dtype=np.uint64)
    with np.errstate(over="ignore"):
        h = _mix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
                   + np.uint64(0x243F6A8885A308D3))
        z = _mix64(i + h)
        z = _mix64(z ^ ((j + np.uint64(1)) * np.uint64(0xD1342543DE82EF95)
                        & _MASK64))
    return (z >> np.uint64(11)) * 2.0 ** -53


def lipschitz_sine_field(x, y, k_mag: float = 20.0):
    """Plane-wave field with Lipschitz constant 1 in x (2-d points).

    The wave vector direction rotates with y: k(y) = (cos w, sin w) with
    w = y_1 + y_2, and the amplitude is k_mag / (2 pi).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = y[..., 0] + y[..., 1]
    proj = np.cos(w) * x[..., 0] + np.sin(w) * x[..., 1]
    two_pi = 2.0 * math.pi
    return (k_mag / two_pi) * np.sin((two_pi / k_mag) * proj)


def _lipschitz_term(spec: NoisySqEuclidean, x, y):
    if spec.lipschitz_fn is not None:
        return spec.lipschitz_fn(x, y)
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != 2:
        raise ValueError("built-in Lipschitz field requires 2-d points; "
                         "pass lipschitz_fn for other dimensions")
    return lipschitz_sine_field(x, y)


def _noise_term(spec: NoisySqEuclidean, i, j):
    if spec.noise_table is not None:
        return np.asarray(spec.noise_table, dtype=np.float64)[i, j]
    return pair_noise(spec.noise_seed, i, j)


# ---------------------------------------------------------------------------
# evaluation


def cost(spec, x, y, ix: int = -1, iy: int = -1) -> float:
    """Cost of one point pair.

    For the noisy family the per-pair noise term needs leaf indices
    ``ix, iy``; with the defaults (or any negative index) the pair is
    treated as a pair of coarse representatives and the noise term is 0.
    The Lipschitz term is evaluated at any layer.
    """
    code, p = family_code(spec)
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    base = float(_kernels.cost_geo(code, p, x, y))
    if isinstance(spec, NoisySqEuclidean):
        if spec.lam:
            base += spec.lam * float(_lipschitz_term(spec, x, y))
        if spec.eta and ix >= 0 and iy >= 0:
            base += spec.eta * float(_noise_term(spec, ix, iy))
    return base


def pairwise_cost(spec, X, Y, x_idx=None, y_idx=None,
                  include_noise: bool = True) -> np.ndarray:
    """Dense cost block between point arrays X (n, d) and Y (m, d).

    ``x_idx``/``y_idx`` carry the leaf indices used by the noise term; when
    omitted the rows/columns are assumed to be leaves 0..n-1 / 0..m-1.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    code, p = family_code(spec)
    if code == 2:
        dots = np.clip(X @ Y.T, -1.0, 1.0)
        out = np.arccos(dots) ** 2
    else:
        d2 = _sq_dist_np(X[:, None, :], Y[None, :, :])
        out = d2 if code == 0 else np.sqrt(d2) ** p
    if isinstance(spec, NoisySqEuclidean):
        if spec.lam:
            out = out + spec.lam * _lipschitz_term(
                spec, X[:, None, :], Y[None, :, :])
        if spec.eta and include_noise:
            xi = np.arange(X.shape[0]) if x_idx is None else np.asarray(x_idx)
            yi = np.arange(Y.shape[0]) if y_idx is None else np.asarray(y_idx)
            out = out + spec.eta * _noise_term(spec, xi[:, None], yi[None, :])
    return out


def cost_for_pairs(spec, X, Y, rows, cols, x_idx=None, y_idx=None,
                   include_noise: bool = True) -> np.ndarray:
    """Cost values for explicit index pairs (rows[k], cols[k])."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    a = X[rows]
    b = Y[cols]
    code, p = family_code(spec)
    if code == 2:
        dots = np.clip(np.einsum("kd,kd->k", a, b), -1.0, 1.0)
        out = np.arccos(dots) ** 2
    else:
        d2 = _sq_dist_np(a, b)
        out = d2 if code == 0 else np.sqrt(d2) ** p
    if isinstance(spec, NoisySqEuclidean):
        if spec.lam:
            out = out + spec.lam * _lipschitz_term(spec, a, b)
        if spec.eta and include_noise:
            xi = rows if x_idx is None else np.asarray(x_idx)[rows]
            yi = cols if y_idx is None else np.asarray(y_idx)[cols]
            out = out + spec.eta * _noise_term(spec, xi, yi)
    return out


def _sq_dist_np(a, b):
    """Squared distance with the same accumulation order as the kernels."""
    diff = a - b
    acc = diff[..., 0] * diff[..., 0]
    for d in range(1, diff.shape[-1]):
        acc = acc + diff[..., d] * diff[..., d]
    return acc


def psi(spec, xA, xs, y) -> float:
    """c(xA, y) - c(xs, y) for the noise-free part of the cost."""
    code, p = family_code(spec)
    xA = np.ascontiguousarray(xA, dtype=np.float64)
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    return float(_kernels.psi_pt(code, p, xA, xs, y))


def shields(spec, xA, candidate, yB, slack: float = 0.0) -> bool:
    """True iff candidate = (xs, ys) shields xA from yB.

    The test is psi(yB) > psi(ys) + slack on the noise-free cost; a
    positive slack makes it a sufficient condition under quantisation
    and bounded perturbations.
    """
    xs, ys = candidate
    code, p = family_code(spec)
    xA = np.ascontiguousarray(xA, dtype=np.float64)
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    ys = np.ascontiguousarray(ys, dtype=np.float64)
    yB = np.ascontiguousarray(yB, dtype=np.float64)
    return bool(_kernels.shields_pt(code, p, xA, xs, ys, yB, slack))


def psi_hat(spec, xA, xs, rep, rad: float) -> float:
    """Lower bound of psi over the ball of radius rad around rep.

    Exact (equal to psi at rep) when rad == 0.  Returns ``-inf`` when the
    family admits no bound for this configuration (degenerate sphere
    frame), which forces the search to descend.
    """
    code, p = family_code(spec)
    xA = np.ascontiguousarray(xA, dtype=np.float64)
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    rep = np.ascontiguousarray(rep, dtype=np.float64)
    return float(_kernels.psi_hat_pt(code, p, xA, xs, rep, float(rad)))


def shielding_slack(spec, xA, xs, include_noise: bool = True) -> float:
    """Slack that makes the noise-free shielding test sufficient.

    For the noisy family the bounded term contributes 2 * eta (only at
    the leaf layer) and the Lipschitz term 2 * lam * |xA - xs|; the other
    families need no slack.
    """
    if not isinstance(spec, NoisySqEuclidean):
        return 0.0
    s = 2.0 * spec.lam * math.sqrt(float(_kernels.sq_dist(
        np.ascontiguousarray(xA, dtype=np.float64),
        np.ascontiguousarray(xs, dtype=np.float64))))
    if include_noise:
        s += 2.0 * spec.eta
    return s


def shielding_slacks(spec, XA, XS, include_noise: bool = True) -> np.ndarray:
    """Vectorised :func:`shielding_slack` for aligned point arrays."""
    XA = np.asarray(XA, dtype=np.float64)
    XS = np.asarray(XS, dtype=np.float64)
    if not isinstance(spec, NoisySqEuclidean):
        return np.zeros(XA.shape[0])
    d = XS - XA
    acc = np.zeros(XA.shape[0])
    for m in range(XA.shape[1]):
        acc += d[:, m] * d[:, m]
    out = 2.0 * spec.lam * np.sqrt(acc)
    if include_noise:
        out += 2.0 * spec.eta
    return out
