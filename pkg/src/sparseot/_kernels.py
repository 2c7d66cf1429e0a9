"""Numba kernels shared by cost evaluation, shielding and tree search.

All predicate arithmetic (psi, shielding test, hierarchical bounds) lives
here so that scalar calls, batched searches and verification use identical
floating-point operation order.

Cost family codes: 0 squared Euclidean, 1 Euclidean to the power p,
2 squared geodesic distance on the unit sphere.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

NO_SHIELD = -math.inf  # sentinel bound: never prunes, forces descent


@njit(cache=True)
def sq_dist(a, b):
    s = 0.0
    for d in range(a.shape[0]):
        t = a[d] - b[d]
        s += t * t
    return s


@njit(cache=True)
def dot3(a, b):
    s = 0.0
    for d in range(a.shape[0]):
        s += a[d] * b[d]
    return s


@njit(cache=True)
def _clip1(v):
    if v > 1.0:
        return 1.0
    if v < -1.0:
        return -1.0
    return v


@njit(cache=True)
def cost_geo(code, p, a, b):
    """Noise-free ground cost of the given family."""
    if code == 0:
        return sq_dist(a, b)
    elif code == 1:
        return math.sqrt(sq_dist(a, b)) ** p
    else:
        th = math.acos(_clip1(dot3(a, b)))
        return th * th


@njit(cache=True)
def psi_pt(code, p, xA, xs, y):
    """psi(y) = c(xA, y) - c(xs, y) for the noise-free cost."""
    return cost_geo(code, p, xA, y) - cost_geo(code, p, xs, y)


@njit(cache=True)
def shields_pt(code, p, xA, xs, ys, yB, slack):
    """True iff (xs, ys) shields xA from yB with the given slack margin."""
    return psi_pt(code, p, xA, xs, yB) > psi_pt(code, p, xA, xs, ys) + slack


@njit(cache=True)
def psi_hat_pt(code, p, xA, xs, rep, rad):
    """Lower bound for psi over every point within distance rad of rep.

    rad == 0 evaluates psi at rep exactly.  Returns NO_SHIELD when no
    useful bound exists (degenerate sphere frame).
    """
    if rad == 0.0:
        return psi_pt(code, p, xA, xs, rep)
    if code == 0:
        return psi_pt(code, p, xA, xs, rep) - 2.0 * math.sqrt(sq_dist(xs, xA)) * rad
    elif code == 1:
        return _psi_hat_peucl(p, xA, xs, rep, rad)
    else:
        return _psi_hat_sphere(xA, xs, rep, rad)


@njit(cache=True)
def _psi_hat_peucl(p, xA, xs, rep, rad):
    dxs = math.sqrt(sq_dist(xA, xs))
    if dxs == 0.0:
        return 0.0  # psi is identically zero
    dz = math.sqrt(sq_dist(xs, rep))
    if rad < dz:
        theta = math.asin(rad / dz)
        # angle between (xA - xs) and (xs - rep)
        acc = 0.0
        for d in range(xA.shape[0]):
            acc += (xA[d] - xs[d]) * (xs[d] - rep[d])
        ang = math.acos(_clip1(acc / (dxs * dz)))
        phi = ang + theta
        if phi > math.pi:
            phi = math.pi
    else:
        phi = math.pi
    cphi = math.cos(phi)
    if cphi >= 0.0:
        r = dz - rad
        if r < 0.0:
            r = 0.0
    else:
        r = dz + rad
    return p * r ** (p - 1.0) * dxs * cphi


@njit(cache=True)
def _psi_hat_sphere(xA, xs, rep, rad):
    # cross product magnitude detects a degenerate frame (xs on xA's axis)
    cx = xA[1] * xs[2] - xA[2] * xs[1]
    cy = xA[2] * xs[0] - xA[0] * xs[2]
    cz = xA[0] * xs[1] - xA[1] * xs[0]
    if math.sqrt(cx * cx + cy * cy + cz * cz) < 1e-12:
        return NO_SHIELD
    cth_s = _clip1(dot3(xA, xs))
    th_s = math.acos(cth_s)
    cth_B = _clip1(dot3(xA, rep))
    th_B = math.acos(cth_B)
    th_B_min = th_B - rad
    if th_B_min < 0.0:
        th_B_min = 0.0
    c_rad = math.cos(rad)
    if c_rad * c_rad > cth_B * cth_B:
        num = c_rad * c_rad - cth_B * cth_B
        den = 1.0 - cth_B * cth_B
        dphi = math.acos(_clip1(math.sqrt(num / den)))
        # azimuth of rep in the frame with xA at the pole, xs on the
        # zero meridian; well defined because sin(th_B) > sin(rad) >= 0
        nv = 0.0
        ne = 0.0
        acc = 0.0
        for d in range(3):
            v = rep[d] - cth_B * xA[d]
            e1 = xs[d] - cth_s * xA[d]
            nv += v * v
            ne += e1 * e1
            acc += v * e1
        phiB = math.acos(_clip1(acc / math.sqrt(nv * ne)))
    else:
        dphi = math.pi
        phiB = 0.0
    phi_max = phiB + dphi
    if phi_max > math.pi:
        phi_max = math.pi
    arg = _clip1(math.sin(th_s) * math.sin(th_B_min) * math.cos(phi_max)
                 + math.cos(th_s) * math.cos(th_B_min))
    dd_min = th_B_min - math.acos(arg)
    # scale factor from the subgradient at the nearest or farthest distance
    # between xs and the cell
    d_sr = math.acos(_clip1(dot3(xs, rep)))
    if dd_min > 0.0:
        dstar = d_sr - rad
        if dstar < 0.0:
            dstar = 0.0
    else:
        dstar = d_sr + rad
        if dstar > math.pi:
            dstar = math.pi
    return 2.0 * dstar * dd_min


@njit(cache=True)
def search_tree_rows(code, p, x_points, cand_ptr, cand_xs, cand_ys,
                     cand_slack, y_points_leaf, level_of, child_ptr,
                     child_idx, rep, rad, root_cell, leaf_level, leaf_base,
                     stack_cap):
    """Hierarchical miss-set search for every source point.

    For each row, descends the target tree, pruning any cell whose bound
    exceeds a candidate threshold.  Returns the concatenated per-row miss
    indices (local leaf-level indices, ascending within each row), the row
    pointer array, and the number of bound evaluations performed.
    """
    n_rows = x_points.shape[0]
    row_ptr = np.zeros(n_rows + 1, dtype=np.int64)
    cap = 16 * n_rows + 64
    out = np.empty(cap, dtype=np.int64)
    total = 0
    calls = 0
    stack = np.empty(stack_cap, dtype=np.int64)
    for r in range(n_rows):
        xA = x_points[r]
        c0 = cand_ptr[r]
        c1 = cand_ptr[r + 1]
        nc = c1 - c0
        # thresholds: psi at each candidate's target plus its slack
        thresh = np.empty(nc, dtype=np.float64)
        for t in range(nc):
            xs = x_points[cand_xs[c0 + t]]
            ys = y_points_leaf[cand_ys[c0 + t]]
            thresh[t] = psi_pt(code, p, xA, xs, ys) + cand_slack[c0 + t]
        top = 0
        stack[top] = root_cell
        top += 1
        while top > 0:
            top -= 1
            cell = stack[top]
            at_leaf = level_of[cell] == leaf_level
            pruned = False
            for t in range(nc):
                xs = x_points[cand_xs[c0 + t]]
                if at_leaf:
                    val = psi_pt(code, p, xA, xs, rep[cell])
                else:
                    val = psi_hat_pt(code, p, xA, xs, rep[cell], rad[cell])
                calls += 1
                if val > thresh[t]:
                    pruned = True
                    break
            if pruned:
                continue
            if at_leaf:
                if total == cap:
                    cap *= 2
                    grown = np.empty(cap, dtype=np.int64)
                    grown[:total] = out[:total]
                    out = grown
                out[total] = cell - leaf_base
                total += 1
            else:
                for ci in range(child_ptr[cell], child_ptr[cell + 1]):
                    stack[top] = child_idx[ci]
                    top += 1
        row_ptr[r + 1] = total
        # ascending order within the row
        seg = out[row_ptr[r] : total]
        seg.sort()
    return out[:total], row_ptr, calls


@njit(cache=True)
def grid_miss_rows(code, p, x_points, y_points, cand_ptr, cand_xs, cand_ys,
                   cand_axis, cand_dir, cand_slack, y_lat, y_cell_of,
                   y_shape, y_strides):
    """Axis-aligned miss-set search on a full lattice of target points.

    Each candidate constrains one lattice axis; the miss set is the
    rectangle of lattice sites surviving every candidate, located by
    bisection with the same pointwise predicate the tree search applies
    at its leaves.
    """
    n_rows = x_points.shape[0]
    dim = y_lat.shape[1] if y_lat.shape[0] > 0 else x_points.shape[1]
    row_ptr = np.zeros(n_rows + 1, dtype=np.int64)
    cap = 16 * n_rows + 64
    out = np.empty(cap, dtype=np.int64)
    total = 0
    calls = 0
    lo = np.empty(dim, dtype=np.int64)
    hi = np.empty(dim, dtype=np.int64)
    idx = np.empty(dim, dtype=np.int64)
    for r in range(n_rows):
        xA = x_points[r]
        for d in range(dim):
            lo[d] = 0
            hi[d] = y_shape[d] - 1
        for t in range(cand_ptr[r], cand_ptr[r + 1]):
            xs = x_points[cand_xs[t]]
            ys_id = cand_ys[t]
            ys = y_points[ys_id]
            a = cand_axis[t]
            slack = cand_slack[t]
            js = y_lat[ys_id, a]
            base = 0
            for d in range(dim):
                base += y_lat[ys_id, d] * y_strides[d]
            base -= js * y_strides[a]
            if cand_dir[t] > 0:
                # survivors form a prefix along axis a; find its end
                lo_b = js
                hi_b = hi[a]
                while lo_b < hi_b:
                    mid = (lo_b + hi_b + 1) // 2
                    yB = y_points[y_cell_of[base + mid * y_strides[a]]]
                    calls += 1
                    if shields_pt(code, p, xA, xs, ys, yB, slack):
                        hi_b = mid - 1
                    else:
                        lo_b = mid
                if hi[a] > lo_b:
                    hi[a] = lo_b
            else:
                lo_b = lo[a]
                hi_b = js
                while lo_b < hi_b:
                    mid = (lo_b + hi_b) // 2
                    yB = y_points[y_cell_of[base + mid * y_strides[a]]]
                    calls += 1
                    if shields_pt(code, p, xA, xs, ys, yB, slack):
                        lo_b = mid + 1
                    else:
                        hi_b = mid
                if lo[a] < lo_b:
                    lo[a] = lo_b
        count = 1
        for d in range(dim):
            span = hi[d] - lo[d] + 1
            count = count * span if span > 0 else 0
        if count == 0:
            row_ptr[r + 1] = total
            continue
        while total + count > cap:
            cap *= 2
            grown = np.empty(cap, dtype=np.int64)
            grown[:total] = out[:total]
            out = grown
        for d in range(dim):
            idx[d] = lo[d]
        while True:
            flat = 0
            for d in range(dim):
                flat += idx[d] * y_strides[d]
            out[total] = y_cell_of[flat]
            total += 1
            d = dim - 1
            while d >= 0:
                idx[d] += 1
                if idx[d] <= hi[d]:
                    break
                idx[d] = lo[d]
                d -= 1
            if d < 0:
                break
        row_ptr[r + 1] = total
        seg = out[row_ptr[r] : total]
        seg.sort()
    return out[:total], row_ptr, calls
