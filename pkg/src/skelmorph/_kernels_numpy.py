"""Pure-numpy fallback kernels.

Brute force over all triangles, vectorized per query. Same results as the
numba BVH path up to summation order; used when SKELMORPH_BACKEND=numpy or
numba is unavailable.
"""

import numpy as np


def closest_points_brute(points, va, vb, vc):
    """Closest point on any triangle for each query point.

    va/vb/vc: (m,3) triangle vertices. Returns (q, face, dist)."""
    n = points.shape[0]
    out_q = np.empty((n, 3))
    out_f = np.empty(n, np.int64)
    out_d = np.empty(n)
    for i in range(n):
        q = _closest_on_tris(points[i], va, vb, vc)
        d2 = np.einsum("ij,ij->i", q - points[i], q - points[i])
        f = int(np.argmin(d2))  # argmin takes the lowest index on ties
        out_q[i] = q[f]
        out_f[i] = f
        out_d[i] = np.sqrt(d2[f])
    return out_q, out_f, out_d


def _closest_on_tris(p, a, b, c):
    """Vectorized Ericson closest-point-on-triangle for one p against all
    triangles. Returns (m,3) closest points."""
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)

    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    out = np.empty_like(a)
    done = np.zeros(a.shape[0], bool)

    m = (d1 <= 0) & (d2 <= 0)
    out[m] = a[m]
    done |= m

    m = ~done & (d3 >= 0) & (d4 <= d3)
    out[m] = b[m]
    done |= m

    m = ~done & (vc <= 0) & (d1 >= 0) & (d3 <= 0)
    if m.any():
        denom = d1[m] - d3[m]
        v = np.where(denom != 0, d1[m] / np.where(denom == 0, 1, denom), 0.0)
        v = np.clip(v, 0.0, 1.0)
        out[m] = a[m] + v[:, None] * ab[m]
    done |= m

    m = ~done & (d6 >= 0) & (d5 <= d6)
    out[m] = c[m]
    done |= m

    m = ~done & (vb <= 0) & (d2 >= 0) & (d6 <= 0)
    if m.any():
        denom = d2[m] - d6[m]
        w = np.where(denom != 0, d2[m] / np.where(denom == 0, 1, denom), 0.0)
        w = np.clip(w, 0.0, 1.0)
        out[m] = a[m] + w[:, None] * ac[m]
    done |= m

    m = ~done & (va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0)
    if m.any():
        denom = (d4[m] - d3[m]) + (d5[m] - d6[m])
        w = np.where(denom != 0, (d4[m] - d3[m]) / np.where(denom == 0, 1, denom), 0.0)
        w = np.clip(w, 0.0, 1.0)
        out[m] = b[m] + w[:, None] * (c[m] - b[m])
    done |= m

    m = ~done
    if m.any():
        denom = va[m] + vb[m] + vc[m]
        safe = np.where(denom == 0, 1.0, denom)
        v = np.where(denom != 0, vb[m] / safe, 0.0)
        w = np.where(denom != 0, vc[m] / safe, 0.0)
        out[m] = a[m] + v[:, None] * ab[m] + w[:, None] * ac[m]
    return out


def ray_hits_brute(origin, direction, va, vb, vc, tn, graze_tol):
    """All non-grazing ray/triangle hits (Moller-Trumbore, vectorized).

    Returns (ts, faces) unsorted."""
    d = direction
    ndot = tn @ d
    keep = np.abs(ndot) >= graze_tol

    e1 = vb - va
    e2 = vc - va
    pv = np.cross(np.broadcast_to(d, e2.shape), e2)
    det = np.einsum("ij,ij->i", e1, pv)
    keep &= np.abs(det) >= 1e-300
    inv = np.where(keep, 1.0 / np.where(det == 0, 1, det), 0.0)
    tv = origin - va
    u = np.einsum("ij,ij->i", tv, pv) * inv
    keep &= (u >= -1e-10) & (u <= 1 + 1e-10)
    qv = np.cross(tv, e1)
    v = qv @ d * inv
    keep &= (v >= -1e-10) & (u + v <= 1 + 1e-10)
    t = np.einsum("ij,ij->i", e2, qv) * inv
    keep &= t >= -1e-12
    faces = np.nonzero(keep)[0]
    return np.maximum(t[keep], 0.0), faces


def winding_numbers_brute(points, va, vb, vc):
    """Exact generalized winding number (sum of triangle solid angles)."""
    out = np.empty(points.shape[0])
    for i, p in enumerate(points):
        A = va - p
        B = vb - p
        C = vc - p
        la = np.linalg.norm(A, axis=1)
        lb = np.linalg.norm(B, axis=1)
        lc = np.linalg.norm(C, axis=1)
        numer = np.einsum("ij,ij->i", A, np.cross(B, C))
        denom = (
            la * lb * lc
            + np.einsum("ij,ij->i", A, B) * lc
            + np.einsum("ij,ij->i", B, C) * la
            + np.einsum("ij,ij->i", C, A) * lb
        )
        out[i] = np.arctan2(numer, denom).sum() / (2.0 * np.pi)
    return out


def gauss_kernel_apply(points, centers, alphas, sigma):
    d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return np.exp(-d2 / (sigma * sigma)) @ alphas


def gauss_kernel_back(points, centers, alphas, lambdas, sigma):
    """Adjoint products of the Gaussian velocity field (see numba twin)."""
    diff = points[:, None, :] - centers[None, :, :]
    g = np.exp(-(diff ** 2).sum(axis=2) / (sigma * sigma))
    s = g * (lambdas @ alphas.T) * (2.0 / (sigma * sigma))
    out_p = -(s[:, :, None] * diff).sum(axis=1)
    out_c = (s[:, :, None] * diff).sum(axis=0)
    out_a = g.T @ lambdas
    return out_p, out_c, out_a
