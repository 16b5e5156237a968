"""BVH-accelerated geometry kernels compiled with numba.

All traversals are iterative with fixed-size stacks; no recursion, no
allocation inside the per-triangle loops. The BVH layout is produced by
bvh.build_bvh and shared with the numpy fallback.
"""

import math

import numpy as np
from numba import njit

STACK_CAP = 128


@njit(cache=True, inline="always")
def _clamp01(x):
    if x < 0.0:
        return 0.0
    if x > 1.0:
        return 1.0
    return x


@njit(cache=True, inline="always")
def _closest_on_tri(px, py, pz, ax, ay, az, bx, by, bz, cx, cy, cz):
    """Closest point to p on triangle abc (Ericson, Real-Time Collision
    Detection 5.1.5). Returns (qx, qy, qz)."""
    abx = bx - ax
    aby = by - ay
    abz = bz - az
    acx = cx - ax
    acy = cy - ay
    acz = cz - az
    apx = px - ax
    apy = py - ay
    apz = pz - az

    d1 = abx * apx + aby * apy + abz * apz
    d2 = acx * apx + acy * apy + acz * apz
    if d1 <= 0.0 and d2 <= 0.0:
        return ax, ay, az

    bpx = px - bx
    bpy = py - by
    bpz = pz - bz
    d3 = abx * bpx + aby * bpy + abz * bpz
    d4 = acx * bpx + acy * bpy + acz * bpz
    if d3 >= 0.0 and d4 <= d3:
        return bx, by, bz

    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        denom = d1 - d3
        v = d1 / denom if denom != 0.0 else 0.0
        v = _clamp01(v)
        return ax + v * abx, ay + v * aby, az + v * abz

    cpx = px - cx
    cpy = py - cy
    cpz = pz - cz
    d5 = abx * cpx + aby * cpy + abz * cpz
    d6 = acx * cpx + acy * cpy + acz * cpz
    if d6 >= 0.0 and d5 <= d6:
        return cx, cy, cz

    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        denom = d2 - d6
        w = d2 / denom if denom != 0.0 else 0.0
        w = _clamp01(w)
        return ax + w * acx, ay + w * acy, az + w * acz

    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        denom = (d4 - d3) + (d5 - d6)
        w = (d4 - d3) / denom if denom != 0.0 else 0.0
        w = _clamp01(w)
        return bx + w * (cx - bx), by + w * (cy - by), bz + w * (cz - bz)

    denom = va + vb + vc
    if denom == 0.0:
        return ax, ay, az
    inv = 1.0 / denom
    v = vb * inv
    w = vc * inv
    return (
        ax + abx * v + acx * w,
        ay + aby * v + acy * w,
        az + abz * v + acz * w,
    )


@njit(cache=True, inline="always")
def _aabb_dist2(px, py, pz, mnx, mny, mnz, mxx, mxy, mxz):
    dx = 0.0
    if px < mnx:
        dx = mnx - px
    elif px > mxx:
        dx = px - mxx
    dy = 0.0
    if py < mny:
        dy = mny - py
    elif py > mxy:
        dy = py - mxy
    dz = 0.0
    if pz < mnz:
        dz = mnz - pz
    elif pz > mxz:
        dz = pz - mxz
    return dx * dx + dy * dy + dz * dz


@njit(cache=True)
def bvh_closest_points(
    points,
    nmin,
    nmax,
    left,
    right,
    lstart,
    lcount,
    ta,
    tb,
    tc,
    tri_order,
):
    n = points.shape[0]
    out_q = np.empty((n, 3), np.float64)
    out_face = np.empty(n, np.int64)
    out_d = np.empty(n, np.float64)
    stack = np.empty(STACK_CAP, np.int64)
    for i in range(n):
        px = points[i, 0]
        py = points[i, 1]
        pz = points[i, 2]
        best_d2 = np.inf
        best_face = -1
        bqx = 0.0
        bqy = 0.0
        bqz = 0.0
        top = 0
        stack[0] = 0
        top = 1
        while top > 0:
            top -= 1
            node = stack[top]
            nd2 = _aabb_dist2(
                px, py, pz,
                nmin[node, 0], nmin[node, 1], nmin[node, 2],
                nmax[node, 0], nmax[node, 1], nmax[node, 2],
            )
            if nd2 > best_d2:
                continue
            if left[node] < 0:
                s = lstart[node]
                e = s + lcount[node]
                for k in range(s, e):
                    qx, qy, qz = _closest_on_tri(
                        px, py, pz,
                        ta[k, 0], ta[k, 1], ta[k, 2],
                        tb[k, 0], tb[k, 1], tb[k, 2],
                        tc[k, 0], tc[k, 1], tc[k, 2],
                    )
                    dx = px - qx
                    dy = py - qy
                    dz = pz - qz
                    d2 = dx * dx + dy * dy + dz * dz
                    f = tri_order[k]
                    if d2 < best_d2 or (d2 == best_d2 and f < best_face):
                        best_d2 = d2
                        best_face = f
                        bqx = qx
                        bqy = qy
                        bqz = qz
            else:
                l = left[node]
                r = right[node]
                dl = _aabb_dist2(
                    px, py, pz,
                    nmin[l, 0], nmin[l, 1], nmin[l, 2],
                    nmax[l, 0], nmax[l, 1], nmax[l, 2],
                )
                dr = _aabb_dist2(
                    px, py, pz,
                    nmin[r, 0], nmin[r, 1], nmin[r, 2],
                    nmax[r, 0], nmax[r, 1], nmax[r, 2],
                )
                # push farther child first so the nearer pops first
                if dl <= dr:
                    stack[top] = r
                    top += 1
                    stack[top] = l
                    top += 1
                else:
                    stack[top] = l
                    top += 1
                    stack[top] = r
                    top += 1
        out_q[i, 0] = bqx
        out_q[i, 1] = bqy
        out_q[i, 2] = bqz
        out_face[i] = best_face
        out_d[i] = math.sqrt(best_d2)
    return out_q, out_face, out_d


@njit(cache=True, inline="always")
def _ray_aabb(ox, oy, oz, dx, dy, dz, mnx, mny, mnz, mxx, mxy, mxz):
    tmin = -np.inf
    tmax = np.inf
    if abs(dx) < 1e-300:
        if ox < mnx or ox > mxx:
            return False
    else:
        inv = 1.0 / dx
        t1 = (mnx - ox) * inv
        t2 = (mxx - ox) * inv
        if t1 > t2:
            t1, t2 = t2, t1
        if t1 > tmin:
            tmin = t1
        if t2 < tmax:
            tmax = t2
    if abs(dy) < 1e-300:
        if oy < mny or oy > mxy:
            return False
    else:
        inv = 1.0 / dy
        t1 = (mny - oy) * inv
        t2 = (mxy - oy) * inv
        if t1 > t2:
            t1, t2 = t2, t1
        if t1 > tmin:
            tmin = t1
        if t2 < tmax:
            tmax = t2
    if abs(dz) < 1e-300:
        if oz < mnz or oz > mxz:
            return False
    else:
        inv = 1.0 / dz
        t1 = (mnz - oz) * inv
        t2 = (mxz - oz) * inv
        if t1 > t2:
            t1, t2 = t2, t1
        if t1 > tmin:
            tmin = t1
        if t2 < tmax:
            tmax = t2
    return tmax >= tmin and tmax >= 0.0


@njit(cache=True)
def bvh_ray_hits(
    ox,
    oy,
    oz,
    dx,
    dy,
    dz,
    nmin,
    nmax,
    left,
    right,
    lstart,
    lcount,
    ta,
    tb,
    tc,
    tn,
    tri_order,
    graze_tol,
):
    """All ray/triangle hits with t >= 0, grazing triangles excluded.

    Returns (ts, faces, count); arrays are oversized, caller trims."""
    cap = 256
    ts = np.empty(cap, np.float64)
    faces = np.empty(cap, np.int64)
    cnt = 0
    stack = np.empty(STACK_CAP, np.int64)
    stack[0] = 0
    top = 1
    while top > 0:
        top -= 1
        node = stack[top]
        if not _ray_aabb(
            ox, oy, oz, dx, dy, dz,
            nmin[node, 0], nmin[node, 1], nmin[node, 2],
            nmax[node, 0], nmax[node, 1], nmax[node, 2],
        ):
            continue
        if left[node] < 0:
            s = lstart[node]
            e = s + lcount[node]
            for k in range(s, e):
                ndot = dx * tn[k, 0] + dy * tn[k, 1] + dz * tn[k, 2]
                if abs(ndot) < graze_tol:
                    continue
                ax = ta[k, 0]
                ay = ta[k, 1]
                az = ta[k, 2]
                e1x = tb[k, 0] - ax
                e1y = tb[k, 1] - ay
                e1z = tb[k, 2] - az
                e2x = tc[k, 0] - ax
                e2y = tc[k, 1] - ay
                e2z = tc[k, 2] - az
                pvx = dy * e2z - dz * e2y
                pvy = dz * e2x - dx * e2z
                pvz = dx * e2y - dy * e2x
                det = e1x * pvx + e1y * pvy + e1z * pvz
                if abs(det) < 1e-300:
                    continue
                inv = 1.0 / det
                tvx = ox - ax
                tvy = oy - ay
                tvz = oz - az
                u = (tvx * pvx + tvy * pvy + tvz * pvz) * inv
                if u < -1e-10 or u > 1.0 + 1e-10:
                    continue
                qvx = tvy * e1z - tvz * e1y
                qvy = tvz * e1x - tvx * e1z
                qvz = tvx * e1y - tvy * e1x
                v = (dx * qvx + dy * qvy + dz * qvz) * inv
                if v < -1e-10 or u + v > 1.0 + 1e-10:
                    continue
                t = (e2x * qvx + e2y * qvy + e2z * qvz) * inv
                if t < -1e-12:
                    continue
                if cnt < cap:
                    ts[cnt] = t if t > 0.0 else 0.0
                    faces[cnt] = tri_order[k]
                    cnt += 1
        else:
            stack[top] = left[node]
            top += 1
            stack[top] = right[node]
            top += 1
    return ts, faces, cnt


@njit(cache=True, inline="always")
def _tri_solid_angle(px, py, pz, ax, ay, az, bx, by, bz, cx, cy, cz):
    """Signed solid angle of triangle abc seen from p (van Oosterom &
    Strackee 1983)."""
    vax = ax - px
    vay = ay - py
    vaz = az - pz
    vbx = bx - px
    vby = by - py
    vbz = bz - pz
    vcx = cx - px
    vcy = cy - py
    vcz = cz - pz
    la = math.sqrt(vax * vax + vay * vay + vaz * vaz)
    lb = math.sqrt(vbx * vbx + vby * vby + vbz * vbz)
    lc = math.sqrt(vcx * vcx + vcy * vcy + vcz * vcz)
    numer = (
        vax * (vby * vcz - vbz * vcy)
        - vay * (vbx * vcz - vbz * vcx)
        + vaz * (vbx * vcy - vby * vcx)
    )
    ab = vax * vbx + vay * vby + vaz * vbz
    bc = vbx * vcx + vby * vcy + vbz * vcz
    ca = vcx * vax + vcy * vay + vcz * vaz
    denom = la * lb * lc + ab * lc + bc * la + ca * lb
    return 2.0 * math.atan2(numer, denom)


@njit(cache=True)
def bvh_winding_numbers(
    points,
    nmin,
    nmax,
    left,
    right,
    lstart,
    lcount,
    ta,
    tb,
    tc,
    wcenter,
    wdipole,
    wradius,
    beta,
):
    """Generalized winding number per query point.

    Far nodes use the first-order dipole approximation of Barill et al.;
    near nodes recurse down to exact per-triangle solid angles."""
    n = points.shape[0]
    out = np.empty(n, np.float64)
    stack = np.empty(STACK_CAP, np.int64)
    inv4pi = 1.0 / (4.0 * math.pi)
    for i in range(n):
        px = points[i, 0]
        py = points[i, 1]
        pz = points[i, 2]
        w = 0.0
        stack[0] = 0
        top = 1
        while top > 0:
            top -= 1
            node = stack[top]
            rx = wcenter[node, 0] - px
            ry = wcenter[node, 1] - py
            rz = wcenter[node, 2] - pz
            dist = math.sqrt(rx * rx + ry * ry + rz * rz)
            if dist > beta * wradius[node]:
                d3 = dist * dist * dist
                w += (
                    (wdipole[node, 0] * rx + wdipole[node, 1] * ry + wdipole[node, 2] * rz)
                    / d3
                ) * inv4pi
                continue
            if left[node] < 0:
                s = lstart[node]
                e = s + lcount[node]
                for k in range(s, e):
                    w += _tri_solid_angle(
                        px, py, pz,
                        ta[k, 0], ta[k, 1], ta[k, 2],
                        tb[k, 0], tb[k, 1], tb[k, 2],
                        tc[k, 0], tc[k, 1], tc[k, 2],
                    ) * inv4pi
            else:
                stack[top] = left[node]
                top += 1
                stack[top] = right[node]
                top += 1
        out[i] = w
    return out


@njit(cache=True)
def gauss_kernel_apply(points, centers, alphas, sigma):
    """v(x_i) = sum_k exp(-|x_i - c_k|^2 / sigma^2) * alpha_k"""
    n = points.shape[0]
    m = centers.shape[0]
    out = np.zeros((n, 3), np.float64)
    inv_s2 = 1.0 / (sigma * sigma)
    for i in range(n):
        px = points[i, 0]
        py = points[i, 1]
        pz = points[i, 2]
        ox = 0.0
        oy = 0.0
        oz = 0.0
        for k in range(m):
            dx = px - centers[k, 0]
            dy = py - centers[k, 1]
            dz = pz - centers[k, 2]
            g = math.exp(-(dx * dx + dy * dy + dz * dz) * inv_s2)
            ox += g * alphas[k, 0]
            oy += g * alphas[k, 1]
            oz += g * alphas[k, 2]
        out[i, 0] = ox
        out[i, 1] = oy
        out[i, 2] = oz
    return out


@njit(cache=True)
def gauss_kernel_back(points, centers, alphas, lambdas, sigma):
    """Adjoint products of the Gaussian velocity field.

    out_p[i] = sum_k dK/dp_i * (alpha_k . lambda_i)
    out_c[k] = sum_i dK/dc_k * (alpha_k . lambda_i)
    out_a[k] = sum_i K(p_i, c_k) * lambda_i
    """
    n = points.shape[0]
    m = centers.shape[0]
    out_p = np.zeros((n, 3), np.float64)
    out_c = np.zeros((m, 3), np.float64)
    out_a = np.zeros((m, 3), np.float64)
    inv_s2 = 1.0 / (sigma * sigma)
    for i in range(n):
        px = points[i, 0]
        py = points[i, 1]
        pz = points[i, 2]
        lx = lambdas[i, 0]
        ly = lambdas[i, 1]
        lz = lambdas[i, 2]
        opx = 0.0
        opy = 0.0
        opz = 0.0
        for k in range(m):
            dx = px - centers[k, 0]
            dy = py - centers[k, 1]
            dz = pz - centers[k, 2]
            g = math.exp(-(dx * dx + dy * dy + dz * dz) * inv_s2)
            s = (alphas[k, 0] * lx + alphas[k, 1] * ly +
                 alphas[k, 2] * lz) * g * 2.0 * inv_s2
            opx -= s * dx
            opy -= s * dy
            opz -= s * dz
            out_c[k, 0] += s * dx
            out_c[k, 1] += s * dy
            out_c[k, 2] += s * dz
            out_a[k, 0] += g * lx
            out_a[k, 1] += g * ly
            out_a[k, 2] += g * lz
        out_p[i, 0] = opx
        out_p[i, 1] = opy
        out_p[i, 2] = opz
    return out_p, out_c, out_a
