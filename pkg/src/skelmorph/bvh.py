"""Axis-aligned BVH over mesh triangles plus the query front-end.

build_bvh produces flat arrays shared by both kernel backends. MeshQuery
owns the arrays and dispatches each query to the numba traversal or the
numpy brute-force fallback depending on the active backend.
"""

import numpy as np

from ._backend import NUMBA_ENABLED
from . import _kernels_numpy as knp

if NUMBA_ENABLED:
    from . import _kernels_numba as knb

LEAF_SIZE = 8
WINDING_BETA = 2.0
GRAZE_TOL = 1e-7
DUPLICATE_HIT_TOL = 1e-9

__all__ = ["MeshQuery", "build_bvh"]


def build_bvh(va, vb, vc, leaf_size=LEAF_SIZE):
    """Median-split BVH. Returns a dict of flat arrays:

    nmin/nmax (K,3), left/right (K,), lstart/lcount (K,), tri_order (m,)
    plus winding-number cluster data wcenter/wdipole/wradius.
    Leaf nodes have left == -1 and triangle range [lstart, lstart+lcount).
    """
    m = va.shape[0]
    centroids = (va + vb + vc) / 3.0
    tmin = np.minimum(np.minimum(va, vb), vc)
    tmax = np.maximum(np.maximum(va, vb), vc)

    areas_vec = 0.5 * np.cross(vb - va, vc - va)  # area-weighted normals

    order = np.arange(m)
    nmin, nmax = [], []
    left, right = [], []
    lstart, lcount = [], []

    # (start, end, node_index) work stack; children patched after allocation
    def alloc():
        nmin.append(None)
        nmax.append(None)
        left.append(-1)
        right.append(-1)
        lstart.append(0)
        lcount.append(0)
        return len(nmin) - 1

    root = alloc()
    stack = [(0, m, root)]
    while stack:
        s, e, node = stack.pop()
        idx = order[s:e]
        nmin[node] = tmin[idx].min(axis=0)
        nmax[node] = tmax[idx].max(axis=0)
        if e - s <= leaf_size:
            lstart[node] = s
            lcount[node] = e - s
            continue
        cen = centroids[idx]
        spread = cen.max(axis=0) - cen.min(axis=0)
        axis = int(np.argmax(spread))
        if spread[axis] <= 0.0:
            lstart[node] = s
            lcount[node] = e - s
            continue
        local = np.argsort(cen[:, axis], kind="stable")
        order[s:e] = idx[local]
        mid = s + (e - s) // 2
        l = alloc()
        r = alloc()
        left[node] = l
        right[node] = r
        stack.append((s, mid, l))
        stack.append((mid, e, r))

    K = len(nmin)
    nmin = np.asarray(nmin, np.float64)
    nmax = np.asarray(nmax, np.float64)
    left = np.asarray(left, np.int64)
    right = np.asarray(right, np.int64)
    lstart = np.asarray(lstart, np.int64)
    lcount = np.asarray(lcount, np.int64)

    # permuted triangle data in leaf order
    ta = np.ascontiguousarray(va[order])
    tb = np.ascontiguousarray(vb[order])
    tc = np.ascontiguousarray(vc[order])

    # winding clusters: per-node area-vector sum, area-weighted centroid,
    # bounding radius (computed bottom-up via a reverse topological pass)
    areas = np.linalg.norm(areas_vec, axis=1)
    pa = areas[order]
    pav = areas_vec[order]
    pc = centroids[order]
    wdipole = np.zeros((K, 3))
    wcenter = np.zeros((K, 3))
    warea = np.zeros(K)
    wradius = np.zeros(K)
    # children always have larger indices than parents, so reverse order works
    for node in range(K - 1, -1, -1):
        if left[node] < 0:
            s, c = lstart[node], lcount[node]
            sl = slice(s, s + c)
            wdipole[node] = pav[sl].sum(axis=0)
            a = pa[sl].sum()
            warea[node] = a
            if a > 0:
                wcenter[node] = (pa[sl, None] * pc[sl]).sum(axis=0) / a
            else:
                wcenter[node] = pc[sl].mean(axis=0) if c else 0.0
        else:
            l, r = left[node], right[node]
            wdipole[node] = wdipole[l] + wdipole[r]
            a = warea[l] + warea[r]
            warea[node] = a
            if a > 0:
                wcenter[node] = (warea[l] * wcenter[l] + warea[r] * wcenter[r]) / a
            else:
                wcenter[node] = 0.5 * (wcenter[l] + wcenter[r])
    # radius bounds all subtree vertices; use node AABB corner distance
    corner = np.maximum(np.abs(nmin - wcenter), np.abs(nmax - wcenter))
    wradius = np.linalg.norm(corner, axis=1)

    return {
        "nmin": nmin,
        "nmax": nmax,
        "left": left,
        "right": right,
        "lstart": lstart,
        "lcount": lcount,
        "tri_order": order.astype(np.int64),
        "ta": ta,
        "tb": tb,
        "tc": tc,
        "wcenter": wcenter,
        "wdipole": wdipole,
        "wradius": wradius,
    }


class MeshQuery:
    """Spatial query structure for a fixed triangle soup."""

    def __init__(self, vertices, faces):
        self.va = np.ascontiguousarray(vertices[faces[:, 0]], np.float64)
        self.vb = np.ascontiguousarray(vertices[faces[:, 1]], np.float64)
        self.vc = np.ascontiguousarray(vertices[faces[:, 2]], np.float64)
        n = np.cross(self.vb - self.va, self.vc - self.va)
        ln = np.linalg.norm(n, axis=1)
        ln[ln == 0] = 1.0
        self.face_normals = n / ln[:, None]
        self._bvh = build_bvh(self.va, self.vb, self.vc)
        # face normals permuted into leaf order for the ray kernel
        self._tn = np.ascontiguousarray(self.face_normals[self._bvh["tri_order"]])

    def closest_points(self, points):
        """(q, face, dist) for each query point; lowest face index on ties."""
        points = np.ascontiguousarray(np.atleast_2d(points), np.float64)
        if NUMBA_ENABLED:
            b = self._bvh
            return knb.bvh_closest_points(
                points,
                b["nmin"], b["nmax"], b["left"], b["right"],
                b["lstart"], b["lcount"], b["ta"], b["tb"], b["tc"],
                b["tri_order"],
            )
        return knp.closest_points_brute(points, self.va, self.vb, self.vc)

    def ray_hits(self, origin, direction):
        """Sorted hit parameters and face indices along one ray.

        Grazing triangles (|dir . normal| < 1e-7) are excluded and hits
        closer than 1e-9 apart are merged keeping the lower face index."""
        origin = np.asarray(origin, np.float64)
        direction = np.asarray(direction, np.float64)
        if NUMBA_ENABLED:
            b = self._bvh
            ts, faces, cnt = knb.bvh_ray_hits(
                origin[0], origin[1], origin[2],
                direction[0], direction[1], direction[2],
                b["nmin"], b["nmax"], b["left"], b["right"],
                b["lstart"], b["lcount"], b["ta"], b["tb"], b["tc"],
                self._tn, b["tri_order"], GRAZE_TOL,
            )
            ts = ts[:cnt]
            faces = faces[:cnt]
        else:
            ts, faces = knp.ray_hits_brute(
                origin, direction, self.va, self.vb, self.vc,
                self.face_normals, GRAZE_TOL,
            )
        if ts.size == 0:
            return ts, faces
        o = np.lexsort((faces, ts))
        ts = ts[o]
        faces = faces[o]
        keep = np.ones(ts.size, bool)
        last = ts[0]
        for i in range(1, ts.size):
            if ts[i] - last <= DUPLICATE_HIT_TOL:
                keep[i] = False
            else:
                last = ts[i]
        return ts[keep], faces[keep]

    def winding_numbers(self, points):
        points = np.ascontiguousarray(np.atleast_2d(points), np.float64)
        if NUMBA_ENABLED:
            b = self._bvh
            return knb.bvh_winding_numbers(
                points,
                b["nmin"], b["nmax"], b["left"], b["right"],
                b["lstart"], b["lcount"], b["ta"], b["tb"], b["tc"],
                b["wcenter"], b["wdipole"], b["wradius"], WINDING_BETA,
            )
        return knp.winding_numbers_brute(points, self.va, self.vb, self.vc)
