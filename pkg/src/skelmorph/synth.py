"""Analytic test shapes, planted landmarks, erosion, and noise.

Each generator returns a watertight TriangleMesh plus a GroundTruth closure:
the true medial sheet sampler, the true thickness at any interior point, and
five landmarks at analytically defined loci. Shapes are desk-scale stand-ins
for the anatomy the measurement pipeline targets.

Generators are deterministic: a fixed ShapeSpec yields a byte-identical
mesh. Randomness only enters through perturb(), which is seeded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ComponentSplit, ParseError
from .mesh import TriangleMesh
from .skeleton import CompositeGrid

__all__ = ["ShapeSpec", "ErosionSpec", "GroundTruth", "make_shape", "erode", "perturb"]

DEFAULT_DIMS = {
    "slab": {"lx": 20.0, "ly": 10.0, "lz": 4.0},
    "ellipsoid": {"a": 10.0, "b": 8.0, "c": 6.0},
    "bent_tube": {"arc_radius": 10.0, "tube_radius": 3.0, "sweep_deg": 90.0},
    "crescent": {
        "arc_radius": 15.0,
        "sweep_deg": 150.0,
        "tube_radius_start": 4.0,
        "tube_radius_end": 2.0,
    },
}

# fraction of the local half-thickness footprint covered by the analytic
# skeletal ribbon, kept < 1 so grid points stay strictly interior
RIBBON_FRACTION = 0.8


@dataclass(frozen=True)
class ShapeSpec:
    kind: str
    dimensions: dict = field(default_factory=dict)
    edge_length: float = 0.4  # tessellation density target (mm)
    seed: int = 0

    def dims(self) -> dict:
        if self.kind not in DEFAULT_DIMS:
            raise ParseError(f"unknown shape kind {self.kind!r}")
        d = dict(DEFAULT_DIMS[self.kind])
        d.update(self.dimensions)
        if any(v <= 0 for v in d.values()):
            raise ParseError("shape dimensions must be positive")
        if self.edge_length <= 0:
            raise ParseError("edge_length must be positive")
        return d


@dataclass(frozen=True)
class ErosionSpec:
    """Progressive inward erosion of one zone of a shape.

    region: ("halfspace", normal, offset) erodes where dot(x, normal) >= offset,
    or ("u_interval", u0, u1) in the shape's longitudinal parameter (requires
    truth.u_of_point). depths must be strictly increasing.
    """

    region: tuple
    depths: tuple
    blend_mm: float = 1.0
    u_of_point: Optional[Callable] = None

    def __post_init__(self):
        d = tuple(self.depths)
        if any(b <= a for a, b in zip(d, d[1:])):
            raise ParseError("erosion depths must be strictly increasing")
        if self.region[0] not in ("halfspace", "u_interval"):
            raise ParseError("region must be 'halfspace' or 'u_interval'")
        if self.region[0] == "u_interval" and self.u_of_point is None:
            raise ParseError("u_interval region requires u_of_point")


@dataclass
class GroundTruth:
    """Analytic oracle bundled with a generated shape."""

    kind: str
    medial_point: Callable  # (u, v) -> 3D point on the true skeletal sheet
    medial_normal: Callable  # (u, v) -> unit +normal ("superior" side)
    thickness_at: Callable  # (points (n,3)) -> true full thickness (nan outside)
    landmarks: np.ndarray  # (5, 3) positions
    landmark_names: list
    landmark_uv: np.ndarray  # (5, 2) sheet parameters of each landmark
    u_of_point: Optional[Callable] = None  # longitudinal parameter of a 3D point
    params: dict = field(default_factory=dict)

    def sheet_grid(self, g_u: int, g_v: int):
        """Sample the analytic sheet on a uniform (g_u, g_v) parameter grid.

        Returns (points (g_u*g_v, 3), normals, shape tuple)."""
        us = np.linspace(0.0, 1.0, g_u)
        vs = np.linspace(0.0, 1.0, g_v)
        pts = np.empty((g_u * g_v, 3))
        nrm = np.empty((g_u * g_v, 3))
        k = 0
        for u in us:
            for v in vs:
                pts[k] = self.medial_point(u, v)
                nrm[k] = self.medial_normal(u, v)
                k += 1
        return pts, nrm, (g_u, g_v)


# ---------------------------------------------------------------- builders


def _slab_mesh(lx, ly, lz, edge):
    nx = max(1, round(lx / edge))
    ny = max(1, round(ly / edge))
    nz = max(1, round(lz / edge))
    hx, hy, hz = lx / 2.0, ly / 2.0, lz / 2.0
    xs = np.linspace(-hx, hx, nx + 1)
    ys = np.linspace(-hy, hy, ny + 1)
    zs = np.linspace(-hz, hz, nz + 1)

    index = {}
    verts = []

    def vid(i, j, k):
        key = (i, j, k)
        if key not in index:
            index[key] = len(verts)
            verts.append((xs[i], ys[j], zs[k]))
        return index[key]

    faces = []

    def quad(a, b, c, d):
        faces.append((a, b, c))
        faces.append((a, c, d))

    for i in range(nx):
        for j in range(ny):
            quad(vid(i, j, nz), vid(i + 1, j, nz), vid(i + 1, j + 1, nz), vid(i, j + 1, nz))
            quad(vid(i, j, 0), vid(i, j + 1, 0), vid(i + 1, j + 1, 0), vid(i + 1, j, 0))
    for i in range(nx):
        for k in range(nz):
            quad(vid(i, 0, k), vid(i + 1, 0, k), vid(i + 1, 0, k + 1), vid(i, 0, k + 1))
            quad(vid(i, ny, k), vid(i, ny, k + 1), vid(i + 1, ny, k + 1), vid(i + 1, ny, k))
    for j in range(ny):
        for k in range(nz):
            quad(vid(0, j, k), vid(0, j, k + 1), vid(0, j + 1, k + 1), vid(0, j + 1, k))
            quad(vid(nx, j, k), vid(nx, j + 1, k), vid(nx, j + 1, k + 1), vid(nx, j, k + 1))
    return TriangleMesh(np.array(verts), np.array(faces))


_ICO_T = (1.0 + math.sqrt(5.0)) / 2.0
_ICO_VERTS = np.array(
    [
        (-1, _ICO_T, 0), (1, _ICO_T, 0), (-1, -_ICO_T, 0), (1, -_ICO_T, 0),
        (0, -1, _ICO_T), (0, 1, _ICO_T), (0, -1, -_ICO_T), (0, 1, -_ICO_T),
        (_ICO_T, 0, -1), (_ICO_T, 0, 1), (-_ICO_T, 0, -1), (-_ICO_T, 0, 1),
    ],
    np.float64,
)
_ICO_FACES = np.array(
    [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ],
    np.int64,
)


def icosphere(subdivisions: int):
    """Unit icosphere; V = 10*4^n + 2 vertices."""
    verts = _ICO_VERTS / np.linalg.norm(_ICO_VERTS, axis=1)[:, None]
    verts = [tuple(v) for v in verts]
    faces = [tuple(f) for f in _ICO_FACES]
    for _ in range(subdivisions):
        cache = {}
        new_faces = []

        def midpoint(i, j):
            key = (i, j) if i < j else (j, i)
            if key not in cache:
                v = np.array(verts[i]) + np.array(verts[j])
                v /= np.linalg.norm(v)
                cache[key] = len(verts)
                verts.append(tuple(v))
            return cache[key]

        for a, b, c in faces:
            ab = midpoint(a, b)
            bc = midpoint(b, c)
            ca = midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    return np.array(verts), np.array(faces, np.int64)


def _ellipsoid_mesh(a, b, c, edge):
    # icosahedron edge on the unit sphere is ~1.0515; halves per subdivision
    r = max(a, b, c)
    n = 0
    while 1.0515 * r / (2 ** n) > edge and n < 7:
        n += 1
    verts, faces = icosphere(n)
    verts = verts * np.array([a, b, c])
    return TriangleMesh(verts, faces)


def _lathe_tube_mesh(arc_radius, sweep_deg, rho_fn, edge):
    """Swept tube along a circular arc in the x-y plane, round caps.

    rho_fn(u) gives the tube radius at longitudinal parameter u in [0,1];
    u=0 at angle -sweep/2, u=1 at +sweep/2 (apex of the arc at +x, u=0.5).
    """
    half = math.radians(sweep_deg) / 2.0
    arc_len = arc_radius * 2.0 * half
    n_u = max(8, int(round(arc_len / edge)))
    rho_max = max(rho_fn(0.0), rho_fn(0.5), rho_fn(1.0))
    n_psi = max(8, int(round(2.0 * math.pi * rho_max / edge)))
    n_cap = max(2, int(round((math.pi / 2.0) * rho_max / edge)))

    def ring_center(u):
        th = -half + 2.0 * half * u
        return np.array([arc_radius * math.cos(th), arc_radius * math.sin(th), 0.0]), th

    verts = []
    rows = []  # each row: list of n_psi vertex ids (tube rings and cap rings)

    def add_ring(center, th, rad, tilt):
        """Ring of n_psi vertices; tilt in [-pi/2, pi/2] swings the ring off
        the cross-section plane toward the arc tangent (for the caps)."""
        rhat = np.array([math.cos(th), math.sin(th), 0.0])
        that = np.array([-math.sin(th), math.cos(th), 0.0])
        zhat = np.array([0.0, 0.0, 1.0])
        row = []
        ct, st = math.cos(tilt), math.sin(tilt)
        for k in range(n_psi):
            psi = 2.0 * math.pi * k / n_psi
            d = ct * (math.cos(psi) * rhat + math.sin(psi) * zhat) + st * that
            row.append(len(verts))
            verts.append(center + rad * d)
        rows.append(row)

    # posterior cap pole (tangent points toward decreasing u at u=0)
    c0, th0 = ring_center(0.0)
    rho0 = rho_fn(0.0)
    that0 = np.array([-math.sin(th0), math.cos(th0), 0.0])
    pole0 = len(verts)
    verts.append(c0 - rho0 * that0)
    for i in range(n_cap - 1, 0, -1):
        tilt = -(math.pi / 2.0) * i / n_cap
        add_ring(c0, th0, rho0, tilt)
    # tube rings
    for j in range(n_u + 1):
        u = j / n_u
        c, th = ring_center(u)
        add_ring(c, th, rho_fn(u), 0.0)
    # anterior cap
    c1, th1 = ring_center(1.0)
    rho1 = rho_fn(1.0)
    that1 = np.array([-math.sin(th1), math.cos(th1), 0.0])
    for i in range(1, n_cap):
        tilt = (math.pi / 2.0) * i / n_cap
        add_ring(c1, th1, rho1, tilt)
    pole1 = len(verts)
    verts.append(c1 + rho1 * that1)

    faces = []
    first = rows[0]
    for k in range(n_psi):
        faces.append((pole0, first[k], first[(k + 1) % n_psi]))
    for r0, r1 in zip(rows, rows[1:]):
        for k in range(n_psi):
            k1 = (k + 1) % n_psi
            faces.append((r0[k], r1[k], r1[k1]))
            faces.append((r0[k], r1[k1], r0[k1]))
    last = rows[-1]
    for k in range(n_psi):
        faces.append((pole1, last[(k + 1) % n_psi], last[k]))
    return TriangleMesh(np.array(verts), np.array(faces, np.int64))


# ------------------------------------------------------- ground-truth glue


def _tube_truth(kind, arc_radius, sweep_deg, rho_fn, params):
    half = math.radians(sweep_deg) / 2.0

    def theta(u):
        return -half + 2.0 * half * u

    def center(u):
        th = theta(u)
        return np.array([arc_radius * math.cos(th), arc_radius * math.sin(th), 0.0])

    def medial_point(u, v):
        th = theta(u)
        rhat = np.array([math.cos(th), math.sin(th), 0.0])
        lat = (2.0 * v - 1.0) * RIBBON_FRACTION * rho_fn(u)
        return center(u) + lat * rhat

    def medial_normal(u, v):
        return np.array([0.0, 0.0, 1.0])

    def u_of_point(p):
        p = np.asarray(p, np.float64)
        th = math.atan2(p[1], p[0]) if p.ndim == 1 else None
        if p.ndim == 1:
            return min(1.0, max(0.0, (th + half) / (2.0 * half)))
        th = np.arctan2(p[:, 1], p[:, 0])
        return np.clip((th + half) / (2.0 * half), 0.0, 1.0)

    def thickness_at(points, radius_loss_fn=None):
        """True z-chord through each point; nan where the point leaves the
        (possibly eroded) solid. radius_loss_fn(u) optionally shrinks the
        local tube radius (erosion oracle)."""
        pts = np.atleast_2d(np.asarray(points, np.float64))
        th = np.arctan2(pts[:, 1], pts[:, 0])
        u = np.clip((th + half) / (2.0 * half), 0.0, 1.0)
        rho = np.array([rho_fn(x) for x in u])
        if radius_loss_fn is not None:
            rho = rho - np.asarray([radius_loss_fn(x) for x in u])
        r_xy = np.hypot(pts[:, 0], pts[:, 1])
        d2 = (r_xy - arc_radius) ** 2 + pts[:, 2] ** 2
        val = rho * rho - d2
        out = np.where((val > 0) & (rho > 0), 2.0 * np.sqrt(np.maximum(val, 0.0)), np.nan)
        return out if np.asarray(points).ndim == 2 else float(out[0])

    def surf(u, psi):
        th = theta(u)
        rhat = np.array([math.cos(th), math.sin(th), 0.0])
        return center(u) + rho_fn(u) * (
            math.cos(psi) * rhat + math.sin(psi) * np.array([0.0, 0.0, 1.0])
        )

    landmarks = np.array(
        [
            surf(0.0, math.pi / 2.0),  # posterior end, superior aspect
            surf(1.0, math.pi / 2.0),  # anterior end, superior aspect
            surf(0.5, math.pi / 2.0),  # apex of curvature, superior aspect
            surf(0.5, math.pi / 3.0),  # outer-lateral shoulder at the apex
            surf(0.5, 2.0 * math.pi / 3.0),  # inner-lateral shoulder
        ]
    )
    # sheet parameters: v from lateral offset = cos(psi)*rho over the ribbon
    def v_of_psi(psi):
        return 0.5 + 0.5 * math.cos(psi) / RIBBON_FRACTION

    landmark_uv = np.array(
        [
            (0.0, v_of_psi(math.pi / 2.0)),
            (1.0, v_of_psi(math.pi / 2.0)),
            (0.5, v_of_psi(math.pi / 2.0)),
            (0.5, v_of_psi(math.pi / 3.0)),
            (0.5, v_of_psi(2.0 * math.pi / 3.0)),
        ]
    )
    return GroundTruth(
        kind=kind,
        medial_point=medial_point,
        medial_normal=medial_normal,
        thickness_at=thickness_at,
        landmarks=landmarks,
        landmark_names=[
            "posterior_end",
            "anterior_end",
            "apex",
            "lateral_outer",
            "lateral_inner",
        ],
        landmark_uv=landmark_uv,
        u_of_point=u_of_point,
        params=params,
    )


def make_shape(spec: ShapeSpec):
    """Build the mesh and its analytic oracle. Returns (mesh, GroundTruth)."""
    d = spec.dims()
    edge = spec.edge_length
    if spec.kind == "slab":
        lx, ly, lz = d["lx"], d["ly"], d["lz"]
        mesh = _slab_mesh(lx, ly, lz, edge)
        fx = (lx - lz) / 2.0  # central medial rectangle, wings excluded
        fy = (ly - lz) / 2.0

        def medial_point(u, v, fx=fx, fy=fy):
            return np.array([(2 * u - 1) * fx, (2 * v - 1) * fy, 0.0])

        def thickness_at(points, lx=lx, ly=ly, lz=lz):
            pts = np.atleast_2d(np.asarray(points, np.float64))
            ok = (np.abs(pts[:, 0]) <= lx / 2) & (np.abs(pts[:, 1]) <= ly / 2)
            out = np.where(ok, lz, np.nan)
            return out if np.asarray(points).ndim == 2 else float(out[0])

        landmarks = np.array(
            [
                (lx / 2, 0, 0), (-lx / 2, 0, 0),
                (0, ly / 2, 0), (0, -ly / 2, 0),
                (0, 0, lz / 2),
            ]
        )
        truth = GroundTruth(
            kind="slab",
            medial_point=medial_point,
            medial_normal=lambda u, v: np.array([0.0, 0.0, 1.0]),
            thickness_at=thickness_at,
            landmarks=landmarks,
            landmark_names=["x_plus", "x_minus", "y_plus", "y_minus", "top"],
            landmark_uv=np.array([(1.0, 0.5), (0.0, 0.5), (0.5, 1.0), (0.5, 0.0), (0.5, 0.5)]),
            u_of_point=lambda p, lx=lx: np.clip(
                (np.atleast_2d(np.asarray(p, np.float64))[:, 0] / lx) + 0.5, 0, 1
            ),
            params=d,
        )
        return mesh, truth

    if spec.kind == "ellipsoid":
        a, b, c = d["a"], d["b"], d["c"]
        if not (a >= b >= c):
            raise ParseError("ellipsoid requires a >= b >= c")
        mesh = _ellipsoid_mesh(a, b, c, edge)
        fa = (a * a - c * c) / a  # medial disk semi-axes
        fb = (b * b - c * c) / b if b > c else 0.0
        s = 1.0 / math.sqrt(2.0)  # inscribed rectangle of the medial ellipse

        def medial_point(u, v, fa=fa, fb=fb, s=s):
            return np.array([(2 * u - 1) * fa * s, (2 * v - 1) * fb * s, 0.0])

        def thickness_at(points, a=a, b=b, c=c):
            pts = np.atleast_2d(np.asarray(points, np.float64))
            val = 1.0 - (pts[:, 0] / a) ** 2 - (pts[:, 1] / b) ** 2
            out = np.where(val > 0, 2.0 * c * np.sqrt(np.maximum(val, 0)), np.nan)
            return out if np.asarray(points).ndim == 2 else float(out[0])

        landmarks = np.array(
            [(a, 0, 0), (-a, 0, 0), (0, b, 0), (0, -b, 0), (0, 0, c)]
        )
        truth = GroundTruth(
            kind="ellipsoid",
            medial_point=medial_point,
            medial_normal=lambda u, v: np.array([0.0, 0.0, 1.0]),
            thickness_at=thickness_at,
            landmarks=landmarks,
            landmark_names=["x_plus", "x_minus", "y_plus", "y_minus", "top"],
            landmark_uv=np.array([(1.0, 0.5), (0.0, 0.5), (0.5, 1.0), (0.5, 0.0), (0.5, 0.5)]),
            u_of_point=lambda p, a=a: np.clip(
                (np.atleast_2d(np.asarray(p, np.float64))[:, 0] / (2 * a)) + 0.5, 0, 1
            ),
            params=d,
        )
        return mesh, truth

    if spec.kind == "bent_tube":
        R, rho, sweep = d["arc_radius"], d["tube_radius"], d["sweep_deg"]
        mesh = _lathe_tube_mesh(R, sweep, lambda u: rho, edge)
        truth = _tube_truth("bent_tube", R, sweep, lambda u: rho, d)
        return mesh, truth

    if spec.kind == "crescent":
        R, sweep = d["arc_radius"], d["sweep_deg"]
        r0, r1 = d["tube_radius_start"], d["tube_radius_end"]

        def rho_fn(u, r0=r0, r1=r1):
            return r0 + (r1 - r0) * u

        mesh = _lathe_tube_mesh(R, sweep, rho_fn, edge)
        truth = _tube_truth("crescent", R, sweep, rho_fn, d)
        return mesh, truth

    raise ParseError(f"unknown shape kind {spec.kind!r}")


# ------------------------------------------------------------------ erosion


def _smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3.0 - 2.0 * x)


def erosion_weights(mesh: TriangleMesh, spec: ErosionSpec):
    """Per-vertex blend weight in [0, 1]: 1 deep inside the eroded region,
    0 outside the 1 mm blend band."""
    V = mesh.vertices
    if spec.region[0] == "halfspace":
        _, normal, offset = spec.region
        normal = np.asarray(normal, np.float64)
        normal = normal / np.linalg.norm(normal)
        signed = V @ normal - offset  # mm inside the half-space
        return _smoothstep(signed / spec.blend_mm + 1.0) * (signed > -spec.blend_mm)
    _, u0, u1 = spec.region
    u = np.asarray(spec.u_of_point(V), np.float64)
    # convert the parametric interval to a smooth weight; the 1 mm band is
    # approximated in parameter space via the local chord scale
    span = max(u1 - u0, 1e-12)
    # estimate mm-per-unit-u from the vertex spread along u
    order = np.argsort(u)
    arc_mm = np.linalg.norm(V[order[-1]] - V[order[0]])
    band_u = spec.blend_mm / max(arc_mm, 1e-9)
    w_lo = _smoothstep((u - (u0 - band_u)) / band_u)
    w_hi = _smoothstep(((u1 + band_u) - u) / band_u)
    return np.minimum(w_lo, w_hi)


def erode(mesh: TriangleMesh, spec: ErosionSpec, t: int) -> TriangleMesh:
    """Inward offset by depths[t] inside the region, 1 mm smooth blend band.

    Vertices outside the band keep their exact input coordinates. Where the
    offset meets the opposite wall the local patch collapses: its faces are
    removed and the hole is capped, so fully eroded zones disappear instead
    of inverting. Raises ComponentSplit if the result is disconnected.
    """
    depth = float(spec.depths[t])
    if depth == 0.0:
        return TriangleMesh(mesh.vertices.copy(), mesh.faces.copy())
    w = erosion_weights(mesh, spec)
    d_eff = depth * w
    V = mesh.vertices.copy()
    N = mesh.vertex_normals

    moving = d_eff > 1e-12
    collapse = np.zeros(mesh.n_vertices, bool)
    if moving.any():
        # offset-surface consumption test: the inward image of a vertex is
        # still on the eroded boundary iff no other wall is closer than its
        # own offset distance
        idx = np.nonzero(moving)[0]
        offset = V[idx] - d_eff[idx, None] * N[idx]
        _, _, clearance = mesh.query.closest_points(offset)
        # margin absorbs the chord-vs-arc sagitta of the faceted surface
        margin = 0.5 * float(np.median(mesh.edge_lengths()))
        coll = clearance < d_eff[idx] - margin
        collapse[idx[coll]] = True
        keep_move = idx[~coll]
        V[keep_move] -= d_eff[keep_move, None] * N[keep_move]

    if not collapse.any():
        out = TriangleMesh(V, mesh.faces.copy())
        return _check_connected(out)

    face_dead = collapse[mesh.faces].any(axis=1)
    faces = mesh.faces[~face_dead]
    if faces.size == 0:
        raise ComponentSplit("erosion consumed the entire shape")
    # cap each boundary loop with a centroid fan
    edge_count = {}
    for a, b, c in faces:
        for e in ((a, b), (b, c), (c, a)):
            key = (min(e), max(e))
            edge_count[key] = edge_count.get(key, 0) + 1
    boundary_dir = []
    for a, b, c in faces:
        for e in ((a, b), (b, c), (c, a)):
            if edge_count[(min(e), max(e))] == 1:
                boundary_dir.append(e)
    new_faces = [tuple(f) for f in faces]
    verts_list = [tuple(v) for v in V]
    if boundary_dir:
        nxt = {a: b for a, b in boundary_dir}
        seen = set()
        for a0 in list(nxt):
            if a0 in seen:
                continue
            loop = [a0]
            seen.add(a0)
            cur = nxt[a0]
            while cur != a0 and cur not in seen:
                loop.append(cur)
                seen.add(cur)
                if cur not in nxt:
                    break
                cur = nxt[cur]
            if len(loop) < 3:
                continue
            centroid = np.mean([verts_list[i] for i in loop], axis=0)
            cid = len(verts_list)
            verts_list.append(tuple(centroid))
            for i in range(len(loop)):
                a, b = loop[i], loop[(i + 1) % len(loop)]
                new_faces.append((b, a, cid))
    out = TriangleMesh(np.array(verts_list), np.array(new_faces, np.int64))
    return _check_connected(out)


def _check_connected(mesh: TriangleMesh) -> TriangleMesh:
    """Drop unreferenced vertices; raise ComponentSplit if faces form more
    than one substantial connected component.

    Slivers under 2% of the faces are margin artifacts of the per-vertex
    collapse test and are discarded rather than treated as a split."""
    used = np.unique(mesh.faces)
    remap = -np.ones(mesh.n_vertices, np.int64)
    remap[used] = np.arange(len(used))
    mesh2 = TriangleMesh(mesh.vertices[used], remap[mesh.faces])
    parent = np.arange(mesh2.n_vertices)

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b, c in mesh2.faces:
        ra, rb, rc = find(a), find(b), find(c)
        parent[rb] = ra
        parent[rc] = ra
    labels = np.fromiter((find(i) for i in range(mesh2.n_vertices)), np.int64)
    roots, counts = np.unique(labels, return_counts=True)
    if len(roots) == 1:
        return mesh2
    face_roots = labels[mesh2.faces[:, 0]]
    main = roots[np.argmax(counts)]
    minor_faces = int((face_roots != main).sum())
    if minor_faces > 0.02 * mesh2.n_faces:
        raise ComponentSplit(
            f"erosion split the shape into {len(roots)} components"
        )
    keep = mesh2.faces[face_roots == main]
    return _check_connected(TriangleMesh(mesh2.vertices, keep))


def analytic_grid(gt: GroundTruth, g_u: int, g_v: int) -> CompositeGrid:
    """Skeletal grid sampled from a shape's analytic sheet."""
    pts, nrm, shape = gt.sheet_grid(g_u, g_v)
    return CompositeGrid(points=pts, normals=nrm,
                         part=np.zeros(pts.shape[0], np.int32),
                         grid_shapes=(shape,))


def perturb(mesh: TriangleMesh, sigma: float, seed) -> TriangleMesh:
    """Displace every vertex along its normal by N(0, sigma) (seeded)."""
    if sigma < 0:
        raise ParseError("sigma must be >= 0")
    if sigma == 0:
        return TriangleMesh(mesh.vertices.copy(), mesh.faces.copy())
    rng = np.random.default_rng(seed)
    amp = rng.normal(0.0, sigma, mesh.n_vertices)
    return TriangleMesh(
        mesh.vertices + amp[:, None] * mesh.vertex_normals, mesh.faces.copy()
    )
