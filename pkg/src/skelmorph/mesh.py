"""Triangle-mesh data model, ASCII file I/O, and geometric queries.

The mesh is immutable after construction; derived data (normals, spatial
index, vertex k-d tree, adjacency) is built lazily and cached, so sharing a
mesh across threads or worker processes is safe for read-only use.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .bvh import MeshQuery
from .errors import (
    DegenerateNeighborhood,
    NotWatertight,
    ParseError,
    TopologyError,
)

__all__ = [
    "TriangleMesh",
    "SurfaceHit",
    "load_mesh",
    "save_mesh",
    "closest_point",
    "ray_intersections",
    "contains",
    "principal_curvatures",
]

DEGENERATE_AREA = 1e-12
SURFACE_BAND = 1e-9  # points this close to the surface count as outside


@dataclass(frozen=True)
class SurfaceHit:
    """One ray/surface intersection."""

    point: np.ndarray
    face: int
    t: float
    normal: np.ndarray


class TriangleMesh:
    """Indexed triangle surface in millimetres.

    Parameters
    ----------
    vertices : (n, 3) float array
    faces : (m, 3) int array
        Exactly degenerate faces (area < 1e-12 mm^2) are dropped on
        construction; out-of-range indices raise ParseError.
    """

    def __init__(self, vertices, faces):
        vertices = np.ascontiguousarray(vertices, np.float64)
        faces = np.ascontiguousarray(faces, np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise ParseError("vertices must be (n, 3)")
        if faces.size and (faces.min() < 0 or faces.max() >= len(vertices)):
            raise ParseError("face index out of range")
        if faces.size:
            a = vertices[faces[:, 0]]
            areas = 0.5 * np.linalg.norm(
                np.cross(vertices[faces[:, 1]] - a, vertices[faces[:, 2]] - a), axis=1
            )
            faces = faces[areas >= DEGENERATE_AREA]
        self.vertices = vertices
        self.faces = faces
        self.vertices.setflags(write=False)
        self.faces.setflags(write=False)
        self._normals = None
        self._face_normals = None
        self._watertight = None
        self._query = None
        self._kdtree = None
        self._adjacency = None

    # ---- derived data ----

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def face_normals(self):
        if self._face_normals is None:
            a = self.vertices[self.faces[:, 0]]
            n = np.cross(
                self.vertices[self.faces[:, 1]] - a,
                self.vertices[self.faces[:, 2]] - a,
            )
            ln = np.linalg.norm(n, axis=1)
            ln[ln == 0] = 1.0
            self._face_normals = n / ln[:, None]
        return self._face_normals

    @property
    def vertex_normals(self):
        """Area-weighted average of incident face normals, unit length."""
        if self._normals is None:
            a = self.vertices[self.faces[:, 0]]
            fvec = np.cross(
                self.vertices[self.faces[:, 1]] - a,
                self.vertices[self.faces[:, 2]] - a,
            )
            normals = np.zeros_like(self.vertices)
            for k in range(3):
                np.add.at(normals, self.faces[:, k], fvec)
            ln = np.linalg.norm(normals, axis=1)
            ln[ln == 0] = 1.0
            self._normals = normals / ln[:, None]
        return self._normals

    @property
    def watertight(self) -> bool:
        """True iff every edge is shared by exactly two faces with
        consistent winding (each directed edge appears exactly once)."""
        if self._watertight is None:
            if self.n_faces == 0:
                self._watertight = False
            else:
                f = self.faces
                directed = np.concatenate(
                    [f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]], axis=0
                )
                d_keys = directed[:, 0] * (self.n_vertices + 1) + directed[:, 1]
                if len(np.unique(d_keys)) != len(d_keys):
                    self._watertight = False
                else:
                    lo = directed.min(axis=1)
                    hi = directed.max(axis=1)
                    u_keys = lo * (self.n_vertices + 1) + hi
                    _, counts = np.unique(u_keys, return_counts=True)
                    self._watertight = bool((counts == 2).all())
        return self._watertight

    @property
    def query(self) -> MeshQuery:
        if self._query is None:
            self._query = MeshQuery(self.vertices, self.faces)
        return self._query

    @property
    def vertex_tree(self) -> cKDTree:
        if self._kdtree is None:
            self._kdtree = cKDTree(self.vertices)
        return self._kdtree

    @property
    def vertex_adjacency(self):
        """List of sorted neighbor-index arrays, one per vertex."""
        if self._adjacency is None:
            nbr = [set() for _ in range(self.n_vertices)]
            for i, j, k in self.faces:
                nbr[i].add(j)
                nbr[i].add(k)
                nbr[j].add(i)
                nbr[j].add(k)
                nbr[k].add(i)
                nbr[k].add(j)
            self._adjacency = [np.fromiter(sorted(s), np.int64) for s in nbr]
        return self._adjacency

    # ---- scalar summaries ----

    def surface_area(self) -> float:
        a = self.vertices[self.faces[:, 0]]
        return float(
            0.5
            * np.linalg.norm(
                np.cross(
                    self.vertices[self.faces[:, 1]] - a,
                    self.vertices[self.faces[:, 2]] - a,
                ),
                axis=1,
            ).sum()
        )

    def volume(self) -> float:
        """Signed volume via the divergence theorem (positive for outward
        winding)."""
        a = self.vertices[self.faces[:, 0]]
        b = self.vertices[self.faces[:, 1]]
        c = self.vertices[self.faces[:, 2]]
        return float(np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0)

    def edge_lengths(self):
        f = self.faces
        e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]], axis=0)
        lo = np.minimum(e[:, 0], e[:, 1])
        hi = np.maximum(e[:, 0], e[:, 1])
        uniq = np.unique(lo * (self.n_vertices + 1) + hi)
        i = uniq // (self.n_vertices + 1)
        j = uniq % (self.n_vertices + 1)
        return np.linalg.norm(self.vertices[i] - self.vertices[j], axis=1)

    def euler_characteristic(self) -> int:
        f = self.faces
        e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]], axis=0)
        lo = np.minimum(e[:, 0], e[:, 1])
        hi = np.maximum(e[:, 0], e[:, 1])
        n_edges = len(np.unique(lo * (self.n_vertices + 1) + hi))
        used = np.unique(f)
        return int(len(used) - n_edges + self.n_faces)

    def require_manifold(self):
        """Raise TopologyError on any edge shared by more than two faces."""
        f = self.faces
        e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]], axis=0)
        lo = np.minimum(e[:, 0], e[:, 1])
        hi = np.maximum(e[:, 0], e[:, 1])
        _, counts = np.unique(lo * (self.n_vertices + 1) + hi, return_counts=True)
        if (counts > 2).any():
            raise TopologyError("non-manifold edge (shared by more than two faces)")


# ---- queries ----


def closest_point(mesh: TriangleMesh, p):
    """Closest surface point to p.

    Returns (point, face_index, distance); ties broken by lowest face index.
    """
    q, f, d = mesh.query.closest_points(np.asarray(p, np.float64)[None, :])
    return q[0], int(f[0]), float(d[0])


def ray_intersections(mesh: TriangleMesh, origin, direction):
    """All ray hits sorted by ascending t.

    Grazing hits (|dir . face normal| < 1e-7) are excluded; hits within
    1e-9 mm of each other are merged. An empty list means no intersection.
    """
    direction = np.asarray(direction, np.float64)
    ln = np.linalg.norm(direction)
    if abs(ln - 1.0) > 1e-9:
        raise ValueError("direction must be a unit vector")
    origin = np.asarray(origin, np.float64)
    ts, faces = mesh.query.ray_hits(origin, direction)
    return [
        SurfaceHit(
            point=origin + t * direction,
            face=int(f),
            t=float(t),
            normal=mesh.face_normals[int(f)],
        )
        for t, f in zip(ts, faces)
    ]


def contains(mesh: TriangleMesh, points, *, _check=True):
    """Generalized-winding-number inside test (w > 0.5 means inside).

    Points within 1e-9 mm of the surface are classified outside. Accepts a
    single point or an (n, 3) array; returns bool or bool array.
    """
    if _check and not mesh.watertight:
        raise NotWatertight("contains() requires a watertight mesh")
    pts = np.asarray(points, np.float64)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    w = mesh.query.winding_numbers(pts)
    inside = w > 0.5
    if inside.any():
        _, _, d = mesh.query.closest_points(pts[inside])
        sub = inside[inside].copy()
        sub[d <= SURFACE_BAND] = False
        inside[np.nonzero(inside)[0]] = sub
    return bool(inside[0]) if single else inside


def principal_curvatures(mesh: TriangleMesh):
    """Per-vertex (k_max, k_min) from an osculating quadric over the 2-ring.

    Convex regions get positive curvature (sphere of radius r gives about
    +1/r). Vertices with fewer than 5 distinct 2-ring neighbors are marked
    invalid (NaN) rather than raising.
    """
    V = mesh.vertices
    normals = mesh.vertex_normals
    adj = mesh.vertex_adjacency
    n = mesh.n_vertices
    k_max = np.full(n, np.nan)
    k_min = np.full(n, np.nan)

    for i in range(n):
        ring1 = adj[i]
        if len(ring1) == 0:
            continue
        two_ring = set(ring1.tolist())
        for j in ring1:
            two_ring.update(adj[j].tolist())
        two_ring.discard(i)
        if len(two_ring) < 5:
            continue  # DegenerateNeighborhood: marked invalid
        nbrs = np.fromiter(sorted(two_ring), np.int64)

        nz = normals[i]
        # local frame: pick the world axis least aligned with the normal
        ref = np.zeros(3)
        ref[np.argmin(np.abs(nz))] = 1.0
        ex = np.cross(ref, nz)
        ex /= np.linalg.norm(ex)
        ey = np.cross(nz, ex)

        rel = V[nbrs] - V[i]
        x = rel @ ex
        y = rel @ ey
        z = rel @ nz
        A = np.column_stack([x * x, x * y, y * y, x, y])
        coef, *_ = np.linalg.lstsq(A, z, rcond=None)
        a, b, c, d, e = coef
        g = 1.0 + d * d + e * e
        sg = np.sqrt(g)
        II = np.array([[2 * a, b], [b, 2 * c]]) / sg
        I = np.array([[1 + d * d, d * e], [d * e, 1 + e * e]])
        S = np.linalg.solve(I, II)
        # symmetrize: I^-1 II is similar to a symmetric matrix
        ev = np.linalg.eigvals(S).real
        ks = -np.sort(ev)  # outward-normal frame: convex surfaces bend away
        k_max[i] = ks[0]
        k_min[i] = ks[1]
    return k_max, k_min


# ---- file I/O ----


def load_mesh(path, format=None, require_manifold=False) -> TriangleMesh:
    """Read an ASCII OBJ/OFF/PLY mesh; quads are fan-triangulated.

    format defaults to the file extension. require_manifold=True raises
    TopologyError on non-manifold edges.
    """
    if format is None:
        format = os.path.splitext(str(path))[1].lstrip(".").lower()
    format = format.lower().replace("-ascii", "")
    try:
        with open(path, "r") as fp:
            text = fp.read()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    if format == "obj":
        verts, faces = _parse_obj(text)
    elif format == "off":
        verts, faces = _parse_off(text)
    elif format == "ply":
        verts, faces = _parse_ply(text)
    else:
        raise ParseError(f"unsupported mesh format {format!r}")
    mesh = TriangleMesh(np.asarray(verts, np.float64), np.asarray(faces, np.int64))
    if require_manifold:
        mesh.require_manifold()
    return mesh


def save_mesh(mesh: TriangleMesh, path, format=None):
    """Write OBJ (9 significant digits), OFF, or ASCII PLY."""
    if format is None:
        format = os.path.splitext(str(path))[1].lstrip(".").lower()
    format = format.lower().replace("-ascii", "")
    lines = []
    if format == "obj":
        for v in mesh.vertices:
            lines.append("v %.9g %.9g %.9g" % (v[0], v[1], v[2]))
        for f in mesh.faces:
            lines.append("f %d %d %d" % (f[0] + 1, f[1] + 1, f[2] + 1))
    elif format == "off":
        lines.append("OFF")
        lines.append("%d %d 0" % (mesh.n_vertices, mesh.n_faces))
        for v in mesh.vertices:
            lines.append("%.9g %.9g %.9g" % (v[0], v[1], v[2]))
        for f in mesh.faces:
            lines.append("3 %d %d %d" % (f[0], f[1], f[2]))
    elif format == "ply":
        lines += [
            "ply",
            "format ascii 1.0",
            "element vertex %d" % mesh.n_vertices,
            "property double x",
            "property double y",
            "property double z",
            "element face %d" % mesh.n_faces,
            "property list uchar int vertex_indices",
            "end_header",
        ]
        for v in mesh.vertices:
            lines.append("%.9g %.9g %.9g" % (v[0], v[1], v[2]))
        for f in mesh.faces:
            lines.append("3 %d %d %d" % (f[0], f[1], f[2]))
    else:
        raise ParseError(f"unsupported mesh format {format!r}")
    tmp = str(path) + ".tmp"
    with open(tmp, "w") as fp:
        fp.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def _fan(poly):
    return [(poly[0], poly[k], poly[k + 1]) for k in range(1, len(poly) - 1)]


def _parse_obj(text):
    verts = []
    faces = []
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "v":
            if len(parts) < 4:
                raise ParseError(f"OBJ line {ln}: vertex needs 3 coordinates")
            try:
                verts.append([float(parts[1]), float(parts[2]), float(parts[3])])
            except ValueError as exc:
                raise ParseError(f"OBJ line {ln}: bad vertex") from exc
        elif parts[0] == "f":
            idx = []
            for tok in parts[1:]:
                head = tok.split("/")[0]
                try:
                    k = int(head)
                except ValueError as exc:
                    raise ParseError(f"OBJ line {ln}: bad face index") from exc
                if k < 0:
                    k = len(verts) + k
                else:
                    k = k - 1
                if k < 0 or k >= len(verts):
                    raise ParseError(f"OBJ line {ln}: face index out of range")
                idx.append(k)
            if len(idx) < 3:
                raise ParseError(f"OBJ line {ln}: face needs >= 3 vertices")
            faces.extend(_fan(idx))
        # other directives (vn, vt, o, g, usemtl, ...) are ignored
    if not verts:
        raise ParseError("OBJ: no vertices")
    return verts, faces


def _parse_off(text):
    toks = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            toks.extend(line.split())
    if not toks or toks[0] != "OFF":
        raise ParseError("OFF: missing header")
    try:
        nv, nf = int(toks[1]), int(toks[2])
        pos = 4  # skip edge count
        verts = []
        for _ in range(nv):
            verts.append([float(toks[pos]), float(toks[pos + 1]), float(toks[pos + 2])])
            pos += 3
        faces = []
        for _ in range(nf):
            k = int(toks[pos])
            poly = [int(t) for t in toks[pos + 1 : pos + 1 + k]]
            pos += 1 + k
            if k < 3:
                raise ParseError("OFF: face needs >= 3 vertices")
            for v in poly:
                if v < 0 or v >= nv:
                    raise ParseError("OFF: face index out of range")
            faces.extend(_fan(poly))
    except (IndexError, ValueError) as exc:
        raise ParseError(f"OFF: truncated or malformed ({exc})") from exc
    return verts, faces


def _parse_ply(text):
    lines = iter(text.splitlines())
    if next(lines, "").strip() != "ply":
        raise ParseError("PLY: missing magic")
    elements = []  # (name, count, properties)
    fmt = None
    for raw in lines:
        line = raw.strip()
        if not line or line.startswith("comment"):
            continue
        parts = line.split()
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            elements.append([parts[1], int(parts[2]), []])
        elif parts[0] == "property":
            if not elements:
                raise ParseError("PLY: property before element")
            elements[-1][2].append(parts[1:])
        elif parts[0] == "end_header":
            break
    else:
        raise ParseError("PLY: missing end_header")
    if fmt != "ascii":
        raise ParseError("PLY: only ascii format supported")

    verts = []
    faces = []
    for name, count, props in elements:
        if name == "vertex":
            names = [p[-1] for p in props]
            try:
                ix, iy, iz = names.index("x"), names.index("y"), names.index("z")
            except ValueError as exc:
                raise ParseError("PLY: vertex element lacks x/y/z") from exc
            for _ in range(count):
                row = next(lines, "").split()
                if len(row) < len(names):
                    raise ParseError("PLY: truncated vertex data")
                verts.append([float(row[ix]), float(row[iy]), float(row[iz])])
        else:
            for _ in range(count):
                row = next(lines, "").split()
                if not row:
                    raise ParseError("PLY: truncated element data")
                if name == "face":
                    k = int(row[0])
                    poly = [int(t) for t in row[1 : 1 + k]]
                    for v in poly:
                        if v < 0 or v >= len(verts):
                            raise ParseError("PLY: face index out of range")
                    faces.extend(_fan(poly))
    if not verts:
        raise ParseError("PLY: no vertices")
    return verts, faces
