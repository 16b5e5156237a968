"""Skeletal sheet extraction: interior Voronoi cloud and B-spline fit.

The skeletal locus of a watertight shape is approximated by the Voronoi
vertices of an area-uniform boundary sample that fall strictly inside the
mesh. A tensor-product cubic B-spline sheet is then fit to the cloud by
regularized least squares with one outlier-trimming pass, and sampled on a
uniform parameter grid with per-point unit normals.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline
from scipy.spatial import Voronoi

from .errors import (
    DegenerateTangent,
    EmptySkeleton,
    NotWatertight,
    RankDeficient,
)
from .mesh import TriangleMesh, contains

__all__ = [
    "SkeletalCloud",
    "SkeletalSheet",
    "CompositeGrid",
    "sample_surface",
    "voronoi_skeleton",
    "fit_sheet",
    "evaluate_sheet",
    "sample_grid",
    "merge_sheets",
]

DEGREE = 3
SUPPORT_EPS = 1e-9
REG_WEIGHT = 1e-1  # smoothness weight relative to the mean data misfit


# ---- types ----


@dataclass(frozen=True)
class SkeletalCloud:
    """Interior skeletal point cloud with per-point distance to boundary."""

    points: np.ndarray     # (n, 3)
    clearance: np.ndarray  # (n,)

    def __post_init__(self):
        if self.points.ndim != 2 or self.points.shape[1] != 3:
            raise ValueError("points must be (n, 3)")
        if self.clearance.shape != (self.points.shape[0],):
            raise ValueError("clearance must be (n,)")


@dataclass(frozen=True)
class SkeletalSheet:
    """Tensor-product cubic B-spline sheet, world coordinates.

    ``axes`` rows are the principal directions of the source cloud (the
    third row is the superior direction); ``center`` is the cloud mean.
    ``grid_points``/``grid_normals`` are filled by :func:`sample_grid`.
    """

    ctrl: np.ndarray       # (n_u, n_v, 3) control points
    knots_u: np.ndarray
    knots_v: np.ndarray
    axes: np.ndarray       # (3, 3) rows: u-ish, v-ish, superior
    center: np.ndarray     # (3,)
    rms: float
    n_trimmed: int
    degree: int = DEGREE
    part: int = 0
    grid_u: np.ndarray | None = None
    grid_v: np.ndarray | None = None
    grid_points: np.ndarray | None = None   # (G_u, G_v, 3)
    grid_normals: np.ndarray | None = None  # (G_u, G_v, 3) unit


@dataclass(frozen=True)
class CompositeGrid:
    """Concatenated sampled grids of one or more sheets with part tags."""

    points: np.ndarray    # (N, 3)
    normals: np.ndarray   # (N, 3)
    part: np.ndarray      # (N,) int
    grid_shapes: tuple    # ((G_u, G_v), ...) per part, in tag order

    @property
    def n_points(self) -> int:
        return self.points.shape[0]


# ---- boundary sampling and Voronoi cloud ----


def sample_surface(mesh: TriangleMesh, n: int, seed: int = 0) -> np.ndarray:
    """n points drawn uniformly by area from the mesh surface."""
    rng = np.random.default_rng(seed)
    a = mesh.vertices[mesh.faces[:, 0]]
    b = mesh.vertices[mesh.faces[:, 1]]
    c = mesh.vertices[mesh.faces[:, 2]]
    areas = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
    fi = rng.choice(areas.shape[0], size=n, p=areas / areas.sum())
    r1 = rng.random(n)
    r2 = rng.random(n)
    s = np.sqrt(r1)
    w0 = 1.0 - s
    w1 = s * (1.0 - r2)
    w2 = s * r2
    return w0[:, None] * a[fi] + w1[:, None] * b[fi] + w2[:, None] * c[fi]


def voronoi_skeleton(mesh: TriangleMesh, sample_count: int,
                     seed: int = 0) -> SkeletalCloud:
    """Interior Voronoi vertices of an area-uniform boundary sample.

    Vertices outside the mesh (or outside a 1 mm bounding-box margin,
    where near-degenerate sample quadruples send them) are discarded;
    clearance is the distance from each retained vertex to the boundary.
    """
    if sample_count < 100:
        raise ValueError("sample_count must be at least 100")
    if not mesh.watertight:
        raise NotWatertight("voronoi_skeleton requires a watertight mesh")
    samples = sample_surface(mesh, sample_count, seed)
    verts = Voronoi(samples).vertices
    lo = mesh.vertices.min(axis=0) - 1.0
    hi = mesh.vertices.max(axis=0) + 1.0
    verts = verts[np.all((verts > lo) & (verts < hi), axis=1)]
    if verts.shape[0] == 0:
        raise EmptySkeleton("no interior Voronoi vertex")
    inside = contains(mesh, verts)
    verts = verts[inside]
    if verts.shape[0] == 0:
        raise EmptySkeleton("no interior Voronoi vertex")
    _, _, clearance = mesh.query.closest_points(verts)
    return SkeletalCloud(points=verts, clearance=clearance)


# ---- principal frame and parameterization ----


def _principal_frame(points: np.ndarray):
    """Centered principal axes with data-derived signs.

    Axis signs follow the third moment of the projections so the frame is
    equivariant under rigid motion of the cloud; the third axis completes a
    right-handed triad.
    """
    center = points.mean(axis=0)
    q = points - center
    cov = q.T @ q / q.shape[0]
    w, vecs = np.linalg.eigh(cov)
    order = np.argsort(w)[::-1]
    a1 = vecs[:, order[0]]
    a2 = vecs[:, order[1]]
    for k, a in enumerate((a1, a2)):
        proj = q @ a
        skew = float(np.sum(proj ** 3))
        if abs(skew) > 1e-9:
            sign = np.sign(skew)
        else:
            j = int(np.argmax(np.abs(a)))
            sign = np.sign(a[j]) or 1.0
        if k == 0:
            a1 = a * sign
        else:
            a2 = a * sign
    a3 = np.cross(a1, a2)
    return center, np.vstack([a1, a2, a3])


BOUND_PCT = 2.0  # percentile inset of the parameter bounds


def _uv_of_points(points: np.ndarray, center: np.ndarray, axes: np.ndarray):
    """(u, v) in [0,1]^2 from in-plane projections, percentile-bounded.

    Percentile bounds (rather than min-max) keep a handful of stray cloud
    points near the boundary walls from stretching the sheet domain past
    the solid; projections beyond the bounds clamp to the domain edge.
    """
    p1 = (points - center) @ axes[0]
    p2 = (points - center) @ axes[1]
    lo1, hi1 = np.percentile(p1, [BOUND_PCT, 100.0 - BOUND_PCT])
    lo2, hi2 = np.percentile(p2, [BOUND_PCT, 100.0 - BOUND_PCT])
    if hi1 - lo1 < 1e-12 or hi2 - lo2 < 1e-12:
        raise RankDeficient("cloud is degenerate in the sheet plane")
    u = np.clip((p1 - lo1) / (hi1 - lo1), 0.0, 1.0)
    v = np.clip((p2 - lo2) / (hi2 - lo2), 0.0, 1.0)
    return u, v


def _robust_sigma(resid: np.ndarray) -> float:
    """Normal-consistent scale of nonnegative residual norms.

    The norms are half-normal under a Gaussian error model, so the scale
    is estimated from their median about zero; centering on the median
    would collapse the estimate when a contaminated first fit leaves the
    whole inlier cluster at a common offset.
    """
    return float(1.4826 * np.median(resid) + 1e-15)


def _clamped_knots(n_ctrl: int) -> np.ndarray:
    if n_ctrl < DEGREE + 1:
        raise ValueError("need at least 4 control points per direction")
    interior = np.linspace(0.0, 1.0, n_ctrl - DEGREE + 1)[1:-1]
    return np.concatenate([np.zeros(DEGREE + 1), interior,
                           np.ones(DEGREE + 1)])


def _basis_matrix(x: np.ndarray, knots: np.ndarray, deriv: int = 0):
    """Dense (len(x), n_ctrl) matrix of basis (or derivative) values."""
    n_ctrl = knots.shape[0] - DEGREE - 1
    spl = BSpline(knots, np.eye(n_ctrl), DEGREE)
    if deriv:
        spl = spl.derivative(deriv)
    return spl(np.clip(x, 0.0, 1.0))


def _greville(knots: np.ndarray) -> np.ndarray:
    n_ctrl = knots.shape[0] - DEGREE - 1
    return np.array([knots[i + 1:i + 1 + DEGREE].mean()
                     for i in range(n_ctrl)])


def _second_difference_rows(knots: np.ndarray) -> np.ndarray:
    """Divided second differences over Greville sites (zero on affine nets)."""
    xi = _greville(knots)
    n = xi.shape[0]
    rows = np.zeros((n - 2, n))
    for i in range(1, n - 1):
        d0 = xi[i] - xi[i - 1]
        d1 = xi[i + 1] - xi[i]
        rows[i - 1, i - 1] = 1.0 / d0
        rows[i - 1, i] = -1.0 / d0 - 1.0 / d1
        rows[i - 1, i + 1] = 1.0 / d1
    return rows


def _smoothness_rows(n_u: int, n_v: int, knots_u, knots_v) -> np.ndarray:
    pu = _second_difference_rows(knots_u)
    pv = _second_difference_rows(knots_v)
    blocks = []
    for j in range(n_v):
        ej = np.zeros((1, n_v))
        ej[0, j] = 1.0
        blocks.append(np.kron(pu, ej))
    for i in range(n_u):
        ei = np.zeros((1, n_u))
        ei[0, i] = 1.0
        blocks.append(np.kron(ei, pv))
    return np.vstack(blocks)


# ---- fitting ----


def _design(u, v, knots_u, knots_v):
    bu = _basis_matrix(u, knots_u)
    bv = _basis_matrix(v, knots_v)
    # row-wise tensor product: D[p, i*n_v + j] = bu[p, i] * bv[p, j]
    return (bu[:, :, None] * bv[:, None, :]).reshape(u.shape[0], -1)


def _solve(design, points, weights, pen, n_u, n_v):
    support = (np.abs(design) > SUPPORT_EPS).sum(axis=0)
    if np.any(support == 0):
        bad = int(np.argmin(support))
        raise RankDeficient(
            "control point (%d, %d) has no supporting samples"
            % (bad // n_v, bad % n_v))
    m = design.shape[0]
    sw = np.sqrt(weights)[:, None]
    scale = np.sqrt(REG_WEIGHT * m / pen.shape[0])
    a = np.vstack([sw * design, scale * pen])
    b = np.vstack([sw * points, np.zeros((pen.shape[0], 3))])
    coef, _, _, _ = np.linalg.lstsq(a, b, rcond=None)
    resid = np.linalg.norm(design @ coef - points, axis=1)
    return coef, resid


def fit_sheet(cloud: SkeletalCloud, n_u: int, n_v: int,
              trim_sigma: float = 2.0) -> SkeletalSheet:
    """Least-squares cubic B-spline sheet through a skeletal cloud.

    The cloud is parameterized by projection onto its first two principal
    axes (min-max scaled to [0,1]^2). One trimming pass discards points
    whose residual exceeds trim_sigma times the RMS residual, then refits.
    """
    pts = cloud.points
    if pts.shape[0] < 4 * n_u * n_v:
        raise ValueError("cloud must have at least 4*n_u*n_v points")
    # deep points are reliable skeletal evidence, near-surface Voronoi
    # slivers are not: weight samples by clearance
    wts = cloud.clearance / max(float(cloud.clearance.max()), 1e-12)
    center, axes = _principal_frame(pts)
    u, v = _uv_of_points(pts, center, axes)
    knots_u = _clamped_knots(n_u)
    knots_v = _clamped_knots(n_v)
    pen = _smoothness_rows(n_u, n_v, knots_u, knots_v)

    design = _design(u, v, knots_u, knots_v)
    coef, resid = _solve(design, pts, wts, pen, n_u, n_v)
    sigma = _robust_sigma(resid)
    keep = resid <= trim_sigma * sigma
    n_trimmed = int(np.count_nonzero(~keep))
    if n_trimmed and keep.sum() >= n_u * n_v:
        # refit over the kept points' own parameter bounds so the sheet
        # does not extrapolate into regions held only by trimmed outliers
        pts = pts[keep]
        wts = wts[keep]
        u, v = _uv_of_points(pts, center, axes)
        design = _design(u, v, knots_u, knots_v)
        coef, resid = _solve(design, pts, wts, pen, n_u, n_v)
    rms = float(np.sqrt(np.mean(resid ** 2)))
    return SkeletalSheet(
        ctrl=coef.reshape(n_u, n_v, 3),
        knots_u=knots_u, knots_v=knots_v,
        axes=axes, center=center,
        rms=rms, n_trimmed=n_trimmed)


def evaluate_sheet(sheet: SkeletalSheet, u: np.ndarray, v: np.ndarray,
                   du: int = 0, dv: int = 0) -> np.ndarray:
    """Sheet (or parametric derivative) at paired parameter values."""
    u = np.atleast_1d(np.asarray(u, float))
    v = np.atleast_1d(np.asarray(v, float))
    bu = _basis_matrix(u, sheet.knots_u, du)
    bv = _basis_matrix(v, sheet.knots_v, dv)
    return np.einsum("pi,pj,ijc->pc", bu, bv, sheet.ctrl)


def sample_grid(sheet: SkeletalSheet, g_u: int, g_v: int) -> SkeletalSheet:
    """Sheet with a (g_u, g_v) uniform-parameter grid and unit normals.

    Normals come from the cross product of the parametric tangents and are
    flipped as a field, if needed, so they agree with the superior axis.
    """
    if g_u < 2 or g_v < 2:
        raise ValueError("grid must be at least 2x2")
    us = np.linspace(0.0, 1.0, g_u)
    vs = np.linspace(0.0, 1.0, g_v)
    uu, vv = np.meshgrid(us, vs, indexing="ij")
    uf, vf = uu.ravel(), vv.ravel()
    p = evaluate_sheet(sheet, uf, vf)
    tu = evaluate_sheet(sheet, uf, vf, du=1)
    tv = evaluate_sheet(sheet, uf, vf, dv=1)
    n = np.cross(tu, tv)
    norms = np.linalg.norm(n, axis=1)
    if np.any(norms < 1e-12):
        raise DegenerateTangent("zero-area parametric patch on the grid")
    n /= norms[:, None]
    if float(np.sum(n @ sheet.axes[2])) < 0.0:
        n = -n
    return dataclasses.replace(
        sheet, grid_u=us, grid_v=vs,
        grid_points=p.reshape(g_u, g_v, 3),
        grid_normals=n.reshape(g_u, g_v, 3))


def merge_sheets(parts: list) -> CompositeGrid:
    """Concatenate sampled grids of several sheets, tagging each point.

    No geometric stitching happens; a composite is just the union of its
    parts' grids with part indices in list order. A single sheet yields an
    equivalent one-part composite.
    """
    if not parts:
        raise ValueError("merge_sheets needs at least one sheet")
    pts, nrm, tag, shapes = [], [], [], []
    for k, sheet in enumerate(parts):
        if sheet.grid_points is None:
            raise ValueError("sheet %d has no sampled grid" % k)
        g = sheet.grid_points.reshape(-1, 3)
        pts.append(g)
        nrm.append(sheet.grid_normals.reshape(-1, 3))
        tag.append(np.full(g.shape[0], k, dtype=np.int32))
        shapes.append(sheet.grid_points.shape[:2])
    return CompositeGrid(
        points=np.vstack(pts), normals=np.vstack(nrm),
        part=np.concatenate(tag), grid_shapes=tuple(shapes))
