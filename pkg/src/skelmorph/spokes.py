"""Spoke field: initialization, E0/E1/E2 refinement, and re-fitting.

A spoke runs from a skeletal grid point to the boundary on one side of the
sheet. Refinement enforces three conditions: the tip converges onto the
boundary (E0), the direction agrees with the boundary normal there (E1),
and paired spokes have symmetric lengths where the direction is unreliable
(E2). Spokes never intersect their grid neighbors on the same side.

All per-spoke walks are batched over the whole field; the mesh is immutable
throughout, so refinement is deterministic and trivially parallel.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import NoIntersection
from .mesh import TriangleMesh, contains
from .skeleton import CompositeGrid, SkeletalSheet, merge_sheets

__all__ = [
    "Spoke",
    "SRep",
    "RefineParams",
    "SUPERIOR",
    "INFERIOR",
    "VALID",
    "REASSIGNED",
    "INVALID",
    "DEGENERATE",
    "STATUS_NAMES",
    "init_spokes",
    "e0",
    "e1",
    "e2",
    "refine",
    "classify_and_repair",
    "refit_lengths",
    "nonintersection_violations",
    "mesh_hash",
    "srep_to_json",
    "srep_from_json",
]

SUPERIOR = 0
INFERIOR = 1
SIDE_NAMES = ("superior", "inferior")

VALID = 0
REASSIGNED = 1
INVALID = 2
DEGENERATE = 3
STATUS_NAMES = {VALID: "valid", REASSIGNED: "reassigned",
                INVALID: "invalid", DEGENERATE: "degenerate"}

SCHEMA_VERSION = "1.0"
SEGMENT_TOL = 1e-9


@dataclass(frozen=True)
class RefineParams:
    length_step: float = 0.1          # mm
    max_length_iters: int = 1000
    angle_step: float = 0.1           # rad
    max_angle_iters: int = 50
    rounds: int = 3
    e2_angle_threshold: float = 0.349  # rad, about 20 degrees
    e0_tolerance: float = 0.05        # mm
    e0_mode: str = "vertex"           # "vertex" or "triangle"

    def __post_init__(self):
        for name in ("length_step", "max_length_iters", "angle_step",
                     "max_angle_iters", "rounds", "e2_angle_threshold",
                     "e0_tolerance"):
            if getattr(self, name) <= 0:
                raise ValueError("%s must be positive" % name)
        if self.e0_mode not in ("vertex", "triangle"):
            raise ValueError("e0_mode must be 'vertex' or 'triangle'")


@dataclass(frozen=True)
class Spoke:
    """Single-spoke view; tip = origin + length * direction."""

    origin: np.ndarray
    direction: np.ndarray
    length: float
    side: int
    status: int

    @property
    def tip(self) -> np.ndarray:
        return self.origin + self.length * self.direction


@dataclass
class SRep:
    """Spoke field over a skeletal grid, bound to a boundary mesh.

    Arrays are indexed [side, point]; side 0 is superior, 1 inferior.
    ``report`` holds the last refinement's per-spoke e0, theta (rad), and
    per-pair e2.
    """

    origins: np.ndarray     # (2, n, 3)
    directions: np.ndarray  # (2, n, 3) unit
    lengths: np.ndarray     # (2, n) mm
    status: np.ndarray      # (2, n) int8
    part: np.ndarray        # (n,) int32
    grid_shapes: tuple
    mesh: TriangleMesh
    sheets: tuple = ()
    report: dict = field(default_factory=dict)

    @property
    def n_points(self) -> int:
        return self.origins.shape[1]

    def tips(self) -> np.ndarray:
        return self.origins + self.lengths[..., None] * self.directions

    def spoke(self, side: int, i: int) -> Spoke:
        return Spoke(origin=self.origins[side, i].copy(),
                     direction=self.directions[side, i].copy(),
                     length=float(self.lengths[side, i]),
                     side=side, status=int(self.status[side, i]))

    def copy(self, mesh: TriangleMesh | None = None) -> "SRep":
        return SRep(origins=self.origins.copy(),
                    directions=self.directions.copy(),
                    lengths=self.lengths.copy(),
                    status=self.status.copy(),
                    part=self.part.copy(),
                    grid_shapes=self.grid_shapes,
                    mesh=self.mesh if mesh is None else mesh,
                    sheets=self.sheets,
                    report={k: v.copy() for k, v in self.report.items()})


# ---- energies ----


def _e0_tips(tips: np.ndarray, mesh: TriangleMesh, mode: str) -> np.ndarray:
    if mode == "vertex":
        d, _ = mesh.vertex_tree.query(tips)
        return np.atleast_1d(d)
    _, _, d = mesh.query.closest_points(np.atleast_2d(tips))
    return d


def _nearest_vertex_normals(tips: np.ndarray, mesh: TriangleMesh):
    _, j = mesh.vertex_tree.query(tips)
    return mesh.vertex_normals[np.atleast_1d(j)]


def e0(spoke: Spoke, mesh: TriangleMesh, mode: str = "vertex") -> float:
    """Distance from the spoke tip to the boundary.

    Default is the minimum distance over boundary vertices; triangle mode
    measures against the surface itself.
    """
    return float(_e0_tips(spoke.tip[None, :], mesh, mode)[0])


def e1(spoke: Spoke, mesh: TriangleMesh) -> float:
    """1 - cos(theta) against the normal at the nearest boundary vertex."""
    n = _nearest_vertex_normals(spoke.tip[None, :], mesh)[0]
    return float(1.0 - np.dot(spoke.direction, n))


def e2(sup: Spoke, inf: Spoke) -> float:
    """Absolute length asymmetry of a spoke pair."""
    return abs(sup.length - inf.length)


# ---- initialization ----


def _first_hits(mesh: TriangleMesh, origins: np.ndarray, dirs: np.ndarray):
    """t of the first intersection (>0) per ray, nan where none."""
    n = origins.shape[0]
    t = np.full(n, np.nan)
    for i in range(n):
        ts, _ = mesh.query.ray_hits(origins[i], dirs[i])
        ts = ts[ts > 1e-12]
        if ts.size:
            t[i] = ts[0]
    return t


def init_spokes(grid, mesh: TriangleMesh) -> SRep:
    """Spoke field from a sampled sheet grid: one pair per grid point.

    Superior spokes start along +normal, inferior along -normal; initial
    lengths come from the first boundary intersection. A ray that escapes
    the mesh flags its spoke invalid rather than failing the field.
    """
    if isinstance(grid, SkeletalSheet):
        sheets = (grid,)
        grid = merge_sheets([grid])
    elif isinstance(grid, CompositeGrid):
        sheets = ()
    else:
        raise TypeError("grid must be a SkeletalSheet or CompositeGrid")
    n = grid.n_points
    origins = np.broadcast_to(grid.points, (2, n, 3)).copy()
    directions = np.stack([grid.normals, -grid.normals])
    lengths = np.zeros((2, n))
    status = np.full((2, n), VALID, np.int8)
    for side in (SUPERIOR, INFERIOR):
        t = _first_hits(mesh, origins[side], directions[side])
        bad = np.isnan(t)
        status[side, bad] = INVALID
        lengths[side, ~bad] = t[~bad]
    return SRep(origins=origins, directions=directions, lengths=lengths,
                status=status, part=grid.part.copy(),
                grid_shapes=grid.grid_shapes, mesh=mesh, sheets=sheets)


# ---- refinement ----


def _length_walk(origins, dirs, lengths, active, mesh, params):
    """Greedy +-step walk of spoke lengths toward minimal E0.

    Stops per spoke at E0 <= tolerance, at a step-quantized local minimum,
    or at the iteration cap. Returns lengths, final E0, and the mask of
    spokes that hit the cap while E0 > 10x tolerance.
    """
    step = params.length_step
    tol = params.e0_tolerance
    lengths = lengths.copy()
    ev = _e0_tips(origins + lengths[:, None] * dirs, mesh, params.e0_mode)
    act = active & (ev > tol)
    iters = 0
    while act.any() and iters < params.max_length_iters:
        idx = np.nonzero(act)[0]
        lp = lengths[idx] + step
        lm = np.maximum(lengths[idx] - step, 0.0)
        ep = _e0_tips(origins[idx] + lp[:, None] * dirs[idx], mesh,
                      params.e0_mode)
        em = _e0_tips(origins[idx] + lm[:, None] * dirs[idx], mesh,
                      params.e0_mode)
        cur = ev[idx]
        go_p = (ep < cur) & (ep <= em)
        go_m = (em < cur) & ~go_p
        lengths[idx[go_p]] = lp[go_p]
        ev[idx[go_p]] = ep[go_p]
        lengths[idx[go_m]] = lm[go_m]
        ev[idx[go_m]] = em[go_m]
        act[idx[~(go_p | go_m)]] = False
        act &= ev > tol
        iters += 1
    exhausted = act & (ev > 10.0 * params.e0_tolerance)
    return lengths, ev, exhausted


def _angle_walk(origins, dirs, lengths, active, mesh, params):
    """Rotate spokes toward the nearest-vertex boundary normal.

    One angle_step per iteration, nearest vertex recomputed after each
    step, stopping as soon as E1 fails to decrease.
    """
    dirs = dirs.copy()
    tips = origins + lengths[:, None] * dirs
    nrm = _nearest_vertex_normals(tips, mesh)
    ev = 1.0 - np.einsum("ij,ij->i", dirs, nrm)
    act = active.copy()
    for _ in range(params.max_angle_iters):
        if not act.any():
            break
        idx = np.nonzero(act)[0]
        d = dirs[idx]
        n = nrm[idx]
        axis = np.cross(d, n)
        sin_full = np.linalg.norm(axis, axis=1)
        aligned = sin_full < 1e-12
        act[idx[aligned]] = False
        idx = idx[~aligned]
        if idx.size == 0:
            break
        d = dirs[idx]
        axis = axis[~aligned] / sin_full[~aligned][:, None]
        full = np.arctan2(sin_full[~aligned],
                          np.einsum("ij,ij->i", d, nrm[idx]))
        ang = np.minimum(params.angle_step, full)
        # axis is perpendicular to d, so Rodrigues reduces to two terms
        d_new = d * np.cos(ang)[:, None] + np.cross(axis, d) * \
            np.sin(ang)[:, None]
        d_new /= np.linalg.norm(d_new, axis=1)[:, None]
        tips_new = origins[idx] + lengths[idx, None] * d_new
        nrm_new = _nearest_vertex_normals(tips_new, mesh)
        e_new = 1.0 - np.einsum("ij,ij->i", d_new, nrm_new)
        better = e_new < ev[idx]
        good = idx[better]
        dirs[good] = d_new[better]
        nrm[good] = nrm_new[better]
        ev[good] = e_new[better]
        act[idx[~better]] = False
    return dirs, ev


def _project_outside_tips(srep, flat_origins, flat_dirs, flat_lengths,
                          flat_status):
    tips = flat_origins + flat_lengths[:, None] * flat_dirs
    workable = flat_status == VALID
    outside = np.zeros(tips.shape[0], bool)
    outside[workable] = ~contains(srep.mesh, tips[workable])
    if not outside.any():
        return
    idx = np.nonzero(outside)[0]
    t = _first_hits(srep.mesh, flat_origins[idx], flat_dirs[idx])
    hit = ~np.isnan(t)
    flat_lengths[idx[hit]] = t[hit]
    flat_status[idx[~hit]] = INVALID


def refine(srep: SRep, params: RefineParams | None = None) -> SRep:
    """Refinement schedule over the whole spoke field.

    Outside tips are first pulled back onto the surface. Each round walks
    lengths to E0 tolerance and rotates directions while E1 decreases; the
    asymmetry pass then shrinks the longer spoke of high-angle pairs while
    its E0 stays within twice the tolerance, and a last length walk
    restores E0. Spokes that exhaust the length budget with E0 above ten
    tolerances are marked invalid.
    """
    params = params or RefineParams()
    out = srep.copy()
    n = out.n_points
    o = out.origins.reshape(2 * n, 3)
    d = out.directions.reshape(2 * n, 3)
    ln = out.lengths.reshape(2 * n)
    st = out.status.reshape(2 * n)

    _project_outside_tips(out, o, d, ln, st)
    workable = st == VALID

    for _ in range(params.rounds):
        ln[:], _, exhausted = _length_walk(o, d, ln, workable, out.mesh,
                                           params)
        st[exhausted] = INVALID
        workable = st == VALID
        d[:], _ = _angle_walk(o, d, ln, workable, out.mesh, params)

    # asymmetry pass on pairs whose final angle is unreliable
    tips = o + ln[:, None] * d
    nrm = _nearest_vertex_normals(tips, out.mesh)
    cosang = np.clip(np.einsum("ij,ij->i", d, nrm), -1.0, 1.0)
    theta = np.arccos(cosang).reshape(2, n)
    pair_ok = (out.status[0] == VALID) & (out.status[1] == VALID)
    sel = pair_ok & ((theta[0] > params.e2_angle_threshold) |
                     (theta[1] > params.e2_angle_threshold))
    if sel.any():
        _shrink_longer(out, np.nonzero(sel)[0], params)
        ln = out.lengths.reshape(2 * n)

    # final boundary-convergence correction
    workable = st == VALID
    ln[:], efin, exhausted = _length_walk(o, d, ln, workable, out.mesh,
                                          params)
    st[exhausted] = INVALID

    tips = o + ln[:, None] * d
    nrm = _nearest_vertex_normals(tips, out.mesh)
    cosang = np.clip(np.einsum("ij,ij->i", d, nrm), -1.0, 1.0)
    out.report = {
        "e0": _e0_tips(tips, out.mesh, params.e0_mode).reshape(2, n),
        "theta": np.arccos(cosang).reshape(2, n),
        "e2": np.abs(out.lengths[0] - out.lengths[1]),
    }
    return out


def _shrink_longer(srep: SRep, pairs: np.ndarray, params: RefineParams):
    """Shrink the longer spoke of each selected pair toward the shorter.

    Steps of length_step, stopping when the pair is balanced to within one
    step or when the shrunk spoke's E0 would exceed 2x tolerance.
    """
    cap = 2.0 * params.e0_tolerance
    for i in pairs:
        for _ in range(params.max_length_iters):
            gap = srep.lengths[0, i] - srep.lengths[1, i]
            if abs(gap) <= params.length_step:
                break
            side = SUPERIOR if gap > 0 else INFERIOR
            cand = srep.lengths[side, i] - params.length_step
            tip = srep.origins[side, i] + cand * srep.directions[side, i]
            if cand < 0 or _e0_tips(tip[None, :], srep.mesh,
                                    params.e0_mode)[0] > cap:
                break
            srep.lengths[side, i] = cand


# ---- sub-part classification and longitudinal refit ----


def classify_and_repair(srep: SRep, subfield_mesh: TriangleMesh,
                        params: RefineParams | None = None) -> SRep:
    """Re-target a refined field at a sub-part boundary.

    Skeletal points inside the sub-part keep their origin and take the
    distance to the sub-part boundary as length. Points outside whose
    spoke ray still crosses the sub-part are reassigned to the crossing
    (origin at the first intersection, tip at the second); rays with
    fewer than two crossings mark the spoke invalid for this sub-part.
    """
    if not subfield_mesh.watertight:
        from .errors import NotWatertight
        raise NotWatertight("subfield mesh must be watertight")
    params = params or RefineParams()
    out = srep.copy(mesh=subfield_mesh)
    n = out.n_points
    for side in (SUPERIOR, INFERIOR):
        o = out.origins[side]
        d = out.directions[side]
        inside = contains(subfield_mesh, o)
        for i in range(n):
            if srep.status[side, i] in (INVALID, DEGENERATE):
                out.status[side, i] = srep.status[side, i]
                continue
            ts, _ = subfield_mesh.query.ray_hits(o[i], d[i])
            ts = ts[ts > 1e-12]
            if inside[i]:
                if ts.size == 0:
                    out.status[side, i] = INVALID
                    continue
                out.lengths[side, i] = ts[0]
                out.status[side, i] = VALID
            elif ts.size >= 2:
                out.origins[side, i] = o[i] + ts[0] * d[i]
                out.lengths[side, i] = ts[1] - ts[0]
                out.status[side, i] = REASSIGNED
            else:
                out.status[side, i] = INVALID
                out.lengths[side, i] = 0.0
    _update_report(out, params)
    return out


def refit_lengths(srep: SRep, followup_mesh: TriangleMesh,
                  params: RefineParams | None = None) -> SRep:
    """Re-optimize spoke lengths against a follow-up boundary.

    Directions and grid stay frozen. Spokes whose origin falls outside
    the follow-up mesh with fewer than two crossings along their ray
    degenerate to zero length; all others walk their length (growth
    allowed) until the tip meets the new boundary.
    """
    params = params or RefineParams()
    out = srep.copy(mesh=followup_mesh)
    n = out.n_points
    o = out.origins.reshape(2 * n, 3)
    d = out.directions.reshape(2 * n, 3)
    ln = out.lengths.reshape(2 * n)
    st = out.status.reshape(2 * n)

    workable = (st == VALID) | (st == REASSIGNED)
    inside = contains(followup_mesh, o)
    check = workable & ~inside
    if check.any():
        idx = np.nonzero(check)[0]
        for i in idx:
            ts, _ = followup_mesh.query.ray_hits(o[i], d[i])
            if ts[ts > 1e-12].size < 2:
                st[i] = DEGENERATE
                ln[i] = 0.0
                workable[i] = False
    ln[:], _, _ = _length_walk(o, d, ln, workable, followup_mesh, params)
    _update_report(out, params)
    return out


def _update_report(srep: SRep, params: RefineParams):
    n = srep.n_points
    tips = srep.tips().reshape(2 * n, 3)
    nrm = _nearest_vertex_normals(tips, srep.mesh)
    d = srep.directions.reshape(2 * n, 3)
    cosang = np.clip(np.einsum("ij,ij->i", d, nrm), -1.0, 1.0)
    srep.report = {
        "e0": _e0_tips(tips, srep.mesh, params.e0_mode).reshape(2, n),
        "theta": np.arccos(cosang).reshape(2, n),
        "e2": np.abs(srep.lengths[0] - srep.lengths[1]),
    }


# ---- non-intersection audit ----


def _segment_pairs(srep: SRep):
    """Index pairs of 4-neighbor grid points, per part."""
    pairs = []
    offset = 0
    for gu, gv in srep.grid_shapes:
        idx = offset + np.arange(gu * gv).reshape(gu, gv)
        pairs.append(np.column_stack([idx[:, :-1].ravel(),
                                      idx[:, 1:].ravel()]))
        pairs.append(np.column_stack([idx[:-1, :].ravel(),
                                      idx[1:, :].ravel()]))
        offset += gu * gv
    return np.vstack(pairs)


def _seg_seg_dist(p1, q1, p2, q2):
    """Pairwise minimum distance between segments [p1,q1] and [p2,q2]."""
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = np.einsum("ij,ij->i", d1, d1)
    e = np.einsum("ij,ij->i", d2, d2)
    f = np.einsum("ij,ij->i", d2, r)
    c = np.einsum("ij,ij->i", d1, r)
    b = np.einsum("ij,ij->i", d1, d2)
    denom = a * e - b * b
    s = np.where(denom > 1e-30, (b * f - c * e) / np.where(denom > 1e-30,
                                                           denom, 1.0), 0.0)
    s = np.clip(s, 0.0, 1.0)
    t = np.where(e > 1e-30, (b * s + f) / np.where(e > 1e-30, e, 1.0), 0.0)
    # re-clamp s against the clamped t
    t_clamped = np.clip(t, 0.0, 1.0)
    need = t_clamped != t
    s = np.where(need & (a > 1e-30),
                 np.clip((b * t_clamped - c) / np.where(a > 1e-30, a, 1.0),
                         0.0, 1.0), s)
    closest1 = p1 + s[:, None] * d1
    closest2 = p2 + t_clamped[:, None] * d2
    return np.linalg.norm(closest1 - closest2, axis=1)


def nonintersection_violations(srep: SRep,
                               tol: float = SEGMENT_TOL) -> list:
    """Same-side 4-neighbor spoke pairs closer than tol anywhere.

    Exhaustive segment-segment distance test; returns (side, i, j) tuples.
    Invalid and degenerate spokes are excluded.
    """
    pairs = _segment_pairs(srep)
    tips = srep.tips()
    bad = []
    for side in (SUPERIOR, INFERIOR):
        ok = (srep.status[side] == VALID) | (srep.status[side] == REASSIGNED)
        live = ok[pairs[:, 0]] & ok[pairs[:, 1]]
        pq = pairs[live]
        if pq.size == 0:
            continue
        d = _seg_seg_dist(srep.origins[side][pq[:, 0]],
                          tips[side][pq[:, 0]],
                          srep.origins[side][pq[:, 1]],
                          tips[side][pq[:, 1]])
        for k in np.nonzero(d < tol)[0]:
            bad.append((side, int(pq[k, 0]), int(pq[k, 1])))
    return bad


# ---- serialization ----


def mesh_hash(mesh: TriangleMesh) -> str:
    h = hashlib.sha256()
    h.update(b"v")
    h.update(np.ascontiguousarray(mesh.vertices).tobytes())
    h.update(b"f")
    h.update(np.ascontiguousarray(mesh.faces).tobytes())
    return h.hexdigest()


def _sheet_to_dict(sheet: SkeletalSheet) -> dict:
    return {
        "ctrl": sheet.ctrl.tolist(),
        "knots_u": sheet.knots_u.tolist(),
        "knots_v": sheet.knots_v.tolist(),
        "axes": sheet.axes.tolist(),
        "center": sheet.center.tolist(),
        "degree": sheet.degree,
        "rms": sheet.rms,
        "part": sheet.part,
    }


def srep_to_json(srep: SRep) -> str:
    """S-rep document: schema version, mesh hash, sheets, spokes."""
    rep = srep.report
    n = srep.n_points
    spokes = []
    for side in (SUPERIOR, INFERIOR):
        for i in range(n):
            entry = {
                "grid_index": i,
                "side": SIDE_NAMES[side],
                "origin": srep.origins[side, i].tolist(),
                "direction": srep.directions[side, i].tolist(),
                "length": float(srep.lengths[side, i]),
                "status": STATUS_NAMES[int(srep.status[side, i])],
            }
            if rep:
                entry["report"] = {
                    "e0": float(rep["e0"][side, i]),
                    "theta": float(rep["theta"][side, i]),
                    "e2": float(rep["e2"][i]),
                }
            spokes.append(entry)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "mesh_hash": mesh_hash(srep.mesh),
        "grid_shapes": [list(s) for s in srep.grid_shapes],
        "part": srep.part.tolist(),
        "sheets": [_sheet_to_dict(s) for s in srep.sheets],
        "spokes": spokes,
    }
    return json.dumps(doc, indent=1, sort_keys=True)


def srep_from_json(text: str, mesh: TriangleMesh) -> SRep:
    """Rebuild a spoke field from its JSON document and its mesh."""
    doc = json.loads(text)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError("unsupported s-rep schema version")
    if doc.get("mesh_hash") != mesh_hash(mesh):
        raise ValueError("mesh does not match the s-rep document")
    n = len(doc["part"])
    origins = np.zeros((2, n, 3))
    directions = np.zeros((2, n, 3))
    lengths = np.zeros((2, n))
    status = np.zeros((2, n), np.int8)
    name_to_status = {v: k for k, v in STATUS_NAMES.items()}
    have_report = False
    e0a = np.zeros((2, n))
    th = np.zeros((2, n))
    e2a = np.zeros(n)
    for sp in doc["spokes"]:
        side = SIDE_NAMES.index(sp["side"])
        i = sp["grid_index"]
        origins[side, i] = sp["origin"]
        directions[side, i] = sp["direction"]
        lengths[side, i] = sp["length"]
        status[side, i] = name_to_status[sp["status"]]
        if "report" in sp:
            have_report = True
            e0a[side, i] = sp["report"]["e0"]
            th[side, i] = sp["report"]["theta"]
            e2a[i] = sp["report"]["e2"]
    report = {"e0": e0a, "theta": th, "e2": e2a} if have_report else {}
    sheets = tuple(
        SkeletalSheet(ctrl=np.array(s["ctrl"]),
                      knots_u=np.array(s["knots_u"]),
                      knots_v=np.array(s["knots_v"]),
                      axes=np.array(s["axes"]),
                      center=np.array(s["center"]),
                      rms=s["rms"], n_trimmed=0, degree=s["degree"],
                      part=s["part"])
        for s in doc["sheets"])
    return SRep(origins=origins, directions=directions, lengths=lengths,
                status=status, part=np.array(doc["part"], np.int32),
                grid_shapes=tuple(tuple(s) for s in doc["grid_shapes"]),
                mesh=mesh, sheets=sheets, report=report)
