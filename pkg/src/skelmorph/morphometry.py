"""Shape measurements over a spoke field: thickness, width, length,
curvedness, and longitudinal series.

Thickness sums the superior and inferior spoke lengths per skeletal point;
widths are arc lengths along grid rows split at the v=0.5 centerline; the
long axis is the centerline polyline, with curvedness as its total turning
angle. Longitudinal records re-fit the frozen baseline spoke field against
each rigidly aligned follow-up boundary.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .errors import GridTooCoarse
from .mesh import TriangleMesh
from .registration import rigid_align
from .spokes import (DEGENERATE, INFERIOR, INVALID, REASSIGNED, SUPERIOR,
                     VALID, RefineParams, SRep, refit_lengths)

__all__ = [
    "MorphometryRecord",
    "subfield_thickness",
    "global_thickness",
    "width",
    "long_axis_length",
    "long_axis_curvedness",
    "measure",
    "longitudinal_series",
    "write_point_csv",
    "write_width_csv",
    "write_scalar_csv",
]

DEFAULT_LAYERS = 23


@dataclass(frozen=True)
class MorphometryRecord:
    """All measurements of one shape at one time point.

    Per-point arrays follow the s-rep grid order; ``thickness`` is NaN
    where a point is invalid (missing marker, never 0). ``widths`` maps
    part tag to an (L, 2) array of (lateral, medial) arc lengths.
    """

    time: int
    thickness: np.ndarray   # (n,)
    sup_len: np.ndarray     # (n,)
    inf_len: np.ndarray     # (n,)
    status: np.ndarray      # (n,) int8, point level
    part: np.ndarray        # (n,)
    grid_shapes: tuple
    widths: dict            # part -> (L, 2) lateral, medial
    length: dict            # part -> mm
    curvedness: dict        # part -> rad


def _point_status(srep: SRep) -> np.ndarray:
    """Pair status: invalid dominates, then degenerate, then reassigned."""
    s0, s1 = srep.status[SUPERIOR], srep.status[INFERIOR]
    st = np.full(srep.n_points, VALID, np.int8)
    st[(s0 == REASSIGNED) | (s1 == REASSIGNED)] = REASSIGNED
    st[(s0 == DEGENERATE) | (s1 == DEGENERATE)] = DEGENERATE
    st[(s0 == INVALID) | (s1 == INVALID)] = INVALID
    return st


def global_thickness(srep: SRep):
    """Per-point (total, superior, inferior) spoke-length sums.

    Degenerate spokes contribute 0; a point with an invalid spoke gets a
    NaN total rather than a misleading zero.
    """
    sup = srep.lengths[SUPERIOR].copy()
    inf = srep.lengths[INFERIOR].copy()
    total = sup + inf
    bad = (srep.status[SUPERIOR] == INVALID) | \
          (srep.status[INFERIOR] == INVALID)
    total[bad] = np.nan
    return total, sup, inf


def subfield_thickness(srep: SRep, subfield_mesh: TriangleMesh = None):
    """Per-point thickness against a sub-part, by spoke classification.

    The srep must already be classified against the sub-part. Points
    whose origin stayed inside sum both spoke lengths; points reassigned
    onto a boundary crossing take that crossing's span (superior side
    preferred when both crossed); unreachable points are NaN.
    """
    n = srep.n_points
    t = np.full(n, np.nan)
    s0, s1 = srep.status[SUPERIOR], srep.status[INFERIOR]
    both_ok = (s0 == VALID) & (s1 == VALID)
    t[both_ok] = srep.lengths[SUPERIOR, both_ok] + \
        srep.lengths[INFERIOR, both_ok]
    re_sup = (s0 == REASSIGNED) & ~both_ok
    t[re_sup] = srep.lengths[SUPERIOR, re_sup]
    re_inf = (s1 == REASSIGNED) & ~both_ok & ~re_sup
    t[re_inf] = srep.lengths[INFERIOR, re_inf]
    return t


# ---- grid geometry ----


def _part_grid(srep: SRep, part: int) -> np.ndarray:
    offset = 0
    for k, (gu, gv) in enumerate(srep.grid_shapes):
        if k == part:
            return srep.origins[SUPERIOR,
                                offset:offset + gu * gv].reshape(gu, gv, 3)
        offset += gu * gv
    raise ValueError("no part %d" % part)


def _row_at(grid: np.ndarray, u: float) -> np.ndarray:
    """Grid row at fractional parameter u, linearly interpolated."""
    gu = grid.shape[0]
    x = u * (gu - 1)
    i = min(int(np.floor(x)), gu - 2) if gu > 1 else 0
    f = x - i
    if gu == 1:
        return grid[0]
    return (1.0 - f) * grid[i] + f * grid[i + 1]


def _centerline_point(row: np.ndarray):
    """Point at v=0.5 on a row polyline plus its segment index/fraction."""
    gv = row.shape[0]
    x = 0.5 * (gv - 1)
    i = min(int(np.floor(x)), gv - 2)
    f = x - i
    return (1.0 - f) * row[i] + f * row[i + 1], i, f


def _polyline_length(pts: np.ndarray) -> float:
    if pts.shape[0] < 2:
        return 0.0
    return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())


def width(srep: SRep, layers: int = DEFAULT_LAYERS, part: int = 0):
    """(lateral, medial) arc-length widths for each of ``layers`` rows.

    Rows are resampled uniformly in u; each row splits at the v=0.5
    centerline point, lateral being the v=1 side. The two halves sum to
    the full row arc length exactly.
    """
    grid = _part_grid(srep, part)
    gu, gv = grid.shape[:2]
    if gv < 3:
        raise GridTooCoarse("width needs at least 3 points across")
    if gu < layers:
        raise GridTooCoarse("grid has fewer rows than requested layers")
    out = np.empty((layers, 2))
    for j in range(layers):
        u = j / (layers - 1) if layers > 1 else 0.5
        row = _row_at(grid, u)
        c, i, f = _centerline_point(row)
        medial = np.vstack([c[None, :], row[i::-1]])      # toward v=0
        lateral = np.vstack([c[None, :], row[i + 1:]])    # toward v=1
        out[j, 0] = _polyline_length(lateral)
        out[j, 1] = _polyline_length(medial)
    return out


def _centerline(srep: SRep, part: int = 0) -> np.ndarray:
    grid = _part_grid(srep, part)
    return np.array([_centerline_point(grid[i])[0]
                     for i in range(grid.shape[0])])


def long_axis_length(srep: SRep, part: int = 0) -> float:
    """Arc length of the v=0.5 centerline polyline."""
    return _polyline_length(_centerline(srep, part))


def long_axis_curvedness(srep: SRep, part: int = 0) -> float:
    """Total turning angle (radians) along the centerline polyline."""
    c = _centerline(srep, part)
    if c.shape[0] < 3:
        raise ValueError("curvedness needs a centerline of >= 3 points")
    seg = np.diff(c, axis=0)
    norms = np.linalg.norm(seg, axis=1)
    keep = norms > 1e-12
    seg = seg[keep] / norms[keep][:, None]
    if seg.shape[0] < 2:
        return 0.0
    cosang = np.clip(np.einsum("ij,ij->i", seg[:-1], seg[1:]), -1.0, 1.0)
    return float(np.arccos(cosang).sum())


# ---- records ----


def measure(srep: SRep, time: int = 0,
            layers: int = DEFAULT_LAYERS) -> MorphometryRecord:
    """Full measurement record of one spoke field."""
    total, sup, inf = global_thickness(srep)
    widths = {}
    length = {}
    curv = {}
    for part in range(len(srep.grid_shapes)):
        gu, gv = srep.grid_shapes[part]
        eff_layers = min(layers, gu)
        widths[part] = width(srep, eff_layers, part)
        length[part] = long_axis_length(srep, part)
        curv[part] = (long_axis_curvedness(srep, part)
                      if gu >= 3 else 0.0)
    return MorphometryRecord(
        time=time, thickness=total, sup_len=sup, inf_len=inf,
        status=_point_status(srep), part=srep.part.copy(),
        grid_shapes=srep.grid_shapes, widths=widths, length=length,
        curvedness=curv)


def longitudinal_series(baseline: SRep, followups: list,
                        params: RefineParams | None = None,
                        layers: int = DEFAULT_LAYERS) -> list:
    """Records for baseline (time 0) and each follow-up boundary.

    Every follow-up is rigidly aligned onto the baseline boundary, then
    the frozen baseline spokes re-fit their lengths against it, so
    per-point values are index-comparable across time.
    """
    params = params or RefineParams()
    records = [measure(baseline, time=0, layers=layers)]
    for k, mesh in enumerate(followups, start=1):
        rt = rigid_align(mesh, baseline.mesh)
        aligned = TriangleMesh(rt.apply(mesh.vertices), mesh.faces.copy())
        refit = refit_lengths(baseline, aligned, params)
        records.append(measure(refit, time=k, layers=layers))
    return records


# ---- CSV output ----


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and not np.isfinite(x)):
        return "NA"
    if isinstance(x, float):
        return "%.6f" % x
    return str(x)


def _atomic_writer(path):
    tmp = path + ".tmp"
    return tmp


def _uv_indices(grid_shapes, part):
    """(u_idx, v_idx) arrays for the flattened composite grid."""
    us, vs = [], []
    for k, (gu, gv) in enumerate(grid_shapes):
        uu, vv = np.unravel_index(np.arange(gu * gv), (gu, gv))
        us.append(uu)
        vs.append(vv)
    return np.concatenate(us), np.concatenate(vs)


def write_point_csv(records: list, shape_id: str, path: str):
    """Per-point rows: shape, time, grid index, part, T, lengths, status."""
    tmp = _atomic_writer(path)
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["shape_id", "time", "u_idx", "v_idx", "part", "T",
                    "sup_len", "inf_len", "status"])
        for rec in records:
            u_idx, v_idx = _uv_indices(rec.grid_shapes, rec.part)
            from .spokes import STATUS_NAMES
            for i in range(rec.thickness.shape[0]):
                w.writerow([shape_id, rec.time, u_idx[i], v_idx[i],
                            rec.part[i], _fmt(float(rec.thickness[i])),
                            _fmt(float(rec.sup_len[i])),
                            _fmt(float(rec.inf_len[i])),
                            STATUS_NAMES[int(rec.status[i])]])
    os.replace(tmp, path)


def write_width_csv(records: list, shape_id: str, path: str):
    tmp = _atomic_writer(path)
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["shape_id", "time", "part", "layer", "lateral_w",
                    "medial_w"])
        for rec in records:
            for part, arr in sorted(rec.widths.items()):
                for j in range(arr.shape[0]):
                    w.writerow([shape_id, rec.time, part, j,
                                _fmt(float(arr[j, 0])),
                                _fmt(float(arr[j, 1]))])
    os.replace(tmp, path)


def write_scalar_csv(records: list, shape_id: str, path: str):
    tmp = _atomic_writer(path)
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["shape_id", "time", "part", "length", "curvedness"])
        for rec in records:
            for part in sorted(rec.length):
                w.writerow([shape_id, rec.time, part,
                            _fmt(float(rec.length[part])),
                            _fmt(float(rec.curvedness[part]))])
    os.replace(tmp, path)
