"""Rigid alignment and smooth invertible surface deformation.

Rigid alignment is point-to-surface ICP with a principal-axes start.
Deformation flows a set of control momenta through a Gaussian-kernel
velocity field (forward Euler, controls advected with the flow) and fits
the momenta by gradient descent on a symmetric closest-point data term
plus the kinetic-energy regularizer. The kernel width is tuned by a
coarse-to-fine sweep that keeps the smallest width meeting the mismatch
threshold.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from ._backend import NUMBA_ENABLED
from .errors import FoldDetected
from .mesh import TriangleMesh, contains

if NUMBA_ENABLED:
    from ._kernels_numba import gauss_kernel_apply, gauss_kernel_back
else:
    from ._kernels_numpy import gauss_kernel_apply, gauss_kernel_back

__all__ = [
    "RigidTransform",
    "DeformationField",
    "SweepConfig",
    "rigid_align",
    "deform",
    "sweep_deform",
    "transport_points",
    "mean_surface_mismatch",
]

ICP_MAX_ITERS = 100
ICP_RMS_TOL = 1e-4
ICP_SAMPLE_CAP = 2000

GD_MAX_ITERS = 500
GD_REL_TOL = 1e-4
GD_BACKTRACK_MAX = 30
FOLD_PROBES = 200
FOLD_SEED = 12345
FOLD_RETRIES = 3


# ---- rigid ----


@dataclass(frozen=True)
class RigidTransform:
    """Rotation + translation; maps x to R @ x + t."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, float)
        if r.shape != (3, 3):
            raise ValueError("rotation must be 3x3")
        if np.abs(r.T @ r - np.eye(3)).max() > 1e-9:
            raise ValueError("rotation is not orthonormal")
        if np.linalg.det(r) < 0:
            raise ValueError("rotation must be proper (det +1)")

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points) @ self.rotation.T + self.translation

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self after other: x -> self(other(x))."""
        return RigidTransform(
            rotation=self.rotation @ other.rotation,
            translation=self.rotation @ other.translation +
            self.translation)

    def inverse(self) -> "RigidTransform":
        return RigidTransform(rotation=self.rotation.T,
                              translation=-self.rotation.T @
                              self.translation)

    def to_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def to_json(self) -> str:
        return json.dumps({"matrix": self.to_matrix().tolist()})

    @staticmethod
    def from_json(text: str) -> "RigidTransform":
        m = np.array(json.loads(text)["matrix"])
        return RigidTransform(rotation=m[:3, :3], translation=m[:3, 3])

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(rotation=np.eye(3), translation=np.zeros(3))


def _subsample(points: np.ndarray, cap: int) -> np.ndarray:
    if points.shape[0] <= cap:
        return points
    idx = np.unique(np.linspace(0, points.shape[0] - 1, cap).astype(int))
    return points[idx]


def _kabsch(src: np.ndarray, dst: np.ndarray):
    """Least-squares rotation+translation mapping src onto dst."""
    sc = src.mean(axis=0)
    dc = dst.mean(axis=0)
    h = (src - sc).T @ (dst - dc)
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    r = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return r, dc - r @ sc


def _principal_axes(points: np.ndarray) -> np.ndarray:
    q = points - points.mean(axis=0)
    _, vecs = np.linalg.eigh(q.T @ q)
    return vecs[:, ::-1]  # columns, descending variance


def rigid_align(moving: TriangleMesh,
                fixed: TriangleMesh) -> RigidTransform:
    """ICP rigid transform taking the moving mesh onto the fixed one.

    Starts from centroid + principal-axes alignment, trying the four
    proper axis-sign combinations and keeping the one with least initial
    cost; then alternates closest-point correspondence on the fixed
    surface with a point-to-point rigid solve until the correspondence
    RMS changes by less than 1e-4 mm. Returns the best transform seen.
    """
    src = _subsample(moving.vertices, ICP_SAMPLE_CAP)
    ref = _subsample(fixed.vertices, ICP_SAMPLE_CAP)
    vm = _principal_axes(src)
    vf = _principal_axes(ref)
    cm = src.mean(axis=0)
    cf = ref.mean(axis=0)

    best = None
    for sx, sy in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
        s = np.array([sx, sy, sx * sy], float)  # proper: det = +1
        r0 = (vf * s) @ vm.T
        if np.linalg.det(r0) < 0:  # guard against reflected eigh output
            r0 = (vf * (s * -1.0)) @ vm.T
        t0 = cf - r0 @ cm
        _, _, d = fixed.query.closest_points(src @ r0.T + t0)
        cost = float(np.mean(d ** 2))
        if best is None or cost < best[0]:
            best = (cost, r0, t0)
    _, r, t = best

    best_rms = np.inf
    best_rt = (r, t)
    prev_rms = np.inf
    for _ in range(ICP_MAX_ITERS):
        cur = src @ r.T + t
        q, _, d = fixed.query.closest_points(cur)
        rms = float(np.sqrt(np.mean(d ** 2)))
        if rms < best_rms:
            best_rms = rms
            best_rt = (r, t)
        if abs(prev_rms - rms) < ICP_RMS_TOL:
            break
        prev_rms = rms
        r, t = _kabsch(src, q)
    return RigidTransform(rotation=best_rt[0], translation=best_rt[1])


# ---- deformation ----


@dataclass(frozen=True)
class SweepConfig:
    sigma_min: float = 3.0
    sigma_max: float = 7.0
    sigma_step: float = 0.5
    mismatch_threshold: float = 0.3   # mm
    data_noise: float = 0.05          # relative data-term weight 1/noise^2
    integration_steps: int = 10
    max_controls: int = 1500

    def __post_init__(self):
        if self.sigma_min > self.sigma_max:
            raise ValueError("sigma_min must not exceed sigma_max")
        if self.sigma_step <= 0:
            raise ValueError("sigma_step must be positive")
        if self.data_noise <= 0 or self.integration_steps < 1:
            raise ValueError("bad data_noise or integration_steps")


@dataclass(frozen=True)
class DeformationField:
    """Gaussian-kernel flow: momenta at control points, advected.

    The induced map is replayed deterministically from the initial
    controls and momenta; ``controls0`` are template vertices at time 0.
    """

    controls0: np.ndarray   # (k, 3)
    momenta: np.ndarray     # (k, 3)
    sigma: float
    steps: int

    def to_json(self) -> str:
        return json.dumps({
            "controls": self.controls0.tolist(),
            "momenta": self.momenta.tolist(),
            "sigma": self.sigma,
            "steps": self.steps,
        })

    @staticmethod
    def from_json(text: str) -> "DeformationField":
        doc = json.loads(text)
        return DeformationField(controls0=np.array(doc["controls"]),
                                momenta=np.array(doc["momenta"]),
                                sigma=float(doc["sigma"]),
                                steps=int(doc["steps"]))


def _control_trajectory(field: DeformationField) -> np.ndarray:
    """Control positions before each sub-step: (steps, k, 3)."""
    h = 1.0 / field.steps
    c = field.controls0.copy()
    traj = np.empty((field.steps, *c.shape))
    for s in range(field.steps):
        traj[s] = c
        c = c + h * gauss_kernel_apply(c, c, field.momenta, field.sigma)
    return traj


def transport_points(field: DeformationField,
                     points: np.ndarray) -> np.ndarray:
    """Flow points through the field's integrated velocity.

    Identical sub-steps to the template flow, so a template vertex used
    as input reproduces its deformed position exactly.
    """
    traj = _control_trajectory(field)
    h = 1.0 / field.steps
    x = np.array(points, float, copy=True)
    for s in range(field.steps):
        x += h * gauss_kernel_apply(x, traj[s], field.momenta, field.sigma)
    return x


def mean_surface_mismatch(field: DeformationField,
                          template: TriangleMesh,
                          target: TriangleMesh) -> float:
    """Symmetric mean closest-point distance after deformation, mm."""
    moved = transport_points(field, template.vertices)
    _, _, d_fwd = target.query.closest_points(moved)
    tree = cKDTree(moved)
    d_bwd, _ = tree.query(target.vertices)
    return 0.5 * (float(d_fwd.mean()) + float(d_bwd.mean()))


def _flow_controls(c0, momenta, sigma, steps):
    h = 1.0 / steps
    traj = np.empty((steps + 1, *c0.shape))
    traj[0] = c0
    c = c0.copy()
    for s in range(steps):
        c = c + h * gauss_kernel_apply(c, c, momenta, sigma)
        traj[s + 1] = c
    return traj


def _objective(c0, momenta, sigma, steps, target, target_pts, weight,
               kreg):
    """True objective: fresh closest-point data term + kinetic energy."""
    traj = _flow_controls(c0, momenta, sigma, steps)
    x = traj[-1]
    _, _, d_fwd = target.query.closest_points(x)
    tree = cKDTree(x)
    d_bwd, _ = tree.query(target_pts)
    data = float(np.mean(d_fwd ** 2) + np.mean(d_bwd ** 2))
    reg = float(np.sum(momenta * (kreg @ momenta)))
    return weight * data + reg, traj


def _gradient(traj, momenta, sigma, steps, target, target_pts, weight,
              kreg):
    """Adjoint gradient with correspondences frozen at the current state."""
    x = traj[-1]
    n = x.shape[0]
    q, _, _ = target.query.closest_points(x)
    tree = cKDTree(x)
    _, nearest = tree.query(target_pts)

    # d/dx of weight * (mean |x_i - q_i|^2 + mean |y_j - x_{m_j}|^2)
    lam = 2.0 * (x - q) / n
    np.add.at(lam, nearest, 2.0 * (x[nearest] - target_pts) /
              target_pts.shape[0])
    lam *= weight

    h = 1.0 / steps
    g_alpha = 2.0 * (kreg @ momenta)
    for s in range(steps - 1, -1, -1):
        c = traj[s]
        out_p, out_c, out_a = gauss_kernel_back(c, c, momenta, lam, sigma)
        g_alpha += h * out_a
        lam = lam + h * (out_p + out_c)
    return g_alpha


def _kernel_matrix(c0, sigma):
    d2 = ((c0[:, None, :] - c0[None, :, :]) ** 2).sum(axis=2)
    return np.exp(-d2 / (sigma * sigma))


def _probe_points(template: TriangleMesh, count: int) -> np.ndarray:
    rng = np.random.default_rng(FOLD_SEED)
    lo = template.vertices.min(axis=0)
    hi = template.vertices.max(axis=0)
    pts = []
    for _ in range(200):
        cand = rng.uniform(lo, hi, size=(4 * count, 3))
        cand = cand[contains(template, cand)]
        pts.append(cand)
        if sum(p.shape[0] for p in pts) >= count:
            break
    pts = np.vstack(pts)
    if pts.shape[0] == 0:
        return template.vertices[:count]
    return pts[:count]


def _jacobians_positive(field: DeformationField, probes: np.ndarray,
                        eps: float = 1e-3) -> bool:
    """Finite-difference Jacobian determinant > 0 at every probe."""
    n = probes.shape[0]
    batch = np.empty((6 * n, 3))
    for a in range(3):
        e = np.zeros(3)
        e[a] = eps
        batch[2 * a * n:(2 * a + 1) * n] = probes + e
        batch[(2 * a + 1) * n:(2 * a + 2) * n] = probes - e
    moved = transport_points(field, batch)
    jac = np.empty((n, 3, 3))
    for a in range(3):
        plus = moved[2 * a * n:(2 * a + 1) * n]
        minus = moved[(2 * a + 1) * n:(2 * a + 2) * n]
        jac[:, :, a] = (plus - minus) / (2.0 * eps)
    return bool(np.linalg.det(jac).min() > 0.0)


def _optimize(c0, sigma, steps, target, target_pts, weight, step0):
    kreg = _kernel_matrix(c0, sigma)
    momenta = np.zeros_like(c0)
    f, traj = _objective(c0, momenta, sigma, steps, target, target_pts,
                         weight, kreg)
    step = step0
    for _ in range(GD_MAX_ITERS):
        g = _gradient(traj, momenta, sigma, steps, target, target_pts,
                      weight, kreg)
        gnorm2 = float(np.sum(g * g))
        if gnorm2 < 1e-30:
            break
        accepted = False
        for _ in range(GD_BACKTRACK_MAX):
            cand = momenta - step * g
            f_new, traj_new = _objective(c0, cand, sigma, steps, target,
                                         target_pts, weight, kreg)
            if f_new < f:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        rel = (f - f_new) / max(f, 1e-30)
        momenta, f, traj = cand, f_new, traj_new
        step *= 1.5
        if rel < GD_REL_TOL:
            break
    return momenta, f


def deform(template: TriangleMesh, target: TriangleMesh,
           cfg: SweepConfig, sigma: float) -> DeformationField:
    """Fit a deformation of the template onto the target at one width.

    Control points are the template vertices (subsampled to the config
    cap). If any orientation probe fails after optimization the fit is
    retried with a halved initial step; persistent folding raises
    FoldDetected.
    """
    c0 = _subsample(template.vertices, cfg.max_controls)
    target_pts = _subsample(target.vertices, cfg.max_controls)
    weight = 1.0 / (cfg.data_noise ** 2)
    probes = _probe_points(template, FOLD_PROBES)

    step0 = 1e-4
    for _ in range(FOLD_RETRIES):
        momenta, _ = _optimize(c0, sigma, cfg.integration_steps, target,
                               target_pts, weight, step0)
        fld = DeformationField(controls0=c0, momenta=momenta, sigma=sigma,
                               steps=cfg.integration_steps)
        if _jacobians_positive(fld, probes):
            return fld
        step0 *= 0.5
    raise FoldDetected("deformation folds at sigma=%g" % sigma)


def sweep_deform(template: TriangleMesh, target: TriangleMesh,
                 cfg: SweepConfig):
    """Kernel-width sweep, large to small, keeping the smallest width
    whose mismatch meets the threshold.

    Returns (field, sigma, info); info holds the mismatch per evaluated
    sigma and a warning flag when no width qualified (the best found is
    returned in that case).
    """
    sigmas = np.arange(cfg.sigma_max, cfg.sigma_min - 1e-9,
                       -cfg.sigma_step)
    best_qualifying = None
    best_any = None
    mismatches = {}
    for sigma in sigmas:
        fld = deform(template, target, cfg, float(sigma))
        mm = mean_surface_mismatch(fld, template, target)
        mismatches[float(sigma)] = mm
        if best_any is None or mm < best_any[2]:
            best_any = (fld, float(sigma), mm)
        if mm <= cfg.mismatch_threshold:
            best_qualifying = (fld, float(sigma), mm)
        elif best_qualifying is not None:
            break  # widths below the last qualifying one have stopped working
    if best_qualifying is not None:
        fld, sigma, mm = best_qualifying
        return fld, sigma, {"mismatch": mm, "warning": False,
                            "evaluated": mismatches}
    fld, sigma, mm = best_any
    return fld, sigma, {"mismatch": mm, "warning": True,
                        "evaluated": mismatches}
