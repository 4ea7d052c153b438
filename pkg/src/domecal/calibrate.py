"""Multi-image estimation of the decentering vector.

The energy is the squared board-plane error: every detected corner is
back-projected through the dome and intersected with its board plane,
and the difference to the known board coordinates is minimized over the
decentering vector plus one 6-DoF board pose per image (6m+3 parameters).
Board-plane residuals avoid the iterative forward projection inside the
optimization loop.

All ray tracing here runs in camera coordinates with the dome center at
``c = -R v_off``, which keeps the analytic Jacobians compact: the pixel
ray is constant and only the sphere center moves with the decentering.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .boards import ObservationSet
from .constants import DEFAULT_TOLERANCES
from .errors import (
    DivergedOutsideDomeWarning,
    InputError,
    LengthMismatch,
    RayParallelToBoard,
    TotalInternalReflection,
)
from .geometry import CameraRig, DomeModel
from .homography import fit_homography
from .validation import as_float_array, readonly


def rodrigues(vec) -> np.ndarray:
    """Rotation matrix of an axis-angle vector."""
    v = np.asarray(vec, dtype=np.float64)
    angle = float(np.linalg.norm(v))
    if angle < 1e-12:
        K = _skew(v)
        return np.eye(3) + K + 0.5 * (K @ K)
    axis = v / angle
    K = _skew(axis)
    return np.eye(3) + math.sin(angle) * K + (1.0 - math.cos(angle)) * (K @ K)


def rotation_log(R) -> np.ndarray:
    """Axis-angle vector of a rotation matrix."""
    R = np.asarray(R, dtype=np.float64)
    cos_angle = max(-1.0, min(1.0, (np.trace(R) - 1.0) / 2.0))
    angle = math.acos(cos_angle)
    if angle < 1e-12:
        return np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]]) / 2.0
    if abs(math.pi - angle) < 1e-6:
        # near pi: axis from the symmetric part
        M = (R + np.eye(3)) / 2.0
        axis = np.sqrt(np.maximum(np.diag(M), 0.0))
        axis *= np.sign([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]]) + (axis == 0)
        return angle * axis / np.linalg.norm(axis)
    axis = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    return angle * axis / (2.0 * math.sin(angle))


def _skew(v) -> np.ndarray:
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


@dataclass(frozen=True)
class Pose:
    """Board-to-camera rigid transform."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", readonly(np.asarray(self.rotation, dtype=np.float64)))
        object.__setattr__(self, "translation", readonly(np.asarray(self.translation, dtype=np.float64)))

    def apply(self, points) -> np.ndarray:
        return np.asarray(points) @ self.rotation.T + self.translation

    def perturbed(self, d_theta, d_t) -> "Pose":
        return Pose(rodrigues(d_theta) @ self.rotation, self.translation + np.asarray(d_t))

    def matrix(self) -> np.ndarray:
        M = np.eye(4)
        M[:3, :3] = self.rotation
        M[:3, 3] = self.translation
        return M

    def inverse(self) -> "Pose":
        return Pose(self.rotation.T, -self.rotation.T @ self.translation)

    def compose(self, other: "Pose") -> "Pose":
        return Pose(self.rotation @ other.rotation, self.rotation @ other.translation + self.translation)


@dataclass(frozen=True)
class CalibrationProblem:
    """Observations plus a starting point for the joint optimization."""

    observations: ObservationSet
    rig_template: CameraRig
    initial_v_off: np.ndarray
    initial_poses: tuple[Pose, ...]

    def __post_init__(self):
        v = as_float_array(self.initial_v_off, (3,), "initial_v_off")
        poses = tuple(self.initial_poses)
        if len(poses) != len(self.observations):
            raise InputError("one initial pose per image required")
        object.__setattr__(self, "initial_v_off", readonly(v))
        object.__setattr__(self, "initial_poses", poses)

    @property
    def n_parameters(self) -> int:
        return 6 * len(self.observations) + 3


@dataclass
class CalibrationOptions:
    max_iter: int = 100
    energy_rel_tol: float = DEFAULT_TOLERANCES.energy_rel_decrease
    gradient_tol: float = DEFAULT_TOLERANCES.gradient_norm
    lambda_init: float = 1e-6
    lambda_up: float = 10.0
    lambda_down: float = 3.0
    feasible_fraction: float = 0.95   # pull-back radius when |v| leaves the dome


@dataclass(frozen=True)
class CalibrationResult:
    v_off: np.ndarray
    poses: tuple[Pose, ...]
    rms_board_residual: float
    rms_reproj_px: float
    iterations: int
    converged: bool
    covariance_voff: np.ndarray
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class PoseErrorReport:
    ate_trans: float
    rotation_angle_error_mean: float


# ---------------------------------------------------------------------------
# Residual and analytic Jacobian of one corner


def _refract_unit(l, n, eta):
    """Refract unit ``l`` at unit normal ``n`` facing the ray (l.n < 0)."""
    c1 = -float(l @ n)
    disc = 1.0 - eta * eta * (1.0 - c1 * c1)
    if disc < 0.0:
        raise TotalInternalReflection("refraction lost inside the solver")
    c2 = math.sqrt(disc)
    t = eta * l + (eta * c1 - c2) * n
    return t, c1, c2


def _corner_residual_jac(d_cam, c, rig: CameraRig, pose: Pose, board_xy, with_jac=True):
    """Board-plane residual of one corner and its analytic Jacobians.

    Parameters are the dome center in camera coordinates ``c`` and the
    board pose; returns (residual(2,), d_res/d_c (2,3), d_res/d_pose (2,6))
    with the pose block ordered [rotation increment, translation].
    """
    tol = rig.tolerances
    media, dome = rig.media, rig.dome
    r_in, r_out = dome.inner_radius, dome.outer_radius
    thin = dome.model is DomeModel.THIN

    d = d_cam
    I3 = np.eye(3)

    f1 = float(d @ c)
    s1 = math.sqrt(max(f1 * f1 - float(c @ c) + r_in * r_in, 0.0))
    t1 = f1 + s1
    I1 = t1 * d
    n1 = -(I1 - c) / r_in  # faces the outgoing camera ray

    eta1 = media.mu_air / (media.mu_water if thin else media.mu_glass)
    g, c1a, c2a = _refract_unit(d, n1, eta1)

    if with_jac:
        dt1_dc = d + (f1 * d - c) / s1
        dI1_dc = np.outer(d, dt1_dc)
        dn1_dc = -(dI1_dc - I3) / r_in
        k1 = eta1 * eta1 * c1a / c2a - eta1
        dg_dn1 = (eta1 * c1a - c2a) * I3 + k1 * np.outer(n1, d)
        dg_dc = dg_dn1 @ dn1_dc

    if thin:
        O, w = I1, g
        if with_jac:
            dO_dc, dw_dc = dI1_dc, dg_dc
    else:
        p = I1 - c
        f2 = float(p @ g)
        s2 = math.sqrt(max(f2 * f2 - float(p @ p) + r_out * r_out, 0.0))
        t2 = -f2 + s2
        I2 = I1 + t2 * g
        n2 = -(I2 - c) / r_out
        eta2 = media.mu_glass / media.mu_water
        w, c1b, c2b = _refract_unit(g, n2, eta2)
        O = I2
        if with_jac:
            dp_dc = dI1_dc - I3
            df2_dc = dp_dc.T @ g + dg_dc.T @ p
            ds2_dc = (f2 * df2_dc - dp_dc.T @ p) / s2
            dt2_dc = -df2_dc + ds2_dc
            dI2_dc = dI1_dc + np.outer(g, dt2_dc) + t2 * dg_dc
            dn2_dc = -(dI2_dc - I3) / r_out
            k2 = eta2 * eta2 * c1b / c2b - eta2
            dw_dg = eta2 * I3 + k2 * np.outer(n2, n2)
            dw_dn2 = (eta2 * c1b - c2b) * I3 + k2 * np.outer(n2, g)
            dw_dc = dw_dg @ dg_dc + dw_dn2 @ dn2_dc
            dO_dc = dI2_dc

    P0 = pose.translation
    a1 = pose.rotation[:, 0]
    a2 = pose.rotation[:, 1]
    nu = pose.rotation[:, 2]

    denom = float(w @ nu)
    if abs(denom) < math.sin(math.radians(tol.board_parallel_deg)):
        raise RayParallelToBoard(f"|w . n| = {abs(denom):.2e}")
    e = P0 - O
    t3 = float(e @ nu) / denom
    Xi = O + t3 * w
    delta = Xi - P0
    x_hat = np.array([float(a1 @ delta), float(a2 @ delta)])
    residual = np.asarray(board_xy, dtype=np.float64) - x_hat

    if not with_jac:
        return residual, None, None

    A = np.vstack([a1, a2])  # rows pick board-plane coordinates

    # decentering block (through c)
    dt3_dc = -(dO_dc.T @ nu) / denom - t3 * (dw_dc.T @ nu) / denom
    dXi_dc = dO_dc + np.outer(w, dt3_dc) + t3 * dw_dc
    dres_dc = -(A @ dXi_dc)

    # pose translation
    dXi_dt = np.outer(w, nu) / denom
    dres_dt = -(A @ (dXi_dt - I3))

    # pose rotation increment
    dt3_dth = np.cross(nu, e - t3 * w) / denom
    dXi_dth = np.outer(w, dt3_dth)
    dres_dth = -(
        np.vstack([np.cross(a1, delta), np.cross(a2, delta)]) + A @ dXi_dth
    )

    jac_pose = np.hstack([dres_dth, dres_dt])
    return residual, dres_dc, jac_pose


def board_residual(corner_px, v_off, pose: Pose, rig_template: CameraRig) -> np.ndarray:
    """Board-plane residual (meters) of one detected corner.

    ``corner_px`` carries the pixel and its board coordinates as a pair
    ``(pixel, board_xy)``; the ray is traced with the template rig moved
    to ``v_off`` and intersected with the board plane of ``pose``.
    """
    pixel, board_xy = corner_px
    d_cam = rig_template.intrinsics.pixel_to_ray(pixel)
    c = -(rig_template.rotation @ np.asarray(v_off, dtype=np.float64))
    res, _, _ = _corner_residual_jac(d_cam, c, rig_template, pose, board_xy, with_jac=False)
    return res


# ---------------------------------------------------------------------------
# Pose initialization


def init_poses(observations: ObservationSet, intrinsics) -> list[Pose]:
    """Board-to-camera poses from homography decomposition (refraction ignored).

    Adequate as a start point: refraction displacements are small relative
    to the perspective geometry.
    """
    K = intrinsics.K
    board_2d = observations.board.points_2d()
    poses = []
    for obs in observations:
        H = fit_homography(board_2d, obs.corners_px)
        Hn = np.linalg.solve(K, H)
        lam = 2.0 / (np.linalg.norm(Hn[:, 0]) + np.linalg.norm(Hn[:, 1]))
        if Hn[2, 2] * lam < 0:  # board must sit in front of the camera
            lam = -lam
        r1, r2 = lam * Hn[:, 0], lam * Hn[:, 1]
        t = lam * Hn[:, 2]
        R_approx = np.column_stack([r1, r2, np.cross(r1, r2)])
        U, _, Vt = np.linalg.svd(R_approx)
        R = U @ np.diag([1.0, 1.0, np.linalg.det(U @ Vt)]) @ Vt
        poses.append(Pose(R, t))
    return poses


# ---------------------------------------------------------------------------
# Levenberg-Marquardt with Schur elimination of the pose blocks


class _Evaluation:
    __slots__ = ("energy", "n_corners", "per_corner", "blocks")

    def __init__(self, energy, n_corners, per_corner, blocks):
        self.energy = energy
        self.n_corners = n_corners
        self.per_corner = per_corner
        self.blocks = blocks


def _evaluate(rays, board_xys, valid_masks, rig, v, poses, with_jac):
    """Total energy and (optionally) the block-sparse normal equations."""
    c = -(rig.rotation @ v)
    energy = 0.0
    n_corners = 0
    blocks = None
    if with_jac:
        A = np.zeros((3, 3))
        gv = np.zeros(3)
        Bs, Ds, gps = [], [], []
    for j, pose in enumerate(poses):
        if with_jac:
            Bj = np.zeros((3, 6))
            Dj = np.zeros((6, 6))
            gpj = np.zeros(6)
        for i in range(len(board_xys)):
            if not valid_masks[j][i]:
                continue
            res, dres_dc, jac_pose = _corner_residual_jac(
                rays[j][i], c, rig, pose, board_xys[i], with_jac=with_jac
            )
            energy += float(res @ res)
            n_corners += 1
            if with_jac:
                jac_v = dres_dc @ (-rig.rotation)
                A += jac_v.T @ jac_v
                gv += jac_v.T @ res
                Bj += jac_v.T @ jac_pose
                Dj += jac_pose.T @ jac_pose
                gpj += jac_pose.T @ res
        if with_jac:
            Bs.append(Bj)
            Ds.append(Dj)
            gps.append(gpj)
    if with_jac:
        blocks = (A, gv, Bs, Ds, gps)
    return _Evaluation(energy, n_corners, None, blocks)


def _solve_step(blocks, lam):
    """Damped Gauss-Newton step via the Schur complement on the pose blocks."""
    A, gv, Bs, Ds, gps = blocks
    m = len(Bs)
    A_d = A + lam * np.diag(np.diag(A)) + 1e-18 * np.eye(3)
    Ds_inv = []
    S = A_d.copy()
    rhs = -gv.copy()
    for j in range(m):
        Dj = Ds[j] + lam * np.diag(np.diag(Ds[j])) + 1e-18 * np.eye(6)
        Dj_inv = np.linalg.inv(Dj)
        Ds_inv.append(Dj_inv)
        S -= Bs[j] @ Dj_inv @ Bs[j].T
        rhs += Bs[j] @ (Dj_inv @ gps[j])
    dv = np.linalg.solve(S, rhs)
    dposes = [Ds_inv[j] @ (-gps[j] - Bs[j].T @ dv) for j in range(m)]
    return dv, dposes


def calibrate(problem: CalibrationProblem, options: CalibrationOptions | None = None) -> CalibrationResult:
    """Jointly estimate the decentering vector and per-image board poses.

    Damped Gauss-Newton (Levenberg-Marquardt schedule) on the board-plane
    energy; the decentering couples all images while poses stay block
    diagonal, so each step eliminates the pose blocks by a Schur
    complement and solves a 3x3 system for the decentering. Convergence on
    relative energy decrease or gradient norm; non-convergence returns the
    best iterate with diagnostics instead of raising.
    """
    opt = options or CalibrationOptions()
    rig = problem.rig_template
    obs = problem.observations
    board_xys = obs.board.points_2d()
    intr = rig.intrinsics

    rays = [
        np.array([intr.pixel_to_ray(px) for px in image.corners_px])
        for image in obs
    ]

    v = np.array(problem.initial_v_off, dtype=np.float64)
    poses = list(problem.initial_poses)
    warnings_log: list[str] = []

    # corners invalid at the start are dropped for the whole solve
    valid = []
    c0 = -(rig.rotation @ v)
    for j, pose in enumerate(poses):
        mask = np.ones(len(board_xys), dtype=bool)
        for i in range(len(board_xys)):
            try:
                _corner_residual_jac(rays[j][i], c0, rig, pose, board_xys[i], with_jac=False)
            except (RayParallelToBoard, TotalInternalReflection) as exc:
                mask[i] = False
                warnings_log.append(f"image {j} corner {i} dropped: {exc}")
        valid.append(mask)
    n_dropped = int(sum((~m).sum() for m in valid))
    if n_dropped:
        warnings.warn(f"dropped {n_dropped} corners at initialization", stacklevel=2)

    current = _evaluate(rays, board_xys, valid, rig, v, poses, with_jac=True)
    energy = current.energy
    lam = opt.lambda_init
    converged = False
    n_iter = 0
    energy_history = [energy]

    for n_iter in range(1, opt.max_iter + 1):
        A, gv, Bs, Ds, gps = current.blocks
        grad_inf = max(
            float(np.abs(gv).max()),
            max(float(np.abs(g).max()) for g in gps) if gps else 0.0,
        )
        if grad_inf < opt.gradient_tol:
            converged = True
            break

        accepted = False
        while lam < 1e14:
            try:
                dv, dposes = _solve_step(current.blocks, lam)
            except np.linalg.LinAlgError:
                lam *= opt.lambda_up
                continue
            v_try = v + dv
            poses_try = [
                poses[j].perturbed(dposes[j][:3], dposes[j][3:]) for j in range(len(poses))
            ]
            if np.linalg.norm(v_try) >= rig.dome.inner_radius:
                v_try = (
                    v_try
                    / np.linalg.norm(v_try)
                    * (opt.feasible_fraction * rig.dome.inner_radius)
                )
                warnings.warn(
                    "decentering left the dome; pulled back inside",
                    DivergedOutsideDomeWarning,
                    stacklevel=2,
                )
                warnings_log.append(f"iteration {n_iter}: v_off pulled back inside the dome")
            try:
                trial = _evaluate(rays, board_xys, valid, rig, v_try, poses_try, with_jac=True)
            except (RayParallelToBoard, TotalInternalReflection):
                lam *= opt.lambda_up
                continue
            if trial.energy < energy:
                v, poses = v_try, poses_try
                decrease = energy - trial.energy
                energy = trial.energy
                current = trial
                energy_history.append(energy)
                lam = max(lam / opt.lambda_down, 1e-14)
                accepted = True
                if decrease < opt.energy_rel_tol * max(energy, 1e-300):
                    converged = True
                break
            lam *= opt.lambda_up
        if not accepted or converged:
            break

    n_corners = current.n_corners
    rms_board = math.sqrt(energy / max(n_corners, 1))

    # final pixel-space report via forward projection
    from .projection import project

    rig_final = rig.with_v_off(v)
    sq_px = []
    for j, image in enumerate(obs):
        pose = poses[j]
        # board corners, camera coords -> world frame of the fitted rig
        world = pose.apply(obs.board.points()) @ rig.rotation + v
        for i in range(len(board_xys)):
            if not valid[j][i]:
                continue
            try:
                px = project(rig_final, world[i]).pixel
            except Exception:
                continue
            err = px - image.corners_px[i]
            sq_px.append(float(err @ err))
    rms_px = math.sqrt(np.mean(sq_px)) if sq_px else float("nan")

    # covariance of the decentering from the undamped normal equations
    A, gv, Bs, Ds, gps = current.blocks
    S = A.copy()
    for j in range(len(Bs)):
        S -= Bs[j] @ np.linalg.pinv(Ds[j]) @ Bs[j].T
    dof = max(2 * n_corners - problem.n_parameters, 1)
    sigma2 = energy / dof
    try:
        cov_v = sigma2 * np.linalg.inv(S)
    except np.linalg.LinAlgError:
        cov_v = np.full((3, 3), np.nan)

    return CalibrationResult(
        v_off=readonly(v),
        poses=tuple(poses),
        rms_board_residual=rms_board,
        rms_reproj_px=rms_px,
        iterations=n_iter,
        converged=converged,
        covariance_voff=readonly(cov_v),
        diagnostics={
            "energy": energy,
            "energy_history": energy_history,
            "lambda": lam,
            "n_corners": n_corners,
            "n_dropped": n_dropped,
            "warnings": warnings_log,
        },
    )


# ---------------------------------------------------------------------------
# Quality metrics


def pose_error(est_poses, gt_poses) -> PoseErrorReport:
    """Average translational error and mean rotation angle between pose lists."""
    est, gt = list(est_poses), list(gt_poses)
    if len(est) != len(gt):
        raise LengthMismatch(f"{len(est)} estimated vs {len(gt)} ground-truth poses")
    sq_trans = []
    angles = []
    for pe, pg in zip(est, gt):
        rel = pe.inverse().compose(pg)
        sq_trans.append(float(rel.translation @ rel.translation))
        cos_angle = max(-1.0, min(1.0, (np.trace(rel.rotation) - 1.0) / 2.0))
        angles.append(math.acos(cos_angle))
    return PoseErrorReport(
        ate_trans=math.sqrt(float(np.mean(sq_trans))),
        rotation_angle_error_mean=float(np.mean(angles)),
    )


def _fit_pose_fixed_voff(
    anchors_px, anchors_xy, rig: CameraRig, v_off, pose0: Pose, max_iter: int = 50
) -> Pose:
    """Gauss-Newton pose refinement on the refractive board residual."""
    c = -(rig.rotation @ np.asarray(v_off, dtype=np.float64))
    rays = [rig.intrinsics.pixel_to_ray(px) for px in anchors_px]
    pose = pose0
    lam = 1e-8
    energy = None
    for _ in range(max_iter):
        H = np.zeros((6, 6))
        g = np.zeros(6)
        e = 0.0
        for ray, xy in zip(rays, anchors_xy):
            res, _, jac_pose = _corner_residual_jac(ray, c, rig, pose, xy, with_jac=True)
            H += jac_pose.T @ jac_pose
            g += jac_pose.T @ res
            e += float(res @ res)
        if energy is not None and abs(energy - e) < 1e-16 * max(e, 1e-300):
            break
        energy = e
        for _ in range(40):
            try:
                step = np.linalg.solve(H + lam * np.diag(np.diag(H)) + 1e-18 * np.eye(6), -g)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            pose_try = pose.perturbed(step[:3], step[3:])
            e_try = 0.0
            ok = True
            for ray, xy in zip(rays, anchors_xy):
                try:
                    res, _, _ = _corner_residual_jac(ray, c, rig, pose_try, xy, with_jac=False)
                except (RayParallelToBoard, TotalInternalReflection):
                    ok = False
                    break
                e_try += float(res @ res)
            if ok and e_try < e:
                pose = pose_try
                lam = max(lam / 3, 1e-14)
                break
            lam *= 10
        else:
            break
    return pose


def validate_holdout(
    result: CalibrationResult,
    holdout: ObservationSet,
    rig_template: CameraRig,
    mode: str = "outermost4",
) -> float:
    """Mean reprojection error on held-out images with the calibrated rig.

    Per image the pose comes from the four outermost corners only (the
    decentering is held fixed), then the remaining corners are forward
    projected and compared against their detections.  ``mode='all'`` fits
    the pose on every corner instead (sanity variant).
    """
    from .projection import project

    board = holdout.board
    anchors = board.outermost_indices()
    rest = [i for i in range(board.n_corners) if i not in anchors]
    if mode == "all":
        anchors = list(range(board.n_corners))
        rest = list(range(board.n_corners))
    elif mode != "outermost4":
        raise InputError(f"unknown holdout mode {mode!r}")

    rig = rig_template.with_v_off(result.v_off)
    board_xy = board.points_2d()
    board_3d = board.points()
    errors = []
    for image in holdout:
        pose0 = init_poses(ObservationSet(board, (image,)), rig.intrinsics)[0]
        pose = _fit_pose_fixed_voff(
            image.corners_px[anchors], board_xy[anchors], rig, result.v_off, pose0
        )
        world = pose.apply(board_3d) @ rig.rotation + np.asarray(result.v_off)
        per_img = []
        for i in rest:
            try:
                px = project(rig, world[i]).pixel
            except Exception:
                continue
            per_img.append(float(np.linalg.norm(px - image.corners_px[i])))
        if per_img:
            errors.append(float(np.mean(per_img)))
    return float(np.mean(errors)) if errors else float("nan")


def make_problem(
    observations: ObservationSet,
    rig_template: CameraRig,
    initial_v_off=None,
    initial_poses=None,
) -> CalibrationProblem:
    """Assemble a calibration problem, defaulting to homography poses."""
    if initial_poses is None:
        initial_poses = init_poses(observations, rig_template.intrinsics)
    if initial_v_off is None:
        initial_v_off = initial_voff_from_direct(observations, rig_template)
    return CalibrationProblem(
        observations=observations,
        rig_template=rig_template,
        initial_v_off=initial_v_off,
        initial_poses=tuple(initial_poses),
    )


def initial_voff_from_direct(
    observations: ObservationSet,
    rig_template: CameraRig,
    magnitude_fraction: float = 0.05,
) -> np.ndarray:
    """Starting decentering from the direct solver.

    Axis from the combined refraction center, magnitude a fixed fraction
    of the dome radius, sign from the convexity vote; when the vote is
    inconclusive both signs are tried and the lower board-plane energy
    wins.
    """
    from .direct import (
        DecenteringSign,
        axis_from_center,
        combine_centers,
        convexity_sign,
        estimate_center,
        signed_axis,
    )
    from .errors import AllDegenerate

    board = observations.board
    try:
        estimates = [estimate_center(img.corners_px, board) for img in observations]
        center = combine_centers(estimates)
    except (AllDegenerate, InputError):
        return np.zeros(3)

    positive = 0
    negative = 0
    for img in observations:
        vote = convexity_sign(img.corners_px, board, center)
        if vote.sign is DecenteringSign.BACKWARD:
            negative += 1
        elif vote.sign is DecenteringSign.FORWARD:
            positive += 1
    magnitude = magnitude_fraction * rig_template.dome.inner_radius
    if positive != negative:
        sign = DecenteringSign.FORWARD if positive > negative else DecenteringSign.BACKWARD
        axis = signed_axis(center, rig_template.intrinsics, rig_template.rotation, sign)
        return magnitude * np.asarray(axis)

    # inconclusive vote: evaluate the energy at both candidate signs
    axis = np.asarray(axis_from_center(center, rig_template.intrinsics, rig_template.rotation))
    poses = init_poses(observations, rig_template.intrinsics)
    board_xys = board.points_2d()
    intr = rig_template.intrinsics
    rays = [np.array([intr.pixel_to_ray(px) for px in img.corners_px]) for img in observations]
    best = None
    for cand in (magnitude * axis, -magnitude * axis):
        energy = 0.0
        try:
            for j, pose in enumerate(poses):
                cc = -(rig_template.rotation @ cand)
                for i in range(len(board_xys)):
                    res, _, _ = _corner_residual_jac(
                        rays[j][i], cc, rig_template, pose, board_xys[i], with_jac=False
                    )
                    energy += float(res @ res)
        except (RayParallelToBoard, TotalInternalReflection):
            continue
        if best is None or energy < best[0]:
            best = (energy, cand)
    return best[1] if best is not None else magnitude * axis
