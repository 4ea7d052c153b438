"""Synthetic experiment generation: observations, displacement fields,
iso-refraction-angle curves and noise sweeps.

All generators are deterministic functions of their seed.  Trials derive
child generators by spawning a ``numpy.random.SeedSequence``, so serial
and parallel executions of a sweep produce identical numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .boards import ChessboardSpec, ImageObservation, ObservationSet
from .calibrate import Pose, calibrate, make_problem, pose_error
from .direct import (
    DecenteringSign,
    combine_centers,
    convexity_sign,
    estimate_center,
)
from .errors import (
    AllDegenerate,
    DomeCalError,
    PoseSamplingExhausted,
    ThetaUnreachable,
)
from .geometry import CameraRig, refraction_axis
from .projection import project, project_in_air
from .validation import readonly


@dataclass(frozen=True)
class PoseSampler:
    """Board-pose distribution: frustum slab depth, tilt and margins."""

    distance_range: tuple[float, float] = (0.4, 2.0)
    tilt_max_rad: float = math.radians(40.0)
    margin_frac: float = 0.15
    max_attempts: int = 300


@dataclass(frozen=True)
class SimConfig:
    rig: CameraRig
    board: ChessboardSpec
    n_images: int = 10
    pose_sampler: PoseSampler = field(default_factory=PoseSampler)
    noise_sigma_px: float = 0.0
    rng_seed: int = 0


@dataclass(frozen=True)
class SimulationResult:
    observations: ObservationSet
    v_off: np.ndarray
    poses: tuple[Pose, ...]          # board-to-camera ground truth
    metadata: dict


@dataclass(frozen=True)
class DisplacementField:
    """Unrefracted vs refracted pixel grid at a fixed scene depth."""

    in_air_px: np.ndarray
    refracted_px: np.ndarray
    arrows: np.ndarray
    valid: np.ndarray
    scene_depth: float


def _rotate_about(axis, angle) -> np.ndarray:
    K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + math.sin(angle) * K + (1 - math.cos(angle)) * (K @ K)


def _sample_board_pose(rng: np.random.Generator, rig: CameraRig, board: ChessboardSpec, sampler: PoseSampler):
    """Rejection-sample a board pose whose corners all project into view."""
    intr = rig.intrinsics
    span = board.points_2d().max(axis=0)
    for _ in range(sampler.max_attempts):
        u = rng.uniform(sampler.margin_frac * intr.width, (1 - sampler.margin_frac) * intr.width)
        v = rng.uniform(sampler.margin_frac * intr.height, (1 - sampler.margin_frac) * intr.height)
        depth = rng.uniform(*sampler.distance_range)
        d_cam = intr.pixel_to_ray((u, v))
        center_w = rig.rotation.T @ (d_cam * depth / d_cam[2]) + rig.v_off

        z_axis = rig.rotation.T @ d_cam  # board normal facing the camera
        helper = np.array([1.0, 0.0, 0.0])
        if abs(helper @ z_axis) > 0.9:
            helper = np.array([0.0, 1.0, 0.0])
        x_axis = np.cross(helper, z_axis)
        x_axis /= np.linalg.norm(x_axis)
        y_axis = np.cross(z_axis, x_axis)
        R_bw = np.column_stack([x_axis, y_axis, z_axis])
        R_bw = _rotate_about(x_axis, rng.uniform(-sampler.tilt_max_rad, sampler.tilt_max_rad)) @ R_bw
        R_bw = _rotate_about(y_axis, rng.uniform(-sampler.tilt_max_rad, sampler.tilt_max_rad)) @ R_bw
        R_bw = _rotate_about(z_axis, rng.uniform(0.0, 2 * math.pi)) @ R_bw
        t_bw = center_w - R_bw @ np.array([span[0] / 2, span[1] / 2, 0.0])

        pixels = np.empty((board.n_corners, 2))
        ok = True
        for i, p in enumerate(board.points()):
            try:
                pixels[i] = project(rig, R_bw @ p + t_bw).pixel
            except DomeCalError:
                ok = False
                break
        if not ok:
            continue
        inside = (
            (pixels[:, 0] > 1.0).all()
            and (pixels[:, 0] < intr.width - 1.0).all()
            and (pixels[:, 1] > 1.0).all()
            and (pixels[:, 1] < intr.height - 1.0).all()
        )
        if inside:
            return R_bw, t_bw, pixels
    raise PoseSamplingExhausted(
        f"no visible pose after {sampler.max_attempts} attempts"
    )


def generate_observations(config: SimConfig) -> SimulationResult:
    """Simulate noisy chessboard observations with known ground truth.

    Corners come from the rig's forward projection; zero-mean Gaussian
    noise is added per pixel coordinate in image space.  The seed fully
    determines the output; each image consumes its own spawned child
    generator so pose-retry counts cannot leak between images.
    """
    sim = _generate_with_seedseq(config, np.random.SeedSequence(config.rng_seed))
    metadata = {
        "rng": {
            "seed": int(config.rng_seed),
            "bit_generator": "PCG64",
            "split": "SeedSequence.spawn per image",
        },
        "noise_sigma_px": config.noise_sigma_px,
        "pose_sampler": {
            "distance_range_m": list(config.pose_sampler.distance_range),
            "tilt_max_deg": math.degrees(config.pose_sampler.tilt_max_rad),
            "margin_frac": config.pose_sampler.margin_frac,
        },
        "numpy_version": np.__version__,
    }
    return SimulationResult(
        observations=sim.observations,
        v_off=sim.v_off,
        poses=sim.poses,
        metadata=metadata,
    )


def displacement_field(rig: CameraRig, depth: float, grid_shape=(16, 12), margin_px: float = 80.0) -> DisplacementField:
    """Refraction displacement arrows over a pixel grid at one scene depth.

    Each grid pixel is back-projected with the unrefracted pinhole to the
    given camera depth and forward-projected through the dome; the arrow
    points from the unrefracted to the refracted position.  Nodes whose
    projection fails are marked invalid, not fatal.
    """
    if depth <= rig.dome.outer_radius:
        raise DomeCalError("depth must exceed the dome outer radius")
    intr = rig.intrinsics
    us = np.linspace(margin_px, intr.width - margin_px, grid_shape[0])
    vs = np.linspace(margin_px, intr.height - margin_px, grid_shape[1])
    uu, vv = np.meshgrid(us, vs, indexing="ij")
    in_air = np.column_stack([uu.ravel(), vv.ravel()])
    refracted = np.full_like(in_air, np.nan)
    valid = np.zeros(len(in_air), dtype=bool)
    for i, pixel in enumerate(in_air):
        d_cam = intr.pixel_to_ray(pixel)
        X = rig.rotation.T @ (d_cam * depth / d_cam[2]) + rig.v_off
        try:
            refracted[i] = project(rig, X).pixel
            valid[i] = True
        except DomeCalError:
            continue
    arrows = refracted - in_air
    return DisplacementField(
        in_air_px=readonly(in_air),
        refracted_px=readonly(refracted),
        arrows=readonly(arrows),
        valid=valid,
        scene_depth=depth,
    )


def _deviation_at_cone_angle(rig: CameraRig, phi: float) -> float:
    """Total ray-direction change for a camera ray at angle phi to the axis.

    Traced in the plane through the axis (every such plane is equivalent
    by symmetry): camera at (0, d), one or two circular interfaces.
    """
    from .geometry import DomeModel
    from .projection import _refract_2d

    d = float(np.linalg.norm(rig.v_off))
    mu = (rig.media.mu_air, rig.media.mu_glass, rig.media.mu_water)
    r_in, r_out = rig.dome.inner_radius, rig.dome.outer_radius
    thin = rig.dome.model is DomeModel.THIN

    dx, dy = math.sin(phi), math.cos(phi)
    b = dy * d
    t1 = -b + math.sqrt(max(b * b - d * d + r_in * r_in, 0.0))
    x1, y1 = t1 * dx, t1 * dy + d
    first = _refract_2d(dx, dy, -x1 / r_in, -y1 / r_in, mu[0] / (mu[2] if thin else mu[1]))
    if first is None:
        return float("nan")
    wx, wy = first
    if not thin:
        gx, gy = first
        b2 = x1 * gx + y1 * gy
        t2 = -b2 + math.sqrt(max(b2 * b2 - (x1 * x1 + y1 * y1) + r_out * r_out, 0.0))
        x2, y2 = x1 + t2 * gx, y1 + t2 * gy
        second = _refract_2d(gx, gy, -x2 / r_out, -y2 / r_out, mu[1] / mu[2])
        if second is None:
            return float("nan")
        wx, wy = second
    cosang = max(-1.0, min(1.0, wx * dx + wy * dy))
    return math.acos(cosang)


def iso_refraction_curve(rig: CameraRig, theta: float, n_samples: int = 90) -> np.ndarray:
    """Image points whose rays are deviated by exactly ``theta`` at the dome.

    Rays from the camera center at a fixed angle to the refraction axis
    share one deviation, so the locus is the image of a cone about the
    axis; the cone angle comes from 1D monotone root finding on the
    deviation.  Returns an (M, 2) pixel array (M <= n_samples; directions
    behind the camera are skipped).
    """
    from scipy.optimize import brentq

    v = np.asarray(rig.v_off)
    norm = float(np.linalg.norm(v))
    if theta == 0.0:
        pts = []
        if norm >= rig.tolerances.centered_camera_norm:
            axis = refraction_axis(rig)
            for direction in (axis.direction_world, -axis.direction_world):
                d_cam = rig.rotation @ direction
                if d_cam[2] > 1e-9:
                    pts.append(rig.intrinsics.ray_to_pixel(d_cam))
        return np.array(pts) if pts else np.zeros((0, 2))
    if norm < rig.tolerances.centered_camera_norm:
        raise ThetaUnreachable("a centered camera refracts nothing")

    dev_max = _deviation_at_cone_angle(rig, math.pi / 2 - 1e-9)
    if not (0.0 < theta <= dev_max):
        raise ThetaUnreachable(f"theta={theta:.4g} exceeds max deviation {dev_max:.4g}")
    phi_star = brentq(
        lambda p: _deviation_at_cone_angle(rig, p) - theta, 1e-9, math.pi / 2 - 1e-9, xtol=1e-14
    )

    a = v / norm
    helper = np.array([1.0, 0.0, 0.0])
    if abs(float(helper @ a)) > 0.9:
        helper = np.array([0.0, 1.0, 0.0])
    e1 = np.cross(helper, a)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(a, e1)
    # rays at angles phi and pi - phi to the axis share one incidence
    # (sin(alpha) = (d/r) sin(phi)), so the locus is a cone pair; emit
    # whichever directions point in front of the camera
    pts = []
    for axis_dir in (a, -a):
        for psi in np.linspace(0.0, 2 * math.pi, n_samples // 2, endpoint=False):
            direction = math.cos(phi_star) * axis_dir + math.sin(phi_star) * (
                math.cos(psi) * e1 + math.sin(psi) * e2
            )
            d_cam = rig.rotation @ direction
            if d_cam[2] > 1e-9:
                pts.append(rig.intrinsics.ray_to_pixel(d_cam))
    return np.array(pts) if pts else np.zeros((0, 2))


def noise_sweep(
    rig: CameraRig,
    board: ChessboardSpec,
    sigmas,
    n_trials: int = 20,
    n_images: int = 10,
    seed: int = 0,
    pose_sampler: PoseSampler | None = None,
    include_calibration: bool = False,
) -> list[dict]:
    """Monte-Carlo sweep over noise levels; one CSV-ready row per sigma.

    Per trial: generate observations, estimate the refraction center per
    image and jointly, vote the decentering sign, and optionally run the
    full calibration.  Per-trial failures are tallied, never fatal.
    """
    sampler = pose_sampler or PoseSampler()
    axis = refraction_axis(rig)
    gt_center_h = axis.refraction_center_px
    gt_center = None if axis.is_ideal else axis.center_point()
    v_hat = np.asarray(axis.direction_world)
    gt_forward = float((rig.rotation @ v_hat)[2]) > 0

    root = np.random.SeedSequence(seed)
    rows = []
    for s_idx, sigma in enumerate(sigmas):
        center_errors = []
        axis_errors_deg = []
        sign_hits = []
        hme_values = []
        n_degenerate = 0
        n_failures = 0
        voff_errors = []
        ate_values = []
        for t_idx in range(n_trials):
            child_seed = np.random.SeedSequence(
                entropy=root.entropy, spawn_key=(s_idx, t_idx)
            )
            config = SimConfig(
                rig=rig,
                board=board,
                n_images=n_images,
                pose_sampler=sampler,
                noise_sigma_px=float(sigma),
                rng_seed=0,
            )
            # regenerate deterministically from the child sequence
            sim = _generate_with_seedseq(config, child_seed)
            estimates = []
            for image in sim.observations:
                try:
                    est = estimate_center(image.corners_px, board)
                except DomeCalError:
                    n_failures += 1
                    continue
                estimates.append(est)
                hme_values.append(est.homography_mapping_error_px)
                if est.degenerate:
                    n_degenerate += 1
                elif gt_center is not None:
                    center_errors.append(float(np.linalg.norm(est.center_point() - gt_center)))
            try:
                joint = combine_centers(estimates)
                a = np.asarray(rig.rotation.T @ np.linalg.solve(rig.intrinsics.K, joint))
                a /= np.linalg.norm(a)
                axis_errors_deg.append(
                    math.degrees(math.acos(min(1.0, abs(float(a @ v_hat)))))
                )
            except (AllDegenerate, DomeCalError):
                n_failures += 1
                joint = gt_center_h
            votes = {"forward": 0, "backward": 0}
            for image in sim.observations:
                vote = convexity_sign(image.corners_px, board, joint)
                if vote.sign is DecenteringSign.FORWARD:
                    votes["forward"] += 1
                elif vote.sign is DecenteringSign.BACKWARD:
                    votes["backward"] += 1
            if votes["forward"] != votes["backward"]:
                predicted_forward = votes["forward"] > votes["backward"]
                sign_hits.append(1.0 if predicted_forward == gt_forward else 0.0)
            if include_calibration:
                try:
                    problem = make_problem(sim.observations, rig.with_v_off((0, 0, 0)))
                    result = calibrate(problem)
                    voff_errors.append(np.abs(np.asarray(result.v_off) - np.asarray(rig.v_off)))
                    ate_values.append(pose_error(result.poses, sim.poses).ate_trans)
                except DomeCalError:
                    n_failures += 1
        row = {
            "sigma_px": float(sigma),
            "n_trials": n_trials,
            "n_images": n_images,
            "center_error_median_px": float(np.median(center_errors)) if center_errors else float("nan"),
            "center_error_mean_px": float(np.mean(center_errors)) if center_errors else float("nan"),
            "axis_error_mean_deg": float(np.mean(axis_errors_deg)) if axis_errors_deg else float("nan"),
            "axis_error_std_deg": float(np.std(axis_errors_deg)) if axis_errors_deg else float("nan"),
            "sign_correct_rate": float(np.mean(sign_hits)) if sign_hits else float("nan"),
            "hme_mean_px": float(np.mean(hme_values)) if hme_values else float("nan"),
            "degenerate_fraction": n_degenerate / max(n_trials * n_images, 1),
            "n_failures": n_failures,
        }
        if include_calibration:
            if voff_errors:
                mean_err = np.mean(voff_errors, axis=0)
                row["voff_error_mean_mm"] = [float(e * 1e3) for e in mean_err]
                row["ate_mean_mm"] = float(np.mean(ate_values) * 1e3)
            else:
                row["voff_error_mean_mm"] = [float("nan")] * 3
                row["ate_mean_mm"] = float("nan")
        rows.append(row)
    return rows


def _generate_with_seedseq(config: SimConfig, seedseq: np.random.SeedSequence) -> SimulationResult:
    """generate_observations with an explicit SeedSequence (sweep internals)."""
    rig, board = config.rig, config.board
    children = seedseq.spawn(config.n_images)
    images = []
    poses = []
    for k in range(config.n_images):
        rng = np.random.default_rng(children[k])
        R_bw, t_bw, pixels = _sample_board_pose(rng, rig, board, config.pose_sampler)
        if config.noise_sigma_px > 0:
            pixels = pixels + rng.normal(0.0, config.noise_sigma_px, size=pixels.shape)
        images.append(ImageObservation(image_id=f"sim{k:03d}", corners_px=pixels))
        poses.append(Pose(rig.rotation @ R_bw, rig.rotation @ (t_bw - rig.v_off)))
    return SimulationResult(
        observations=ObservationSet(board, tuple(images)),
        v_off=readonly(np.array(rig.v_off)),
        poses=tuple(poses),
        metadata={},
    )
