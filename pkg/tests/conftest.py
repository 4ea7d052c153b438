"""Shared fixtures: reference rigs and random-rig generation."""

import numpy as np
import pytest

from domecal import (
    CameraIntrinsics,
    CameraRig,
    DomeGeometry,
    DomeModel,
    MediaStack,
)


def paper_intrinsics() -> CameraIntrinsics:
    """2048x1536 sensor with a 90 degree horizontal field of view."""
    return CameraIntrinsics(fx=1024.0, fy=1024.0, cx=1024.0, cy=768.0, width=2048, height=1536)


def make_rig(
    v_off=(0.0, 0.0, -0.02),
    model=DomeModel.THICK,
    rotation=None,
    inner_radius=0.05,
    thickness=0.007,
    media=None,
    intrinsics=None,
) -> CameraRig:
    return CameraRig(
        intrinsics=intrinsics or paper_intrinsics(),
        rotation=np.eye(3) if rotation is None else rotation,
        v_off=np.asarray(v_off, dtype=float),
        media=media or MediaStack(),
        dome=DomeGeometry(inner_radius=inner_radius, thickness=thickness, model=model),
    )


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform random rotation via QR with a modest tilt from identity."""
    # Small-to-moderate rotations keep the dome in front of the camera
    # often enough for projection tests.
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(0.0, 0.5)
    K = np.array(
        [[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]]
    )
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * (K @ K)


def random_rig(rng: np.random.Generator, model=DomeModel.THICK, max_offset_frac=0.5) -> CameraRig:
    inner = rng.uniform(0.03, 0.08)
    thickness = rng.uniform(0.003, 0.01) if model is DomeModel.THICK else 0.0
    v = rng.normal(size=3)
    v *= rng.uniform(1e-4, max_offset_frac * inner) / np.linalg.norm(v)
    return make_rig(
        v_off=v,
        model=model,
        rotation=random_rotation(rng),
        inner_radius=inner,
        thickness=thickness,
    )


def random_visible_point(rng: np.random.Generator, rig: CameraRig, depth_range=(0.5, 10.0)) -> np.ndarray:
    """World point on a random in-image pixel ray at a random depth."""
    intr = rig.intrinsics
    u = rng.uniform(0.08 * intr.width, 0.92 * intr.width)
    v = rng.uniform(0.08 * intr.height, 0.92 * intr.height)
    d_cam = intr.pixel_to_ray((u, v))
    depth = rng.uniform(*depth_range)
    x_cam = d_cam * depth / d_cam[2]
    return rig.rotation.T @ x_cam + rig.v_off


def board_pose_facing_camera(
    rng: np.random.Generator,
    rig: CameraRig,
    board,
    depth_range=(0.6, 1.6),
    tilt_max=0.5,
    margin=0.25,
):
    """Board-to-world pose with the board roughly facing the camera.

    Returns (R_bw, t_bw); retries internally until all corners are
    projectable and inside the image.
    """
    from domecal import project
    from domecal.errors import DomeCalError

    intr = rig.intrinsics
    span = board.points_2d().max(axis=0)
    for _ in range(300):
        u = rng.uniform(margin * intr.width, (1 - margin) * intr.width)
        v = rng.uniform(margin * intr.height, (1 - margin) * intr.height)
        depth = rng.uniform(*depth_range)
        d_cam = intr.pixel_to_ray((u, v))
        center_w = rig.rotation.T @ (d_cam * depth / d_cam[2]) + rig.v_off
        # board normal facing the camera, tilted and spun randomly
        normal = -(rig.rotation.T @ d_cam)
        z_axis = -normal
        tmp = np.array([1.0, 0.0, 0.0])
        if abs(tmp @ z_axis) > 0.9:
            tmp = np.array([0.0, 1.0, 0.0])
        x_axis = np.cross(tmp, z_axis)
        x_axis /= np.linalg.norm(x_axis)
        y_axis = np.cross(z_axis, x_axis)
        R_bw = np.column_stack([x_axis, y_axis, z_axis])
        for axis, angle in (
            (x_axis, rng.uniform(-tilt_max, tilt_max)),
            (y_axis, rng.uniform(-tilt_max, tilt_max)),
            (z_axis, rng.uniform(0, 2 * np.pi)),
        ):
            K = np.array(
                [[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]]
            )
            R_bw = (np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * (K @ K)) @ R_bw
        t_bw = center_w - R_bw @ np.array([span[0] / 2, span[1] / 2, 0.0])
        try:
            pixels = np.array([project(rig, R_bw @ p + t_bw).pixel for p in board.points()])
        except DomeCalError:
            continue
        if (
            (pixels[:, 0] > 2).all()
            and (pixels[:, 0] < intr.width - 2).all()
            and (pixels[:, 1] > 2).all()
            and (pixels[:, 1] < intr.height - 2).all()
        ):
            return R_bw, t_bw, pixels
    raise RuntimeError("could not sample a visible board pose")


def synth_image(rng, rig, board, sigma=0.0, **kwargs):
    """Noisy synthetic corner observations plus the generating pose."""
    R_bw, t_bw, pixels = board_pose_facing_camera(rng, rig, board, **kwargs)
    if sigma > 0:
        pixels = pixels + rng.normal(0.0, sigma, size=pixels.shape)
    return pixels, (R_bw, t_bw)


def frontal_board_pose(rig: CameraRig, board, depth=1.0, tilt=0.1):
    """Deterministic near-frontal board pose centered on the optical axis."""
    from domecal import project

    d_cam = np.array([0.0, 0.0, 1.0])
    center_w = rig.rotation.T @ (d_cam * depth) + rig.v_off
    z_axis = rig.rotation.T @ d_cam
    x_axis = rig.rotation.T @ np.array([1.0, 0.0, 0.0])
    y_axis = np.cross(z_axis, x_axis)
    R_bw = np.column_stack([x_axis, y_axis, z_axis])
    K = np.array([[0, -x_axis[2], x_axis[1]], [x_axis[2], 0, -x_axis[0]], [-x_axis[1], x_axis[0], 0]])
    R_bw = (np.eye(3) + np.sin(tilt) * K + (1 - np.cos(tilt)) * (K @ K)) @ R_bw
    span = board.points_2d().max(axis=0)
    t_bw = center_w - R_bw @ np.array([span[0] / 2, span[1] / 2, 0.0])
    pixels = np.array([project(rig, R_bw @ p + t_bw).pixel for p in board.points()])
    return R_bw, t_bw, pixels


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)


@pytest.fixture
def thick_rig() -> CameraRig:
    return make_rig(v_off=(0.0, 0.00281, 0.005), model=DomeModel.THICK)


@pytest.fixture
def thin_rig() -> CameraRig:
    return make_rig(v_off=(-0.001, 0.001, 0.002), model=DomeModel.THIN, thickness=0.0)
