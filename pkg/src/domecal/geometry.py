"""Core types and exact ray physics for decentered dome-port cameras.

Conventions used throughout the library:

* The world frame has its origin at the dome (sphere) center.
* The camera sits at ``v_off`` (world frame, meters) with world-to-camera
  rotation ``R``, so a world point maps to camera coordinates as
  ``x_cam = R (X - v_off)`` and the projection matrix is ``(R | -R v_off)``.
* Pixel axes: u along image width, v along height; the pinhole matrix is
  ``K = [[fx, 0, cx], [0, fy, cy], [0, 0, 1]]``.
* Sphere normals are stored outward-pointing; refraction flips them
  internally to face the incident ray, so callers never track sides.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .constants import (
    DEFAULT_MU_AIR,
    DEFAULT_MU_GLASS,
    DEFAULT_MU_WATER,
    DEFAULT_TOLERANCES,
    Tolerances,
)
from .errors import (
    AmbiguousTangent,
    CenteredCamera,
    InputError,
    NoIntersection,
    PrincipalPointWarning,
    TotalInternalReflection,
)
from .validation import as_float_array, check_rotation, readonly


@dataclass(frozen=True)
class MediaStack:
    """Refractive indices of the media along the light path."""

    mu_air: float = DEFAULT_MU_AIR
    mu_glass: float = DEFAULT_MU_GLASS
    mu_water: float = DEFAULT_MU_WATER

    def __post_init__(self):
        if min(self.mu_air, self.mu_glass, self.mu_water) < 1.0:
            raise InputError("refractive indices must be >= 1.0")
        if not (self.mu_air <= self.mu_water <= self.mu_glass):
            raise InputError("expected mu_air <= mu_water <= mu_glass")


class DomeModel(enum.Enum):
    THIN = "thin"
    THICK = "thick"


@dataclass(frozen=True)
class DomeGeometry:
    """Concentric-sphere window centered at the world origin.

    For the thin model the glass layer is collapsed to a single
    air-to-water interface at ``inner_radius``; any stored thickness is
    treated as zero.
    """

    inner_radius: float
    thickness: float = 0.0
    model: DomeModel = DomeModel.THIN

    def __post_init__(self):
        if self.inner_radius <= 0:
            raise InputError("inner_radius must be positive")
        if self.thickness < 0:
            raise InputError("thickness must be non-negative")

    @property
    def outer_radius(self) -> float:
        if self.model is DomeModel.THIN:
            return self.inner_radius
        return self.inner_radius + self.thickness


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics in pixels (skew-free)."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise InputError("focal lengths must be positive")
        if not (0 <= self.cx <= self.width and 0 <= self.cy <= self.height):
            warnings.warn(
                f"principal point ({self.cx}, {self.cy}) outside "
                f"{self.width}x{self.height} image",
                PrincipalPointWarning,
                stacklevel=2,
            )

    @property
    def K(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    @property
    def principal_point(self) -> np.ndarray:
        return np.array([self.cx, self.cy])

    @property
    def image_size(self) -> tuple[int, int]:
        return (self.width, self.height)

    @property
    def diagonal_px(self) -> float:
        return math.hypot(self.width, self.height)

    def pixel_to_ray(self, pixel) -> np.ndarray:
        """Unit viewing direction in camera coordinates for a pixel."""
        u, v = float(pixel[0]), float(pixel[1])
        d = np.array([(u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0])
        return d / np.linalg.norm(d)

    def ray_to_pixel(self, direction) -> np.ndarray:
        """Pixel of a camera-frame direction with positive z."""
        d = np.asarray(direction, dtype=np.float64)
        if d[2] <= 0:
            from .errors import BehindCamera

            raise BehindCamera("direction does not point in front of the camera")
        return np.array([self.fx * d[0] / d[2] + self.cx, self.fy * d[1] / d[2] + self.cy])


@dataclass(frozen=True)
class CameraRig:
    """A pinhole camera rigidly mounted inside a dome.

    ``rotation`` maps world to camera coordinates; ``v_off`` is the vector
    from the dome center to the camera center in the world frame and must
    keep the camera strictly inside the dome.
    """

    intrinsics: CameraIntrinsics
    rotation: np.ndarray
    v_off: np.ndarray
    media: MediaStack
    dome: DomeGeometry
    tolerances: Tolerances = field(default=DEFAULT_TOLERANCES, repr=False)

    def __post_init__(self):
        R = check_rotation(self.rotation, self.tolerances.rotation_orthonormal)
        v = as_float_array(self.v_off, (3,), "v_off")
        if np.linalg.norm(v) >= self.dome.inner_radius:
            raise InputError("camera center must lie strictly inside the dome")
        object.__setattr__(self, "rotation", readonly(R))
        object.__setattr__(self, "v_off", readonly(v))

    @property
    def projection_matrix(self) -> np.ndarray:
        """World-to-image projection (intrinsics omitted): (R | -R v_off)."""
        return np.hstack([self.rotation, -(self.rotation @ self.v_off)[:, None]])

    @property
    def camera_center(self) -> np.ndarray:
        return self.v_off

    def with_v_off(self, v_off) -> "CameraRig":
        return CameraRig(
            self.intrinsics, self.rotation, v_off, self.media, self.dome, self.tolerances
        )

    def pixel_ray_world(self, pixel) -> "Ray":
        """World-frame viewing ray of a pixel (origin at the camera center)."""
        d_cam = self.intrinsics.pixel_to_ray(pixel)
        return Ray(self.v_off, self.rotation.T @ d_cam)


@dataclass(frozen=True)
class Ray:
    """Half-line with unit direction."""

    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        o = as_float_array(self.origin, (3,), "origin")
        d = as_float_array(self.direction, (3,), "direction")
        n = float(np.linalg.norm(d))
        if n == 0.0:
            raise InputError("ray direction must be nonzero")
        object.__setattr__(self, "origin", readonly(o))
        object.__setattr__(self, "direction", readonly(d / n))

    def at(self, t: float) -> np.ndarray:
        return self.origin + t * self.direction


@dataclass(frozen=True)
class LightPath:
    """The traced segments of one pixel's light path.

    ``glass_segment`` is absent for the thin model, in which case the
    inner and outer interface data coincide.
    """

    air_segment: Ray
    glass_segment: Ray | None
    water_segment: Ray
    inner_point: np.ndarray
    outer_point: np.ndarray
    inner_normal: np.ndarray
    outer_normal: np.ndarray

    def segment_directions(self) -> list[np.ndarray]:
        dirs = [self.air_segment.direction]
        if self.glass_segment is not None:
            dirs.append(self.glass_segment.direction)
        dirs.append(self.water_segment.direction)
        return dirs


@dataclass(frozen=True)
class RefractionAxis:
    """The line through dome center and camera center, and its image.

    ``refraction_center_px`` is homogeneous so that an axis parallel to
    the image plane (ideal refraction center) needs no special casing.
    The scale is chosen such that ``R^T K^-1 r``, normalized, equals
    ``direction_world``.
    """

    direction_world: np.ndarray
    refraction_center_px: np.ndarray
    positive_pole: np.ndarray
    negative_pole: np.ndarray

    @property
    def is_ideal(self) -> bool:
        h = self.refraction_center_px
        return abs(h[2]) <= 1e-12 * np.linalg.norm(h[:2])

    def center_point(self) -> np.ndarray:
        """Dehomogenized refraction center; raises for an ideal center."""
        h = self.refraction_center_px
        if self.is_ideal:
            raise CenteredCamera("refraction center is an ideal point")
        return h[:2] / h[2]


# ---------------------------------------------------------------------------
# Operations


def snell_refract(incident, normal, mu_in: float, mu_out: float) -> np.ndarray:
    """Refract a unit direction at an interface between two media.

    The normal may point to either side; it is flipped internally to face
    the incoming ray. Raises :class:`TotalInternalReflection` when no
    transmitted ray exists (only possible for ``mu_in > mu_out``).
    """
    i = np.asarray(incident, dtype=np.float64)
    n = np.asarray(normal, dtype=np.float64)
    i = i / np.linalg.norm(i)
    n = n / np.linalg.norm(n)
    if float(i @ n) > 0.0:
        n = -n
    eta = mu_in / mu_out
    cos_i = -float(i @ n)
    disc = 1.0 - eta * eta * (1.0 - cos_i * cos_i)
    if disc < 0.0:
        raise TotalInternalReflection(
            f"sin(theta_t) = {math.sqrt(eta * eta * (1.0 - cos_i * cos_i)):.6f} > 1"
        )
    t = eta * i + (eta * cos_i - math.sqrt(disc)) * n
    return t / np.linalg.norm(t)


def intersect_sphere(ray: Ray, radius: float, tolerances: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """First intersection of a ray with the origin-centered sphere.

    Grazing rays (quadratic discriminant below the tangent threshold) are
    rejected as :class:`AmbiguousTangent` rather than perturbed: they
    correspond to physically unobservable rays at the dome rim.
    """
    if radius <= 0:
        raise InputError("radius must be positive")
    o, d = ray.origin, ray.direction
    b = float(o @ d)
    disc = b * b - float(o @ o) + radius * radius
    if disc < -tolerances.tangent_discriminant:
        raise NoIntersection("ray misses the sphere")
    if abs(disc) < tolerances.tangent_discriminant:
        raise AmbiguousTangent("ray grazes the sphere")
    s = math.sqrt(disc)
    t = -b - s
    if t <= 0.0:
        t = -b + s
    if t <= 0.0:
        raise NoIntersection("sphere lies behind the ray origin")
    return ray.at(t)


def back_project(rig: CameraRig, pixel) -> LightPath:
    """Trace a pixel back through the dome to its outgoing water ray.

    For the thin model a single air-to-water interface is used and the
    glass segment is absent. Total internal reflection at the glass-water
    interface propagates as an exception.
    """
    media, dome = rig.media, rig.dome
    air = rig.pixel_ray_world(pixel)
    inner_point = intersect_sphere(air, dome.inner_radius, rig.tolerances)
    inner_normal = inner_point / np.linalg.norm(inner_point)

    if dome.model is DomeModel.THIN:
        l_water = snell_refract(air.direction, inner_normal, media.mu_air, media.mu_water)
        water = Ray(inner_point, l_water)
        return LightPath(
            air_segment=air,
            glass_segment=None,
            water_segment=water,
            inner_point=readonly(inner_point),
            outer_point=readonly(inner_point),
            inner_normal=readonly(inner_normal),
            outer_normal=readonly(inner_normal),
        )

    l_glass = snell_refract(air.direction, inner_normal, media.mu_air, media.mu_glass)
    glass = Ray(inner_point, l_glass)
    outer_point = intersect_sphere(glass, dome.outer_radius, rig.tolerances)
    outer_normal = outer_point / np.linalg.norm(outer_point)
    l_water = snell_refract(l_glass, outer_normal, media.mu_glass, media.mu_water)
    water = Ray(outer_point, l_water)
    return LightPath(
        air_segment=air,
        glass_segment=glass,
        water_segment=water,
        inner_point=readonly(inner_point),
        outer_point=readonly(outer_point),
        inner_normal=readonly(inner_normal),
        outer_normal=readonly(outer_normal),
    )


def refraction_axis(rig: CameraRig) -> RefractionAxis:
    """Refraction axis of a decentered rig and its image-plane point.

    Raises :class:`CenteredCamera` when the decentering is numerically
    zero. An axis parallel to the image plane yields an ideal (homogeneous)
    refraction center, not an error.
    """
    v = rig.v_off
    norm = float(np.linalg.norm(v))
    if norm < rig.tolerances.centered_camera_norm:
        raise CenteredCamera("refraction axis undefined for |v_off| ~ 0")
    a = v / norm
    # Homogeneous image of the dome center, scaled so that the axis
    # direction recovered from it points from dome center to camera.
    center_h = rig.intrinsics.K @ (rig.rotation @ v)
    r_in = rig.dome.inner_radius
    return RefractionAxis(
        direction_world=readonly(a),
        refraction_center_px=readonly(center_h),
        positive_pole=readonly(r_in * a),
        negative_pole=readonly(-r_in * a),
    )


def angular_deviation(alpha: float, mu_in: float, mu_out: float) -> float:
    """Change of direction of a ray refracted at incidence angle ``alpha``.

    Strictly increasing on [0, pi/2] for ``mu_out >= mu_in``; the maximum
    over all incidences is therefore attained at ``alpha = pi/2``.
    """
    if not (0.0 <= alpha <= math.pi / 2 + 1e-12):
        raise InputError("alpha must lie in [0, pi/2]")
    if mu_out < mu_in:
        raise InputError("expected mu_out >= mu_in")
    return alpha - math.asin(min(1.0, (mu_in / mu_out) * math.sin(alpha)))


def snell_residuals(path: LightPath, media: MediaStack) -> list[float]:
    """|mu1 sin(theta1) - mu2 sin(theta2)| at each interface of a path."""

    def _sin(direction, normal) -> float:
        c = abs(float(np.dot(direction, normal)))
        return math.sqrt(max(0.0, 1.0 - c * c))

    out = []
    if path.glass_segment is None:
        out.append(
            abs(
                media.mu_air * _sin(path.air_segment.direction, path.inner_normal)
                - media.mu_water * _sin(path.water_segment.direction, path.inner_normal)
            )
        )
    else:
        out.append(
            abs(
                media.mu_air * _sin(path.air_segment.direction, path.inner_normal)
                - media.mu_glass * _sin(path.glass_segment.direction, path.inner_normal)
            )
        )
        out.append(
            abs(
                media.mu_glass * _sin(path.glass_segment.direction, path.outer_normal)
                - media.mu_water * _sin(path.water_segment.direction, path.outer_normal)
            )
        )
    return out


def point_line_distance(point, ray: Ray) -> float:
    """Distance from a 3D point to the infinite line carrying a ray."""
    delta = np.asarray(point, dtype=np.float64) - ray.origin
    return float(np.linalg.norm(np.cross(delta, ray.direction)))


def line_line_distance(ray_a: Ray, ray_b: Ray) -> float:
    """Distance between the infinite lines carrying two rays."""
    cross = np.cross(ray_a.direction, ray_b.direction)
    n = np.linalg.norm(cross)
    delta = ray_b.origin - ray_a.origin
    if n < 1e-15:
        return float(np.linalg.norm(np.cross(delta, ray_a.direction)))
    return abs(float(delta @ cross)) / float(n)
