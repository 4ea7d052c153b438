"""Forward projection of 3D world points through the dome to pixels.

Three routes exist: the plain pinhole projection (no refraction), an
analytic degree-6 polynomial solution for thin domes, and a 1D
line-constrained iterative solution for thick domes.  The latter two
exploit that every light path stays in the plane spanned by the
refraction axis and the target point, so the search reduces to 2D
geometry in that plane: camera at (0, d), dome circle(s) around the
origin, target at (u_x, u_y) with u_x > 0 by construction.

The polynomial coefficients are derived offline with computer algebra
(see docs/thin_dome_projection.md and scripts/derive_projection_polynomial.py)
and are evaluated here through the two documented intermediate
polynomials of that derivation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import DEFAULT_TOLERANCES
from .errors import (
    BehindCamera,
    DegenerateProjection,
    InputError,
    NonConvergence,
    NoPhysicalRoot,
)
from .geometry import CameraRig, DomeModel, angular_deviation, refraction_axis
from .validation import readonly


@dataclass(frozen=True)
class PlaneOfRefraction:
    """Local 2D frame of the plane containing axis, camera and point.

    ``z1_axis`` points from the dome center to the camera center,
    ``z2_axis`` spans the plane toward the point, so the camera sits at
    (0, d) and the point at ``point_2d`` with positive first coordinate.
    """

    z1_axis: np.ndarray
    z2_axis: np.ndarray
    d: float
    point_2d: np.ndarray

    @classmethod
    def from_rig_point(cls, rig: CameraRig, point) -> "PlaneOfRefraction":
        X = np.asarray(point, dtype=np.float64)
        v = rig.v_off
        d = float(np.linalg.norm(v))
        if d == 0.0:
            raise DegenerateProjection("plane of refraction undefined for a centered camera")
        z1 = v / d
        perp = X - float(X @ z1) * z1
        n_perp = float(np.linalg.norm(perp))
        if n_perp <= 1e-12 * max(1.0, float(np.linalg.norm(X))):
            raise DegenerateProjection("point lies on the refraction axis")
        z2 = perp / n_perp
        u = np.array([float(X @ z2), float(X @ z1)])
        return cls(readonly(z1), readonly(z2), d, readonly(u))

    def to_world(self, x: float, y: float) -> np.ndarray:
        return x * self.z2_axis + y * self.z1_axis


@dataclass(frozen=True)
class ProjectionResult:
    """Outcome of one refracted forward projection.

    ``refraction_point_2d`` lies on the circle of the (inner) dome radius
    in the plane-of-refraction frame; ``snell_residual`` is the sine of
    the angle by which the refracted ray misses the target point and
    ``branch_count`` the number of real candidate roots examined.
    """

    pixel: np.ndarray
    refraction_point_2d: np.ndarray
    snell_residual: float
    branch_count: int


def project_in_air(rig: CameraRig, point) -> np.ndarray:
    """Pinhole projection ignoring all refraction."""
    X = np.asarray(point, dtype=np.float64)
    x_cam = rig.rotation @ (X - rig.v_off)
    if x_cam[2] <= 0:
        raise BehindCamera("point has non-positive depth")
    return rig.intrinsics.ray_to_pixel(x_cam)


# ---------------------------------------------------------------------------
# Thin dome: analytic degree-6 polynomial


def _thin_poly_coefficients(ux, uy, d, r, mu1, mu2) -> np.ndarray:
    """Ascending coefficients c[0..6] of the thin-dome projection polynomial.

    Collinearity of the refracted ray with the target direction, after
    substituting the vector refraction law, isolating its square root and
    squaring, reduces to EVEN(y) + x*ODD(y) = 0 with x^2 = r^2 - y^2;
    squaring once more yields a degree-6 polynomial in y whose two top
    coefficients cancel exactly.  EVEN and ODD are built from

        P(y) = r^2 - uy*y                      (target-moment line)
        Q(y) = mu1^2 (r^2 - d y)^2
               - (mu1^2 - mu2^2) r^2 (r^2 - 2 d y + d^2)   (refraction discriminant)
    """
    r2 = r * r
    A = mu1 * mu1 * d * d
    P = np.array([r2, -uy])
    Q = np.array(
        [
            mu1 * mu1 * r2 * r2 - (mu1 * mu1 - mu2 * mu2) * r2 * (r2 + d * d),
            -2.0 * d * r2 * mu2 * mu2,
            A,
        ]
    )
    S = np.array([r2, 0.0, -1.0])  # x^2 = r^2 - y^2
    B = np.array([uy * uy * r2, 0.0, ux * ux - uy * uy])
    even = A * (np.convolve(S, np.convolve(P, P)) + ux * ux * np.convolve(S, S)) - np.convolve(Q, B)
    odd = 2.0 * ux * (uy * np.convolve(np.array([0.0, 1.0]), Q) - A * np.convolve(P, S))
    full = np.convolve(even, even) - np.convolve(S, np.convolve(odd, odd))
    return full[:7]  # degrees 7 and 8 cancel exactly


def _trace_miss_2d(ux, uy, d, r, mu1, mu2, phi):
    """Deviation of the thin-dome refracted ray from the target direction.

    The refraction point is parameterized by angle, m = (r sin(phi),
    r cos(phi)), which stays well conditioned near the poles where the
    y-chart of the polynomial degenerates.  Returns (signed sine of the
    mismatch angle, refracted-ray-points-at-target flag) or None when the
    configuration admits no transmitted ray.
    """
    x, y = r * math.sin(phi), r * math.cos(phi)
    lx, ly = x, y - d
    nrm = math.hypot(lx, ly)
    if nrm == 0.0:
        return None
    lx, ly = lx / nrm, ly / nrm
    nx, ny = -x / r, -y / r
    eta = mu1 / mu2
    c1 = -(lx * nx + ly * ny)
    if c1 < 0.0:
        nx, ny, c1 = -nx, -ny, -c1
    disc = 1.0 - eta * eta * (1.0 - c1 * c1)
    if disc < 0.0:
        return None
    c2 = math.sqrt(disc)
    tx = eta * lx + (eta * c1 - c2) * nx
    ty = eta * ly + (eta * c1 - c2) * ny
    vx, vy = ux - x, uy - y
    vn = math.hypot(vx, vy)
    if vn == 0.0:
        return None
    return (vx * ty - vy * tx) / vn, (vx * tx + vy * ty) > 0.0


def _polish_phi(miss, phi0: float, max_iter: int = 30):
    """Secant refinement of a candidate refraction angle.

    Tracks the best iterate seen, so a diverging secant step can never
    degrade the polynomial root it started from.
    """
    res = miss(phi0)
    if res is None:
        return None
    best_phi, best_val, best_fwd = phi0, res[0], res[1]
    p0, f0 = phi0, res[0]
    p1 = phi0 + 1e-9
    res1 = miss(p1)
    if res1 is None:
        return best_phi, best_val, best_fwd
    f1 = res1[0]
    for _ in range(max_iter):
        if f1 == f0:
            break
        p2 = p1 - f1 * (p1 - p0) / (f1 - f0)
        if not (-math.pi <= p2 <= math.pi):
            break
        res2 = miss(p2)
        if res2 is None:
            break
        p0, f0 = p1, f1
        p1, f1 = p2, res2[0]
        if abs(f1) < abs(best_val):
            best_phi, best_val, best_fwd = p1, f1, res2[1]
        if abs(f1) < 1e-16:
            break
    return best_phi, best_val, best_fwd


def _project_axial(rig: CameraRig, X: np.ndarray) -> ProjectionResult:
    """Point on the refraction axis: unrefracted, maps to the refraction center."""
    try:
        pixel = project_in_air(rig, X)
    except BehindCamera as exc:
        raise DegenerateProjection("axial point behind the camera") from exc
    v = rig.v_off
    d = float(np.linalg.norm(v))
    r_in = rig.dome.inner_radius
    # The ray from the camera along the axis exits through the pole on the
    # target side.
    side = 1.0 if float(X @ v) / d > d else -1.0
    return ProjectionResult(
        pixel=readonly(pixel),
        refraction_point_2d=readonly(np.array([0.0, side * r_in])),
        snell_residual=0.0,
        branch_count=1,
    )


def _project_pinhole(rig: CameraRig, X: np.ndarray) -> ProjectionResult:
    """Centered camera: no refraction anywhere."""
    pixel = project_in_air(rig, X)
    r_in = rig.dome.inner_radius
    return ProjectionResult(
        pixel=readonly(pixel),
        refraction_point_2d=readonly(np.array([0.0, r_in])),
        snell_residual=0.0,
        branch_count=1,
    )


def _pixel_of_plane_direction(rig: CameraRig, plane: PlaneOfRefraction, phi: float) -> np.ndarray:
    """Pixel viewing the in-plane camera-ray direction (sin phi, cos phi)."""
    d_world = math.sin(phi) * plane.z2_axis + math.cos(phi) * plane.z1_axis
    d_cam = rig.rotation @ d_world
    if d_cam[2] <= 0:
        raise NoPhysicalRoot("refraction point not in front of the camera")
    return rig.intrinsics.ray_to_pixel(d_cam)


def project_thin_analytic(rig: CameraRig, point) -> ProjectionResult:
    """Analytic thin-dome projection via the degree-6 polynomial.

    Real roots are found as companion-matrix eigenvalues, polished on the
    exact geometric constraint, and filtered in order: y real within
    [-r, r]; reconstructed x in the target half-plane; Snell/aim residual
    below tolerance; refracted ray pointing at the target.  Among
    survivors the smallest residual wins.
    """
    if rig.dome.model is not DomeModel.THIN:
        raise InputError("rig dome model must be THIN")
    X = np.asarray(point, dtype=np.float64)
    tol = rig.tolerances
    r = rig.dome.inner_radius
    if float(np.linalg.norm(X)) <= r:
        raise InputError("point must lie outside the dome sphere")
    if float(np.linalg.norm(rig.v_off)) < tol.centered_camera_norm:
        return _project_pinhole(rig, X)
    try:
        plane = PlaneOfRefraction.from_rig_point(rig, X)
    except DegenerateProjection:
        return _project_axial(rig, X)

    ux, uy = plane.point_2d
    d = plane.d
    mu1, mu2 = rig.media.mu_air, rig.media.mu_water
    coeffs = _thin_poly_coefficients(ux, uy, d, r, mu1, mu2)
    roots = np.roots(coeffs[::-1])

    def miss(phi):
        return _trace_miss_2d(ux, uy, d, r, mu1, mu2, phi)

    branch_count = 0
    candidates: list[float] = []
    for z in roots:
        if abs(z.imag) > tol.imag_root_rel * (1.0 + abs(z.real)):
            continue
        y = min(max(z.real, -r), r)
        if abs(z.real) > r * (1.0 + 1e-9):
            continue
        branch_count += 1
        x = math.sqrt(max(r * r - y * y, 0.0))
        # Half-plane filter: the target has u_x > 0 by construction.
        candidates.append(math.atan2(x, y))

    best: tuple[float, float] | None = None
    for phi0 in candidates:
        polished = _polish_phi(miss, phi0)
        if polished is None:
            continue
        phi, val, fwd = polished
        if not fwd or abs(val) > tol.accepted_snell_residual:
            continue
        if best is None or abs(val) < abs(best[1]):
            best = (phi, val)
    if best is None:
        raise NoPhysicalRoot("no real root satisfies Snell's law and visibility")
    phi, val = best
    m2d = np.array([r * math.sin(phi), r * math.cos(phi)])
    # camera-ray angle differs from the circle-position angle: the camera
    # sits at (0, d), not at the dome center
    psi = math.atan2(m2d[0], m2d[1] - d)
    pixel = _pixel_of_plane_direction(rig, plane, psi)
    return ProjectionResult(
        pixel=readonly(pixel),
        refraction_point_2d=readonly(m2d),
        snell_residual=abs(val),
        branch_count=branch_count,
    )


# ---------------------------------------------------------------------------
# Thick dome: iterative 1D search in the plane of refraction


def _trace_miss_thick_2d(ux, uy, d, r_in, r_out, mu, psi):
    """Deviation of the traced thick-dome water ray from the target.

    ``psi`` is the in-plane angle of the camera ray measured from the
    axis.  Returns (signed sine of the miss angle at the target,
    forward flag, inner refraction point) or None for rays lost to total
    internal reflection.
    """
    mu_a, mu_g, mu_w = mu
    dx, dy = math.sin(psi), math.cos(psi)
    # camera at (0, d) inside the inner circle
    b = dy * d  # (o . dir) with o = (0, d)
    disc = b * b - d * d + r_in * r_in
    t1 = -b + math.sqrt(max(disc, 0.0))
    x1, y1 = t1 * dx, t1 * dy + d
    # refract air -> glass at the inner circle (flipped, inward normal)
    res = _refract_2d(dx, dy, -x1 / r_in, -y1 / r_in, mu_a / mu_g)
    if res is None:
        return None
    gx, gy = res
    # advance to the outer circle
    b2 = x1 * gx + y1 * gy
    disc2 = b2 * b2 - (x1 * x1 + y1 * y1) + r_out * r_out
    t2 = -b2 + math.sqrt(max(disc2, 0.0))
    x2, y2 = x1 + t2 * gx, y1 + t2 * gy
    res = _refract_2d(gx, gy, -x2 / r_out, -y2 / r_out, mu_g / mu_w)
    if res is None:
        return None
    wx, wy = res
    vx, vy = ux - x2, uy - y2
    vn = math.hypot(vx, vy)
    if vn == 0.0:
        return None
    return (vx * wy - vy * wx) / vn, (vx * wx + vy * wy) > 0.0, (x1, y1)


def _refract_2d(lx, ly, nx, ny, eta):
    c1 = -(lx * nx + ly * ny)
    if c1 < 0.0:
        nx, ny, c1 = -nx, -ny, -c1
    disc = 1.0 - eta * eta * (1.0 - c1 * c1)
    if disc < 0.0:
        return None
    k = eta * c1 - math.sqrt(disc)
    return eta * lx + k * nx, eta * ly + k * ny


def project_thick_iterative(
    rig: CameraRig, point, max_iter: int = 100
) -> ProjectionResult:
    """Thick-dome projection by 1D root search along the in-plane angle.

    The search variable is the camera-ray angle in the plane of
    refraction, which parameterizes exactly the pixels on the line
    joining the refraction center and the in-air projection.  The bracket
    spans twice the maximum angular deviation around the direct ray, then
    Brent's method (bisection with secant/inverse-quadratic switching)
    drives the traced water ray onto the target point.
    """
    if rig.dome.model is not DomeModel.THICK:
        raise InputError("rig dome model must be THICK")
    X = np.asarray(point, dtype=np.float64)
    tol = rig.tolerances
    if float(np.linalg.norm(X)) <= rig.dome.outer_radius:
        raise InputError("point must lie outside the outer sphere")
    if float(np.linalg.norm(rig.v_off)) < tol.centered_camera_norm:
        return _project_pinhole(rig, X)
    try:
        plane = PlaneOfRefraction.from_rig_point(rig, X)
    except DegenerateProjection:
        return _project_axial(rig, X)

    ux, uy = plane.point_2d
    d = plane.d
    mu = (rig.media.mu_air, rig.media.mu_glass, rig.media.mu_water)
    r_in, r_out = rig.dome.inner_radius, rig.dome.outer_radius

    def miss(psi):
        return _trace_miss_thick_2d(ux, uy, d, r_in, r_out, mu, psi)

    psi_direct = math.atan2(ux, uy - d)
    span = 2.0 * angular_deviation(math.pi / 2, mu[0], mu[2])
    lo = max(psi_direct - span, 1e-12)
    hi = min(psi_direct + span, math.pi - 1e-12)

    # locate a sign change on a deterministic grid, densifying if needed
    bracket = None
    last_residual = None
    for n_grid in (17, 65, 257):
        grid = np.linspace(lo, hi, n_grid)
        prev = None
        for psi in grid:
            res = miss(float(psi))
            if res is None:
                prev = None
                continue
            val = res[0]
            last_residual = abs(val)
            if prev is not None and (val == 0.0 or (val > 0) != (prev[1] > 0)):
                bracket = (prev[0], float(psi))
                break
            prev = (float(psi), val)
        if bracket is not None:
            break
    if bracket is None:
        raise NoPhysicalRoot("no bracketed solution on the refraction line")

    from scipy.optimize import brentq

    try:
        psi_star = brentq(
            lambda p: miss(p)[0],
            bracket[0],
            bracket[1],
            xtol=1e-15,
            rtol=8.881784197001252e-16,
            maxiter=max_iter,
        )
    except (RuntimeError, ValueError) as exc:
        raise NonConvergence(
            f"thick-dome search failed: {exc}", last_residual=last_residual
        ) from exc

    res = miss(psi_star)
    if res is None:
        raise NoPhysicalRoot("converged angle lost to total internal reflection")
    val, fwd, (x1, y1) = res
    if not fwd:
        raise NoPhysicalRoot("water ray points away from the target")
    if abs(val) > tol.accepted_snell_residual:
        raise NonConvergence(
            "thick-dome residual above tolerance", last_residual=abs(val)
        )
    pixel = _pixel_of_plane_direction(rig, plane, psi_star)
    return ProjectionResult(
        pixel=readonly(pixel),
        refraction_point_2d=readonly(np.array([x1, y1])),
        snell_residual=abs(val),
        branch_count=1,
    )


def project(rig: CameraRig, point, **kwargs) -> ProjectionResult:
    """Uniform forward projection, dispatching on the dome model."""
    if rig.dome.model is DomeModel.THIN:
        return project_thin_analytic(rig, point)
    return project_thick_iterative(rig, point, **kwargs)


# ---------------------------------------------------------------------------
# Independent 1D line-search oracle (kept free of the 2D plane machinery)


def oracle_project_line_search(rig: CameraRig, point, tol_px: float = 1e-9) -> np.ndarray:
    """Reference projection by golden-section search on the image line.

    Searches the pixel line joining the refraction center and the in-air
    projection, minimizing the distance between the target point and the
    fully back-projected water line.  Deliberately independent of the
    analytic and in-plane iterative routes; used as their oracle.
    """
    from .geometry import back_project, point_line_distance

    X = np.asarray(point, dtype=np.float64)
    if float(np.linalg.norm(rig.v_off)) < rig.tolerances.centered_camera_norm:
        return project_in_air(rig, X)
    x_a = project_in_air(rig, X)
    axis = refraction_axis(rig)
    h = axis.refraction_center_px
    if axis.is_ideal:
        direction = h[:2] / np.linalg.norm(h[:2])
    else:
        delta = h[:2] / h[2] - x_a
        n = np.linalg.norm(delta)
        if n < 1e-12:  # point projects onto the refraction center
            return x_a
        direction = delta / n

    def distance(s: float) -> float:
        try:
            path = back_project(rig, x_a + s * direction)
        except Exception:
            return math.inf
        return point_line_distance(X, path.water_segment)

    f_equiv = 0.5 * (rig.intrinsics.fx + rig.intrinsics.fy)
    dev = angular_deviation(math.pi / 2, rig.media.mu_air, rig.media.mu_water)
    span = f_equiv * math.tan(min(2.0 * dev, 1.45)) + 10.0

    # coarse scan, then golden-section refinement in the best interval
    n_scan = 201
    ss = np.linspace(-span, span, n_scan)
    vals = [distance(float(s)) for s in ss]
    k = int(np.argmin(vals))
    if not math.isfinite(vals[k]):
        raise NoPhysicalRoot("oracle scan found no finite residual")
    a = float(ss[max(k - 1, 0)])
    b = float(ss[min(k + 1, n_scan - 1)])
    gr = (math.sqrt(5.0) - 1.0) / 2.0
    c, dd = b - gr * (b - a), a + gr * (b - a)
    fc, fd = distance(c), distance(dd)
    while b - a > tol_px:
        if fc < fd:
            b, dd, fd = dd, c, fc
            c = b - gr * (b - a)
            fc = distance(c)
        else:
            a, c, fc = c, dd, fd
            dd = a + gr * (b - a)
            fd = distance(dd)
    s_star = 0.5 * (a + b)
    return x_a + s_star * direction
