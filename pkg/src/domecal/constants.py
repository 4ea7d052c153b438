"""Central tolerance and default-constant record.

Every numeric tolerance used by the library (and referenced by the test
suite) lives here, so thresholds are defined exactly once.
"""

from __future__ import annotations

from dataclasses import dataclass

# Refractive-index defaults.  The glass value corresponds to borosilicate 3.3;
# air and fresh water at visible wavelengths are assumed for the other two.
DEFAULT_MU_AIR = 1.0
DEFAULT_MU_GLASS = 1.473
DEFAULT_MU_WATER = 1.333


@dataclass(frozen=True)
class Tolerances:
    """Numeric tolerances shared by the library and its tests."""

    # Geometry
    unit_norm: float = 1e-12            # |direction| - 1 for rays
    sphere_surface: float = 1e-10       # interface point on its sphere [m]
    coplanarity: float = 1e-10          # scalar triple products of a light path
    snell_law: float = 1e-10            # |mu1 sin t1 - mu2 sin t2| at interfaces
    rotation_orthonormal: float = 1e-10 # R R^T - I and det(R) - 1
    tangent_discriminant: float = 1e-14 # grazing ray rejection threshold
    centered_camera_norm: float = 1e-9  # |v_off| below which the axis is undefined [m]
    axial_line_distance: float = 1e-9   # water line to refraction axis [m]

    # Projection
    accepted_snell_residual: float = 1e-9   # accepted root of forward projection
    imag_root_rel: float = 1e-8             # |imag| < rel*(1+|real|) real-root filter
    circle_residual: float = 1e-12          # refraction point on its circle
    collinearity_det: float = 1e-8          # center/in-air/refracted determinant
    projection_pixel: float = 1e-6          # pixel agreement between routes [px]
    thin_thick_limit_px: float = 1e-4       # thickness->0 thick vs thin [px]
    round_trip_distance: float = 1e-9       # projected point to back-projected line [m]

    # Direct solver
    center_null_residual: float = 1e-8      # |r^T F| after rank enforcement
    epipolar_residual: float = 1e-10        # noiseless |x_r^T F x_c| (normalized)
    degeneracy_noise_factor: float = 10.0   # rank-deficient if ratio < noise-null median / factor
    degeneracy_ratio_floor: float = 1e-12   # absolute rank-deficiency floor

    # Calibration
    energy_rel_decrease: float = 1e-12
    gradient_norm: float = 1e-10
    board_parallel_deg: float = 0.5         # corner dropped when ray this close to board-parallel
    jacobian_fd_rel: float = 1e-6           # analytic vs central differences

    # Simulation
    conic_fit_residual: float = 1e-8        # iso-curve conic fit (normalized)


DEFAULT_TOLERANCES = Tolerances()
