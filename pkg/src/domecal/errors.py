"""Exception and warning types."""

from __future__ import annotations


class DomeCalError(Exception):
    """Base class for all library errors."""


class InputError(DomeCalError):
    """Invalid user input: malformed files, schema violations, bad arguments."""


class GeometryError(DomeCalError):
    """Base class for ray-physics failures."""


class TotalInternalReflection(GeometryError):
    """No transmitted ray exists at an interface (dense-to-light only)."""


class NoIntersection(GeometryError):
    """Ray misses the sphere along its positive direction."""


class AmbiguousTangent(GeometryError):
    """Ray grazes the sphere; the intersection is numerically undefined."""


class CenteredCamera(GeometryError):
    """The camera sits at the dome center, so no refraction axis exists."""


class BehindCamera(GeometryError):
    """Point has non-positive depth and cannot be projected."""


class ProjectionError(DomeCalError):
    """Base class for forward-projection failures."""


class NoPhysicalRoot(ProjectionError):
    """No candidate refraction point satisfies Snell's law and visibility."""


class DegenerateProjection(ProjectionError):
    """Point lies on the refraction axis behind the camera."""


class NonConvergence(ProjectionError):
    """Iterative search exhausted its budget; carries the last residual."""

    def __init__(self, message: str, last_residual: float | None = None):
        super().__init__(message)
        self.last_residual = last_residual


class SolverError(DomeCalError):
    """Base class for estimation failures."""


class InsufficientCorrespondences(SolverError):
    """Too few point correspondences for the requested estimation."""


class DegenerateConfiguration(SolverError):
    """The constraint system is rank-deficient (no unique solution)."""


class AllDegenerate(SolverError):
    """Every per-image estimate was flagged degenerate."""


class RayParallelToBoard(SolverError):
    """Back-projected ray is too close to parallel with the board plane."""


class PlanarDegeneracy(SolverError):
    """Homography estimation failed (rank-deficient correspondences)."""


class LengthMismatch(SolverError):
    """Paired pose lists have different lengths."""


class PoseSamplingExhausted(DomeCalError):
    """Could not sample a board pose satisfying the visibility constraint."""


class ThetaUnreachable(DomeCalError):
    """Requested refraction angle exceeds the rig's maximum deviation."""


class DomeCalWarning(UserWarning):
    """Base class for library warnings."""


class DivergedOutsideDomeWarning(DomeCalWarning):
    """Decentering iterate left the dome and was pulled back inside."""


class PrincipalPointWarning(DomeCalWarning):
    """Principal point lies outside the image bounds."""
