"""Refraction geometry, simulation and decentering calibration for dome ports."""

from .boards import ChessboardSpec, ImageObservation, ObservationSet
from .constants import DEFAULT_TOLERANCES, Tolerances
from .geometry import (
    CameraIntrinsics,
    CameraRig,
    DomeGeometry,
    DomeModel,
    LightPath,
    MediaStack,
    Ray,
    RefractionAxis,
    angular_deviation,
    back_project,
    intersect_sphere,
    refraction_axis,
    snell_refract,
)
from .projection import (
    PlaneOfRefraction,
    ProjectionResult,
    project,
    project_in_air,
    project_thick_iterative,
    project_thin_analytic,
)

__version__ = "0.1.0"


def __getattr__(name):
    # estimator / solver layers import lazily to keep `import domecal` light
    if name in ("RefractionCenterEstimator", "DecenteringCalibrator"):
        from . import estimators

        return getattr(estimators, name)
    raise AttributeError(f"module 'domecal' has no attribute {name!r}")

__all__ = [
    "CameraIntrinsics",
    "CameraRig",
    "ChessboardSpec",
    "DEFAULT_TOLERANCES",
    "DomeGeometry",
    "DomeModel",
    "ImageObservation",
    "LightPath",
    "MediaStack",
    "ObservationSet",
    "PlaneOfRefraction",
    "ProjectionResult",
    "Ray",
    "RefractionAxis",
    "Tolerances",
    "angular_deviation",
    "back_project",
    "intersect_sphere",
    "project",
    "project_in_air",
    "project_thick_iterative",
    "project_thin_analytic",
    "refraction_axis",
    "snell_refract",
    "__version__",
]
