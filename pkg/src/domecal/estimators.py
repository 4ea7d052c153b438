"""Scikit-learn style estimators wrapping the two fitting algorithms.

Both classes follow the usual conventions: hyperparameters in
``__init__`` (introspectable via ``get_params``/``set_params``), data
passed to ``fit``, results stored in trailing-underscore attributes.
``X`` is an :class:`~domecal.boards.ObservationSet`; corner detections on
a known chessboard are the natural sample unit of this problem.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .boards import ObservationSet
from .calibrate import CalibrationOptions, calibrate, make_problem, validate_holdout
from .direct import (
    DecenteringSign,
    axis_from_center,
    combine_centers,
    convexity_sign,
    estimate_center,
)
from .errors import InputError
from .geometry import CameraRig
from .projection import project


def _check_observation_set(X) -> ObservationSet:
    if not isinstance(X, ObservationSet):
        raise InputError("X must be an ObservationSet")
    if len(X) == 0:
        raise InputError("X contains no images")
    return X


class RefractionCenterEstimator(BaseEstimator):
    """Direct refraction-center and decentering-sign estimation.

    Fits the epipole-like constraint on every image and combines the
    per-image results into one refraction center plus a majority-voted
    decentering sign.

    Parameters
    ----------
    rig : CameraRig, optional
        Supplies intrinsics and orientation; when given, the fitted axis
        direction is exposed in world coordinates.

    Attributes
    ----------
    center_px_ : ndarray, shape (3,)
        Homogeneous refraction center (unit norm).
    estimates_ : list of CenterEstimate
        Per-image results.
    sign_ : DecenteringSign
        Majority vote over images.
    vote_fraction_ : float
        Mean positive-vote fraction over images.
    degenerate_ : bool
        True when every per-image estimate was rank deficient.
    axis_world_ : ndarray, shape (3,), only with a rig
        Unit axis direction (sign resolved by the vote when possible).
    """

    def __init__(self, rig: CameraRig | None = None):
        self.rig = rig

    def fit(self, X, y=None):
        X = _check_observation_set(X)
        board = X.board
        self.estimates_ = [estimate_center(img.corners_px, board) for img in X]
        self.degenerate_ = all(e.degenerate for e in self.estimates_)
        if self.degenerate_:
            self.center_px_ = None
            self.sign_ = DecenteringSign.UNDETERMINED
            self.vote_fraction_ = 0.5
            return self
        self.center_px_ = np.asarray(combine_centers(self.estimates_))

        votes = {DecenteringSign.FORWARD: 0, DecenteringSign.BACKWARD: 0}
        fractions = []
        for img in X:
            result = convexity_sign(img.corners_px, board, self.center_px_)
            fractions.append(result.vote_fraction)
            if result.sign in votes:
                votes[result.sign] += 1
        self.vote_fraction_ = float(np.mean(fractions))
        if votes[DecenteringSign.FORWARD] > votes[DecenteringSign.BACKWARD]:
            self.sign_ = DecenteringSign.FORWARD
        elif votes[DecenteringSign.BACKWARD] > votes[DecenteringSign.FORWARD]:
            self.sign_ = DecenteringSign.BACKWARD
        else:
            self.sign_ = DecenteringSign.UNDETERMINED

        if self.rig is not None:
            from .direct import signed_axis

            if self.sign_ is DecenteringSign.UNDETERMINED:
                self.axis_world_ = np.asarray(
                    axis_from_center(self.center_px_, self.rig.intrinsics, self.rig.rotation)
                )
            else:
                self.axis_world_ = np.asarray(
                    signed_axis(self.center_px_, self.rig.intrinsics, self.rig.rotation, self.sign_)
                )
        return self

    def center_point(self) -> np.ndarray:
        """Dehomogenized center in pixels (finite centers only)."""
        if getattr(self, "center_px_", None) is None:
            raise NotFittedError("estimator is not fitted or was degenerate")
        return self.center_px_[:2] / self.center_px_[2]


class DecenteringCalibrator(BaseEstimator):
    """Joint decentering and board-pose calibration.

    ``fit`` runs the board-plane energy minimization; ``predict`` forward
    projects world points through the fitted rig, which makes the
    calibrated camera directly usable for reprojection-style scoring.

    Parameters
    ----------
    rig_template : CameraRig
        Intrinsics, orientation, media and dome of the rig; its
        decentering is ignored.
    init : {'direct', 'zero'} or 3-vector
        Starting decentering: from the direct solver, from zero, or given.
    max_iter : int
        Levenberg-Marquardt iteration budget.

    Attributes
    ----------
    v_off_ : ndarray, shape (3,)
        Estimated decentering vector (meters).
    poses_ : tuple of Pose
        Board-to-camera pose per image.
    result_ : CalibrationResult
        Full solver output (residuals, covariance, diagnostics).
    """

    def __init__(self, rig_template: CameraRig | None = None, init="direct", max_iter: int = 100):
        self.rig_template = rig_template
        self.init = init
        self.max_iter = max_iter

    def fit(self, X, y=None):
        X = _check_observation_set(X)
        if self.rig_template is None:
            raise InputError("rig_template is required")
        if isinstance(self.init, str):
            if self.init == "direct":
                initial_v = None
            elif self.init == "zero":
                initial_v = np.zeros(3)
            else:
                raise InputError(f"unknown init {self.init!r}")
        else:
            initial_v = np.asarray(self.init, dtype=np.float64)
        problem = make_problem(X, self.rig_template, initial_v_off=initial_v)
        options = CalibrationOptions(max_iter=self.max_iter)
        self.result_ = calibrate(problem, options)
        self.v_off_ = np.asarray(self.result_.v_off)
        self.poses_ = self.result_.poses
        return self

    def _fitted_rig(self) -> CameraRig:
        if not hasattr(self, "result_"):
            raise NotFittedError("call fit first")
        return self.rig_template.with_v_off(self.v_off_)

    def predict(self, X) -> np.ndarray:
        """Project world points (N, 3) to pixels (N, 2) with the fitted rig."""
        rig = self._fitted_rig()
        pts = np.asarray(X, dtype=np.float64).reshape(-1, 3)
        out = np.full((len(pts), 2), np.nan)
        for i, p in enumerate(pts):
            out[i] = project(rig, p).pixel
        return out

    def score(self, X, y=None) -> float:
        """Negative mean holdout reprojection error (pixels) on X."""
        X = _check_observation_set(X)
        return -validate_holdout(self.result_, X, self.rig_template)
