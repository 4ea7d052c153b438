"""Single-image direct estimation of the refraction center.

A decentered dome displaces every refracted corner along the image line
joining its unrefracted position and the refraction center, which yields
the epipolar-like constraint  x_r^T ([r]_x H) x_c = 0  between board
coordinates x_c and refracted pixels x_r.  Stacking Kronecker rows and
solving by SVD (eight-point style, with Hartley normalization on both
point sets) recovers F = [r]_x H; the refraction center r is its left
null vector.  A convexity vote over collinear corner triples decides
barrel (backward decentering) versus pincushion (forward decentering).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .boards import ChessboardSpec
from .constants import DEFAULT_TOLERANCES, Tolerances
from .errors import AllDegenerate, InsufficientCorrespondences
from .homography import (
    fit_homography,
    hartley_normalization,
    homogeneous,
    transfer_rms,
)
from .validation import check_corners, readonly


@dataclass(frozen=True)
class CenterEstimate:
    """Refraction-center estimate from one image.

    ``refraction_center_px`` is homogeneous (unit norm); the center can be
    an ideal point when the decentering is parallel to the image plane.
    ``constraint_lines`` are the per-corner displacement lines F x_c, each
    scaled to unit (a, b); every such line passes through the center and
    feeds the multi-image combination step.
    """

    F: np.ndarray
    refraction_center_px: np.ndarray
    second_singular_ratio: float
    degenerate: bool
    homography_mapping_error_px: float
    constraint_lines: np.ndarray

    def center_point(self) -> np.ndarray:
        h = self.refraction_center_px
        return h[:2] / h[2]


class DecenteringSign(enum.Enum):
    BACKWARD = "backward"   # barrel displacement, camera behind the dome center
    FORWARD = "forward"     # pincushion displacement, camera in front
    UNDETERMINED = "undetermined"


@dataclass(frozen=True)
class SignResult:
    sign: DecenteringSign
    vote_fraction: float


def homography_mapping_error(corners_px, board: ChessboardSpec) -> float:
    """RMS residual of the best board-to-image homography, in pixels.

    Low values (relative to the corner noise) flag images whose refraction
    signal is unobservable; they carry no information about the center.
    """
    corners = check_corners(corners_px, board.n_corners)
    H = fit_homography(board.points_2d(), corners)
    return transfer_rms(H, board.points_2d(), corners)


def _noise_only_ratio(board_2d, corners, sigma_px, T_c, n_draws: int = 15) -> float:
    """Median second-smallest/largest singular ratio under noise alone.

    Calibrates the rank-deficiency test: corners that are exactly a
    homography of the board plus Gaussian noise of the estimated level
    give the null distribution of the ratio.  Deterministic (fixed seed).
    """
    H = fit_homography(board_2d, corners)
    base = homogeneous(board_2d) @ H.T
    base = base[:, :2] / base[:, 2:3]
    rng = np.random.default_rng(0)
    ratios = []
    for _ in range(n_draws):
        sim = base + rng.normal(0.0, max(sigma_px, 0.0), size=base.shape)
        T_r = hartley_normalization(sim)
        xr = homogeneous(sim) @ T_r.T
        xc = homogeneous(board_2d) @ T_c.T
        A = np.einsum("ni,nj->nij", xr, xc).reshape(len(base), 9)
        sv = np.linalg.svd(A, compute_uv=False)
        ratios.append(sv[-2] / sv[0])
    return float(np.median(ratios))


def estimate_center(
    corners_px,
    board: ChessboardSpec,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> CenterEstimate:
    """Estimate the refraction center from one chessboard image.

    Returns the estimate together with a degeneracy flag: a centered
    camera (or refraction drowned in noise) leaves the second-smallest
    singular value of the stacked system at the noise floor and no unique
    F exists.  The noise floor is taken from the homography mapping error.
    """
    corners = np.asarray(corners_px, dtype=np.float64)
    if corners.ndim != 2 or corners.shape[0] < 8:
        raise InsufficientCorrespondences("center estimation needs >= 8 correspondences")
    corners = check_corners(corners, board.n_corners)
    n = corners.shape[0]

    board_2d = board.points_2d()
    T_c = hartley_normalization(board_2d)
    T_r = hartley_normalization(corners)
    xc = homogeneous(board_2d) @ T_c.T
    xr = homogeneous(corners) @ T_r.T

    # rows of the vectorized constraint: kron(x_r, x_c) . vec(F) = 0
    A = np.einsum("ni,nj->nij", xr, xc).reshape(n, 9)
    _, sv, vt = np.linalg.svd(A)
    second_ratio = float(sv[-2] / sv[0])

    F_n = vt[-1].reshape(3, 3)
    U, S, Vt = np.linalg.svd(F_n)
    F_n = U @ np.diag([S[0], S[1], 0.0]) @ Vt
    r_n = U[:, 2]

    F = T_r.T @ F_n @ T_c
    F = F / np.linalg.norm(F)
    r = np.linalg.solve(T_r, r_n)
    r = r / np.linalg.norm(r)

    hme = homography_mapping_error(corners, board)

    lines = homogeneous(board_2d) @ F.T
    norms = np.hypot(lines[:, 0], lines[:, 1])
    keep = norms > 1e-12 * np.abs(lines).max()
    lines = lines[keep] / norms[keep, None]

    # Corner noise estimated from what the fitted constraint cannot
    # explain (the homography error would count the refraction signal
    # itself as noise and misfire on strong noiseless refraction).
    fit_residual_px = float(
        np.sqrt(np.mean((np.einsum("ni,ni->n", lines, homogeneous(corners)[keep])) ** 2))
    )
    null_median = _noise_only_ratio(board_2d, corners, fit_residual_px, T_c)
    threshold = null_median / tolerances.degeneracy_noise_factor
    degenerate = second_ratio < max(threshold, tolerances.degeneracy_ratio_floor)

    return CenterEstimate(
        F=readonly(F),
        refraction_center_px=readonly(r),
        second_singular_ratio=second_ratio,
        degenerate=bool(degenerate),
        homography_mapping_error_px=hme,
        constraint_lines=readonly(lines),
    )


def combine_centers(estimates, weights=None) -> np.ndarray:
    """Joint refraction center from several single-image estimates.

    All displacement lines of all images pass through the shared center,
    so the joint estimate minimizes weighted point-to-line distances over
    every image's constraint lines, starting from the single image with
    the strongest refraction signal.  Weights default to each image's
    homography mapping error.  Returns a homogeneous pixel point (unit
    norm); near-ideal solutions stay homogeneous instead of overflowing.
    """
    usable = [e for e in estimates if not e.degenerate]
    if not usable:
        raise AllDegenerate("no non-degenerate center estimate available")
    if weights is None:
        weights = [e.homography_mapping_error_px for e in usable]
    else:
        weights = list(weights)
        if len(weights) != len(estimates):
            raise InsufficientCorrespondences("one weight per estimate required")
        weights = [w for w, e in zip(weights, estimates) if not e.degenerate]

    lines = np.vstack([e.constraint_lines for e in usable])
    w = np.concatenate(
        [np.full(len(e.constraint_lines), max(wk, 1e-12)) for e, wk in zip(usable, weights)]
    )
    sw = np.sqrt(w)

    best = max(zip(usable, weights), key=lambda ew: ew[1])[0]
    r0 = best.refraction_center_px

    # Algebraic joint solution on the unit sphere in a normalized frame:
    # points scaled to unit order (x' = x / extent) balance the line
    # coefficients for the eigen problem; valid for finite and ideal
    # centers alike.
    extent = max(1.0, float(np.abs(lines[:, 2]).max()))
    lines_n = lines * np.array([extent, extent, 1.0])
    lines_n /= np.linalg.norm(lines_n, axis=1, keepdims=True)
    M = (lines_n * w[:, None]).T @ lines_n
    _, eigvec = np.linalg.eigh(M)
    r_alg = eigvec[:, 0] * np.array([extent, extent, 1.0])
    r_alg /= np.linalg.norm(r_alg)
    if float(r_alg @ r0) < 0:
        r_alg = -r_alg

    # Quasi-ideal center: direction is the answer, finite refinement
    # would chase an intersection at infinity.
    far_scale = 50.0 * extent
    if abs(r_alg[2]) * far_scale < np.linalg.norm(r_alg[:2]):
        return readonly(r_alg)

    def residuals(xy):
        return sw * (lines[:, 0] * xy[0] + lines[:, 1] * xy[1] + lines[:, 2])

    def cost(xy):
        res = residuals(xy)
        return float(res @ res)

    # geometric refinement from the best single-image estimate, falling
    # back to the algebraic point when it explains the lines better
    starts = [r_alg[:2] / r_alg[2]]
    if abs(r0[2]) * far_scale > np.linalg.norm(r0[:2]):
        starts.append(r0[:2] / r0[2])
    solutions = []
    for x0 in starts:
        sol = least_squares(residuals, x0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
        solutions.append((cost(sol.x), tuple(sol.x)))
    solutions.sort()
    xy = np.array(solutions[0][1])
    if np.linalg.norm(xy) > far_scale:
        return readonly(r_alg)
    r = np.array([xy[0], xy[1], 1.0])
    return readonly(r / np.linalg.norm(r))


def convexity_sign(
    corners_px,
    board: ChessboardSpec,
    center_h,
    collinear_tol: float = 1e-9,
) -> SignResult:
    """Decide the decentering direction from apparent board-line curvature.

    Displacement magnitude grows with distance from the refraction center,
    so under barrel displacement (corners pulled toward the center,
    backward decentering) the endpoints of a board line move more than its
    middle and the middle ends up on the far side of their chord from the
    center; pincushion (forward) is the mirror case.  The two sides are
    separated by the sign of ((x1 x x3) . x2) * ((x1 x x3) . r) with r in
    canonical (positive-z) homogeneous form, majority-voted over all
    collinear corner triples of board rows and columns; exactly collinear
    triples carry no curvature and are excluded.
    """
    corners = check_corners(corners_px, board.n_corners)
    r = np.asarray(center_h, dtype=np.float64)
    r = r / np.linalg.norm(r)
    if abs(r[2]) > 1e-12 and r[2] < 0:
        r = -r
    pts = homogeneous(corners)

    positive = 0
    negative = 0
    for line in board.collinear_index_lines():
        m = len(line)
        for a in range(m - 2):
            for c in range(a + 2, m):
                x1, x3 = pts[line[a]], pts[line[c]]
                edge = np.cross(x1, x3)
                scale = np.linalg.norm(edge)
                if scale == 0.0:
                    continue
                edge = edge / scale
                for b in range(a + 1, c):
                    x2 = pts[line[b]]
                    bulge = float(edge @ x2)
                    if abs(bulge) <= collinear_tol * np.linalg.norm(x2):
                        continue
                    if bulge * float(edge @ r) > 0:
                        positive += 1
                    else:
                        negative += 1

    total = positive + negative
    if total == 0:
        return SignResult(DecenteringSign.UNDETERMINED, 0.5)
    fraction = positive / total
    # 3-sigma binomial margin around an uninformative 50/50 vote
    margin = min(1.5 / math.sqrt(total), 0.45)
    if fraction > 0.5 + margin:
        sign = DecenteringSign.FORWARD
    elif fraction < 0.5 - margin:
        sign = DecenteringSign.BACKWARD
    else:
        sign = DecenteringSign.UNDETERMINED
    return SignResult(sign, fraction)


def axis_from_center(center_h, intrinsics, rotation) -> np.ndarray:
    """World-frame refraction-axis direction for a homogeneous center.

    The returned unit vector is determined only up to sign; the convexity
    test resolves which pole the camera is near.
    """
    r = np.asarray(center_h, dtype=np.float64)
    a = np.asarray(rotation).T @ np.linalg.solve(intrinsics.K, r)
    return readonly(a / np.linalg.norm(a))


def signed_axis(center_h, intrinsics, rotation, sign: DecenteringSign) -> np.ndarray:
    """Axis direction with the camera-side sign resolved.

    Backward decentering puts the dome center in front of the camera, so
    the decentering direction v/|v| maps to negative depth through the
    camera rotation; forward decentering is the mirror case.
    """
    a = np.array(axis_from_center(center_h, intrinsics, rotation))
    depth = float((np.asarray(rotation) @ a)[2])
    if sign is DecenteringSign.BACKWARD:
        return readonly(a if depth < 0 else -a)
    if sign is DecenteringSign.FORWARD:
        return readonly(a if depth > 0 else -a)
    return readonly(a)
