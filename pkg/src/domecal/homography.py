"""Plane-to-image homography estimation (DLT + nonlinear refinement)."""

from __future__ import annotations

import numpy as np

from .errors import InsufficientCorrespondences, PlanarDegeneracy


def hartley_normalization(points: np.ndarray) -> np.ndarray:
    """Similarity T moving the centroid to the origin, RMS distance to sqrt(2)."""
    pts = np.asarray(points, dtype=np.float64)
    centroid = pts.mean(axis=0)
    rms = np.sqrt(np.mean(np.sum((pts - centroid) ** 2, axis=1)))
    scale = np.sqrt(2.0) / max(rms, 1e-300)
    return np.array(
        [
            [scale, 0.0, -scale * centroid[0]],
            [0.0, scale, -scale * centroid[1]],
            [0.0, 0.0, 1.0],
        ]
    )


def homogeneous(points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    return np.hstack([pts, np.ones((pts.shape[0], 1))])


def fit_homography_dlt(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Normalized DLT homography mapping src (N,2) onto dst (N,2)."""
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    n = src.shape[0]
    if n < 4:
        raise InsufficientCorrespondences("homography needs at least 4 correspondences")
    Ts, Td = hartley_normalization(src), hartley_normalization(dst)
    s = homogeneous(src) @ Ts.T
    d = homogeneous(dst) @ Td.T
    A = np.zeros((2 * n, 9))
    A[0::2, 0:3] = s
    A[0::2, 6:9] = -d[:, 0:1] * s
    A[1::2, 3:6] = s
    A[1::2, 6:9] = -d[:, 1:2] * s
    _, sv, vt = np.linalg.svd(A)
    if sv[-2] < 1e-12 * sv[0]:
        raise PlanarDegeneracy("homography system is rank deficient")
    H = vt[-1].reshape(3, 3)
    H = np.linalg.inv(Td) @ H @ Ts
    return H / np.linalg.norm(H)


def refine_homography(H: np.ndarray, src: np.ndarray, dst: np.ndarray, max_iter: int = 20) -> np.ndarray:
    """Gauss-Newton refinement of the transfer error, ||H|| kept at 1."""
    src_h = homogeneous(src)
    dst = np.asarray(dst, dtype=np.float64)
    h = H.ravel() / np.linalg.norm(H)
    prev_cost = np.inf
    for _ in range(max_iter):
        Hm = h.reshape(3, 3)
        proj = src_h @ Hm.T
        w = proj[:, 2]
        uv = proj[:, :2] / w[:, None]
        res = (uv - dst).ravel()
        cost = float(res @ res)
        # Jacobian of (Hx / w) w.r.t. the 9 entries of H
        n = src_h.shape[0]
        J = np.zeros((2 * n, 9))
        J[0::2, 0:3] = src_h / w[:, None]
        J[0::2, 6:9] = -uv[:, 0:1] * src_h / w[:, None]
        J[1::2, 3:6] = src_h / w[:, None]
        J[1::2, 6:9] = -uv[:, 1:2] * src_h / w[:, None]
        try:
            step, *_ = np.linalg.lstsq(J, -res, rcond=None)
        except np.linalg.LinAlgError:
            break
        h_new = h + step
        h_new /= np.linalg.norm(h_new)
        if abs(prev_cost - cost) <= 1e-15 * max(cost, 1.0):
            break
        prev_cost = cost
        h = h_new
    return h.reshape(3, 3)


def fit_homography(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """DLT followed by transfer-error refinement."""
    H = fit_homography_dlt(src, dst)
    return refine_homography(H, src, dst)


def transfer_rms(H: np.ndarray, src: np.ndarray, dst: np.ndarray) -> float:
    """RMS transfer error of H over the correspondences, in dst units."""
    proj = homogeneous(src) @ np.asarray(H).T
    uv = proj[:, :2] / proj[:, 2:3]
    return float(np.sqrt(np.mean(np.sum((uv - np.asarray(dst)) ** 2, axis=1))))
