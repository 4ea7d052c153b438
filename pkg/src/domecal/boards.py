"""Chessboard geometry and detected-corner containers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .validation import check_corners, readonly


@dataclass(frozen=True)
class ChessboardSpec:
    """Planar chessboard of ``rows`` x ``cols`` corners on the z=0 plane.

    Corner (i, j) sits at (i * square_size, j * square_size, 0); arrays are
    ordered row-major, index = i * cols + j.
    """

    rows: int
    cols: int
    square_size: float

    def __post_init__(self):
        if self.rows < 3 or self.cols < 3:
            raise InputError("board needs at least 3x3 corners")
        if self.square_size <= 0:
            raise InputError("square_size must be positive")

    @property
    def n_corners(self) -> int:
        return self.rows * self.cols

    def points(self) -> np.ndarray:
        """(N, 3) board-frame corner coordinates in meters."""
        i, j = np.meshgrid(np.arange(self.rows), np.arange(self.cols), indexing="ij")
        pts = np.zeros((self.n_corners, 3))
        pts[:, 0] = i.ravel() * self.square_size
        pts[:, 1] = j.ravel() * self.square_size
        return pts

    def points_2d(self) -> np.ndarray:
        return self.points()[:, :2]

    def index(self, i: int, j: int) -> int:
        return i * self.cols + j

    def outermost_indices(self) -> list[int]:
        """The four extreme corners (pose anchors for holdout validation)."""
        return [
            self.index(0, 0),
            self.index(0, self.cols - 1),
            self.index(self.rows - 1, 0),
            self.index(self.rows - 1, self.cols - 1),
        ]

    def collinear_index_lines(self) -> list[list[int]]:
        """Index runs along each board row and column."""
        lines = [[self.index(i, j) for j in range(self.cols)] for i in range(self.rows)]
        lines += [[self.index(i, j) for i in range(self.rows)] for j in range(self.cols)]
        return lines


@dataclass(frozen=True)
class ImageObservation:
    """Detected chessboard corners of one image, indexed like the board."""

    image_id: str
    corners_px: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "corners_px", readonly(np.asarray(self.corners_px, dtype=np.float64)))


@dataclass(frozen=True)
class ObservationSet:
    """Per-image detected corners paired with their board."""

    board: ChessboardSpec
    images: tuple[ImageObservation, ...]

    def __post_init__(self):
        images = tuple(self.images)
        for obs in images:
            check_corners(obs.corners_px, self.board.n_corners, f"image {obs.image_id!r}")
        object.__setattr__(self, "images", images)

    def __len__(self) -> int:
        return len(self.images)

    def __iter__(self):
        return iter(self.images)

    def subset(self, indices) -> "ObservationSet":
        return ObservationSet(self.board, tuple(self.images[k] for k in indices))
