"""File formats: rig configs (JSON), observations (CSV), reports (JSON).

All lengths in files are meters (suffix ``_m``), image quantities are
pixels (suffix ``_px`` or pixel-implied keys).  Reports embed input
hashes and the tool version so identical inputs reproduce identical
bytes; timestamps live only in sidecar logs.
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .boards import ChessboardSpec, ImageObservation, ObservationSet
from .errors import InputError
from .geometry import CameraIntrinsics, CameraRig, DomeGeometry, DomeModel, MediaStack

SCHEMA_VERSION = 1

RIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["media", "dome", "intrinsics"],
    "properties": {
        "schema_version": {"type": "integer"},
        "media": {
            "type": "object",
            "additionalProperties": False,
            "required": ["mu_air", "mu_glass", "mu_water"],
            "properties": {
                "mu_air": {"type": "number", "minimum": 1.0},
                "mu_glass": {"type": "number", "minimum": 1.0},
                "mu_water": {"type": "number", "minimum": 1.0},
            },
        },
        "dome": {
            "type": "object",
            "additionalProperties": False,
            "required": ["inner_radius_m", "thickness_m", "model"],
            "properties": {
                "inner_radius_m": {"type": "number", "exclusiveMinimum": 0},
                "thickness_m": {"type": "number", "minimum": 0},
                "model": {"enum": ["thin", "thick"]},
            },
        },
        "intrinsics": {
            "type": "object",
            "additionalProperties": False,
            "required": ["fx", "fy", "cx", "cy", "width", "height"],
            "properties": {
                "fx": {"type": "number", "exclusiveMinimum": 0},
                "fy": {"type": "number", "exclusiveMinimum": 0},
                "cx": {"type": "number"},
                "cy": {"type": "number"},
                "width": {"type": "integer", "exclusiveMinimum": 0},
                "height": {"type": "integer", "exclusiveMinimum": 0},
            },
        },
        "v_off_m": {
            "type": "array",
            "items": {"type": "number"},
            "minItems": 3,
            "maxItems": 3,
        },
    },
}

BOARD_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["rows", "cols", "square_size_m"],
    "properties": {
        "rows": {"type": "integer", "minimum": 3},
        "cols": {"type": "integer", "minimum": 3},
        "square_size_m": {"type": "number", "exclusiveMinimum": 0},
    },
}

OBS_CSV_HEADER = ["image_id", "board_i", "board_j", "u_px", "v_px"]


def _validate(instance, schema, what: str):
    try:
        jsonschema.validate(instance, schema)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "(root)"
        raise InputError(f"{what}: {exc.message} at {path}") from exc


def load_rig(path) -> CameraRig:
    """Read a rig config file; the world frame is aligned with the camera."""
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from exc
    _validate(data, RIG_SCHEMA, str(path))
    media = MediaStack(**data["media"])
    dome = DomeGeometry(
        inner_radius=data["dome"]["inner_radius_m"],
        thickness=data["dome"]["thickness_m"],
        model=DomeModel(data["dome"]["model"]),
    )
    intr = CameraIntrinsics(**data["intrinsics"])
    v_off = np.asarray(data.get("v_off_m", [0.0, 0.0, 0.0]), dtype=np.float64)
    return CameraRig(intrinsics=intr, rotation=np.eye(3), v_off=v_off, media=media, dome=dome)


def save_rig(path, rig: CameraRig) -> None:
    data = {
        "schema_version": SCHEMA_VERSION,
        "media": {
            "mu_air": rig.media.mu_air,
            "mu_glass": rig.media.mu_glass,
            "mu_water": rig.media.mu_water,
        },
        "dome": {
            "inner_radius_m": rig.dome.inner_radius,
            "thickness_m": rig.dome.thickness,
            "model": rig.dome.model.value,
        },
        "intrinsics": {
            "fx": rig.intrinsics.fx,
            "fy": rig.intrinsics.fy,
            "cx": rig.intrinsics.cx,
            "cy": rig.intrinsics.cy,
            "width": rig.intrinsics.width,
            "height": rig.intrinsics.height,
        },
        "v_off_m": [float(x) for x in rig.v_off],
    }
    write_json(path, data)


def load_board(path) -> ChessboardSpec:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from exc
    _validate(data, BOARD_SCHEMA, str(path))
    return ChessboardSpec(rows=data["rows"], cols=data["cols"], square_size=data["square_size_m"])


def save_board(path, board: ChessboardSpec) -> None:
    write_json(
        path,
        {"rows": board.rows, "cols": board.cols, "square_size_m": board.square_size},
    )


def observations_to_csv(observations: ObservationSet) -> str:
    """Serialize corner detections; one row per corner, full grids only."""
    board = observations.board
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(OBS_CSV_HEADER)
    for image in observations:
        for i in range(board.rows):
            for j in range(board.cols):
                u, v = image.corners_px[board.index(i, j)]
                writer.writerow([image.image_id, i, j, repr(float(u)), repr(float(v))])
    return buf.getvalue()


def observations_from_csv(text: str, board: ChessboardSpec) -> ObservationSet:
    reader = csv.reader(_io.StringIO(text))
    header = next(reader, None)
    if header != OBS_CSV_HEADER:
        raise InputError(f"observation CSV header must be {OBS_CSV_HEADER}, got {header}")
    per_image: dict[str, np.ndarray] = {}
    order: list[str] = []
    for row_num, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 5:
            raise InputError(f"line {row_num}: expected 5 fields, got {len(row)}")
        image_id, i_s, j_s, u_s, v_s = row
        try:
            i, j = int(i_s), int(j_s)
            u, v = float(u_s), float(v_s)
        except ValueError as exc:
            raise InputError(f"line {row_num}: {exc}") from exc
        if not (0 <= i < board.rows and 0 <= j < board.cols):
            raise InputError(f"line {row_num}: corner ({i},{j}) outside board grid")
        if image_id not in per_image:
            per_image[image_id] = np.full((board.n_corners, 2), np.nan)
            order.append(image_id)
        per_image[image_id][board.index(i, j)] = (u, v)
    images = []
    for image_id in order:
        corners = per_image[image_id]
        if np.isnan(corners).any():
            raise InputError(f"image {image_id!r}: incomplete corner grid")
        images.append(ImageObservation(image_id=image_id, corners_px=corners))
    return ObservationSet(board, tuple(images))


def write_text(path, text: str) -> None:
    Path(path).write_text(text)


def write_json(path, data) -> None:
    Path(path).write_text(json.dumps(data, sort_keys=True, indent=2) + "\n")


def sha256_of(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def make_report(input_paths: dict, fields: dict) -> dict:
    """Assemble a self-describing result document."""
    return {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "inputs_sha256": {name: sha256_of(p) for name, p in sorted(input_paths.items())},
        **fields,
    }


def jsonable(value):
    """Recursively convert numpy containers for JSON serialization."""
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, dict):
        return {k: jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    return value
