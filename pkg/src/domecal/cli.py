"""Command-line interface tying the library into reproducible experiments.

Every command is a pure function of its input files, flags and seed;
timestamps appear only in optional sidecar logs.  Exit codes: 0 success,
2 input or schema error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .boards import ChessboardSpec
from .calibrate import (
    CalibrationOptions,
    Pose,
    calibrate,
    make_problem,
    pose_error,
    validate_holdout,
)
from .direct import (
    DecenteringSign,
    combine_centers,
    convexity_sign,
    estimate_center,
    homography_mapping_error,
)
from .errors import DomeCalError, InputError
from .io import (
    SCHEMA_VERSION,
    jsonable,
    load_board,
    load_rig,
    make_report,
    observations_from_csv,
    observations_to_csv,
    save_board,
    write_json,
    write_text,
)
from .simulate import (
    PoseSampler,
    SimConfig,
    displacement_field,
    generate_observations,
    iso_refraction_curve,
    noise_sweep,
)
from .svg import SvgCanvas

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3


def _log_sidecar(path, lines):
    if path is None:
        return
    stamp = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    with open(path, "a") as fh:
        for line in lines:
            fh.write(f"{stamp} {line}\n")


def _load_observations(obs_path, board_path):
    board = load_board(board_path)
    text = Path(obs_path).read_text()
    return observations_from_csv(text, board), board


def cmd_simulate(args) -> int:
    rig = load_rig(args.rig)
    board = ChessboardSpec(args.board_rows, args.board_cols, args.square_size_m)
    sampler = PoseSampler(
        distance_range=(args.min_distance_m, args.max_distance_m),
        tilt_max_rad=math.radians(args.tilt_max_deg),
        margin_frac=args.margin_frac,
    )
    config = SimConfig(
        rig=rig,
        board=board,
        n_images=args.images,
        pose_sampler=sampler,
        noise_sigma_px=args.sigma,
        rng_seed=args.seed,
    )
    sim = generate_observations(config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_text(out / "observations.csv", observations_to_csv(sim.observations))
    save_board(out / "board.json", board)
    gt = {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "v_off_m": jsonable(sim.v_off),
        "poses_board_to_camera": [
            {"rotation": jsonable(p.rotation), "translation_m": jsonable(p.translation)}
            for p in sim.poses
        ],
        "metadata": jsonable(sim.metadata),
    }
    write_json(out / "ground_truth.json", gt)
    _log_sidecar(args.log, [f"simulate wrote {out}/observations.csv ({args.images} images)"])
    return EXIT_OK


def cmd_estimate_center(args) -> int:
    observations, board = _load_observations(args.obs, args.board)
    rig = load_rig(args.rig)
    estimates = [estimate_center(img.corners_px, board) for img in observations]
    per_image = []
    for img, est in zip(observations, estimates):
        entry = {
            "image_id": img.image_id,
            "degenerate": est.degenerate,
            "second_singular_ratio": est.second_singular_ratio,
            "homography_mapping_error_px": est.homography_mapping_error_px,
        }
        if not est.degenerate:
            entry["refraction_center_px"] = jsonable(est.refraction_center_px)
        per_image.append(entry)

    fields = {
        "command": "estimate-center",
        "per_image": per_image,
        "all_degenerate": all(e.degenerate for e in estimates),
    }
    if not fields["all_degenerate"]:
        center = combine_centers(estimates)
        votes = {"forward": 0, "backward": 0, "undetermined": 0}
        for img in observations:
            votes[convexity_sign(img.corners_px, board, center).sign.value] += 1
        if votes["forward"] > votes["backward"]:
            sign = DecenteringSign.FORWARD
        elif votes["backward"] > votes["forward"]:
            sign = DecenteringSign.BACKWARD
        else:
            sign = DecenteringSign.UNDETERMINED
        fields["refraction_center_px"] = jsonable(center)
        if abs(center[2]) > 1e-12 * np.linalg.norm(center[:2]):
            fields["refraction_center_point_px"] = jsonable(center[:2] / center[2])
        fields["sign"] = sign.value
        fields["sign_votes"] = votes
    report = make_report({"obs": args.obs, "board": args.board, "rig": args.rig}, fields)
    write_json(args.out, report)

    if args.svg:
        _write_center_overlay(args.svg, rig, observations, fields)
    _log_sidecar(args.log, [f"estimate-center wrote {args.out}"])
    return EXIT_OK


def _write_center_overlay(path, rig, observations, fields):
    intr = rig.intrinsics
    scale = 900.0 / intr.width
    canvas = SvgCanvas(intr.width * scale, intr.height * scale)
    for img in observations:
        for u, v in img.corners_px:
            canvas.circle((u * scale, v * scale), 1.2, color="steelblue", width=0.6)
    if "refraction_center_point_px" in fields:
        cx, cy = fields["refraction_center_point_px"]
        for img in observations:
            for u, v in img.corners_px[:: max(1, len(img.corners_px) // 16)]:
                canvas.line((u * scale, v * scale), (cx * scale, cy * scale), color="orange", width=0.3, opacity=0.5)
        canvas.circle((cx * scale, cy * scale), 4.0, color="red", width=1.5)
        canvas.text((cx * scale + 6, cy * scale - 6), "center", size=11, color="red")
    write_text(path, canvas.to_string())


def cmd_calibrate(args) -> int:
    observations, board = _load_observations(args.obs, args.board)
    rig = load_rig(args.rig)
    initial_v = None if args.init_from_direct else np.zeros(3)
    problem = make_problem(observations, rig, initial_v_off=initial_v)
    options = CalibrationOptions(max_iter=args.max_iter)
    result = calibrate(problem, options)

    per_image_hme = [
        {
            "image_id": img.image_id,
            "homography_mapping_error_px": homography_mapping_error(img.corners_px, board),
        }
        for img in observations
    ]
    fields = {
        "command": "calibrate",
        "v_off_m": jsonable(result.v_off),
        "rms_board_residual_m": result.rms_board_residual,
        "rms_reproj_px": result.rms_reproj_px,
        "iterations": result.iterations,
        "converged": result.converged,
        "covariance_voff": jsonable(result.covariance_voff),
        "per_image": per_image_hme,
        "solver": {
            "energy": result.diagnostics["energy"],
            "n_corners": result.diagnostics["n_corners"],
            "n_dropped": result.diagnostics["n_dropped"],
            "warnings": result.diagnostics["warnings"],
        },
        "poses_board_to_camera": [
            {"rotation": jsonable(p.rotation), "translation_m": jsonable(p.translation)}
            for p in result.poses
        ],
    }
    inputs = {"obs": args.obs, "board": args.board, "rig": args.rig}

    if args.gt:
        import json

        gt = json.loads(Path(args.gt).read_text())
        gt_poses = [
            Pose(np.asarray(p["rotation"]), np.asarray(p["translation_m"]))
            for p in gt["poses_board_to_camera"]
        ]
        report_err = pose_error(result.poses, gt_poses)
        fields["ate_mm"] = report_err.ate_trans * 1e3
        fields["rotation_error_mean_deg"] = math.degrees(report_err.rotation_angle_error_mean)
        fields["v_off_error_mm"] = jsonable(
            (np.asarray(result.v_off) - np.asarray(gt["v_off_m"])) * 1e3
        )
        inputs["gt"] = args.gt

    if args.holdout:
        holdout, _ = _load_observations(args.holdout, args.board)
        fields["holdout_mean_reproj_px"] = validate_holdout(result, holdout, rig)
        inputs["holdout"] = args.holdout

    report = make_report(inputs, fields)
    write_json(args.out, report)
    _log_sidecar(args.log, [f"calibrate wrote {args.out}"])
    return EXIT_OK if result.converged else EXIT_NUMERIC


def cmd_displacement_field(args) -> int:
    rig = load_rig(args.rig)
    fld = displacement_field(rig, args.depth_m, grid_shape=(args.grid_x, args.grid_y))
    def f(x):
        return repr(float(x))

    lines = ["u_air_px,v_air_px,u_refr_px,v_refr_px,du_px,dv_px,valid"]
    for ok, a, r, arrow in zip(fld.valid, fld.in_air_px, fld.refracted_px, fld.arrows):
        if ok:
            lines.append(
                f"{f(a[0])},{f(a[1])},{f(r[0])},{f(r[1])},{f(arrow[0])},{f(arrow[1])},1"
            )
        else:
            lines.append(f"{f(a[0])},{f(a[1])},,,,,0")
    write_text(args.out_csv, "\n".join(lines) + "\n")

    if args.out_svg:
        intr = rig.intrinsics
        scale = 900.0 / intr.width
        canvas = SvgCanvas(intr.width * scale, intr.height * scale)
        for ok, a, r in zip(fld.valid, fld.in_air_px, fld.refracted_px):
            if not ok:
                continue
            canvas.circle((a[0] * scale, a[1] * scale), 1.0, color="green", width=0.6)
            if np.hypot(*(r - a)) > 1e-9:
                canvas.arrow(
                    (a[0] * scale, a[1] * scale),
                    (r[0] * scale, r[1] * scale),
                    color="black",
                    width=0.6,
                    head=2.5,
                )
        write_text(args.out_svg, canvas.to_string())
    _log_sidecar(args.log, [f"displacement-field wrote {args.out_csv}"])
    return EXIT_OK


def cmd_iso_curves(args) -> int:
    rig = load_rig(args.rig)
    thetas = [math.radians(float(t)) for t in args.theta_deg.split(",")]
    rows = ["theta_deg,u_px,v_px"]
    all_pts = []
    for theta in thetas:
        pts = iso_refraction_curve(rig, theta, n_samples=args.samples)
        all_pts.append(pts)
        for p in pts:
            rows.append(f"{math.degrees(theta)!r},{float(p[0])!r},{float(p[1])!r}")
    write_text(args.out_csv, "\n".join(rows) + "\n")

    if args.out_svg:
        intr = rig.intrinsics
        scale = 900.0 / intr.width
        canvas = SvgCanvas(intr.width * scale, intr.height * scale)
        palette = ["crimson", "darkorange", "seagreen", "royalblue", "purple"]
        for k, pts in enumerate(all_pts):
            color = palette[k % len(palette)]
            for p in pts:
                if 0 <= p[0] <= intr.width and 0 <= p[1] <= intr.height:
                    canvas.circle((p[0] * scale, p[1] * scale), 1.4, color=color, width=0.8)
        write_text(args.out_svg, canvas.to_string())
    _log_sidecar(args.log, [f"iso-curves wrote {args.out_csv}"])
    return EXIT_OK


def cmd_noise_sweep(args) -> int:
    rig = load_rig(args.rig)
    board = load_board(args.board)
    sigmas = [float(s) for s in args.sigmas.split(",")]
    sampler = PoseSampler(
        distance_range=(args.min_distance_m, args.max_distance_m),
        tilt_max_rad=math.radians(args.tilt_max_deg),
        margin_frac=args.margin_frac,
    )
    rows = noise_sweep(
        rig,
        board,
        sigmas=sigmas,
        n_trials=args.trials,
        n_images=args.images,
        seed=args.seed,
        pose_sampler=sampler,
        include_calibration=args.calibrate,
    )
    columns = list(rows[0].keys())
    lines = [",".join(columns)]
    for row in rows:
        lines.append(
            ",".join(
                repr(row[c]) if not isinstance(row[c], list) else '"' + ";".join(repr(x) for x in row[c]) + '"'
                for c in columns
            )
        )
    write_text(args.out_csv, "\n".join(lines) + "\n")
    _log_sidecar(args.log, [f"noise-sweep wrote {args.out_csv}"])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="domecal",
        description="Dome-port refraction modeling, simulation and decentering calibration",
    )
    parser.add_argument(
        "--version", action="version", version=f"domecal {__version__} (schema v{SCHEMA_VERSION})"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate synthetic chessboard observations")
    p.add_argument("--rig", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--images", type=int, default=10)
    p.add_argument("--sigma", type=float, default=0.0, help="corner noise [px]")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--board-rows", type=int, default=7)
    p.add_argument("--board-cols", type=int, default=8)
    p.add_argument("--square-size-m", type=float, default=0.05)
    p.add_argument("--min-distance-m", type=float, default=0.4)
    p.add_argument("--max-distance-m", type=float, default=2.0)
    p.add_argument("--tilt-max-deg", type=float, default=40.0)
    p.add_argument("--margin-frac", type=float, default=0.15)
    p.add_argument("--log", default=None, help="sidecar log file")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate-center", help="direct refraction-center estimation")
    p.add_argument("--obs", required=True)
    p.add_argument("--board", required=True)
    p.add_argument("--rig", required=True)
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--svg", default=None, help="optional overlay SVG path")
    p.add_argument("--log", default=None)
    p.set_defaults(func=cmd_estimate_center)

    p = sub.add_parser("calibrate", help="joint decentering calibration")
    p.add_argument("--obs", required=True)
    p.add_argument("--board", required=True)
    p.add_argument("--rig", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--init-from-direct", action="store_true")
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--holdout", default=None, help="holdout observations CSV")
    p.add_argument("--gt", default=None, help="ground-truth JSON for error metrics")
    p.add_argument("--log", default=None)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("displacement-field", help="refraction displacement arrows")
    p.add_argument("--rig", required=True)
    p.add_argument("--depth-m", type=float, default=1.0)
    p.add_argument("--grid-x", type=int, default=16)
    p.add_argument("--grid-y", type=int, default=12)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--out-svg", default=None)
    p.add_argument("--log", default=None)
    p.set_defaults(func=cmd_displacement_field)

    p = sub.add_parser("iso-curves", help="iso-refraction-angle image curves")
    p.add_argument("--rig", required=True)
    p.add_argument("--theta-deg", required=True, help="comma-separated angles")
    p.add_argument("--samples", type=int, default=90)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--out-svg", default=None)
    p.add_argument("--log", default=None)
    p.set_defaults(func=cmd_iso_curves)

    p = sub.add_parser("noise-sweep", help="Monte-Carlo noise sweep")
    p.add_argument("--rig", required=True)
    p.add_argument("--board", required=True)
    p.add_argument("--sigmas", required=True, help="comma-separated noise levels [px]")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--images", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--calibrate", action="store_true", help="include full calibration per trial")
    p.add_argument("--min-distance-m", type=float, default=0.4)
    p.add_argument("--max-distance-m", type=float, default=2.0)
    p.add_argument("--tilt-max-deg", type=float, default=40.0)
    p.add_argument("--margin-frac", type=float, default=0.15)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--log", default=None)
    p.set_defaults(func=cmd_noise_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FileNotFoundError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DomeCalError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
