"""Command-line experiment harness.

Subcommands::

    orpose generate --out scene.json [--config gen.json] [--seed N]
    orpose run      --scene scene.json --out results.json
                    [--config run.json] [--quadrant Q] [--parallel P]
    orpose eval     --scene scene.json --results r.json [--results r2.json ...]
                    --out report
    orpose ablate   --scene scene.json --config sweep.json --out sweep
                    [--parallel P]

Exit codes: 0 success, 1 fatal input error, 2 completed with some frames
errored.  Set ORPOSE_LOG=DEBUG|INFO|WARNING|ERROR for log verbosity.

Run results are bit-identical across repeat runs and parallelism degrees;
wall-clock timings therefore go to a ``<out>.timing.json`` sidecar instead
of the result file.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .errors import MismatchedInputs, OrposeError
from .metrics import PCKH_THRESHOLDS, EvalReport, assemble_report
from .pipeline import QUADRANTS, FrameResult, RunConfig, run_scene
from .scenefile import load_scene, save_scene
from .skeleton import Pose3D
from .synth import Scene, SceneConfig, generate_scene, regenerate

log = logging.getLogger("orpose")

RESULTS_VERSION = 1

# Sweepable parameter name -> (target, field).  Scene-side parameters force
# regeneration from the scene's stored generator settings.
_SWEEP_PARAMS = {
    "lambda": ("fusion", "lam"),
    "depth_samples": ("fusion", "depth_samples"),
    "depth_near_mm": ("fusion", "depth_near_mm"),
    "depth_far_mm": ("fusion", "depth_far_mm"),
    "orientation_weight": ("psm", "orientation_weight"),
    "grid_bins": ("psm", "grid_bins"),
    "length_tol_mm": ("psm", "length_tol_mm"),
    "refine_iters": ("psm", "refine_iters"),
    "imu_noise_deg": ("scene", "imu_noise_deg"),
    "drop_prob": ("scene", "drop_prob"),
    "shift_prob": ("scene", "shift_prob"),
    "clutter_prob": ("scene", "clutter_prob"),
    "scene_seed": ("scene", "seed"),
}


def _setup_logging() -> None:
    level = os.environ.get("ORPOSE_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )


def _load_json(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _dump_json(data, path: str | Path) -> None:
    Path(path).write_text(json.dumps(data, separators=(",", ":")) + "\n")


def cmd_generate(args: argparse.Namespace) -> int:
    overrides = _load_json(args.config) if args.config else {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    cfg = SceneConfig(**overrides)
    log.info("generating %d frames (seed %d)", cfg.n_frames, cfg.seed)
    scene = generate_scene(cfg)
    save_scene(scene, args.out)
    log.info("wrote %s", args.out)
    return 0


def _results_payload(cfg: RunConfig, results: list[FrameResult]) -> dict:
    # The parallelism degree is an execution detail that must not affect the
    # payload (results are bit-identical across degrees); it is echoed in the
    # timing sidecar instead.
    cfg_echo = {k: v for k, v in cfg.to_dict().items() if k != "parallel"}
    return {
        "format_version": RESULTS_VERSION,
        "run_config": cfg_echo,
        "n_frames": len(results),
        "results": [
            {
                "frame": r.frame_idx,
                "pose_mm": None if r.pose is None else r.pose.joints.tolist(),
                "pose2d_px": None if r.pose2d_px is None else r.pose2d_px.tolist(),
                "error": r.error,
            }
            for r in results
        ],
    }


def cmd_run(args: argparse.Namespace) -> int:
    scene = load_scene(args.scene)
    cfg = RunConfig.from_dict(_load_json(args.config)) if args.config else RunConfig()
    if args.quadrant is not None:
        cfg = replace(cfg, quadrant=args.quadrant)
    if args.parallel is not None:
        cfg = replace(cfg, parallel=args.parallel)
    log.info("running %s on %d frames (parallel=%d)",
             cfg.quadrant, len(scene.frames), cfg.parallel)
    start = time.perf_counter()
    results = run_scene(scene, cfg)
    total = time.perf_counter() - start
    _dump_json(_results_payload(cfg, results), args.out)
    _dump_json(
        {
            "total_s": total,
            "per_frame_s": [r.elapsed_s for r in results],
            "parallel": cfg.parallel,
        },
        f"{args.out}.timing.json",
    )
    n_errored = sum(1 for r in results if r.error is not None)
    for r in results:
        if r.error is not None:
            log.warning("frame %d failed: %s", r.frame_idx, r.error)
    log.info("wrote %s (%d/%d frames ok, %.2fs)",
             args.out, len(results) - n_errored, len(results), total)
    return 2 if n_errored else 0


def _gt_arrays(scene: Scene):
    """Ground truth unpacked for evaluation; raises if any of it is missing."""
    poses, pose2d, heads = [], [], []
    for i, frame in enumerate(scene.frames):
        if frame.pose is None or frame.pose2d is None or frame.head_lengths_px is None:
            raise MismatchedInputs(f"frame {i} lacks ground truth; cannot evaluate")
        poses.append(frame.pose)
        pose2d.append(np.array([p.points for p in frame.pose2d]))
        heads.append(frame.head_lengths_px)
    return poses, pose2d, heads


def _report_from_results(scene: Scene, payload: dict, label: str) -> EvalReport:
    if payload.get("format_version") != RESULTS_VERSION:
        raise MismatchedInputs(
            f"unrecognized results format version: {payload.get('format_version')!r}"
        )
    records = payload["results"]
    if len(records) != len(scene.frames):
        raise MismatchedInputs(
            f"results cover {len(records)} frames, scene has {len(scene.frames)}"
        )
    gt_poses, gt_2d, heads = _gt_arrays(scene)
    pred_poses = [
        None if r["pose_mm"] is None else Pose3D(joints=np.array(r["pose_mm"]))
        for r in records
    ]
    pred_2d = [
        None if r["pose2d_px"] is None else np.array(r["pose2d_px"])
        for r in records
    ]
    return assemble_report(
        label=label,
        skeleton=scene.skeleton,
        pred_poses=pred_poses,
        gt_poses=gt_poses,
        pred_2d=pred_2d,
        gt_2d=gt_2d,
        head_lengths_px=heads,
    )


def _report_csv_rows(report: EvalReport):
    for t_label, _ in PCKH_THRESHOLDS:
        if t_label in report.pckh_pct:
            for group, value in report.pckh_pct[t_label].items():
                yield [report.label, "pckh_pct", t_label, group, repr(value)]
    for group, value in report.mpjpe_mm.items():
        yield [report.label, "mpjpe_mm", "", group, repr(value)]
    for group, value in report.mpjpe_aligned_mm.items():
        yield [report.label, "mpjpe_aligned_mm", "", group, repr(value)]


def cmd_eval(args: argparse.Namespace) -> int:
    scene = load_scene(args.scene)
    reports: list[EvalReport] = []
    labels: list[str] = []
    for path in args.results:
        payload = _load_json(path)
        label = payload.get("run_config", {}).get("quadrant", Path(path).stem)
        if label in labels:
            label = f"{label}:{Path(path).stem}"
        labels.append(label)
        reports.append(_report_from_results(scene, payload, label))

    baseline_idx = labels.index("sn-psm") if "sn-psm" in labels else 0
    diff_series: dict[str, list[float]] = {}
    base = reports[baseline_idx].per_frame_mpjpe
    for i, report in enumerate(reports):
        if i == baseline_idx:
            continue
        diffs = [
            other - b
            for other, b in zip(report.per_frame_mpjpe, base)
            if other is not None and b is not None
        ]
        diff_series[report.label] = sorted(diffs)

    _dump_json(
        {
            "reports": [r.to_dict() for r in reports],
            "baseline": reports[baseline_idx].label,
            "error_diff_series": diff_series,
        },
        f"{args.out}.json",
    )
    with open(f"{args.out}.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "metric", "threshold", "group", "value"])
        for report in reports:
            writer.writerows(_report_csv_rows(report))
    log.info("wrote %s.json and %s.csv", args.out, args.out)
    return 0


def _sweep_grid(parameters: list[dict]):
    """Cartesian product over sweep parameters, as (name, value) dicts."""
    grid: list[dict] = [{}]
    for param in parameters:
        name = param["name"]
        if name not in _SWEEP_PARAMS:
            raise MismatchedInputs(
                f"unknown sweep parameter {name!r}; known: {sorted(_SWEEP_PARAMS)}"
            )
        grid = [dict(point, **{name: v}) for point in grid for v in param["values"]]
    return grid


def cmd_ablate(args: argparse.Namespace) -> int:
    scene = load_scene(args.scene)
    sweep = _load_json(args.config)
    quadrants = sweep.get("quadrants", list(QUADRANTS))
    base_cfg = RunConfig.from_dict(sweep.get("base", {}))
    if args.parallel is not None:
        base_cfg = replace(base_cfg, parallel=args.parallel)
    grid = _sweep_grid(sweep.get("parameters", []))
    log.info("sweep: %d grid points x %d quadrants", len(grid), len(quadrants))

    rows = []
    any_errored = False
    for point in grid:
        fusion, psm = base_cfg.fusion, base_cfg.psm
        scene_overrides = {}
        for name, value in point.items():
            target, fieldname = _SWEEP_PARAMS[name]
            if target == "fusion":
                fusion = replace(fusion, **{fieldname: value})
            elif target == "psm":
                psm = replace(psm, **{fieldname: value})
            else:
                scene_overrides[fieldname] = value
        point_scene = regenerate(scene, **scene_overrides) if scene_overrides else scene
        for quadrant in quadrants:
            cfg = replace(
                base_cfg, quadrant=quadrant, fusion=fusion, psm=psm
            )
            results = run_scene(point_scene, cfg)
            n_errored = sum(1 for r in results if r.error is not None)
            any_errored = any_errored or n_errored > 0
            report = _report_from_results(
                point_scene, _results_payload(cfg, results), quadrant
            )
            row = dict(point)
            row.update(
                quadrant=quadrant,
                n_errored=n_errored,
                mpjpe_all=report.mpjpe_mm["All"],
                mpjpe_six=report.mpjpe_mm["Six"],
                mpjpe_aligned_all=report.mpjpe_aligned_mm["All"],
                pckh_half_six=report.pckh_pct["1/2"]["Six"],
                pckh_half_others=report.pckh_pct["1/2"]["Others"],
                pckh_half_all=report.pckh_pct["1/2"]["All"],
            )
            rows.append(row)
            log.info("point %s %s: mpjpe All %.2f mm", point, quadrant, row["mpjpe_all"])

    param_names = [p["name"] for p in sweep.get("parameters", [])]
    columns = param_names + [
        "quadrant", "n_errored", "mpjpe_all", "mpjpe_six", "mpjpe_aligned_all",
        "pckh_half_six", "pckh_half_others", "pckh_half_all",
    ]
    _dump_json({"rows": rows, "columns": columns}, f"{args.out}.json")
    with open(f"{args.out}.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([repr(row[c]) if isinstance(row[c], float) else row[c]
                             for c in columns])
    log.info("wrote %s.json and %s.csv", args.out, args.out)
    return 2 if any_errored else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="orpose",
        description="Multi-view + limb-orientation 3D pose estimation harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="write a synthetic scene file")
    p_gen.add_argument("--config", help="scene-config JSON path")
    p_gen.add_argument("--seed", type=int, help="override the config seed")
    p_gen.add_argument("--out", required=True, help="output scene JSON path")
    p_gen.set_defaults(func=cmd_generate)

    p_run = sub.add_parser("run", help="estimate poses for every frame")
    p_run.add_argument("--scene", required=True)
    p_run.add_argument("--config", help="run-config JSON path")
    p_run.add_argument("--quadrant", choices=QUADRANTS)
    p_run.add_argument("--parallel", type=int)
    p_run.add_argument("--out", required=True, help="output results JSON path")
    p_run.set_defaults(func=cmd_run)

    p_eval = sub.add_parser("eval", help="score results against scene truth")
    p_eval.add_argument("--scene", required=True)
    p_eval.add_argument(
        "--results", action="append", required=True,
        help="results JSON path (repeatable; first sn-psm acts as baseline)",
    )
    p_eval.add_argument("--out", required=True, help="output path prefix")
    p_eval.set_defaults(func=cmd_eval)

    p_abl = sub.add_parser("ablate", help="sweep parameters across quadrants")
    p_abl.add_argument("--scene", required=True)
    p_abl.add_argument("--config", required=True, help="sweep JSON path")
    p_abl.add_argument("--parallel", type=int)
    p_abl.add_argument("--out", required=True, help="output path prefix")
    p_abl.set_defaults(func=cmd_ablate)
    return parser


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (
        OrposeError, OSError, json.JSONDecodeError, KeyError, TypeError, ValueError,
    ) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
