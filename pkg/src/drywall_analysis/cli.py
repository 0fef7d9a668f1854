"""Command-line pipeline runner.

Subcommands mirror the pipeline stages: ``refine``, ``cluster`` and
``rectify`` emit partial reports, ``analyze`` runs the full pipeline with
optional overlay and progress logging, and ``synth`` generates synthetic
annotation (and ground-truth) documents.

Exit codes: 0 on success, 1 on typed pipeline errors, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import multiprocessing
import sys
from pathlib import Path

from .config import PipelineConfig, load_config
from .errors import AnalysisError, OutputError
from .io import append_progress, build_report, load_annotations, write_report
from .overlay import render_overlay
from .pipeline import run_pipeline
from .synth import (
    DegradeParams,
    LayoutParams,
    corner_scene,
    degrade,
    emit_annotations,
    generate_layout,
    single_wall_scene,
    standard_benchmark_scene,
)


def _add_common_flags(sub: argparse.ArgumentParser, multi_input: bool = False) -> None:
    sub.add_argument("--config", type=Path, help="config file (dotted key = value lines)")
    if multi_input:
        sub.add_argument(
            "--input", type=Path, nargs="+", required=True, help="annotation JSON file(s)"
        )
    else:
        sub.add_argument("--input", type=Path, required=True, help="annotation JSON file")
    sub.add_argument("--out", type=Path, help="report output path (directory for batches)")
    sub.add_argument("--overlay", type=Path, help="SVG overlay output path")
    sub.add_argument("--seed", type=int, help="override the pipeline seed")
    sub.add_argument("--log", type=Path, help="append-only progress log (JSON lines)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drywall-analysis",
        description="Geometry analysis of drywall instance-segmentation polygons.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    for stage in ("refine", "cluster", "rectify"):
        sub = subparsers.add_parser(stage, help=f"run the pipeline up to the {stage} stage")
        _add_common_flags(sub)
        sub.set_defaults(func=_cmd_stage, until=stage)

    analyze = subparsers.add_parser("analyze", help="run the full analysis pipeline")
    _add_common_flags(analyze, multi_input=True)
    analyze.add_argument(
        "--jobs", type=int, default=1, help="process multiple inputs in parallel"
    )
    analyze.set_defaults(func=_cmd_analyze, until="quality")

    synth = subparsers.add_parser("synth", help="generate synthetic annotation documents")
    synth.add_argument(
        "--scene",
        choices=("benchmark", "single-wall", "corner"),
        default="benchmark",
        help="which canned scene to generate",
    )
    synth.add_argument("--config", type=Path, help="config file (synth.* keys apply)")
    synth.add_argument("--out", type=Path, required=True, help="annotation output path")
    synth.add_argument("--truth", type=Path, help="also write the ground-truth document here")
    synth.add_argument("--seed", type=int, help="scene seed (benchmark default: 7)")
    synth.set_defaults(func=_cmd_synth)

    return parser


def _load_pipeline_config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _analyze_file(
    input_path: Path,
    out_path: Path | None,
    overlay_path: Path | None,
    log_path: Path | None,
    cfg: PipelineConfig,
    until: str,
) -> dict:
    detections, image_id, image_size = load_annotations(input_path)
    scene = run_pipeline(
        detections, cfg, image_id=image_id, image_size=image_size, until=until
    )
    report = build_report(scene, cfg)
    if out_path is not None:
        write_report(report, out_path)
    if overlay_path is not None:
        render_overlay(report, overlay_path)
    if log_path is not None:
        append_progress(report, log_path)
    return report


def _summarize(report: dict) -> str:
    n_segments = len(report["segments"])
    n_unassigned = len(report["unassigned"])
    stages = [s["quality"]["stage"] for s in report["segments"] if s.get("quality")]
    bits = [f"segments={n_segments}", f"unassigned={n_unassigned}"]
    if stages:
        bits.append("stages=" + ",".join(stages))
    violations = sum(
        len(s["quality"]["tilt_violations"]) for s in report["segments"] if s.get("quality")
    )
    bits.append(f"tilt_violations={violations}")
    return " ".join(bits)


def _cmd_stage(args) -> int:
    cfg = _load_pipeline_config(args)
    report = _analyze_file(args.input, args.out, args.overlay, args.log, cfg, args.until)
    print(f"{args.input}: {_summarize(report)}")
    return 0


def _batch_paths(input_path: Path, out: Path | None, overlay: Path | None):
    out_path = out / f"{input_path.stem}.report.json" if out else None
    overlay_path = overlay / f"{input_path.stem}.overlay.svg" if overlay else None
    return out_path, overlay_path


def _analyze_worker(task) -> tuple[str, str | None, str]:
    input_path, out_path, overlay_path, log_path, cfg, until = task
    try:
        report = _analyze_file(input_path, out_path, overlay_path, log_path, cfg, until)
        return str(input_path), None, _summarize(report)
    except AnalysisError as exc:
        return str(input_path), f"{type(exc).__name__}: {exc}", ""


def _cmd_analyze(args) -> int:
    cfg = _load_pipeline_config(args)
    inputs: list[Path] = args.input
    if len(inputs) == 1:
        report = _analyze_file(inputs[0], args.out, args.overlay, args.log, cfg, args.until)
        print(f"{inputs[0]}: {_summarize(report)}")
        return 0

    for path, kind in ((args.out, "--out"), (args.overlay, "--overlay")):
        if path is not None and not path.is_dir():
            raise OutputError(f"{kind} must be an existing directory for multiple inputs")
    tasks = []
    for input_path in inputs:
        out_path, overlay_path = _batch_paths(input_path, args.out, args.overlay)
        tasks.append((input_path, out_path, overlay_path, args.log, cfg, args.until))

    if args.jobs > 1:
        with multiprocessing.Pool(processes=args.jobs) as pool:
            results = pool.map(_analyze_worker, tasks)
    else:
        results = [_analyze_worker(t) for t in tasks]

    failures = 0
    for name, error, summary in results:
        if error is None:
            print(f"{name}: {summary}")
        else:
            failures += 1
            print(f"{name}: FAILED ({error})", file=sys.stderr)
    return 1 if failures else 0


def _cmd_synth(args) -> int:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    if args.scene == "benchmark":
        truth, params = standard_benchmark_scene()
        if args.seed is not None:
            params = DegradeParams(
                vertex_jitter_sigma=params.vertex_jitter_sigma,
                densify_per_edge=params.densify_per_edge,
                dropout_probability=params.dropout_probability,
                seed=args.seed,
            )
    else:
        seed = args.seed if args.seed is not None else cfg.seed
        params = DegradeParams(
            vertex_jitter_sigma=cfg.synth_sigma,
            densify_per_edge=cfg.synth_densify,
            dropout_probability=cfg.synth_dropout,
            seed=seed,
        )
        if args.scene == "single-wall":
            layout = generate_layout(LayoutParams(seed=seed))
            truth = single_wall_scene(layout, yaw=20.0, image_id=f"single-wall-{seed}")
        else:
            layout_a = generate_layout(LayoutParams(seed=seed))
            layout_b = generate_layout(LayoutParams(seed=seed + 1))
            truth = corner_scene(
                layout_a, layout_b, 25.0, -25.0, image_id=f"corner-{seed}"
            )
    detections = degrade(truth, params)
    doc, truth_doc = emit_annotations(detections, truth)
    try:
        args.out.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="utf-8")
        if args.truth is not None:
            args.truth.write_text(
                json.dumps(truth_doc, sort_keys=True, indent=1) + "\n", encoding="utf-8"
            )
    except OSError as exc:
        raise OutputError(f"cannot write synthetic scene: {exc}") from exc
    print(f"{args.out}: {len(detections)} elements ({args.scene})")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except AnalysisError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
