"""Command-line interface.

Subcommands:
  inpaint    remove masked content from a frame/mask/flow directory set
  synth      render a synthetic scene into pipeline input fixtures
  bench      run the propagation-strategy benchmark suite
  flowcheck  compare chained correspondence maps against the per-pixel tracer

Thread count resolution: 1, then the config file's ``threads`` key,
then the FLOWFILL_THREADS environment variable, then ``--threads``.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import config as cfg
from .bench import load_suite, run_benchmark
from .pipeline import PipelineOptions, run_pipeline
from .synthbench import (
    chain_trace_agreement,
    generate_scene,
    load_scene_spec,
    random_smooth_flow,
    write_scene,
)

THREADS_ENV = "FLOWFILL_THREADS"

INPAINT_KEYS = {
    "dilate_radius",
    "verify_threshold",
    "max_key_rounds",
    "reference_mode",
    "reference_dir",
    "positive_masks",
    "threads",
    "memory_budget_mb",
}


def _resolve_threads(file_values: dict, flag_value: int | None) -> int:
    threads = cfg.get_int(file_values, "threads", 1)
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            threads = int(env)
        except ValueError:
            raise cfg.ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}")
    if flag_value is not None:
        threads = flag_value
    return threads


def _cmd_inpaint(args) -> int:
    values: dict = {}
    if args.config:
        values = cfg.parse_kv_file(args.config)
        cfg.check_known_keys(values, INPAINT_KEYS, str(args.config))

    def pick(flag, key, getter, default):
        return flag if flag is not None else getter(values, key, default)

    opts = PipelineOptions(
        frames_dir=args.frames,
        masks_dir=args.masks,
        flows_dir=args.flows,
        out_dir=args.out,
        dilate_radius=pick(args.dilate_radius, "dilate_radius", cfg.get_int, 0),
        verify_threshold=pick(
            args.verify_threshold, "verify_threshold", cfg.get_float, 1.0
        ),
        max_key_rounds=pick(args.max_key_rounds, "max_key_rounds", cfg.get_int, 3),
        reference_mode=pick(args.reference_mode, "reference_mode", cfg.get_str, "file"),
        reference_dir=args.reference_dir or cfg.get_str(values, "reference_dir", None),
        positive_masks=(
            True
            if args.positive_masks
            else cfg.get_bool(values, "positive_masks", False)
        ),
        threads=_resolve_threads(values, args.threads),
        memory_budget_mb=pick(
            args.memory_budget_mb, "memory_budget_mb", cfg.get_int, 4096
        ),
        figures=not args.no_figures,
        provenance=args.provenance,
    )
    report = run_pipeline(opts)
    for rec in report.key_rounds:
        print(f"key frame {rec.key_frame}: {rec.reference_pixels} reference px"
              + (f" (aborted: {rec.reason})" if rec.aborted else ""))
    print(
        f"filled {sum(report.filled)} px, {sum(report.invalid)} unreliable, "
        f"{sum(report.residual_final)} residual before per-frame completion"
    )
    print(f"report: {opts.out_dir / 'report.txt'}")
    return 0


def _cmd_synth(args) -> int:
    spec = load_scene_spec(args.spec)
    scene = generate_scene(spec)
    write_scene(scene, args.out, write_gt=not args.no_gt)
    print(
        f"wrote {spec.length} frames at {spec.width}x{spec.height} to {args.out}"
    )
    return 0


def _cmd_bench(args) -> int:
    suite = load_suite(args.suite)
    rows = run_benchmark(suite, args.out, figures=not args.no_figures)
    width = max(len(r.scene) for r in rows)
    print(f"{'scene':<{width}}  int   ref   psnr_db  ssim    hole_psnr")
    for r in rows:
        print(
            f"{r.scene:<{width}}  {r.internal:<4}  {r.reference:<4}  "
            f"{r.psnr_db:7.2f}  {r.ssim:.4f}  {r.hole_psnr_db:7.2f}"
        )
    print(f"table: {Path(args.out) / 'bench_results.tsv'}")
    return 0


def _cmd_flowcheck(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    all_errors = []
    if args.spec:
        scene = generate_scene(load_scene_spec(args.spec))
        fwd, bwd = scene.fwd_flows, scene.bwd_flows
        names = [Path(args.spec).stem]
        pairs = [(0, scene.sequence.length - 1), (scene.sequence.length - 1, 0)]
        cases = [(names[0], fwd, bwd, pairs)]
    else:
        cases = []
        for s in range(args.scenes):
            child = np.random.default_rng(args.seed + s)
            fwd = tuple(
                random_smooth_flow(args.size, args.size, child, amplitude=1.0)
                for _ in range(args.length - 1)
            )
            bwd = tuple(
                random_smooth_flow(args.size, args.size, child, amplitude=1.0)
                for _ in range(args.length - 1)
            )
            cases.append(
                (f"random{s:02d}", fwd, bwd, [(0, args.length - 1), (args.length - 1, 0)])
            )
    for name, fwd, bwd, pairs in cases:
        for i, j in pairs:
            agreement = chain_trace_agreement(fwd, bwd, i, j, tol=args.tol)
            rows.append(
                f"{name}\t{i}\t{j}\t{agreement.pixels}\t{agreement.jointly_valid}\t"
                f"{agreement.within_tol}\t{agreement.fraction_within:.6f}\t"
                f"{agreement.max_error:.3e}"
            )
            all_errors.append(agreement.errors)
            print(
                f"{name} {i}->{j}: {agreement.fraction_within * 100:.2f}% of "
                f"{agreement.jointly_valid} jointly valid px within {args.tol} px "
                f"(max {agreement.max_error:.2e})"
            )
    header = "scene\ttarget\tsource\tpixels\tjointly_valid\twithin_tol\tfraction\tmax_error"
    (out_dir / "flowcheck.tsv").write_text(
        header + "\n" + "\n".join(rows) + "\n", encoding="utf-8"
    )
    if not args.no_figures:
        from . import plotting

        plotting.render_flowcheck(
            np.concatenate(all_errors) if all_errors else np.zeros(0),
            out_dir / "flowcheck_errors.png",
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowfill",
        description="Flow-guided video inpainting and its benchmark harness.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("inpaint", help="remove masked content from a sequence")
    p.add_argument("--frames", required=True, type=Path, help="directory of %%05d frames")
    p.add_argument("--masks", required=True, type=Path, help="directory of %%05d masks")
    p.add_argument(
        "--flows",
        required=True,
        type=Path,
        help="directory of fwd_%%05d.flo / bwd_%%05d.flo adjacent flows",
    )
    p.add_argument("--out", required=True, type=Path, help="output directory")
    p.add_argument("--config", type=Path, help="flat key=value config file")
    p.add_argument("--dilate-radius", type=int, default=None)
    p.add_argument("--verify-threshold", type=float, default=None)
    p.add_argument("--max-key-rounds", type=int, default=None)
    p.add_argument("--reference-mode", choices=("file", "fallback"), default=None)
    p.add_argument("--reference-dir", type=Path, default=None)
    p.add_argument("--positive-masks", action="store_true", default=None,
                   help="merge %%05d_pos masks and restore them on output")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--memory-budget-mb", type=int, default=None)
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--provenance", action="store_true",
                   help="dump per-pixel fill provenance to provenance.tsv")
    p.set_defaults(func=_cmd_inpaint)

    p = sub.add_parser("synth", help="render a synthetic scene to fixtures")
    p.add_argument("--spec", required=True, type=Path, help="scene spec config")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--no-gt", action="store_true", help="skip ground-truth renders")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("bench", help="run the propagation-strategy benchmark")
    p.add_argument("--suite", required=True, type=Path, help="suite config file")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("flowcheck", help="chained maps vs. per-pixel tracer")
    p.add_argument("--spec", type=Path, help="scene spec (default: random scenes)")
    p.add_argument("--scenes", type=int, default=5, help="random scene count")
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--length", type=int, default=12)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=_cmd_flowcheck)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (cfg.ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
