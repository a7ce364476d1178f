"""End-to-end object-removal pipeline over on-disk inputs.

Stage order: validate, dilate, merge_positive, flow_complete, collect,
reference, complete_frames, overlay_positive, write. The run report
(``report.txt``) holds only deterministic content with stable key
names; wall-clock timings and the measured memory high-water mark go
to ``timings.txt`` so reports stay byte-identical across reruns.
"""

from __future__ import annotations

import logging
import re
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io as media_io
from .fallback import assemble_completion_input, complete_frame
from .flow_complete import CompletedFlows, complete_sequence_flows
from .occlusion import merge_masks, overlay_positive
from .propagation import (
    DEFAULT_VERIFY_THRESHOLD,
    collect_bidirectional_with_provenance,
    write_provenance,
)
from .reference import (
    FallbackFillReferenceProvider,
    FileReferenceProvider,
    RoundRecord,
    multi_key_loop,
)
from .types import Image, Mask, PropagationState, Sequence, validate_sequence

logger = logging.getLogger("flowfill.pipeline")

STAGES = (
    "validate",
    "dilate",
    "merge_positive",
    "flow_complete",
    "collect",
    "reference",
    "complete_frames",
    "overlay_positive",
    "write",
)

FRAME_RE = re.compile(r"^(\d{5})\.(png|jpg|jpeg|bmp|tif|tiff)$")


class PipelineError(RuntimeError):
    """The pipeline cannot run with the given inputs or budget."""


@dataclass
class PipelineOptions:
    frames_dir: Path
    masks_dir: Path
    flows_dir: Path
    out_dir: Path
    dilate_radius: int = 0
    verify_threshold: float = DEFAULT_VERIFY_THRESHOLD
    max_key_rounds: int = 3
    reference_mode: str = "file"  # file | fallback
    reference_dir: Path | None = None
    positive_masks: bool = False
    threads: int = 1
    memory_budget_mb: int = 4096
    figures: bool = True
    provenance: bool = False

    def __post_init__(self) -> None:
        self.frames_dir = Path(self.frames_dir)
        self.masks_dir = Path(self.masks_dir)
        self.flows_dir = Path(self.flows_dir)
        self.out_dir = Path(self.out_dir)
        if self.reference_dir is not None:
            self.reference_dir = Path(self.reference_dir)
        if self.reference_mode not in ("file", "fallback"):
            raise PipelineError(
                f"reference_mode must be 'file' or 'fallback', got {self.reference_mode!r}"
            )
        if self.threads < 1:
            raise PipelineError("threads must be at least 1")


@dataclass
class RunReport:
    """Deterministic summary of one pipeline run."""

    frames: int
    height: int
    width: int
    options: PipelineOptions
    key_rounds: list[RoundRecord] = field(default_factory=list)
    filled: list[int] = field(default_factory=list)
    invalid: list[int] = field(default_factory=list)
    residual_collect: list[int] = field(default_factory=list)
    residual_final: list[int] = field(default_factory=list)
    full_frame_flow_fallbacks: list[str] = field(default_factory=list)
    full_frame_fill_fallbacks: list[int] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)
    peak_rss_mb: float = 0.0

    def lines(self) -> list[str]:
        opt = self.options
        out = [
            "schema = flowfill-report-v1",
            f"frames = {self.frames}",
            f"height = {self.height}",
            f"width = {self.width}",
            "stage_order = " + ",".join(STAGES),
            f"dilate_radius = {opt.dilate_radius}",
            f"verify_threshold = {_fmt(opt.verify_threshold)}",
            f"max_key_rounds = {opt.max_key_rounds}",
            f"reference_mode = {opt.reference_mode}",
            f"positive_masks = {'on' if opt.positive_masks else 'off'}",
            f"key_rounds = {len(self.key_rounds)}",
        ]
        for n, rec in enumerate(self.key_rounds):
            out.append(f"key_frame_{n} = {rec.key_frame}")
            out.append(f"reference_pixels_{n} = {rec.reference_pixels}")
            out.append(f"round_residual_{n} = {rec.residual_after}")
            if rec.aborted:
                out.append(f"round_aborted_{n} = {rec.reason}")
        out.append(
            "full_frame_flow_fallbacks = "
            + (",".join(self.full_frame_flow_fallbacks) or "none")
        )
        out.append(
            "full_frame_fill_fallbacks = "
            + (",".join(str(i) for i in self.full_frame_fill_fallbacks) or "none")
        )
        for i in range(self.frames):
            out.append(f"frame_{i:05d}_filled = {self.filled[i]}")
            out.append(f"frame_{i:05d}_invalid = {self.invalid[i]}")
            out.append(f"frame_{i:05d}_residual_collect = {self.residual_collect[i]}")
            out.append(f"frame_{i:05d}_residual_final = {self.residual_final[i]}")
        out.append(f"total_filled = {sum(self.filled)}")
        out.append(f"total_invalid = {sum(self.invalid)}")
        out.append(f"total_residual_final = {sum(self.residual_final)}")
        return out


def _fmt(x: float) -> str:
    return f"{x:g}"


def _indexed_files(directory: Path, what: str) -> list[Path]:
    if not directory.is_dir():
        raise PipelineError(f"{what} directory not found: {directory}")
    found: dict[int, Path] = {}
    for p in sorted(directory.iterdir()):
        m = FRAME_RE.match(p.name)
        if m:
            found[int(m.group(1))] = p
    if not found:
        raise PipelineError(f"no {what} files matching %05d.<ext> in {directory}")
    count = max(found) + 1
    missing = [i for i in range(count) if i not in found]
    if missing:
        raise PipelineError(
            f"{what} index gap: missing {directory / ('%05d.*' % missing[0])}"
        )
    return [found[i] for i in range(count)]


def load_sequence(opts: PipelineOptions) -> Sequence:
    """Assemble a sequence from the frame/mask/flow directories; every
    error names the offending file."""
    frame_paths = _indexed_files(opts.frames_dir, "frame")
    frames = [media_io.read_frame(p) for p in frame_paths]
    length = len(frames)

    masks = []
    for i in range(length):
        path = opts.masks_dir / frame_paths[i].name
        if not path.is_file():
            candidates = list(opts.masks_dir.glob("%05d.*" % i))
            if not candidates:
                raise PipelineError(f"mask file missing: {path}")
            path = candidates[0]
        masks.append(media_io.read_mask(path))

    fwd, bwd = [], []
    for i in range(length - 1):
        for name, dest in (("fwd_%05d.flo" % i, fwd), ("bwd_%05d.flo" % i, bwd)):
            path = opts.flows_dir / name
            if not path.is_file():
                raise PipelineError(f"flow file missing: {path}")
            dest.append(media_io.read_flow(path))

    positive = None
    if opts.positive_masks:
        positive = []
        for i in range(length):
            path = opts.masks_dir / ("%05d_pos.png" % i)
            if path.is_file():
                positive.append(media_io.read_mask(path))
            else:
                positive.append(
                    Mask(np.zeros((frames[0].height, frames[0].width), dtype=np.uint8))
                )
    return Sequence(
        frames=tuple(frames),
        masks=tuple(masks),
        fwd_flows=tuple(fwd),
        bwd_flows=tuple(bwd),
        positive_masks=tuple(positive) if positive is not None else None,
    )


def estimate_memory_mb(height: int, width: int, length: int) -> float:
    """Rough peak working-set model: input + output frames (float32 RGB),
    raw + completed adjacent flows, masks, and a 50% allowance for
    transient buffers."""
    px = height * width
    frames = length * px * 3 * 4 * 2
    flows = max(length - 1, 0) * px * 2 * 4 * 2 * 2
    masks = length * px * 4
    return (frames + flows + masks) * 1.5 / 1e6


def _peak_rss_mb() -> float:
    try:
        import resource

        return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024.0
    except Exception:  # pragma: no cover - platform dependent
        return 0.0


def run_pipeline(opts: PipelineOptions) -> RunReport:
    timings: dict[str, float] = {}

    def timed(stage: str):
        class _T:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                timings[stage] = timings.get(stage, 0.0) + time.perf_counter() - self.t0

        return _T()

    with timed("validate"):
        seq = load_sequence(opts)
        validate_sequence(seq)
        budget = estimate_memory_mb(seq.height, seq.width, seq.length)
        if budget > opts.memory_budget_mb:
            raise PipelineError(
                f"estimated working set {budget:.0f} MB exceeds the "
                f"{opts.memory_budget_mb} MB budget"
            )
    logger.info(
        "loaded %d frames at %dx%d (est. %.0f MB of %d MB budget)",
        seq.length,
        seq.width,
        seq.height,
        budget,
        opts.memory_budget_mb,
    )

    report = RunReport(
        frames=seq.length, height=seq.height, width=seq.width, options=opts
    )

    with timed("dilate"):
        work_masks = tuple(
            media_io.dilate_mask(m, opts.dilate_radius) for m in seq.masks
        )

    with timed("merge_positive"):
        if opts.positive_masks and seq.positive_masks is not None:
            work_masks = tuple(
                merge_masks(neg, pos)
                for neg, pos in zip(work_masks, seq.positive_masks)
            )

    work_seq = Sequence(
        frames=seq.frames,
        masks=work_masks,
        fwd_flows=seq.fwd_flows,
        bwd_flows=seq.bwd_flows,
        positive_masks=seq.positive_masks,
    )

    with timed("flow_complete"):
        for i, m in enumerate(work_masks):
            if int(m.data.sum()) == m.height * m.width:
                report.full_frame_flow_fallbacks.append(str(i))
        flows = complete_sequence_flows(work_seq, threads=opts.threads)

    with timed("collect"):
        state, provenance = collect_bidirectional_with_provenance(
            work_seq,
            flows,
            threshold=opts.verify_threshold,
            threads=opts.threads,
            record_provenance=opts.provenance,
        )
    report.filled = [
        int(work_masks[i].count() - state.masks[i].count() - state.invalid[i].count())
        for i in range(seq.length)
    ]
    report.invalid = [m.count() for m in state.invalid]
    report.residual_collect = [m.count() for m in state.masks]
    logger.info(
        "collection filled %d px (%d unreliable, %d residual)",
        sum(report.filled),
        sum(report.invalid),
        sum(report.residual_collect),
    )

    with timed("reference"):
        if opts.reference_mode == "file":
            ref_dir = opts.reference_dir or (opts.out_dir / "references")
            provider = FileReferenceProvider(ref_dir)
        else:
            provider = FallbackFillReferenceProvider()
        state, rounds = multi_key_loop(
            state, flows, provider, max_rounds=opts.max_key_rounds
        )
        report.key_rounds = rounds
    for rec in rounds:
        if rec.aborted:
            logger.warning(
                "reference round for key frame %d aborted: %s",
                rec.key_frame,
                rec.reason,
            )

    with timed("complete_frames"):
        outputs: list[Image] = []
        report.full_frame_fill_fallbacks = [
            i
            for i in range(seq.length)
            if int(np.maximum(state.masks[i].data, state.invalid[i].data).sum())
            == seq.height * seq.width
        ]

        def finish(i: int) -> Image:
            img, hole = assemble_completion_input(
                state.images[i], state.masks[i], state.invalid[i]
            )
            return complete_frame(img, hole)

        if opts.threads > 1 and seq.length > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=opts.threads) as pool:
                outputs = list(pool.map(finish, range(seq.length)))
        else:
            outputs = [finish(i) for i in range(seq.length)]
    report.residual_final = [m.count() for m in state.masks]

    with timed("overlay_positive"):
        if opts.positive_masks and seq.positive_masks is not None:
            outputs = [
                overlay_positive(out, orig, pos)
                for out, orig, pos in zip(outputs, seq.frames, seq.positive_masks)
            ]

    with timed("write"):
        frames_out = opts.out_dir / "frames"
        frames_out.mkdir(parents=True, exist_ok=True)
        for i, img in enumerate(outputs):
            media_io.write_frame(img, frames_out / ("%05d.png" % i))
        if opts.provenance:
            write_provenance(provenance, opts.out_dir / "provenance.tsv")

    report.timings = timings
    report.peak_rss_mb = _peak_rss_mb()
    write_report(report, opts.out_dir)
    if opts.figures:
        from . import plotting

        plotting.render_fill_report(report, opts.out_dir / "report_fill_counts.png")
    logger.info("pipeline done: %d frames written to %s", seq.length, frames_out)
    return report


def write_report(report: RunReport, out_dir: Path) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.txt").write_text(
        "\n".join(report.lines()) + "\n", encoding="utf-8"
    )
    timing_lines = [
        f"stage_{stage}_s = {report.timings.get(stage, 0.0):.3f}" for stage in STAGES
    ]
    timing_lines.append(f"peak_rss_mb = {report.peak_rss_mb:.1f}")
    (out_dir / "timings.txt").write_text("\n".join(timing_lines) + "\n", encoding="utf-8")
