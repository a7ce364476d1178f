"""Propagation-strategy benchmark on synthetic scenes.

Runs each scene through the internal-propagation strategies (none,
recurrent buffer warping, one-shot pulling), optionally followed by the
matching reference-propagation strategy, finishes frames classically,
and scores the results against the occluder-free ground truth. Emits a
tab-separated table plus rendered figures.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import config as cfg
from .fallback import assemble_completion_input, complete_frame
from .flow_complete import complete_sequence_flows
from .metrics import psnr, ssim
from .propagation import collect_bidirectional
from .reference import FallbackFillReferenceProvider, ingest_reference, multi_key_loop
from .synthbench import (
    GeneratedScene,
    SceneSpec,
    generate_scene,
    load_scene_spec,
    recurrent_reference_propagation,
    recurrent_warp_baseline,
)
from .types import Image, Mask, PropagationState, Sequence

logger = logging.getLogger("flowfill.bench")

# (internal, reference) rows, in table order
STRATEGIES = (
    ("none", "none"),
    ("rec", "none"),
    ("one", "none"),
    ("rec", "rec"),
    ("one", "one"),
)


@dataclass(frozen=True)
class BenchRow:
    scene: str
    internal: str
    reference: str
    psnr_db: float
    ssim: float
    hole_psnr_db: float
    residual_px: int

    def tsv(self) -> str:
        return (
            f"{self.scene}\t{self.internal}\t{self.reference}\t"
            f"{self.psnr_db:.4f}\t{self.ssim:.6f}\t{self.hole_psnr_db:.4f}\t"
            f"{self.residual_px}"
        )


@dataclass(frozen=True)
class BenchSuite:
    scenes: tuple[tuple[str, SceneSpec], ...]
    strategies: tuple[tuple[str, str], ...] = STRATEGIES


SUITE_KEYS = {"scene", "strategies"}


def load_suite(path: str | Path) -> BenchSuite:
    path = Path(path)
    values = cfg.parse_kv_file(path)
    cfg.check_known_keys(values, SUITE_KEYS, str(path))
    scene_paths = cfg.get_list(values, "scene")
    if not scene_paths:
        raise cfg.ConfigError(f"{path}: suite lists no scenes")
    scenes = []
    for raw in scene_paths:
        spec_path = (path.parent / raw).resolve() if not Path(raw).is_absolute() else Path(raw)
        scenes.append((Path(raw).stem, load_scene_spec(spec_path)))
    strategies = STRATEGIES
    names = cfg.get_str(values, "strategies", None)
    if names:
        chosen = []
        for token in names.split(","):
            token = token.strip()
            pair = tuple(token.split(":", 1)) if ":" in token else (token, "none")
            if pair not in STRATEGIES:
                raise cfg.ConfigError(f"{path}: unknown strategy {token!r}")
            chosen.append(pair)
        strategies = tuple(chosen)
    return BenchSuite(scenes=tuple(scenes), strategies=strategies)


def _finish_frames(state: PropagationState) -> list[Image]:
    out = []
    for i in range(state.length):
        img, hole = assemble_completion_input(
            state.images[i], state.masks[i], state.invalid[i]
        )
        out.append(complete_frame(img, hole))
    return out


def run_strategy(
    scene: GeneratedScene,
    internal: str,
    reference: str,
    verify_threshold: float = 1.0,
) -> BenchRow:
    """Run one (internal, reference) strategy pair over a scene and
    score the finished frames against the ground-truth background."""
    seq = scene.sequence
    flows = complete_sequence_flows(seq)

    if internal == "one":
        state = collect_bidirectional(seq, flows, threshold=verify_threshold)
    elif internal == "rec":
        state = recurrent_warp_baseline(seq, flows, threshold=verify_threshold)
    elif internal == "none":
        state = PropagationState(
            images=seq.frames,
            masks=seq.masks,
            invalid=tuple(
                Mask(np.zeros((seq.height, seq.width), dtype=np.uint8))
                for _ in range(seq.length)
            ),
        )
    else:
        raise ValueError(f"unknown internal strategy {internal!r}")

    if reference == "one":
        provider = FallbackFillReferenceProvider()
        state, _ = multi_key_loop(state, flows, provider)
    elif reference == "rec":
        provider = FallbackFillReferenceProvider()
        if state.masks[0].count() > 0:
            state, _ = _ingest_first_frame(state, provider)
        images, masks = recurrent_reference_propagation(state, flows, key=0)
        state = PropagationState(images=images, masks=masks, invalid=state.invalid)
    elif reference != "none":
        raise ValueError(f"unknown reference strategy {reference!r}")

    residual = state.residual_total()
    outputs = _finish_frames(state)

    holes = [m.data != 0 for m in seq.masks]
    psnrs = [psnr(out, gt) for out, gt in zip(outputs, scene.gt_frames)]
    ssims = [ssim(out, gt) for out, gt in zip(outputs, scene.gt_frames)]
    se = 0.0
    n = 0
    for out, gt, hole in zip(outputs, scene.gt_frames, holes):
        if hole.any():
            diff = out.data.astype(np.float64)[hole] - gt.data.astype(np.float64)[hole]
            se += float((diff**2).sum())
            n += diff.size
    hole_mse = se / n if n else 0.0
    hole_psnr = 99.0 if hole_mse == 0.0 else min(10.0 * np.log10(1.0 / hole_mse), 99.0)

    return BenchRow(
        scene="",
        internal=internal,
        reference=reference,
        psnr_db=float(np.mean(psnrs)),
        ssim=float(np.mean(ssims)),
        hole_psnr_db=float(hole_psnr),
        residual_px=residual,
    )


def _ingest_first_frame(state: PropagationState, provider):
    ref = provider(state, 0)
    return ingest_reference(state, 0, ref)


def run_benchmark(suite: BenchSuite, out_dir: str | Path, figures: bool = True) -> list[BenchRow]:
    """Run every (scene, strategy) cell and write the results table and
    figures under ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows: list[BenchRow] = []
    for name, spec in suite.scenes:
        scene = generate_scene(spec)
        for internal, reference in suite.strategies:
            row = replace(run_strategy(scene, internal, reference), scene=name)
            logger.info(
                "%s int=%s ref=%s: %.2f dB (hole %.2f dB), ssim %.4f",
                name,
                internal,
                reference,
                row.psnr_db,
                row.hole_psnr_db,
                row.ssim,
            )
            rows.append(row)
    write_table(rows, out_dir / "bench_results.tsv")
    if figures:
        from . import plotting

        plotting.render_bench(rows, out_dir)
    return rows


def write_table(rows: list[BenchRow], path: str | Path) -> None:
    header = "scene\tinternal\treference\tpsnr_db\tssim\thole_psnr_db\tresidual_px"
    body = "\n".join(row.tsv() for row in rows)
    Path(path).write_text(header + "\n" + body + "\n", encoding="utf-8")
