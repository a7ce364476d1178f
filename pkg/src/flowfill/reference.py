"""Key-frame reference handling.

After internal collection some holes may have no usable source inside
the clip. A single key frame is chosen by how strongly its residual
hole overlaps, through the chained maps, with the residual holes of
every other frame; an externally supplied (or locally synthesized)
reference image fills that frame, and its pixels are then distributed
to all other frames through the same chained-flow pulls. When one key
frame cannot reach every hole, the select/ingest/propagate round is
repeated with further key frames.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io as media_io
from .fallback import complete_frame
from .flow_complete import CompletedFlows
from .types import Image, Mask, PropagationState, ValidationError
from .warp import sample_points

logger = logging.getLogger("flowfill.reference")


class ReferenceProviderError(RuntimeError):
    """A reference image could not be produced for the requested frame."""


def _hole_points(mask: Mask) -> tuple[np.ndarray, np.ndarray]:
    ys, xs = np.nonzero(mask.data != 0)
    return xs.astype(np.float64), ys.astype(np.float64)


def _chain_points(
    flows: CompletedFlows,
    start: int,
    stop: int,
    px: np.ndarray,
    py: np.ndarray,
    visit=None,
) -> tuple[np.ndarray, np.ndarray]:
    """Chain hole-point positions from frame ``start`` toward ``stop``.

    Returns the accumulated displacement and the per-point validity after
    the full chain. ``visit(frame, acc, alive)`` is called after each hop.
    """
    n = px.size
    acc = np.zeros((n, 2), dtype=np.float64)
    alive = np.ones(n, dtype=bool)
    direction = 1 if stop > start else -1
    j = start
    while j != stop:
        j2 = j + direction
        adjacent = flows.fwd[j] if direction > 0 else flows.bwd[j2]
        idx = np.nonzero(alive)[0]
        if idx.size == 0:
            break
        hop, ok = sample_points(
            adjacent.data,
            px[idx] + acc[idx, 0],
            py[idx] + acc[idx, 1],
            usable=adjacent.valid,
        )
        acc[idx] += hop
        alive[idx] &= ok
        j = j2
        if visit is not None:
            visit(j, acc, alive)
    return acc, alive


def connection_count(
    state: PropagationState, flows: CompletedFlows, frame: int
) -> float:
    """How much of every frame's residual hole aligns with this frame's.

    Sums, over all frames j and this frame's residual hole pixels, the
    bilinearly warped residual mask of j at the chained position (the
    self term contributes this frame's own hole area exactly; invalid
    or out-of-bounds samples contribute zero).
    """
    px, py = _hole_points(state.masks[frame])
    if px.size == 0:
        return 0.0
    total = float(px.size)  # j == frame: identity chain over own hole

    def make_visitor(acc_total: list[float]):
        def visit(j: int, acc: np.ndarray, alive: np.ndarray) -> None:
            idx = np.nonzero(alive)[0]
            if idx.size == 0:
                return
            vals, ok = sample_points(
                state.masks[j].data.astype(np.float64),
                px[idx] + acc[idx, 0],
                py[idx] + acc[idx, 1],
            )
            acc_total[0] += float(vals[ok].sum())

        return visit

    box = [0.0]
    visitor = make_visitor(box)
    if frame + 1 < state.length:
        _chain_points(flows, frame, state.length - 1, px, py, visit=visitor)
    if frame - 1 >= 0:
        _chain_points(flows, frame, 0, px, py, visit=visitor)
    return total + box[0]


def select_key_frame(
    state: PropagationState, flows: CompletedFlows
) -> int | None:
    """Pick the frame with the highest connection count.

    Ties break to the lowest index; returns None when no frame has a
    residual hole (no key frame needed).
    """
    counts = np.zeros(state.length, dtype=np.float64)
    any_hole = False
    for i in range(state.length):
        if state.masks[i].count() == 0:
            continue
        any_hole = True
        counts[i] = connection_count(state, flows, i)
    if not any_hole:
        return None
    return int(np.argmax(counts))


def ingest_reference(
    state: PropagationState, key: int, reference: Image
) -> tuple[PropagationState, Mask]:
    """Composite a reference image into the key frame's residual hole.

    Known pixels keep their values bit-exactly; the returned mask
    records which pixels are now reference-sourced. The key frame's
    residual mask becomes empty.
    """
    if (reference.height, reference.width) != (
        state.images[key].height,
        state.images[key].width,
    ):
        raise ValidationError(
            f"resolution mismatch: reference {(reference.height, reference.width)}"
        )
    hole = state.masks[key].data != 0
    img = np.array(state.images[key].data, copy=True)
    img[hole] = reference.data[hole]
    images = list(state.images)
    masks = list(state.masks)
    images[key] = Image(img)
    masks[key] = Mask(np.zeros(hole.shape, dtype=np.uint8))
    new_state = PropagationState(
        images=tuple(images), masks=tuple(masks), invalid=state.invalid
    )
    return new_state, Mask(hole.astype(np.uint8))


def propagate_reference(
    state: PropagationState, flows: CompletedFlows, key: int
) -> tuple[tuple[Image, ...], tuple[Mask, ...]]:
    """Pull the key frame's content into every other frame's residual hole.

    Each hole pixel chains to its position in the key frame and samples
    the updated key image once; pixels whose chain breaks or whose
    sample touches the key frame's unreliable region stay missing.
    """
    key_img = state.images[key].data
    key_usable = state.invalid[key].data == 0
    images = list(state.images)
    masks = list(state.masks)
    for i in range(state.length):
        if i == key or state.masks[i].count() == 0:
            continue
        px, py = _hole_points(state.masks[i])
        acc, alive = _chain_points(flows, i, key, px, py)
        vals, ok = sample_points(
            key_img, px + acc[:, 0], py + acc[:, 1], usable=key_usable
        )
        pulled = alive & ok
        img = np.array(state.images[i].data, copy=True)
        ys = py.astype(np.intp)
        xs = px.astype(np.intp)
        img[ys[pulled], xs[pulled]] = vals[pulled].astype(img.dtype)
        remaining = np.zeros(img.shape[:2], dtype=np.uint8)
        remaining[ys[~pulled], xs[~pulled]] = 1
        images[i] = Image(img)
        masks[i] = Mask(remaining)
    return tuple(images), tuple(masks)


@dataclass(frozen=True)
class RoundRecord:
    """One select/ingest/propagate round of the multi-key loop."""

    key_frame: int
    reference_pixels: int
    residual_after: int
    aborted: bool = False
    reason: str = ""


class FileReferenceProvider:
    """Reads reference images named by key-frame index from a directory."""

    def __init__(self, directory: str | Path, pattern: str = "%05d.png"):
        self.directory = Path(directory)
        self.pattern = pattern

    def __call__(self, state: PropagationState, key: int) -> Image:
        path = self.directory / (self.pattern % key)
        if not path.is_file():
            raise ReferenceProviderError(f"reference image not found: {path}")
        return media_io.read_frame(path)


class FallbackFillReferenceProvider:
    """Synthesizes a reference by classically completing the key frame,
    so the pipeline can run end to end with no external generator."""

    def __call__(self, state: PropagationState, key: int) -> Image:
        hole = np.maximum(state.masks[key].data, state.invalid[key].data)
        return complete_frame(state.images[key], Mask(hole))


def multi_key_loop(
    state: PropagationState,
    flows: CompletedFlows,
    reference_provider,
    max_rounds: int = 3,
) -> tuple[PropagationState, list[RoundRecord]]:
    """Repeat key-frame selection, reference ingestion, and propagation
    until no residual holes remain or the round budget is exhausted.

    A provider failure aborts the loop and returns the current state;
    the recorded rounds tell the operator which key frame was requested.
    """
    if max_rounds < 1:
        raise ValueError("max_rounds must be at least 1")
    rounds: list[RoundRecord] = []
    for _ in range(max_rounds):
        key = select_key_frame(state, flows)
        if key is None:
            break
        try:
            reference = reference_provider(state, key)
        except ReferenceProviderError as exc:
            logger.warning("reference round aborted: %s", exc)
            rounds.append(
                RoundRecord(
                    key_frame=key,
                    reference_pixels=0,
                    residual_after=state.residual_total(),
                    aborted=True,
                    reason=str(exc),
                )
            )
            break
        state, ref_mask = ingest_reference(state, key, reference)
        images, masks = propagate_reference(state, flows, key)
        state = PropagationState(images=images, masks=masks, invalid=state.invalid)
        rounds.append(
            RoundRecord(
                key_frame=key,
                reference_pixels=ref_mask.count(),
                residual_after=state.residual_total(),
            )
        )
        if state.residual_total() == 0:
            break
    return state, rounds
