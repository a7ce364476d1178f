"""Flow completion: erase flow vectors inside the hole and infill them.

Hole-region vectors describe the motion of the object being removed,
so they are discarded and each component is harmonically extended from
the surrounding known flow ring. Flow is smooth almost everywhere,
which makes the harmonic extension a faithful, fully deterministic
infill; constant and affine fields are reproduced exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import harmonic
from .types import FlowField, Mask, Sequence, ValidationError


def complete_flow(flow: FlowField, mask: Mask) -> FlowField:
    """Replace flow inside ``mask`` with the harmonic extension of the
    boundary vectors; known vectors pass through bit-exactly.

    A mask covering the whole frame has no boundary to extend from and
    falls back to zero flow inside (the caller surfaces that in its run
    report). The result is valid everywhere.
    """
    if (mask.height, mask.width) != (flow.height, flow.width):
        raise ValidationError(
            f"resolution mismatch: mask {(mask.height, mask.width)} "
            f"vs flow {(flow.height, flow.width)}"
        )
    hole = (mask.data != 0) | (flow.valid == 0)
    if not hole.any():
        return FlowField(flow.data.copy(), None)
    filled = harmonic.fill_multichannel(flow.data, hole, fallback_value=0.0)
    out = np.array(flow.data, dtype=flow.data.dtype, copy=True)
    out[hole] = filled[hole].astype(out.dtype)
    return FlowField(out, None)


@dataclass(frozen=True)
class CompletedFlows:
    """Adjacent-pair flows after hole infill, valid everywhere.

    fwd[i] maps frame i to i+1 and was completed against frame i's
    mask; bwd[i] maps frame i+1 to i, completed against frame i+1's.
    """

    fwd: tuple[FlowField, ...]
    bwd: tuple[FlowField, ...]


def complete_sequence_flows(
    seq: Sequence,
    masks: tuple[Mask, ...] | None = None,
    threads: int = 1,
) -> CompletedFlows:
    """Complete every adjacent-pair flow of a sequence.

    ``masks`` overrides the sequence's own hole masks (the pipeline
    passes the dilated/merged working masks).
    """
    masks = seq.masks if masks is None else masks
    jobs = [(flow, masks[i]) for i, flow in enumerate(seq.fwd_flows)]
    jobs += [(flow, masks[i + 1]) for i, flow in enumerate(seq.bwd_flows)]
    n_fwd = len(seq.fwd_flows)
    if threads > 1 and len(jobs) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            done = list(pool.map(lambda fm: complete_flow(*fm), jobs))
    else:
        done = [complete_flow(flow, mask) for flow, mask in jobs]
    return CompletedFlows(fwd=tuple(done[:n_fwd]), bwd=tuple(done[n_fwd:]))
