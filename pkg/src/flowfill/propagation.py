"""Pixel propagation: chained correspondence maps and bi-directional
one-shot pixel collection with verification.

Instead of warping color buffers frame to frame (which re-samples
already-interpolated colors and blurs detail), adjacent flows are
chained into a direct target-to-source correspondence map and every
hole pixel pulls its color from an original source frame in a single
bilinear sample. Two passes per target frame, one over later sources
and one over earlier ones, each greedily filling from the nearest
frame first; the two candidate colors are then reconciled by an L1
color-agreement test.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .flow_complete import CompletedFlows
from .types import FlowField, Image, Mask, PropagationState, Sequence, ValidationError
from .warp import sample_points

DEFAULT_VERIFY_THRESHOLD = 1.0


@dataclass(frozen=True, eq=False)
class CorrespondenceMap:
    """A direct map from target-frame pixels to source-frame positions.

    ``flow`` holds, per target pixel p, the displacement to its
    corresponding position in the source frame; chained steps keep the
    payload in float64 to avoid drift over long chains.
    """

    target: int
    source: int
    flow: FlowField

    def __post_init__(self) -> None:
        if self.target == self.source:
            if np.any(self.flow.data != 0.0):
                raise ValidationError("self-correspondence must be the zero map")
        if self.target < 0 or self.source < 0:
            raise ValidationError("frame indices must be non-negative")


def identity_map(frame: int, height: int, width: int) -> CorrespondenceMap:
    """The chain base: a target maps to itself with zero displacement."""
    zero = np.zeros((height, width, 2), dtype=np.float64)
    return CorrespondenceMap(target=frame, source=frame, flow=FlowField(zero, None))


def chain_step(
    acc: CorrespondenceMap, adjacent: FlowField, new_source: int
) -> CorrespondenceMap:
    """Extend a correspondence map by one adjacent hop.

    ``adjacent`` must map the current source frame onto ``new_source``
    (the next frame outward from the target on the same side). The new
    map samples the adjacent flow at each pixel's current chained
    position and accumulates it; pixels whose chained position cannot
    sample the adjacent flow become permanently invalid.
    """
    if abs(new_source - acc.source) != 1:
        raise ValidationError(
            f"chain must advance one frame: {acc.source} -> {new_source}"
        )
    if acc.source != acc.target and (new_source - acc.source) * (
        acc.source - acc.target
    ) < 0:
        raise ValidationError("chain must keep moving away from the target frame")
    h, w = acc.flow.height, acc.flow.width
    if (adjacent.height, adjacent.width) != (h, w):
        raise ValidationError(
            f"resolution mismatch: adjacent flow {(adjacent.height, adjacent.width)} "
            f"vs map {(h, w)}"
        )
    ys, xs = np.mgrid[0:h, 0:w]
    px = xs.ravel() + acc.flow.data[:, :, 0].ravel()
    py = ys.ravel() + acc.flow.data[:, :, 1].ravel()
    hop, ok = sample_points(adjacent.data, px, py, usable=adjacent.valid)
    data = acc.flow.data.astype(np.float64) + hop.reshape(h, w, 2)
    valid = (acc.flow.valid.ravel() != 0) & ok
    data[~valid.reshape(h, w)] = 0.0
    return CorrespondenceMap(
        target=acc.target,
        source=new_source,
        flow=FlowField(data, valid.reshape(h, w).astype(np.uint8)),
    )


def verify_pair(
    forward: np.ndarray | None,
    backward: np.ndarray | None,
    threshold: float = DEFAULT_VERIFY_THRESHOLD,
) -> tuple[np.ndarray | None, int]:
    """Reconcile the two directional candidate colors for one pixel.

    Both present: if the L1 distance over the three [0, 1] channels is
    within the threshold the candidates agree and their average is
    used; otherwise the pixel is unreliable (returns absent with the
    indicator raised). A single candidate is accepted as-is; with no
    candidate the pixel simply stays missing.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    if forward is not None and backward is not None:
        f = np.asarray(forward, dtype=np.float64)
        b = np.asarray(backward, dtype=np.float64)
        if float(np.abs(f - b).sum()) > threshold:
            return None, 1
        return (f + b) / 2.0, 0
    if forward is not None:
        return np.asarray(forward, dtype=np.float64), 0
    if backward is not None:
        return np.asarray(backward, dtype=np.float64), 0
    return None, 0


@dataclass
class PassResult:
    """Per-hole-pixel outcome of one directional pass."""

    has: np.ndarray  # (N,) bool: candidate found
    color: np.ndarray  # (N, 3) float64
    source: np.ndarray  # (N,) int: source frame index, -1 if none
    pos: np.ndarray  # (N, 2) float64: sampled (x, y) in the source frame


@dataclass
class FrameProvenance:
    """Where each filled pixel of one target frame came from."""

    frame: int
    ys: np.ndarray
    xs: np.ndarray
    direction: np.ndarray  # 'f' or 'b' per record
    source: np.ndarray
    src_x: np.ndarray
    src_y: np.ndarray

    def rows(self):
        for i in range(len(self.ys)):
            yield (
                self.frame,
                int(self.ys[i]),
                int(self.xs[i]),
                str(self.direction[i]),
                int(self.source[i]),
                float(self.src_x[i]),
                float(self.src_y[i]),
            )


def _directional_pass(
    seq: Sequence,
    flows: CompletedFlows,
    target: int,
    hole_xs: np.ndarray,
    hole_ys: np.ndarray,
    direction: int,
) -> PassResult:
    """Chase hole pixels outward from the target in one direction,
    pulling each color from the first source frame whose chained sample
    lands in bounds on fully known pixels."""
    n = hole_xs.size
    length = seq.length
    acc = np.zeros((n, 2), dtype=np.float64)
    alive = np.ones(n, dtype=bool)
    has = np.zeros(n, dtype=bool)
    color = np.zeros((n, 3), dtype=np.float64)
    source = np.full(n, -1, dtype=np.int64)
    pos = np.zeros((n, 2), dtype=np.float64)
    px = hole_xs.astype(np.float64)
    py = hole_ys.astype(np.float64)

    j = target
    while True:
        j2 = j + direction
        if j2 < 0 or j2 >= length:
            break
        pending = alive & ~has
        idx = np.nonzero(pending)[0]
        if idx.size == 0:
            break
        adjacent = flows.fwd[j] if direction > 0 else flows.bwd[j2]
        hop, ok = sample_points(
            adjacent.data,
            px[idx] + acc[idx, 0],
            py[idx] + acc[idx, 1],
            usable=adjacent.valid,
        )
        acc[idx] += hop
        alive[idx] &= ok

        live = idx[alive[idx]]
        if live.size:
            sx = px[live] + acc[live, 0]
            sy = py[live] + acc[live, 1]
            vals, pullable = sample_points(
                seq.frames[j2].data, sx, sy, usable=seq.masks[j2].data == 0
            )
            got = live[pullable]
            if got.size:
                color[got] = vals[pullable]
                source[got] = j2
                pos[got, 0] = sx[pullable]
                pos[got, 1] = sy[pullable]
                has[got] = True
        j = j2
    return PassResult(has=has, color=color, source=source, pos=pos)


def collect_frame(
    seq: Sequence,
    flows: CompletedFlows,
    target: int,
    threshold: float = DEFAULT_VERIFY_THRESHOLD,
    record_provenance: bool = False,
) -> tuple[Image, Mask, Mask, FrameProvenance | None]:
    """Run both passes for one target frame and reconcile the candidates.

    Returns (updated image, remaining-hole mask, unreliable mask,
    provenance or None). Every filled color is a single bilinear sample
    of an original source frame; agreeing candidates are averaged.
    """
    hole = seq.masks[target].data != 0
    img = np.array(seq.frames[target].data, copy=True)
    if not hole.any():
        empty = Mask(np.zeros(hole.shape, dtype=np.uint8))
        prov = _empty_provenance(target) if record_provenance else None
        return Image(img), empty, empty, prov

    ys, xs = np.nonzero(hole)
    fwd = _directional_pass(seq, flows, target, xs, ys, +1)
    bwd = _directional_pass(seq, flows, target, xs, ys, -1)

    both = fwd.has & bwd.has
    l1 = np.abs(fwd.color - bwd.color).sum(axis=1)
    agree = both & (l1 <= threshold)
    conflict = both & (l1 > threshold)
    only_f = fwd.has & ~bwd.has
    only_b = bwd.has & ~fwd.has

    resolved = agree | only_f | only_b
    out = np.zeros((xs.size, 3), dtype=np.float64)
    out[agree] = (fwd.color[agree] + bwd.color[agree]) / 2.0
    out[only_f] = fwd.color[only_f]
    out[only_b] = bwd.color[only_b]
    img[ys[resolved], xs[resolved]] = out[resolved].astype(img.dtype)

    remaining = np.zeros(hole.shape, dtype=np.uint8)
    remaining[ys[~resolved & ~conflict], xs[~resolved & ~conflict]] = 1
    invalid = np.zeros(hole.shape, dtype=np.uint8)
    invalid[ys[conflict], xs[conflict]] = 1

    prov = None
    if record_provenance:
        use_f = agree | only_f
        use_b = agree | only_b
        prov = FrameProvenance(
            frame=target,
            ys=np.concatenate([ys[use_f], ys[use_b]]),
            xs=np.concatenate([xs[use_f], xs[use_b]]),
            direction=np.concatenate(
                [np.full(int(use_f.sum()), "f"), np.full(int(use_b.sum()), "b")]
            ),
            source=np.concatenate([fwd.source[use_f], bwd.source[use_b]]),
            src_x=np.concatenate([fwd.pos[use_f, 0], bwd.pos[use_b, 0]]),
            src_y=np.concatenate([fwd.pos[use_f, 1], bwd.pos[use_b, 1]]),
        )
    return Image(img), Mask(remaining), Mask(invalid), prov


def _empty_provenance(frame: int) -> FrameProvenance:
    z = np.zeros(0, dtype=np.int64)
    return FrameProvenance(
        frame=frame,
        ys=z,
        xs=z,
        direction=np.zeros(0, dtype="<U1"),
        source=z,
        src_x=z.astype(np.float64),
        src_y=z.astype(np.float64),
    )


def collect_bidirectional(
    seq: Sequence,
    flows: CompletedFlows,
    threshold: float = DEFAULT_VERIFY_THRESHOLD,
    threads: int = 1,
) -> PropagationState:
    """Fill every frame's holes from known pixels of the other frames."""
    state, _ = collect_bidirectional_with_provenance(
        seq, flows, threshold=threshold, threads=threads, record_provenance=False
    )
    return state


def collect_bidirectional_with_provenance(
    seq: Sequence,
    flows: CompletedFlows,
    threshold: float = DEFAULT_VERIFY_THRESHOLD,
    threads: int = 1,
    record_provenance: bool = True,
) -> tuple[PropagationState, list[FrameProvenance | None]]:
    """As :func:`collect_bidirectional`, also reporting per-pixel
    provenance (source frame, source coordinates, pass direction)."""
    targets = range(seq.length)

    def job(i: int):
        return collect_frame(
            seq, flows, i, threshold=threshold, record_provenance=record_provenance
        )

    if threads > 1 and seq.length > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(job, targets))
    else:
        results = [job(i) for i in targets]

    images = tuple(r[0] for r in results)
    masks = tuple(r[1] for r in results)
    invalid = tuple(r[2] for r in results)
    provenance = [r[3] for r in results]
    return PropagationState(images=images, masks=masks, invalid=invalid), provenance


def write_provenance(provenance, path) -> None:
    """Dump fill provenance as one tab-separated row per pulled sample."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("frame\ty\tx\tdirection\tsource_frame\tsource_x\tsource_y\n")
        for prov in provenance:
            if prov is None:
                continue
            for frame, y, x, d, src, sx, sy in prov.rows():
                fh.write(f"{frame}\t{y}\t{x}\t{d}\t{src}\t{sx:.6f}\t{sy:.6f}\n")
