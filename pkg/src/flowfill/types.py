"""Shared raster types and their invariants.

Conventions used throughout the package:

- rasters are numpy arrays indexed ``[row, col]`` = ``[y, x]``;
- colors are float32 of shape ``(H, W, 3)`` with every channel in [0, 1];
- masks are uint8 of shape ``(H, W)`` with values in {0, 1}, 1 = missing;
- flows are float ``(H, W, 2)`` holding ``(dx, dy)`` displacements in
  pixels (x rightward, y downward), paired with a uint8 validity raster
  where 1 marks a usable vector.

Pixel centers sit at integer coordinates with the origin at the top-left
pixel. All types are immutable after construction and safe to share
read-only across worker threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ValidationError(ValueError):
    """An input raster violates a structural invariant."""


def _readonly(a: np.ndarray) -> np.ndarray:
    v = a.view()
    v.setflags(write=False)
    return v


def _check_binary(data: np.ndarray, what: str) -> np.ndarray:
    """Coerce to uint8 after verifying every value is exactly 0 or 1."""
    if data.dtype == bool:
        return data.astype(np.uint8)
    ok = (data == 0) | (data == 1)
    if not ok.all():
        raise ValidationError(f"non-binary {what}")
    return data.astype(np.uint8)


@dataclass(frozen=True, eq=False)
class Image:
    """A color frame: (H, W, 3) float32 with channels in [0, 1]."""

    data: np.ndarray

    def __post_init__(self) -> None:
        data = np.asarray(self.data)
        if data.ndim != 3 or data.shape[2] != 3:
            raise ValidationError(f"image must have shape (H, W, 3), got {data.shape}")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise ValidationError("image must be at least 1x1")
        data = data.astype(np.float32, copy=False)
        if not np.isfinite(data).all():
            raise ValidationError("image contains non-finite values")
        if float(data.min()) < 0.0 or float(data.max()) > 1.0:
            raise ValidationError("image values must lie in [0, 1]")
        object.__setattr__(self, "data", _readonly(data))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True, eq=False)
class Mask:
    """A binary raster: (H, W) uint8, 1 marks a missing (hole) pixel."""

    data: np.ndarray

    def __post_init__(self) -> None:
        data = np.asarray(self.data)
        if data.ndim != 2:
            raise ValidationError(f"mask must have shape (H, W), got {data.shape}")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise ValidationError("mask must be at least 1x1")
        object.__setattr__(self, "data", _readonly(_check_binary(data, "mask")))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def count(self) -> int:
        """Number of missing pixels."""
        return int(self.data.sum())


@dataclass(frozen=True, eq=False)
class FlowField:
    """Per-pixel displacements (dx, dy) with a validity raster.

    Displacements must be finite wherever ``valid`` is 1; invalid pixels
    may hold anything and are ignored downstream. Float32 and float64
    payloads are both accepted and preserved (chained maps need the
    extra precision, file-backed flows arrive as float32).
    """

    data: np.ndarray
    valid: np.ndarray | None = None

    def __post_init__(self) -> None:
        data = np.asarray(self.data)
        if data.ndim != 3 or data.shape[2] != 2:
            raise ValidationError(f"flow must have shape (H, W, 2), got {data.shape}")
        if data.dtype not in (np.float32, np.float64):
            data = data.astype(np.float32)
        valid = self.valid
        if valid is None:
            valid = np.ones(data.shape[:2], dtype=np.uint8)
        else:
            valid = np.asarray(valid)
            if valid.shape != data.shape[:2]:
                raise ValidationError(
                    f"flow validity shape {valid.shape} does not match flow {data.shape[:2]}"
                )
            valid = _check_binary(valid, "flow validity")
        if not np.isfinite(data[valid == 1]).all():
            raise ValidationError("non-finite flow in valid region")
        object.__setattr__(self, "data", _readonly(data))
        object.__setattr__(self, "valid", _readonly(valid))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True, eq=False)
class Sequence:
    """An ordered clip: frames, hole masks, and adjacent-pair flows.

    ``fwd_flows[i]`` maps frame i to frame i+1, ``bwd_flows[i]`` maps
    frame i+1 to frame i; both lists hold exactly L-1 fields (empty for
    a single-frame sequence). ``positive_masks`` optionally marks
    occluding content that must be preserved verbatim in the output.
    """

    frames: tuple[Image, ...]
    masks: tuple[Mask, ...]
    fwd_flows: tuple[FlowField, ...] = ()
    bwd_flows: tuple[FlowField, ...] = ()
    positive_masks: tuple[Mask, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "frames", tuple(self.frames))
        object.__setattr__(self, "masks", tuple(self.masks))
        object.__setattr__(self, "fwd_flows", tuple(self.fwd_flows))
        object.__setattr__(self, "bwd_flows", tuple(self.bwd_flows))
        if self.positive_masks is not None:
            object.__setattr__(self, "positive_masks", tuple(self.positive_masks))
        _validate_sequence_fields(self)

    @property
    def length(self) -> int:
        return len(self.frames)

    @property
    def height(self) -> int:
        return self.frames[0].height

    @property
    def width(self) -> int:
        return self.frames[0].width


def _validate_sequence_fields(seq: Sequence) -> None:
    if len(seq.frames) < 1:
        raise ValidationError("sequence must contain at least one frame")
    if len(seq.masks) != len(seq.frames):
        raise ValidationError(
            f"mask count {len(seq.masks)} does not match frame count {len(seq.frames)}"
        )
    h, w = seq.frames[0].height, seq.frames[0].width
    for i, frame in enumerate(seq.frames):
        if (frame.height, frame.width) != (h, w):
            raise ValidationError(f"dimension mismatch: frame {i}")
    for i, mask in enumerate(seq.masks):
        if (mask.height, mask.width) != (h, w):
            raise ValidationError(f"dimension mismatch: mask {i}")
    expected = len(seq.frames) - 1
    if len(seq.fwd_flows) != expected:
        raise ValidationError(
            f"forward flow count {len(seq.fwd_flows)} != {expected} (frame count - 1)"
        )
    if len(seq.bwd_flows) != expected:
        raise ValidationError(
            f"backward flow count {len(seq.bwd_flows)} != {expected} (frame count - 1)"
        )
    for name, flows in (("forward", seq.fwd_flows), ("backward", seq.bwd_flows)):
        for i, flow in enumerate(flows):
            if (flow.height, flow.width) != (h, w):
                raise ValidationError(f"dimension mismatch: {name} flow {i}")
    if seq.positive_masks is not None:
        if len(seq.positive_masks) != len(seq.frames):
            raise ValidationError(
                f"positive mask count {len(seq.positive_masks)} does not match frame count"
            )
        for i, mask in enumerate(seq.positive_masks):
            if (mask.height, mask.width) != (h, w):
                raise ValidationError(f"dimension mismatch: positive mask {i}")


def validate_sequence(seq: Sequence) -> Sequence:
    """Re-check every type and cross-field invariant; return ``seq`` if sound.

    Construction already rejects violations; this is the explicit gate the
    pipeline runs on ingested data so errors surface before any work starts.
    """
    _validate_sequence_fields(seq)
    for frame in seq.frames:
        Image(frame.data)
    for mask in seq.masks:
        Mask(mask.data)
    for flow in list(seq.fwd_flows) + list(seq.bwd_flows):
        FlowField(flow.data, flow.valid)
    if seq.positive_masks is not None:
        for mask in seq.positive_masks:
            Mask(mask.data)
    return seq


@dataclass(frozen=True, eq=False)
class PropagationState:
    """Result of pixel collection: updated images, remaining holes, and
    the indicator of pixels whose propagation was rejected as unreliable.

    ``masks`` and ``invalid`` are disjoint by construction: a hole pixel
    either received a color, was flagged unreliable, or is still missing.
    Both stay within the originating sequence's hole masks.
    """

    images: tuple[Image, ...]
    masks: tuple[Mask, ...]
    invalid: tuple[Mask, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "images", tuple(self.images))
        object.__setattr__(self, "masks", tuple(self.masks))
        object.__setattr__(self, "invalid", tuple(self.invalid))
        n = len(self.images)
        if len(self.masks) != n or len(self.invalid) != n:
            raise ValidationError("propagation state lists must have equal length")
        if n < 1:
            raise ValidationError("propagation state must cover at least one frame")
        h, w = self.images[0].height, self.images[0].width
        for i in range(n):
            if (self.images[i].height, self.images[i].width) != (h, w):
                raise ValidationError(f"dimension mismatch: image {i}")
            if (self.masks[i].height, self.masks[i].width) != (h, w):
                raise ValidationError(f"dimension mismatch: mask {i}")
            if (self.invalid[i].height, self.invalid[i].width) != (h, w):
                raise ValidationError(f"dimension mismatch: invalid mask {i}")

    @property
    def length(self) -> int:
        return len(self.images)

    def residual_total(self) -> int:
        """Total count of still-missing pixels across all frames."""
        return int(sum(m.count() for m in self.masks))
