"""Bilinear sampling and the grid-warp primitive.

The sample domain is [0, W-1] x [0, H-1]. A query interpolates the four
corners of the pixel cell containing it (the cell index is clamped at
the far border so integer coordinates on the last row/column resolve
exactly). Validity is conservative: the query must be in bounds, and
when a gate raster is given every one of the four corners must pass it,
because any bilinear mixture with an unknown pixel contaminates the
result. Out-of-bounds queries are invalidated, never edge-clamped:
clamping would fabricate content where none was observed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import FlowField, Mask, ValidationError


@dataclass(frozen=True)
class SampledValue:
    """A k-channel sample and whether it may be used."""

    value: np.ndarray
    valid: int


def sample_points(
    field: np.ndarray,
    xs: np.ndarray,
    ys: np.ndarray,
    usable: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Bilinearly sample ``field`` at continuous points.

    field: (H, W) or (H, W, k) raster.
    xs, ys: flat arrays of query coordinates.
    usable: optional (H, W) gate; all four cell corners must be nonzero
        for the sample to stay valid.

    Returns (values, valid) where values is float64 of shape (N,) or
    (N, k) and valid is a boolean (N,). Invalid entries hold zeros.
    """
    h, w = field.shape[:2]
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    inb = (xs >= 0.0) & (xs <= w - 1.0) & (ys >= 0.0) & (ys <= h - 1.0)

    # Clamp the cell so out-of-bounds queries still index safely; their
    # results are discarded through `inb`.
    x0 = np.clip(np.floor(xs), 0, max(w - 2, 0)).astype(np.intp)
    y0 = np.clip(np.floor(ys), 0, max(h - 2, 0)).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = np.clip(xs - x0, 0.0, 1.0)
    fy = np.clip(ys - y0, 0.0, 1.0)

    w00 = (1.0 - fx) * (1.0 - fy)
    w10 = fx * (1.0 - fy)
    w01 = (1.0 - fx) * fy
    w11 = fx * fy

    # gather the four corners first, then mix: the float64 weights
    # upcast the per-point values without copying the whole field
    flat = field.reshape(h, w, -1)
    values = (
        w00[:, None] * flat[y0, x0]
        + w10[:, None] * flat[y0, x1]
        + w01[:, None] * flat[y1, x0]
        + w11[:, None] * flat[y1, x1]
    )

    valid = inb
    if usable is not None:
        gate = usable != 0
        valid = valid & gate[y0, x0] & gate[y0, x1] & gate[y1, x0] & gate[y1, x1]
    values[~valid] = 0.0
    if field.ndim == 2:
        return values[:, 0], valid
    return values, valid


def bilinear_sample(
    field: np.ndarray,
    x: float,
    y: float,
    known: Mask | np.ndarray | None = None,
) -> SampledValue:
    """Sample one point; ``known`` is a hole mask (1 = missing source)."""
    usable = None
    if known is not None:
        mask = known.data if isinstance(known, Mask) else np.asarray(known)
        usable = mask == 0
    values, valid = sample_points(
        np.asarray(field), np.array([x]), np.array([y]), usable=usable
    )
    return SampledValue(value=np.atleast_1d(values[0]), valid=int(valid[0]))


def grid_warp(
    field: np.ndarray,
    flow: FlowField,
    field_valid: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Warp ``field`` by sampling it at ``p + flow(p)`` for every pixel p.

    field: (H, W) or (H, W, k) raster sharing the flow's resolution.
    field_valid: optional (H, W) gate, nonzero = usable source pixel.

    Returns (warped, valid); ``valid`` is uint8 and requires the flow
    vector to be valid, the sample to land in bounds, and all four
    source corners to pass ``field_valid``. Invalid outputs are zeroed.
    """
    h, w = flow.height, flow.width
    if field.shape[:2] != (h, w):
        raise ValidationError(
            f"resolution mismatch: field {field.shape[:2]} vs flow {(h, w)}"
        )
    ys, xs = np.mgrid[0:h, 0:w]
    px = xs.ravel() + flow.data[:, :, 0].ravel().astype(np.float64)
    py = ys.ravel() + flow.data[:, :, 1].ravel().astype(np.float64)
    values, valid = sample_points(field, px, py, usable=field_valid)
    valid = valid & (flow.valid.ravel() != 0)
    values[~valid] = 0.0
    if field.ndim == 2:
        out = values.reshape(h, w)
    else:
        out = values.reshape(h, w, field.shape[2])
    return out, valid.reshape(h, w).astype(np.uint8)
