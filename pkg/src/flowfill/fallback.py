"""Per-frame completion of residual holes and verification-rejected pixels.

This is the last stage: whatever survives propagation (no usable source
anywhere) or was rejected by verification gets filled frame-locally by
per-channel harmonic extension of the surrounding colors. The call
shape accepts any filler with the same signature, so a learned model
can be slotted in behind it later.
"""

from __future__ import annotations

import numpy as np

from . import harmonic
from .types import Image, Mask, ValidationError


def assemble_completion_input(
    image: Image, residual: Mask, invalid: Mask
) -> tuple[Image, Mask]:
    """Build the completion operands: the image with unreliable pixels
    zeroed, and the union of the residual and unreliable masks."""
    shape = (image.height, image.width)
    if (residual.height, residual.width) != shape or (
        invalid.height,
        invalid.width,
    ) != shape:
        raise ValidationError("resolution mismatch between image and masks")
    img = np.array(image.data, copy=True)
    img[invalid.data != 0] = 0.0
    union = np.maximum(residual.data, invalid.data)
    return Image(img), Mask(union)


def complete_frame(image: Image, hole: Mask) -> Image:
    """Fill ``hole`` by harmonic extension of the boundary colors.

    Known pixels pass through bit-exactly; filled values are clamped to
    [0, 1] and never exceed the boundary range per channel. A hole
    covering the whole frame has no boundary and falls back to mid-gray
    (the pipeline surfaces that in its run report).
    """
    if (hole.height, hole.width) != (image.height, image.width):
        raise ValidationError(
            f"resolution mismatch: hole {(hole.height, hole.width)} "
            f"vs image {(image.height, image.width)}"
        )
    region = hole.data != 0
    if not region.any():
        return image
    filled = harmonic.fill_multichannel(image.data, region, fallback_value=0.5)
    out = np.array(image.data, copy=True)
    out[region] = np.clip(filled[region], 0.0, 1.0).astype(out.dtype)
    return Image(out)
