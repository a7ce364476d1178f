"""Positive-mask handling for occluded removal targets.

When the object to remove is itself occluded by content that must stay,
the occluder's mask is merged into the working hole mask before
inference (so its unreliable flow never leaks colors) and its original
pixels are overlaid back onto the output afterward.
"""

from __future__ import annotations

import numpy as np

from .types import Image, Mask, ValidationError


def merge_masks(negative: Mask, positive: Mask) -> Mask:
    """Pixelwise union of the removal mask and the occluder mask."""
    if (negative.height, negative.width) != (positive.height, positive.width):
        raise ValidationError("resolution mismatch between negative and positive masks")
    return Mask(np.maximum(negative.data, positive.data))


def overlay_positive(output: Image, original: Image, positive: Mask) -> Image:
    """Restore the original content wherever the positive mask is set."""
    shape = (output.height, output.width)
    if (original.height, original.width) != shape or (
        positive.height,
        positive.width,
    ) != shape:
        raise ValidationError("resolution mismatch in positive overlay")
    keep = positive.data[:, :, None] != 0
    return Image(np.where(keep, original.data, output.data))
