from __future__ import annotations

import numpy as np
import pytest

from flowfill.types import FlowField, Image, Mask, Sequence


def zero_flow(h: int, w: int) -> FlowField:
    return FlowField(np.zeros((h, w, 2), dtype=np.float32))


def const_flow(h: int, w: int, dx: float, dy: float) -> FlowField:
    data = np.empty((h, w, 2), dtype=np.float32)
    data[:, :, 0] = dx
    data[:, :, 1] = dy
    return FlowField(data)


def solid_image(h: int, w: int, color) -> Image:
    data = np.empty((h, w, 3), dtype=np.float32)
    data[:] = np.asarray(color, dtype=np.float32)
    return Image(data)


def random_image(h: int, w: int, rng: np.random.Generator) -> Image:
    return Image(rng.random((h, w, 3)).astype(np.float32))


def box_mask(h: int, w: int, y0: int, y1: int, x0: int, x1: int) -> Mask:
    m = np.zeros((h, w), dtype=np.uint8)
    m[y0:y1, x0:x1] = 1
    return Mask(m)


def empty_mask(h: int, w: int) -> Mask:
    return Mask(np.zeros((h, w), dtype=np.uint8))


def static_sequence(frames, masks) -> Sequence:
    """A sequence with zero flows everywhere (static camera)."""
    h, w = frames[0].height, frames[0].width
    n = len(frames) - 1
    return Sequence(
        frames=tuple(frames),
        masks=tuple(masks),
        fwd_flows=tuple(zero_flow(h, w) for _ in range(n)),
        bwd_flows=tuple(zero_flow(h, w) for _ in range(n)),
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
