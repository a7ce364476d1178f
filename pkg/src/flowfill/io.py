"""File I/O for frames, masks, and optical-flow fields.

Flow files use the common binary layout: a 4-byte magic (the float32
202021.25, bytes "PIEH"), two little-endian int32 dimensions, then
height*width interleaved (u, v) float32 pairs in row-major order.
Vectors with magnitude >= 1e9 or non-finite payloads are treated as
the standard "unknown flow" sentinel and marked invalid on read.
"""

from __future__ import annotations

from pathlib import Path

import cv2
import numpy as np
from scipy import ndimage

from .types import FlowField, Image, Mask, ValidationError

FLOW_MAGIC = np.float32(202021.25)
FLOW_SENTINEL = np.float32(1e9)


class MediaError(ValueError):
    """A media file is unreadable or corrupt."""


def read_flow(path: str | Path) -> FlowField:
    """Read a flow field, marking sentinel/non-finite vectors invalid."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 12:
        raise MediaError(f"{path}: truncated header ({len(raw)} bytes)")
    magic = np.frombuffer(raw, dtype="<f4", count=1)[0]
    if magic != FLOW_MAGIC:
        raise MediaError(f"{path}: bad magic {magic!r}")
    width, height = (int(v) for v in np.frombuffer(raw, dtype="<i4", count=2, offset=4))
    if width <= 0 or height <= 0:
        raise MediaError(f"{path}: bad dimensions {width}x{height}")
    expected = 12 + 8 * width * height
    if len(raw) != expected:
        raise MediaError(f"{path}: payload size {len(raw)} != {expected}")
    data = np.frombuffer(raw, dtype="<f4", offset=12).reshape(height, width, 2)
    data = np.array(data, dtype=np.float32)  # frombuffer views are read-only
    valid = np.isfinite(data).all(axis=2) & (np.abs(data) < FLOW_SENTINEL).all(axis=2)
    data[~valid] = 0.0
    return FlowField(data, valid.astype(np.uint8))


def write_flow(flow: FlowField, path: str | Path) -> None:
    """Write a flow field; invalid pixels are encoded as the sentinel."""
    path = Path(path)
    data = np.array(flow.data, dtype=np.float32, copy=True)
    data[flow.valid == 0] = FLOW_SENTINEL
    header = FLOW_MAGIC.tobytes()
    header += np.array([flow.width, flow.height], dtype="<i4").tobytes()
    path.write_bytes(header + data.astype("<f4").tobytes())


def _imread(path: Path) -> np.ndarray:
    img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise MediaError(f"{path}: unreadable image file")
    return img


def _max_code(dtype: np.dtype, path: Path) -> float:
    if dtype == np.uint8:
        return 255.0
    if dtype == np.uint16:
        return 65535.0
    raise MediaError(f"{path}: unsupported sample type {dtype}")


def read_frame(path: str | Path) -> Image:
    """Read an 8- or 16-bit RGB raster, scaled to [0, 1] by the max code."""
    path = Path(path)
    img = _imread(path)
    if img.ndim != 3 or img.shape[2] != 3:
        raise MediaError(f"{path}: unsupported channel layout (need 3-channel RGB)")
    img = img[:, :, ::-1]  # stored BGR
    return Image(img.astype(np.float32) / _max_code(img.dtype, path))


def write_frame(image: Image, path: str | Path, bit_depth: int = 8) -> None:
    """Write an RGB raster; codes are produced by round-half-up."""
    if bit_depth not in (8, 16):
        raise ValueError(f"bit_depth must be 8 or 16, got {bit_depth}")
    max_code = 255.0 if bit_depth == 8 else 65535.0
    codes = np.floor(image.data.astype(np.float64) * max_code + 0.5)
    codes = np.clip(codes, 0, max_code)
    codes = codes.astype(np.uint8 if bit_depth == 8 else np.uint16)
    if not cv2.imwrite(str(path), codes[:, :, ::-1]):
        raise MediaError(f"{path}: image write failed")


def disk_element(radius: int) -> np.ndarray:
    """Boolean disk of the given radius: offsets with dx^2 + dy^2 <= r^2."""
    if radius < 0:
        raise ValueError("radius must be non-negative")
    dy, dx = np.mgrid[-radius : radius + 1, -radius : radius + 1]
    return (dx * dx + dy * dy) <= radius * radius


def dilate_mask(mask: Mask, radius: int) -> Mask:
    """Grow the missing region by a disk of the given radius."""
    if radius <= 0:
        return mask
    grown = ndimage.binary_dilation(mask.data.astype(bool), structure=disk_element(radius))
    return Mask(grown.astype(np.uint8))


def read_mask(path: str | Path, dilate_radius: int = 0) -> Mask:
    """Read a single-channel raster as a binary hole mask.

    Codes at or above half the code range map to 1 (missing). The
    optional dilation is applied after thresholding.
    """
    path = Path(path)
    img = _imread(path)
    if img.ndim != 2:
        raise MediaError(f"{path}: unsupported layout (need a single-channel raster)")
    half = (_max_code(img.dtype, path) + 1.0) / 2.0
    mask = Mask((img.astype(np.float64) >= half).astype(np.uint8))
    return dilate_mask(mask, dilate_radius)


def write_mask(mask: Mask, path: str | Path) -> None:
    """Write a binary mask as an 8-bit single-channel raster (0/255)."""
    if not cv2.imwrite(str(path), (mask.data * 255).astype(np.uint8)):
        raise MediaError(f"{path}: image write failed")
