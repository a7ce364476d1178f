"""Harmonic infill: fill hole pixels with the discrete solution of
Laplace's equation under Dirichlet data from the surrounding known ring.

The solver is red-black successive over-relaxation restricted to the
hole's bounding box, run until the max-norm residual of the five-point
stencil drops below tolerance or the sweep cap is hit. Hole pixels on
the frame border use only their in-frame neighbors (3 at edges, 2 at
corners). A hole covering the whole frame has no boundary ring at all;
the caller supplies the constant used in that case.
"""

from __future__ import annotations

import numpy as np

DEFAULT_TOL = 1e-6
DEFAULT_MAX_SWEEPS = 10_000


def _neighbor_sum(u: np.ndarray) -> np.ndarray:
    s = np.zeros_like(u)
    s[1:, :] += u[:-1, :]
    s[:-1, :] += u[1:, :]
    s[:, 1:] += u[:, :-1]
    s[:, :-1] += u[:, 1:]
    return s


def _neighbor_count(shape: tuple[int, int]) -> np.ndarray:
    return _neighbor_sum(np.ones(shape, dtype=np.float64))


def fill_channel(
    field: np.ndarray,
    hole: np.ndarray,
    *,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    fallback_value: float = 0.0,
) -> np.ndarray:
    """Harmonically extend one channel into the hole; known pixels pass
    through bit-exactly. Returns float64."""
    hole = np.asarray(hole, dtype=bool)
    out = np.asarray(field, dtype=np.float64).copy()
    if not hole.any():
        return out
    if hole.all():
        out[:] = fallback_value
        return out

    h, w = out.shape
    ring = _neighbor_sum(hole.astype(np.float64)) > 0
    ring &= ~hole
    out[hole] = out[ring].mean()

    ys, xs = np.nonzero(hole)
    y0, y1 = max(int(ys.min()) - 1, 0), min(int(ys.max()) + 2, h)
    x0, x1 = max(int(xs.min()) - 1, 0), min(int(xs.max()) + 2, w)
    box = (slice(y0, y1), slice(x0, x1))

    u = out[box]  # view; updates write through
    unknown = hole[box]
    count = _neighbor_count(u.shape)
    # The box is padded by one pixel except where clipped at the frame
    # border, so in-box neighbor counts equal in-frame counts for every
    # unknown pixel.
    yy, xx = np.mgrid[0 : u.shape[0], 0 : u.shape[1]]
    parity = (yy + xx + y0 + x0) % 2
    red = unknown & (parity == 0)
    black = unknown & (parity == 1)

    d = max(u.shape[0], u.shape[1])
    omega = 2.0 / (1.0 + np.sin(np.pi / (d + 1)))

    for sweep in range(max_sweeps):
        for color in (red, black):
            target = _neighbor_sum(u) / count
            u[color] += omega * (target[color] - u[color])
        if sweep % 10 == 0 or sweep == max_sweeps - 1:
            residual = np.abs(_neighbor_sum(u) / count - u)[unknown].max()
            if residual < tol:
                break
    return out


def fill_multichannel(
    field: np.ndarray,
    hole: np.ndarray,
    *,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    fallback_value: float = 0.0,
) -> np.ndarray:
    """Channel-independent harmonic infill of an (H, W, k) raster."""
    out = np.empty(field.shape, dtype=np.float64)
    for c in range(field.shape[2]):
        out[:, :, c] = fill_channel(
            field[:, :, c],
            hole,
            tol=tol,
            max_sweeps=max_sweeps,
            fallback_value=fallback_value,
        )
    return out
