"""Synthetic scenes with analytic ground truth, the per-pixel flow
tracer used as an independent oracle, and the recurrent color-warping
baseline the one-shot method is measured against.

Backgrounds are band-limited procedural textures (a seeded sum of
oriented sinusoids plus hash-lattice value noise) defined on an
unbounded continuous domain, so any camera motion has an exact
occluder-free render and exact adjacent-pair flows. Everything is
seeded and reproducible byte for byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .flow_complete import CompletedFlows
from .propagation import DEFAULT_VERIFY_THRESHOLD, chain_step, identity_map
from .types import FlowField, Image, Mask, PropagationState, Sequence, ValidationError
from .warp import sample_points

# re-exported here because the benchmark is where they are consumed
from .metrics import psnr, ssim  # noqa: F401


@dataclass(frozen=True)
class SceneSpec:
    """Parameters of one synthetic sequence."""

    height: int
    width: int
    length: int
    seed: int = 0

    # background texture
    wave_count: int = 4
    wavelength_min: float = 6.0
    wavelength_max: float = 16.0
    wave_amplitude: float = 0.35
    noise_amplitude: float = 0.0
    noise_scale: float = 12.0

    # camera motion: content drifts by (drift_x, drift_y) px/frame and
    # scales by `zoom` per frame about the image center
    drift_x: float = 0.0
    drift_y: float = 0.0
    zoom: float = 1.0

    # occluder: a moving disk or box, composited on top
    occluder: str = "disk"  # disk | box | none
    occ_x: float = 0.0
    occ_y: float = 0.0
    occ_vx: float = 0.0
    occ_vy: float = 0.0
    occ_radius: float = 8.0
    occ_w: float = 16.0
    occ_h: float = 12.0
    occ_color: tuple[float, float, float] = (0.15, 0.75, 0.3)

    def __post_init__(self) -> None:
        if self.height < 1 or self.width < 1 or self.length < 1:
            raise ValidationError("scene must have positive dimensions and length")
        if self.zoom <= 0:
            raise ValidationError("zoom must be positive (transform must be invertible)")
        if self.occluder not in ("disk", "box", "none"):
            raise ValidationError(f"unknown occluder shape {self.occluder!r}")
        if self.occluder == "disk" and self.occ_radius < 1:
            raise ValidationError("occluder radius must be at least 1 pixel")
        if self.occluder == "box" and (self.occ_w < 1 or self.occ_h < 1):
            raise ValidationError("occluder box must be at least 1 pixel wide")
        if self.wave_amplitude + self.noise_amplitude >= 0.5:
            raise ValidationError("texture amplitudes must sum below 0.5")
        if self.wavelength_min < 2.0:
            raise ValidationError("wavelengths below 2 px are not representable")


@dataclass(frozen=True)
class Texture:
    """A seeded continuous RGB texture: per-channel sinusoid banks plus
    optional value noise on an integer lattice."""

    freq_x: np.ndarray  # (3, K)
    freq_y: np.ndarray
    phase: np.ndarray
    amplitude: np.ndarray
    noise_amplitude: float
    noise_scale: float
    noise_salt: np.ndarray  # (3,) uint64

    def eval(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Evaluate at continuous coordinates; returns (..., 3) in (0, 1)."""
        out = np.full(xs.shape + (3,), 0.5, dtype=np.float64)
        for c in range(3):
            acc = np.zeros(xs.shape, dtype=np.float64)
            for k in range(self.freq_x.shape[1]):
                acc += self.amplitude[c, k] * np.sin(
                    2.0 * np.pi * (self.freq_x[c, k] * xs + self.freq_y[c, k] * ys)
                    + self.phase[c, k]
                )
            if self.noise_amplitude > 0.0:
                acc += self.noise_amplitude * (
                    _value_noise(
                        xs / self.noise_scale, ys / self.noise_scale, self.noise_salt[c]
                    )
                    * 2.0
                    - 1.0
                )
            out[..., c] += acc
        return out


def _hash01(ix: np.ndarray, iy: np.ndarray, salt: np.uint64) -> np.ndarray:
    """Deterministic lattice hash to [0, 1); wraps in uint64."""
    with np.errstate(over="ignore"):
        h = ix.astype(np.uint64) * np.uint64(0x9E3779B97F4A7C15)
        h ^= iy.astype(np.uint64) * np.uint64(0xC2B2AE3D27D4EB4F)
        h ^= np.uint64(salt)
        h ^= h >> np.uint64(33)
        h *= np.uint64(0xFF51AFD7ED558CCD)
        h ^= h >> np.uint64(33)
    return (h >> np.uint64(40)).astype(np.float64) / float(1 << 24)


def _value_noise(x: np.ndarray, y: np.ndarray, salt: np.uint64) -> np.ndarray:
    x0 = np.floor(x)
    y0 = np.floor(y)
    fx = x - x0
    fy = y - y0
    ix = x0.astype(np.int64)
    iy = y0.astype(np.int64)
    v00 = _hash01(ix, iy, salt)
    v10 = _hash01(ix + 1, iy, salt)
    v01 = _hash01(ix, iy + 1, salt)
    v11 = _hash01(ix + 1, iy + 1, salt)
    return (
        v00 * (1 - fx) * (1 - fy)
        + v10 * fx * (1 - fy)
        + v01 * (1 - fx) * fy
        + v11 * fx * fy
    )


def make_texture(spec: SceneSpec) -> Texture:
    rng = np.random.default_rng(spec.seed)
    theta = rng.uniform(0.0, 2.0 * np.pi, size=(3, spec.wave_count))
    lam = rng.uniform(spec.wavelength_min, spec.wavelength_max, size=(3, spec.wave_count))
    phase = rng.uniform(0.0, 2.0 * np.pi, size=(3, spec.wave_count))
    amplitude = np.full((3, spec.wave_count), spec.wave_amplitude / spec.wave_count)
    salt = rng.integers(0, np.iinfo(np.uint64).max, size=3, dtype=np.uint64)
    return Texture(
        freq_x=np.cos(theta) / lam,
        freq_y=np.sin(theta) / lam,
        phase=phase,
        amplitude=amplitude,
        noise_amplitude=spec.noise_amplitude,
        noise_scale=spec.noise_scale,
        noise_salt=salt,
    )


def _pixel_to_world(spec: SceneSpec, t: int, xs: np.ndarray, ys: np.ndarray):
    """Invert the frame-t camera placement: which texture point does a
    pixel show? Content scales by zoom^t about the center and has
    drifted by t * (drift_x, drift_y)."""
    cx = (spec.width - 1) / 2.0
    cy = (spec.height - 1) / 2.0
    z = spec.zoom**t
    wx = (xs - cx - t * spec.drift_x) / z + cx
    wy = (ys - cy - t * spec.drift_y) / z + cy
    return wx, wy


def _world_to_pixel(spec: SceneSpec, t: int, wx: np.ndarray, wy: np.ndarray):
    cx = (spec.width - 1) / 2.0
    cy = (spec.height - 1) / 2.0
    z = spec.zoom**t
    return z * (wx - cx) + cx + t * spec.drift_x, z * (wy - cy) + cy + t * spec.drift_y


def _occluder_mask(spec: SceneSpec, t: int, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    if spec.occluder == "none":
        return np.zeros(xs.shape, dtype=np.uint8)
    cx = spec.occ_x + t * spec.occ_vx
    cy = spec.occ_y + t * spec.occ_vy
    if spec.occluder == "disk":
        inside = (xs - cx) ** 2 + (ys - cy) ** 2 <= spec.occ_radius**2
    else:
        inside = (np.abs(xs - cx) <= spec.occ_w / 2.0) & (
            np.abs(ys - cy) <= spec.occ_h / 2.0
        )
    return inside.astype(np.uint8)


@dataclass(frozen=True)
class GeneratedScene:
    """A rendered scene: the masked sequence, the occluder-free ground
    truth, and the exact adjacent-pair flows (also carried by the
    sequence itself)."""

    spec: SceneSpec
    sequence: Sequence
    gt_frames: tuple[Image, ...]
    fwd_flows: tuple[FlowField, ...]
    bwd_flows: tuple[FlowField, ...]


def generate_scene(spec: SceneSpec) -> GeneratedScene:
    """Render frames, occluder masks, ground-truth backgrounds, and the
    analytic flows of the background motion."""
    texture = make_texture(spec)
    ys, xs = np.mgrid[0 : spec.height, 0 : spec.width].astype(np.float64)

    gt_frames: list[Image] = []
    frames: list[Image] = []
    masks: list[Mask] = []
    for t in range(spec.length):
        wx, wy = _pixel_to_world(spec, t, xs, ys)
        bg = texture.eval(wx, wy)
        occ = _occluder_mask(spec, t, xs, ys)
        frame = bg.copy()
        frame[occ != 0] = np.asarray(spec.occ_color, dtype=np.float64)
        gt_frames.append(Image(bg.astype(np.float32)))
        frames.append(Image(frame.astype(np.float32)))
        masks.append(Mask(occ))

    fwd: list[FlowField] = []
    bwd: list[FlowField] = []
    for t in range(spec.length - 1):
        wx, wy = _pixel_to_world(spec, t, xs, ys)
        nx, ny = _world_to_pixel(spec, t + 1, wx, wy)
        fwd.append(
            FlowField(np.stack([nx - xs, ny - ys], axis=2).astype(np.float32), None)
        )
        wx, wy = _pixel_to_world(spec, t + 1, xs, ys)
        nx, ny = _world_to_pixel(spec, t, wx, wy)
        bwd.append(
            FlowField(np.stack([nx - xs, ny - ys], axis=2).astype(np.float32), None)
        )

    seq = Sequence(
        frames=tuple(frames),
        masks=tuple(masks),
        fwd_flows=tuple(fwd),
        bwd_flows=tuple(bwd),
    )
    return GeneratedScene(
        spec=spec,
        sequence=seq,
        gt_frames=tuple(gt_frames),
        fwd_flows=seq.fwd_flows,
        bwd_flows=seq.bwd_flows,
    )


def random_smooth_flow(
    height: int,
    width: int,
    rng: np.random.Generator,
    amplitude: float = 1.0,
    wavelength_min: float = 16.0,
    components: int = 3,
) -> FlowField:
    """A seeded band-limited flow field with |flow| <= amplitude."""
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    out = np.zeros((height, width, 2), dtype=np.float64)
    for c in range(2):
        acc = np.zeros((height, width), dtype=np.float64)
        for _ in range(components):
            theta = rng.uniform(0.0, 2.0 * np.pi)
            lam = rng.uniform(wavelength_min, wavelength_min * 3.0)
            phase = rng.uniform(0.0, 2.0 * np.pi)
            acc += np.sin(
                2.0 * np.pi * (np.cos(theta) * xs + np.sin(theta) * ys) / lam + phase
            )
        acc *= amplitude / components
        out[:, :, c] = acc
    return FlowField(out.astype(np.float32), None)


def _scalar_bilinear(field: np.ndarray, valid: np.ndarray, x: float, y: float):
    """Plain per-pixel bilinear sample; independent of the vectorized
    sampler but sharing its domain rules: cell clamped at the far
    border, all four corners must be valid."""
    h, w = field.shape[:2]
    if not (0.0 <= x <= w - 1.0 and 0.0 <= y <= h - 1.0):
        return None
    x0 = int(math.floor(x))
    y0 = int(math.floor(y))
    if x0 > w - 2:
        x0 = max(w - 2, 0)
    if y0 > h - 2:
        y0 = max(h - 2, 0)
    x1 = min(x0 + 1, w - 1)
    y1 = min(y0 + 1, h - 1)
    if not (valid[y0, x0] and valid[y0, x1] and valid[y1, x0] and valid[y1, x1]):
        return None
    fx = x - x0
    fy = y - y0
    return (
        (1 - fx) * (1 - fy) * field[y0, x0]
        + fx * (1 - fy) * field[y0, x1]
        + (1 - fx) * fy * field[y1, x0]
        + fx * fy * field[y1, x1]
    )


def brute_force_trace(
    fwd_flows,
    bwd_flows,
    i: int,
    j: int,
    x: float,
    y: float,
) -> tuple[float, float, bool]:
    """Trace a pixel of frame i to its position in frame j one hop at a
    time, in full floating precision. Invalid as soon as any hop's
    sample leaves the frame. This is the reference the chained maps are
    checked against."""
    if i == j:
        raise ValueError("trace needs two distinct frames")
    pos_x, pos_y = float(x), float(y)
    step = 1 if j > i else -1
    k = i
    while k != j:
        flow = fwd_flows[k] if step > 0 else bwd_flows[k - 1]
        hop = _scalar_bilinear(flow.data, flow.valid, pos_x, pos_y)
        if hop is None:
            return pos_x, pos_y, False
        pos_x += float(hop[0])
        pos_y += float(hop[1])
        k += step
    return pos_x, pos_y, True


@dataclass(frozen=True)
class TraceAgreement:
    """Chained-map vs. per-pixel-trace comparison for one frame pair."""

    target: int
    source: int
    pixels: int
    jointly_valid: int
    errors: np.ndarray  # (jointly_valid,) |chained - traced| in px
    max_error: float
    within_tol: int
    tol: float

    @property
    def fraction_within(self) -> float:
        return self.within_tol / self.jointly_valid if self.jointly_valid else 1.0


def chain_trace_agreement(
    fwd_flows, bwd_flows, i: int, j: int, tol: float = 1e-3
) -> TraceAgreement:
    """Build the chained map from frame i to frame j and compare every
    pixel's chained position with the independent one-hop-at-a-time
    trace. Only pixels both routes consider valid are compared."""
    flows = list(fwd_flows) + list(bwd_flows)
    h, w = flows[0].height, flows[0].width
    acc = identity_map(i, h, w)
    step = 1 if j > i else -1
    k = i
    while k != j:
        adjacent = fwd_flows[k] if step > 0 else bwd_flows[k - 1]
        acc = chain_step(acc, adjacent, k + step)
        k += step

    errors = []
    jointly = 0
    within = 0
    for y in range(h):
        for x in range(w):
            tx, ty, ok = brute_force_trace(fwd_flows, bwd_flows, i, j, x, y)
            if not ok or not acc.flow.valid[y, x]:
                continue
            jointly += 1
            cx = x + float(acc.flow.data[y, x, 0])
            cy = y + float(acc.flow.data[y, x, 1])
            err = math.hypot(cx - tx, cy - ty)
            errors.append(err)
            if err <= tol:
                within += 1
    errors = np.asarray(errors, dtype=np.float64)
    return TraceAgreement(
        target=i,
        source=j,
        pixels=h * w,
        jointly_valid=jointly,
        errors=errors,
        max_error=float(errors.max()) if errors.size else 0.0,
        within_tol=within,
        tol=tol,
    )


def _warp_full(field: np.ndarray, usable: np.ndarray, flow: FlowField):
    h, w = flow.height, flow.width
    ys, xs = np.mgrid[0:h, 0:w]
    vals, ok = sample_points(
        field,
        xs.ravel() + flow.data[:, :, 0].ravel().astype(np.float64),
        ys.ravel() + flow.data[:, :, 1].ravel().astype(np.float64),
        usable=usable,
    )
    ok = ok & (flow.valid.ravel() != 0)
    return vals.reshape(h, w, -1), ok.reshape(h, w)


def recurrent_warp_baseline(
    seq: Sequence,
    flows: CompletedFlows,
    threshold: float = DEFAULT_VERIFY_THRESHOLD,
) -> PropagationState:
    """Fill holes by warping color buffers frame to frame.

    Each sweep re-samples the previous frame's already-warped buffer,
    so every extra hop interpolates interpolated colors; this is the
    baseline whose detail loss the one-shot pull avoids. Candidates
    from the two sweep directions are reconciled with the same
    agreement test as the one-shot path.
    """
    length = seq.length
    holes = [m.data != 0 for m in seq.masks]

    def sweep(direction: int):
        # direction +1: sources are later frames, sweep from the end.
        order = range(length - 2, -1, -1) if direction > 0 else range(1, length)
        start = length - 1 if direction > 0 else 0
        buf = np.array(seq.frames[start].data, dtype=np.float64)
        buf_ok = ~holes[start]
        cand = [None] * length
        for i in order:
            flow = flows.fwd[i] if direction > 0 else flows.bwd[i - 1]
            vals, ok = _warp_full(buf, buf_ok, flow)
            take = holes[i] & ok
            cand[i] = (vals, take)
            nxt = np.array(seq.frames[i].data, dtype=np.float64)
            nxt[take] = vals[take]
            buf = nxt
            buf_ok = ~holes[i] | take
        return cand

    cand_f = sweep(+1)
    cand_b = sweep(-1)

    images, rem_masks, inv_masks = [], [], []
    for i in range(length):
        img = np.array(seq.frames[i].data, copy=True)
        hole = holes[i]
        has_f = np.zeros(hole.shape, dtype=bool)
        has_b = np.zeros(hole.shape, dtype=bool)
        col_f = np.zeros(hole.shape + (3,), dtype=np.float64)
        col_b = np.zeros(hole.shape + (3,), dtype=np.float64)
        if cand_f[i] is not None:
            col_f, has_f = cand_f[i]
        if cand_b[i] is not None:
            col_b, has_b = cand_b[i]
        both = has_f & has_b
        l1 = np.abs(col_f - col_b).sum(axis=2)
        agree = both & (l1 <= threshold)
        conflict = both & (l1 > threshold)
        only_f = has_f & ~has_b
        only_b = has_b & ~has_f
        out = np.zeros(hole.shape + (3,), dtype=np.float64)
        out[agree] = (col_f[agree] + col_b[agree]) / 2.0
        out[only_f] = col_f[only_f]
        out[only_b] = col_b[only_b]
        resolved = agree | only_f | only_b
        img[resolved] = out[resolved].astype(img.dtype)
        rem = hole & ~resolved & ~conflict
        images.append(Image(img))
        rem_masks.append(Mask(rem.astype(np.uint8)))
        inv_masks.append(Mask(conflict.astype(np.uint8)))
    return PropagationState(
        images=tuple(images), masks=tuple(rem_masks), invalid=tuple(inv_masks)
    )


SCENE_KEYS = {
    "height",
    "width",
    "length",
    "seed",
    "wave_count",
    "wavelength_min",
    "wavelength_max",
    "wave_amplitude",
    "noise_amplitude",
    "noise_scale",
    "drift_x",
    "drift_y",
    "zoom",
    "occluder",
    "occ_x",
    "occ_y",
    "occ_vx",
    "occ_vy",
    "occ_radius",
    "occ_w",
    "occ_h",
    "occ_color",
}


def load_scene_spec(path) -> SceneSpec:
    """Read a scene spec from a flat key-value config file."""
    from . import config as cfg

    values = cfg.parse_kv_file(path)
    cfg.check_known_keys(values, SCENE_KEYS, str(path))
    for required in ("height", "width", "length"):
        if required not in values:
            raise cfg.ConfigError(f"{path}: missing required key {required!r}")
    color = cfg.get_str(values, "occ_color", None)
    occ_color = (0.15, 0.75, 0.3)
    if color is not None:
        parts = [p.strip() for p in color.split(",")]
        if len(parts) != 3:
            raise cfg.ConfigError(f"{path}: occ_color needs three components")
        occ_color = tuple(float(p) for p in parts)
    return SceneSpec(
        height=cfg.get_int(values, "height", 0),
        width=cfg.get_int(values, "width", 0),
        length=cfg.get_int(values, "length", 0),
        seed=cfg.get_int(values, "seed", 0),
        wave_count=cfg.get_int(values, "wave_count", 4),
        wavelength_min=cfg.get_float(values, "wavelength_min", 6.0),
        wavelength_max=cfg.get_float(values, "wavelength_max", 16.0),
        wave_amplitude=cfg.get_float(values, "wave_amplitude", 0.35),
        noise_amplitude=cfg.get_float(values, "noise_amplitude", 0.0),
        noise_scale=cfg.get_float(values, "noise_scale", 12.0),
        drift_x=cfg.get_float(values, "drift_x", 0.0),
        drift_y=cfg.get_float(values, "drift_y", 0.0),
        zoom=cfg.get_float(values, "zoom", 1.0),
        occluder=cfg.get_str(values, "occluder", "disk"),
        occ_x=cfg.get_float(values, "occ_x", 0.0),
        occ_y=cfg.get_float(values, "occ_y", 0.0),
        occ_vx=cfg.get_float(values, "occ_vx", 0.0),
        occ_vy=cfg.get_float(values, "occ_vy", 0.0),
        occ_radius=cfg.get_float(values, "occ_radius", 8.0),
        occ_w=cfg.get_float(values, "occ_w", 16.0),
        occ_h=cfg.get_float(values, "occ_h", 12.0),
        occ_color=occ_color,
    )


def write_scene(scene: GeneratedScene, out_dir, write_gt: bool = True) -> None:
    """Emit a scene as pipeline input fixtures: frames/, masks/, flows/
    (and gt/ renders for scoring)."""
    from pathlib import Path

    from . import io as media_io

    out = Path(out_dir)
    for sub in ("frames", "masks", "flows") + (("gt",) if write_gt else ()):
        (out / sub).mkdir(parents=True, exist_ok=True)
    for t, frame in enumerate(scene.sequence.frames):
        media_io.write_frame(frame, out / "frames" / ("%05d.png" % t))
        media_io.write_mask(scene.sequence.masks[t], out / "masks" / ("%05d.png" % t))
        if write_gt:
            media_io.write_frame(scene.gt_frames[t], out / "gt" / ("%05d.png" % t))
    for t in range(scene.sequence.length - 1):
        media_io.write_flow(scene.fwd_flows[t], out / "flows" / ("fwd_%05d.flo" % t))
        media_io.write_flow(scene.bwd_flows[t], out / "flows" / ("bwd_%05d.flo" % t))


def recurrent_reference_propagation(
    state: PropagationState, flows: CompletedFlows, key: int = 0
) -> tuple[tuple[Image, ...], tuple[Mask, ...]]:
    """Distribute key-frame content by sequential buffer warping (the
    baseline counterpart of the chained-map reference propagation); the
    first frame serves as the key since the baseline has no connection
    ranking."""
    length = state.length
    images = list(state.images)
    masks = list(state.masks)
    buf = np.array(state.images[key].data, dtype=np.float64)
    buf_ok = state.invalid[key].data == 0
    for i in range(key + 1, length):
        flow = flows.bwd[i - 1]  # maps frame i onto frame i-1
        vals, ok = _warp_full(buf, buf_ok, flow)
        hole = masks[i].data != 0
        take = hole & ok
        img = np.array(images[i].data, copy=True)
        img[take] = np.clip(vals[take], 0.0, 1.0).astype(img.dtype)
        images[i] = Image(img)
        masks[i] = Mask((hole & ~take).astype(np.uint8))
        buf = np.array(images[i].data, dtype=np.float64)
        buf_ok = (masks[i].data == 0) & (state.invalid[i].data == 0)
    return tuple(images), tuple(masks)
