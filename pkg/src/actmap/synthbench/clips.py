"""Synthetic clips with exact ground-truth flow."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

FLOW_BOUND = 20.0
TEXTURES = ("noise", "ramp", "checker")


@dataclass(frozen=True)
class SyntheticClipSpec:
    texture: str = "noise"
    velocity: tuple[float, float] = (0.0, 0.0)
    frame_count: int = 3
    resolution: tuple[int, int] = (32, 32)
    seed: int = 0
    tint: tuple[float, float, float] = (1.0, 1.0, 1.0)
    smoothing: float = 1.5
    bound: float = FLOW_BOUND

    def __post_init__(self):
        if self.texture not in TEXTURES:
            raise ValueError(f"unknown texture {self.texture!r}; expected one of {TEXTURES}")
        if math.hypot(*self.velocity) > self.bound:
            raise ValueError(f"|velocity| {math.hypot(*self.velocity):.3f} exceeds bound {self.bound}")
        if self.frame_count < 2:
            raise ValueError("a clip needs at least two frames")


def make_texture(kind: str, shape: tuple[int, int], rng: np.random.Generator,
                 smoothing: float = 1.5, tint=(1.0, 1.0, 1.0)) -> np.ndarray:
    """A [3, H, W] texture with values in [0, 1]."""
    h, w = shape
    if kind == "noise":
        base = rng.normal(size=(3, h, w))
        base = np.stack([gaussian_filter(c, smoothing, mode="wrap") for c in base])
        lo, hi = base.min(axis=(1, 2), keepdims=True), base.max(axis=(1, 2), keepdims=True)
        tex = (base - lo) / np.maximum(hi - lo, 1e-12)
    elif kind == "ramp":
        ramp = np.broadcast_to(np.arange(w, dtype=float) / max(w - 1, 1), (h, w))
        tex = np.stack([ramp] * 3)
    elif kind == "checker":
        period = 8
        yy, xx = np.mgrid[0:h, 0:w]
        phase = rng.integers(0, period, size=2)
        board = (((yy + phase[0]) // (period // 2) + (xx + phase[1]) // (period // 2)) % 2).astype(float)
        board = gaussian_filter(board, 0.75)
        tex = np.stack([board] * 3)
    else:
        raise ValueError(f"unknown texture {kind!r}")
    return np.clip(tex * np.asarray(tint, dtype=float)[:, None, None], 0.0, 1.0)


def sample_translated(canvas: np.ndarray, ox: float, oy: float, size: tuple[int, int]) -> np.ndarray:
    """Bilinear crop of ``canvas`` [C,Hc,Wc] whose top-left sits at (ox, oy), border clamped."""
    h, w = size
    _, hc, wc = canvas.shape
    ys = np.clip(np.arange(h) + oy, 0, hc - 1)
    xs = np.clip(np.arange(w) + ox, 0, wc - 1)
    y0 = np.minimum(np.floor(ys).astype(int), hc - 2)
    x0 = np.minimum(np.floor(xs).astype(int), wc - 2)
    ty = (ys - y0)[:, None]
    tx = (xs - x0)[None, :]
    a = canvas[:, y0][:, :, x0]
    b = canvas[:, y0][:, :, x0 + 1]
    c = canvas[:, y0 + 1][:, :, x0]
    d = canvas[:, y0 + 1][:, :, x0 + 1]
    return (1 - ty) * (1 - tx) * a + (1 - ty) * tx * b + ty * (1 - tx) * c + ty * tx * d


def render_motion(texture_canvas: np.ndarray, displacements: np.ndarray, size: tuple[int, int],
                  margin: int) -> np.ndarray:
    """Frames whose content at step t is shifted by ``displacements[t]`` (pixels)."""
    frames = [sample_translated(texture_canvas, margin - dx, margin - dy, size) for dx, dy in displacements]
    return np.concatenate(frames, axis=0)


def gen_clip(spec: SyntheticClipSpec) -> tuple[np.ndarray, np.ndarray]:
    """Return (frames [3F,H,W], flow [2(F-1),H,W]) for a constant-velocity clip.

    Frame t+1 is frame t translated by the velocity, so the true flow at every
    pixel (sampling frame t+1 at x + v reproduces frame t) equals the velocity.
    """
    rng = np.random.default_rng(spec.seed)
    vx, vy = spec.velocity
    h, w = spec.resolution
    f = spec.frame_count
    margin = int(math.ceil((f - 1) * max(abs(vx), abs(vy)))) + 2
    canvas = make_texture(spec.texture, (h + 2 * margin, w + 2 * margin), rng, spec.smoothing, spec.tint)
    disp = np.array([(t * vx, t * vy) for t in range(f)])
    frames = render_motion(canvas, disp, (h, w), margin)
    flow = np.empty((2 * (f - 1), h, w))
    flow[0::2] = vx
    flow[1::2] = vy
    return frames, flow


def interior_mask(shape: tuple[int, int], velocity) -> np.ndarray:
    """Pixels at least ceil(|v|) + 1 away from every border."""
    m = int(math.ceil(math.hypot(*velocity))) + 1
    mask = np.zeros(shape, dtype=bool)
    mask[m:shape[0] - m, m:shape[1] - m] = True
    return mask


def random_velocity(rng: np.random.Generator, max_speed: float) -> tuple[float, float]:
    r = max_speed * math.sqrt(rng.uniform())
    theta = rng.uniform(0, 2 * math.pi)
    return (r * math.cos(theta), r * math.sin(theta))


def gen_flow_dataset(n: int, max_speed: float = 3.0, frame_count: int = 3,
                     resolution=(32, 32), seed: int = 0, texture: str = "noise",
                     smoothing: float = 1.5) -> tuple[np.ndarray, np.ndarray]:
    """``n`` constant-velocity clips with |v| <= ``max_speed``; returns (frames, flows)."""
    rng = np.random.default_rng(seed)
    frames, flows = [], []
    for _ in range(n):
        spec = SyntheticClipSpec(texture, random_velocity(rng, max_speed), frame_count, tuple(resolution),
                                 int(rng.integers(2 ** 31)), smoothing=smoothing)
        fr, fl = gen_clip(spec)
        frames.append(fr)
        flows.append(fl)
    return np.stack(frames), np.stack(flows)
