"""Unsupervised reconstruction objectives for flow learning.

All losses take and return :class:`~actmap.gradcore.Tensor` values so they can
be back-propagated into the network that produced the flow. Flow tensors are
[N, 2K, H, W] with channel pairs (Vx, Vy); Vx displaces along columns.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import gradcore as gc
from ..gradcore import Tensor


@dataclass(frozen=True)
class CharbonnierParams:
    alpha: float
    epsilon: float = 1e-3

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be nonnegative, got {self.epsilon}")

    def at_zero(self) -> float:
        return (self.epsilon ** 2) ** self.alpha


# loss6 .. loss2, coarse to fine
DEFAULT_SCALE_WEIGHTS = (0.005, 0.01, 0.02, 0.08, 0.32)


@dataclass(frozen=True)
class LossWeights:
    lambda1: float = 1.0
    lambda2: float = 0.1
    lambda3: float = 1.0
    per_scale: tuple[float, ...] = DEFAULT_SCALE_WEIGHTS

    def __post_init__(self):
        vals = (self.lambda1, self.lambda2, self.lambda3, *self.per_scale)
        if any(v < 0 for v in vals):
            raise ValueError("loss weights must be nonnegative")
        if len(self.per_scale) != 5:
            raise ValueError(f"per_scale needs 5 entries (loss6..loss2), got {len(self.per_scale)}")


@dataclass(frozen=True)
class LossConfig:
    pixel: CharbonnierParams = CharbonnierParams(0.4, 1e-3)
    smooth: CharbonnierParams = CharbonnierParams(0.3, 1e-3)
    ssim_window: int = 8
    ssim_c1: float = 0.01 ** 2
    ssim_c2: float = 0.03 ** 2
    weights: LossWeights = field(default_factory=LossWeights)


def charbonnier(x: Tensor, p: CharbonnierParams) -> Tensor:
    """Elementwise (x^2 + eps^2)^alpha."""
    return gc.power(gc.add_scalar(gc.mul(x, x), p.epsilon ** 2), p.alpha)


def _check_same(a: Tensor, b: Tensor, what: str) -> None:
    if a.shape != b.shape:
        raise gc.ShapeError(f"{what}: shapes disagree {a.shape} vs {b.shape}")


def inverse_warp(image, flow) -> Tensor:
    """Reconstruct a frame by sampling ``image`` at (col + Vx, row + Vy).

    ``flow`` is a single pair [N, 2, H, W]. Samples falling outside the image
    are clamped to the border.
    """
    image, flow = gc.as_tensor(image), gc.as_tensor(flow)
    n, _, h, w = image.shape
    if flow.ndim != 4 or flow.shape[1] != 2 or flow.shape[0] != n or flow.shape[2:] != (h, w):
        raise gc.ShapeError(f"flow {flow.shape} does not match image {image.shape}")
    rows, cols = np.mgrid[0:h, 0:w].astype(image.dtype)
    vx = gc.reshape(gc.slice_channels(flow, 0, 1), (n, h, w))
    vy = gc.reshape(gc.slice_channels(flow, 1, 2), (n, h, w))
    sx = gc.add(vx, Tensor(np.broadcast_to(cols, (n, h, w)).copy()))
    sy = gc.add(vy, Tensor(np.broadcast_to(rows, (n, h, w)).copy()))
    return gc.bilinear_sample(image, sx, sy)


def pixel_loss(i1, i2, flow, p: CharbonnierParams) -> Tensor:
    """Mean Charbonnier residual between ``i1`` and ``i2`` warped back by ``flow``."""
    i1, i2 = gc.as_tensor(i1), gc.as_tensor(i2)
    _check_same(i1, i2, "pixel_loss")
    return gc.reduce_mean(charbonnier(gc.sub(i1, inverse_warp(i2, flow)), p))


def smoothness_loss(flow, p: CharbonnierParams) -> Tensor:
    """Charbonnier penalty on forward differences of every flow component.

    Per pixel the four terms (d/dx, d/dy of Vx and Vy) are summed; the result is
    averaged over pixels and over the K pairs held in ``flow``.
    """
    flow = gc.as_tensor(flow)
    n, c, h, w = flow.shape
    if c % 2:
        raise gc.ShapeError(f"flow needs an even channel count, got {c}")
    dx = charbonnier(gc.forward_diff(flow, axis=3), p)
    dy = charbonnier(gc.forward_diff(flow, axis=2), p)
    total = gc.add(gc.reduce_sum(dx), gc.reduce_sum(dy))
    return gc.scale(total, 1.0 / (n * h * w * (c // 2)))


def _box_mean(x: Tensor, window: int) -> Tensor:
    n, c, h, w = x.shape
    flat = gc.reshape(x, (n * c, 1, h, w))
    kernel = Tensor(np.full((1, 1, window, window), 1.0 / window ** 2, dtype=x.dtype))
    out = gc.conv2d(flat, kernel, None, 1, 0)
    return gc.reshape(out, (n, c, h - window + 1, w - window + 1))


def ssim_map(a, b, window: int = 8, c1: float = 0.01 ** 2, c2: float = 0.03 ** 2) -> Tensor:
    """Per-window SSIM over all valid ``window``×``window`` positions."""
    a, b = gc.as_tensor(a), gc.as_tensor(b)
    _check_same(a, b, "ssim")
    h, w = a.shape[2:]
    if window < 1 or window > min(h, w):
        raise ValueError(f"SSIM window {window} exceeds image size {h}x{w}")
    mu_a = _box_mean(a, window)
    mu_b = _box_mean(b, window)
    var_a = gc.sub(_box_mean(gc.mul(a, a), window), gc.mul(mu_a, mu_a))
    var_b = gc.sub(_box_mean(gc.mul(b, b), window), gc.mul(mu_b, mu_b))
    cov = gc.sub(_box_mean(gc.mul(a, b), window), gc.mul(mu_a, mu_b))
    num = gc.mul(gc.add_scalar(gc.scale(gc.mul(mu_a, mu_b), 2.0), c1),
                 gc.add_scalar(gc.scale(cov, 2.0), c2))
    den = gc.mul(gc.add_scalar(gc.add(gc.mul(mu_a, mu_a), gc.mul(mu_b, mu_b)), c1),
                 gc.add_scalar(gc.add(var_a, var_b), c2))
    return gc.mul(num, gc.power(den, -1.0))


def ssim_loss(a, b, window: int = 8, c1: float = 0.01 ** 2, c2: float = 0.03 ** 2) -> Tensor:
    """Mean of (1 - SSIM) over windows and channels; lies in [0, 2]."""
    return gc.reduce_mean(gc.add_scalar(gc.scale(ssim_map(a, b, window, c1, c2), -1.0), 1.0))


def pool_frames(frames: np.ndarray, factor: int) -> np.ndarray:
    if factor == 1:
        return frames
    n, c, h, w = frames.shape
    return frames.reshape(n, c, h // factor, factor, w // factor, factor).mean(axis=(3, 5))


def scale_terms(flow: Tensor, frames: np.ndarray, cfg: LossConfig) -> dict[str, Tensor]:
    """Pixel, smoothness and SSIM terms for one scale.

    ``frames`` must already be pooled to the flow's resolution. Pair terms are
    averaged over the K frame pairs.
    """
    n, c, h, w = flow.shape
    k = c // 2
    if frames.shape[1] != 3 * (k + 1) or frames.shape[2:] != (h, w):
        raise gc.ShapeError(f"frames {frames.shape} do not match flow {flow.shape}")
    window = min(cfg.ssim_window, h, w)
    lam = cfg.weights
    pix, sim = [], []
    for j in range(k):
        i1 = Tensor(frames[:, 3 * j:3 * j + 3])
        i2 = Tensor(frames[:, 3 * j + 3:3 * j + 6])
        v = gc.slice_channels(flow, 2 * j, 2 * j + 2)
        recon = inverse_warp(i2, v)
        if lam.lambda1:
            pix.append(gc.reduce_mean(charbonnier(gc.sub(i1, recon), cfg.pixel)))
        if lam.lambda3:
            sim.append(ssim_loss(i1, recon, window, cfg.ssim_c1, cfg.ssim_c2))
    terms = {}
    if pix:
        terms["pixel"] = gc.scale(_sum(pix), 1.0 / k)
    if lam.lambda2:
        terms["smooth"] = smoothness_loss(flow, cfg.smooth)
    if sim:
        terms["ssim"] = gc.scale(_sum(sim), 1.0 / k)
    return terms


def _sum(items):
    out = items[0]
    for t in items[1:]:
        out = gc.add(out, t)
    return out


def composite_loss(flows, frames, cfg: LossConfig | None = None,
                   return_parts: bool = False):
    """Weighted multi-scale sum of the three reconstruction losses.

    ``flows`` are the five heads ordered coarse to fine (flow6 .. flow2), each
    expressed in pixels of its own resolution. ``frames`` [N, 3F, H, W] are
    average-pooled to each head's resolution.
    """
    cfg = cfg or LossConfig()
    flows = list(flows)
    if len(flows) != 5:
        raise ValueError(f"composite_loss needs 5 flow scales (flow6..flow2), got {len(flows)}")
    frames = frames.data if isinstance(frames, Tensor) else np.asarray(frames)
    h_full = frames.shape[2]
    lam = cfg.weights
    total = None
    parts = {}
    for s, (flow, ws) in enumerate(zip(flows, lam.per_scale)):
        if flow is None:
            raise ValueError(f"missing flow at scale index {s}")
        flow = gc.as_tensor(flow)
        if ws == 0:
            continue
        factor = h_full // flow.shape[2]
        if factor * flow.shape[2] != h_full:
            raise gc.ShapeError(f"flow resolution {flow.shape[2:]} does not divide frames {frames.shape[2:]}")
        terms = scale_terms(flow, pool_frames(frames, factor).astype(flow.dtype, copy=False), cfg)
        parts[6 - s] = {k: v.item() for k, v in terms.items()}
        weighted = []
        for key, lam_k in (("pixel", lam.lambda1), ("smooth", lam.lambda2), ("ssim", lam.lambda3)):
            if key in terms:
                weighted.append(gc.scale(terms[key], lam_k))
        if not weighted:
            continue
        contrib = gc.scale(_sum(weighted), ws)
        total = contrib if total is None else gc.add(total, contrib)
    if total is None:
        total = Tensor(np.zeros((), dtype=flows[-1].dtype if hasattr(flows[-1], "dtype") else np.float64))
    return (total, parts) if return_parts else total
