"""Clip augmentation: horizontal flip plus corner / centre crops at several scales."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CORNERS = ("top_left", "top_right", "bottom_left", "bottom_right", "centre")


@dataclass(frozen=True)
class AugmentSwitches:
    flip: bool = True
    corner_crop: bool = True
    scales: tuple[float, ...] = (1.0, 0.875, 0.75)

    def __post_init__(self):
        if not self.scales or any(not 0 < s <= 1 for s in self.scales):
            raise ValueError(f"crop scales must lie in (0, 1], got {self.scales}")


def flip_clip(clip: np.ndarray, flow: np.ndarray | None = None):
    """Mirror every frame left-right; attached flow is mirrored and its Vx negated."""
    out = clip[..., ::-1].copy()
    if flow is None:
        return out, None
    f = flow[..., ::-1].copy()
    f[..., 0::2, :, :] *= -1
    return out, f


def _resize_matrix(n_out: int, n_in: int) -> np.ndarray:
    """Bilinear interpolation matrix with half-pixel centres and edge clamping."""
    m = np.zeros((n_out, n_in))
    for i in range(n_out):
        x = (i + 0.5) * n_in / n_out - 0.5
        x = min(max(x, 0.0), n_in - 1)
        lo = min(int(np.floor(x)), n_in - 1)
        hi = min(lo + 1, n_in - 1)
        t = x - lo
        m[i, lo] += 1 - t
        m[i, hi] += t
    return m


def resize(stack: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """Bilinear resize of [..., H, W] arrays."""
    h, w = stack.shape[-2:]
    if (h, w) == tuple(size):
        return stack.copy()
    ry = _resize_matrix(size[0], h)
    rx = _resize_matrix(size[1], w)
    return np.einsum("ih,...hw,jw->...ij", ry, stack, rx)


def crop_box(shape: tuple[int, int], scale: float, corner: str) -> tuple[int, int, int, int]:
    h, w = shape
    ch, cw = max(1, int(round(h * scale))), max(1, int(round(w * scale)))
    if corner not in CORNERS:
        raise ValueError(f"unknown crop position {corner!r}")
    top = 0 if corner.startswith("top") else h - ch if corner.startswith("bottom") else (h - ch) // 2
    left = 0 if corner.endswith("left") else w - cw if corner.endswith("right") else (w - cw) // 2
    return top, left, ch, cw


def crop_resize(clip: np.ndarray, box, size, flow: np.ndarray | None = None):
    top, left, ch, cw = box
    out = resize(clip[..., top:top + ch, left:left + cw], size)
    if flow is None:
        return out, None
    f = resize(flow[..., top:top + ch, left:left + cw], size)
    f[..., 0::2, :, :] *= size[1] / cw  # displacements follow the pixel grid
    f[..., 1::2, :, :] *= size[0] / ch
    return out, f


def augment(clip: np.ndarray, rng: np.random.Generator, switches: AugmentSwitches = AugmentSwitches(),
            size: tuple[int, int] | None = None, flow: np.ndarray | None = None):
    """Apply one random flip / crop to every frame of ``clip`` [..., 3F, H, W].

    Returns (clip, flow); ``flow`` is None when none was given.
    """
    size = tuple(size or clip.shape[-2:])
    if switches.flip and rng.uniform() < 0.5:
        clip, flow = flip_clip(clip, flow)
    if switches.corner_crop:
        scale = switches.scales[int(rng.integers(len(switches.scales)))]
        corner = CORNERS[int(rng.integers(len(CORNERS)))]
        if scale * min(clip.shape[-2:]) > 0:
            clip, flow = crop_resize(clip, crop_box(clip.shape[-2:], scale, corner), size, flow)
    elif clip.shape[-2:] != size:
        clip, flow = crop_resize(clip, (0, 0, *clip.shape[-2:]), size, flow)
    return clip, flow


def augment_batch(batch: np.ndarray, rng: np.random.Generator, switches: AugmentSwitches = AugmentSwitches(),
                  size: tuple[int, int] | None = None) -> np.ndarray:
    return np.stack([augment(c, rng, switches, size)[0] for c in batch]).astype(batch.dtype, copy=False)
