"""MotionNet: a multi-scale encoder-decoder that predicts stacked optical flow.

The wiring follows the flow-network half of the stacked temporal stream
table: twelve encoder convolutions (stride 2 at conv2..conv6), a flow head at
every decoder level, and decoder blocks that concatenate the up-sampled
features, the up-sampled coarser flow and the matching encoder feature map.
Every channel count is multiplied by ``width_scale`` and rounded up.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .. import gradcore as gc
from ..gradcore import ParameterSet, Tensor
from .losses import LossConfig

# name, stride, output channels at width_scale = 1
ENCODER = (
    ("conv1", 1, 64), ("conv1_1", 1, 64),
    ("conv2", 2, 128), ("conv2_1", 1, 128),
    ("conv3", 2, 256), ("conv3_1", 1, 256),
    ("conv4", 2, 512), ("conv4_1", 1, 512),
    ("conv5", 2, 512), ("conv5_1", 1, 512),
    ("conv6", 2, 1024), ("conv6_1", 1, 1024),
)
# decoder level -> width of deconv{l} / xconv{l} at width_scale = 1
DECODER = ((5, 512), (4, 256), (3, 128), (2, 64))
LEAKY_SLOPE = 0.1


def scaled(channels: int, width_scale: float) -> int:
    return max(1, math.ceil(channels * width_scale - 1e-9))


@dataclass(frozen=True)
class MotionNetConfig:
    width_scale: float = 0.125
    frame_count: int = 3
    input_resolution: tuple[int, int] = (32, 32)
    loss: LossConfig = field(default_factory=LossConfig)
    flow_head_init: float = 0.1
    input_offset: float = 0.5  # centres [0, 1] frames on zero

    def __post_init__(self):
        if not 0 < self.width_scale <= 1:
            raise ValueError(f"width_scale must lie in (0, 1], got {self.width_scale}")
        if self.frame_count < 2:
            raise ValueError("MotionNet needs at least two frames")
        h, w = self.input_resolution
        if h % 32 or w % 32:
            raise ValueError(f"input resolution {h}x{w} must be divisible by 32 (five stride-2 stages)")

    @property
    def pairs(self) -> int:
        return self.frame_count - 1

    @property
    def flow_channels(self) -> int:
        return 2 * self.pairs


class LayerRow(NamedTuple):
    name: str
    kernel: int
    stride: int
    c_in: int
    c_out: int
    in_res: tuple[int, int]
    out_res: tuple[int, int]
    source: str


def architecture(cfg: MotionNetConfig) -> list[LayerRow]:
    """Layer table (kernel, stride, channels, resolutions) implied by ``cfg``."""
    rows: list[LayerRow] = []
    h, w = cfg.input_resolution
    c = 3 * cfg.frame_count
    src = "frames"
    enc_out: dict[str, tuple[int, tuple[int, int]]] = {}
    for name, stride, ch in ENCODER:
        out = scaled(ch, cfg.width_scale)
        oh, ow = (h + 2 - 3) // stride + 1, (w + 2 - 3) // stride + 1
        rows.append(LayerRow(name, 3, stride, c, out, (h, w), (oh, ow), src))
        enc_out[name] = (out, (oh, ow))
        c, h, w, src = out, oh, ow, name
    fc = cfg.flow_channels
    rows.append(LayerRow("flow6", 3, 1, c, fc, (h, w), (h, w), src))
    for level, ch in DECODER:
        out = scaled(ch, cfg.width_scale)
        rows.append(LayerRow(f"deconv{level}", 4, 2, c, out, (h, w), (2 * h, 2 * w), src))
        h, w = 2 * h, 2 * w
        skip_c, _ = enc_out[f"conv{level}_1"]
        cin = out + fc + skip_c
        rows.append(LayerRow(f"xconv{level}", 3, 1, cin, out, (h, w), (h, w),
                             f"deconv{level}+flow{level + 1}+conv{level}_1"))
        rows.append(LayerRow(f"flow{level}", 3, 1, out, fc, (h, w), (h, w), f"xconv{level}"))
        c, src = out, f"xconv{level}"
    return rows


def upsample_flow(flow: Tensor, size: tuple[int, int]) -> Tensor:
    """Bilinear resize of a flow field with displacements rescaled to the new grid."""
    factor = size[0] / flow.shape[2]
    return gc.scale(gc.resize_bilinear(flow, size), factor)


class MotionNet:
    def __init__(self, cfg: MotionNetConfig, seed: int = 0, dtype=np.float64):
        self.cfg = cfg
        self.rows = {r.name: r for r in architecture(cfg)}
        self.params = ParameterSet(dtype)
        rng = np.random.default_rng(seed)
        for r in self.rows.values():
            if r.name.startswith("deconv"):
                w = gc.he_normal(rng, (r.c_in, r.c_out, 4, 4), r.c_in * 4)
                self.params.add(f"{r.name}.weight", w)
                continue
            w = gc.he_normal(rng, (r.c_out, r.c_in, 3, 3), r.c_in * 9)
            if r.name.startswith("flow"):
                w *= cfg.flow_head_init
            self.params.add(f"{r.name}.weight", w)
            self.params.add(f"{r.name}.bias", np.zeros(r.c_out))

    def _conv(self, name: str, x: Tensor, relu: bool = True) -> Tensor:
        r = self.rows[name]
        y = gc.conv2d(x, self.params[f"{name}.weight"], self.params[f"{name}.bias"], r.stride, 1)
        return gc.leaky_relu(y, LEAKY_SLOPE) if relu else y

    def forward(self, frames) -> list[Tensor]:
        """Flows flow6 .. flow2, each in pixels of its own resolution."""
        x = gc.as_tensor(frames)
        cfg = self.cfg
        expect = (3 * cfg.frame_count, *cfg.input_resolution)
        if x.ndim != 4 or x.shape[1:] != expect:
            raise gc.ShapeError(f"MotionNet expects [N, {expect[0]}, {expect[1]}, {expect[2]}], got {x.shape}")
        if x.dtype != self.params.dtype:
            x = Tensor(x.data.astype(self.params.dtype)) if x.node is None else x
        if cfg.input_offset:
            x = gc.add_scalar(x, -cfg.input_offset)
        feats = {}
        for name, _, _ in ENCODER:
            x = self._conv(name, x)
            feats[name] = x
        flow = self._conv("flow6", x, relu=False)
        flows = [flow]
        for level, _ in DECODER:
            up = gc.leaky_relu(gc.deconv2d(x, self.params[f"deconv{level}.weight"]), LEAKY_SLOPE)
            skip = feats[f"conv{level}_1"]
            uflow = upsample_flow(flow, skip.shape[2:])
            x = self._conv(f"xconv{level}", gc.concat([up, uflow, skip], axis=1))
            flow = self._conv(f"flow{level}", x, relu=False)
            flows.append(flow)
        return flows

    __call__ = forward

    def zero_flow_heads(self) -> None:
        for name in ("flow6", "flow5", "flow4", "flow3", "flow2"):
            self.params[f"{name}.weight"].data[...] = 0.0
            self.params[f"{name}.bias"].data[...] = 0.0

    def state_dict(self) -> dict[str, np.ndarray]:
        return self.params.state_dict()

    def load_state_dict(self, state) -> None:
        self.params.load_state_dict(state)


def build_motionnet(cfg: MotionNetConfig, seed: int = 0, dtype=np.float64) -> MotionNet:
    return MotionNet(cfg, seed=seed, dtype=dtype)


def predict_flows(net: MotionNet, frames) -> list[Tensor]:
    """Inference-mode forward pass (no tape)."""
    with gc.no_grad():
        return net.forward(frames)


def full_resolution_flow(flow, size: tuple[int, int]) -> np.ndarray:
    """Finest-head flow resized to ``size`` in full-resolution pixels."""
    with gc.no_grad():
        return upsample_flow(gc.as_tensor(flow), size).data
