"""VGG-style spatial and temporal classification streams."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .. import gradcore as gc
from ..gradcore import ParameterSet, Tensor

# (name, output channels at width_scale = 1); "pool" rows are 2x2 max pools
VGG16 = (
    ("conv1_1", 64), ("conv1_2", 64), ("pool1", 0),
    ("conv2_1", 128), ("conv2_2", 128), ("pool2", 0),
    ("conv3_1", 256), ("conv3_2", 256), ("conv3_3", 256), ("pool3", 0),
    ("conv4_1", 512), ("conv4_2", 512), ("conv4_3", 512), ("pool4", 0),
    ("conv5_1", 512), ("conv5_2", 512), ("conv5_3", 512), ("pool5", 0),
)
FC_WIDTH = 4096
FLOW_BOUND = 20.0


def _scaled(ch: int, width_scale: float) -> int:
    return max(1, math.ceil(ch * width_scale - 1e-9))


@dataclass(frozen=True)
class StreamConfig:
    width_scale: float = 0.125
    input_resolution: tuple[int, int] = (32, 32)
    num_classes: int = 10
    fusion_weights: tuple[float, float] = (1.0, 1.5)
    dropout: float = 0.5
    flow_bound: float = FLOW_BOUND
    input_mean: float = 0.5  # subtracted from every input, as in VGG preprocessing

    def __post_init__(self):
        if not 0 < self.width_scale <= 1:
            raise ValueError(f"width_scale must lie in (0, 1], got {self.width_scale}")
        h, w = self.input_resolution
        if h % 32 or w % 32 or h <= 0 or w <= 0:
            raise ValueError(f"input resolution {h}x{w} is incompatible with 5 pooling stages (needs multiples of 32)")
        if self.num_classes < 2:
            raise ValueError("need at least two classes")
        if len(self.fusion_weights) != 2 or min(self.fusion_weights) <= 0:
            raise ValueError("fusion weights must be two positive numbers")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must lie in [0, 1)")


class StreamRow(NamedTuple):
    name: str
    kind: str  # conv | pool | fc
    kernel: int
    c_in: int
    c_out: int
    out_res: tuple[int, int]


def stream_architecture(cfg: StreamConfig, in_channels: int) -> list[StreamRow]:
    rows = []
    c = in_channels
    h, w = cfg.input_resolution
    for name, ch in VGG16:
        if name.startswith("pool"):
            h, w = h // 2, w // 2
            rows.append(StreamRow(name, "pool", 2, c, c, (h, w)))
        else:
            out = _scaled(ch, cfg.width_scale)
            rows.append(StreamRow(name, "conv", 3, c, out, (h, w)))
            c = out
    fc = _scaled(FC_WIDTH, cfg.width_scale)
    rows.append(StreamRow("fc6", "fc", h, c, fc, (1, 1)))
    rows.append(StreamRow("fc7", "fc", 1, fc, fc, (1, 1)))
    rows.append(StreamRow("fc8", "fc", 1, fc, cfg.num_classes, (1, 1)))
    return rows


class Stream:
    """A VGG-16-shaped classifier; the fully connected layers are convolutions."""

    def __init__(self, cfg: StreamConfig, in_channels: int, seed: int = 0, dtype=np.float32, name: str = "stream"):
        self.cfg = cfg
        self.in_channels = in_channels
        self.name = name
        self.rows = stream_architecture(cfg, in_channels)
        self.params = ParameterSet(dtype)
        rng = np.random.default_rng(seed)
        for r in self.rows:
            if r.kind == "pool":
                continue
            fan_in = r.c_in * r.kernel * r.kernel
            w = gc.he_normal(rng, (r.c_out, r.c_in, r.kernel, r.kernel), fan_in)
            if r.name == "fc8":
                w *= 0.1
            self.params.add(f"{r.name}.weight", w)
            self.params.add(f"{r.name}.bias", np.zeros(r.c_out))

    def forward(self, x, train: bool = False, rng: np.random.Generator | None = None) -> Tensor:
        """Class logits [N, M]. Dropout after fc6 and fc7 is applied only when ``train``."""
        x = gc.as_tensor(x)
        h, w = self.cfg.input_resolution
        if x.ndim != 4 or x.shape[1:] != (self.in_channels, h, w):
            raise gc.ShapeError(f"{self.name} expects [N, {self.in_channels}, {h}, {w}], got {x.shape}")
        if x.dtype != self.params.dtype and x.node is None:
            x = Tensor(x.data.astype(self.params.dtype))
        if self.cfg.input_mean:
            x = gc.add_scalar(x, -self.cfg.input_mean)
        for r in self.rows:
            if r.kind == "pool":
                x = gc.maxpool2d(x, 2, 2)
                continue
            pad = 1 if r.kind == "conv" else 0
            x = gc.conv2d(x, self.params[f"{r.name}.weight"], self.params[f"{r.name}.bias"], 1, pad)
            if r.name != "fc8":
                x = gc.relu(x)
                if r.name in ("fc6", "fc7") and train and self.cfg.dropout > 0:
                    x = dropout(x, self.cfg.dropout, rng or np.random.default_rng())
        return gc.reshape(x, (x.shape[0], self.cfg.num_classes))

    __call__ = forward

    def state_dict(self):
        return self.params.state_dict()

    def load_state_dict(self, state):
        self.params.load_state_dict(state)


def dropout(x: Tensor, p: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout: surviving units are scaled by 1 / (1 - p)."""
    keep = (rng.uniform(size=x.shape) >= p).astype(x.dtype) / (1.0 - p)
    return gc.mul(x, Tensor(keep))


def build_spatial_stream(cfg: StreamConfig, seed: int = 0, dtype=np.float32) -> Stream:
    return Stream(cfg, 3, seed, dtype, "spatial")


def build_temporal_stream(cfg: StreamConfig, flow_channels: int, seed: int = 0, dtype=np.float32) -> Stream:
    return Stream(cfg, flow_channels, seed, dtype, "temporal")


def flow_normalize(flow2, size: tuple[int, int], bound: float = FLOW_BOUND) -> Tensor:
    """Clip to [-bound, bound], map affinely to [0, 1] and resize bilinearly to ``size``."""
    flow2 = gc.as_tensor(flow2)
    x = gc.clip(flow2, -bound, bound)
    x = gc.add_scalar(gc.scale(x, 1.0 / (2 * bound)), 0.5)
    if tuple(x.shape[2:]) != tuple(size):
        x = gc.resize_bilinear(x, tuple(size))
    return x
