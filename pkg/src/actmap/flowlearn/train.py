from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import gradcore as gc
from ..gradcore import checkpoint
from .losses import composite_loss
from .motionnet import MotionNet, full_resolution_flow, predict_flows

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    def __init__(self, step: int, value: float):
        super().__init__(f"loss became {value} at step {step}")
        self.step = step
        self.value = value


@dataclass
class FlowTrainConfig:
    """Adam with a halving schedule; the full-scale recipe is lr 3.2e-5 halved every 100k of 400k steps."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    batch_size: int = 16
    halve_every: int | None = None  # None: halve at 25/50/75% of the run
    checkpoint_every: int = 0
    checkpoint_dir: str | None = None
    seed: int = 0

    def schedule(self, steps: int) -> gc.StepDecay:
        period = self.halve_every or max(1, steps // 4)
        return gc.StepDecay.every(self.lr, period, max(steps, 1), 0.5)


def train_motionnet(net: MotionNet, clips: np.ndarray, steps: int,
                    cfg: FlowTrainConfig | None = None, augment=None) -> list[float]:
    """Minimise the composite reconstruction loss; returns the per-step loss trace.

    ``clips`` is [N, 3F, H, W]. ``augment(batch, rng)`` may transform each batch.
    """
    cfg = cfg or FlowTrainConfig()
    clips = np.asarray(clips)
    if len(clips) == 0:
        raise ValueError("training set is empty")
    if steps <= 0:
        return []
    rng = np.random.default_rng(cfg.seed)
    opt = gc.Adam(net.params, lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2)
    sched = cfg.schedule(steps)
    trace: list[float] = []
    bs = min(cfg.batch_size, len(clips))
    order = rng.permutation(len(clips))
    cursor = 0
    for step in range(steps):
        if cursor + bs > len(order):
            order = rng.permutation(len(clips))
            cursor = 0
        batch = clips[order[cursor:cursor + bs]]
        cursor += bs
        if augment is not None:
            batch = augment(batch, rng)
        batch = batch.astype(net.params.dtype, copy=False)
        net.params.zero_grad()
        loss = composite_loss(net.forward(batch), batch, net.cfg.loss)
        value = loss.item()
        if not math.isfinite(value):
            raise TrainingDiverged(step, value)
        loss.backward()
        opt.step(sched(step))
        trace.append(value)
        if cfg.checkpoint_every and cfg.checkpoint_dir and (step + 1) % cfg.checkpoint_every == 0:
            checkpoint.save(Path(cfg.checkpoint_dir) / f"motionnet_{step + 1:06d}.ckpt", net.state_dict())
        if step % 100 == 0:
            log.info("motionnet step %d loss %.5f", step, value)
    return trace


def evaluate_epe(net: MotionNet, frames: np.ndarray, flows: np.ndarray, batch_size: int = 32,
                 mask: np.ndarray | None = None) -> float:
    """Mean endpoint error of the finest head, resized to full resolution."""
    from ..synthbench.metrics import endpoint_error

    size = tuple(frames.shape[2:])
    preds = []
    for i in range(0, len(frames), batch_size):
        fl = predict_flows(net, frames[i:i + batch_size].astype(net.params.dtype))[-1]
        preds.append(full_resolution_flow(fl, size))
    pred = np.concatenate(preds)
    if mask is not None:
        pred = pred[..., mask]
        flows = flows[..., mask]
        d = pred - flows
        return float(np.sqrt(d[:, 0::2] ** 2 + d[:, 1::2] ** 2).mean())
    return endpoint_error(pred, flows)
