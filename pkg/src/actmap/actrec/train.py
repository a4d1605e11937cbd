"""Stream training: SGD with momentum under step-decay schedules expressed as
fractions of a (scalable) step horizon."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .. import gradcore as gc
from ..flowlearn import TrainingDiverged, composite_loss
from .augment import AugmentSwitches, augment_batch
from .pipeline import TwoStream

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainSchedule:
    """One stream's optimisation recipe.

    ``decay_at`` holds fractions of ``steps``; ``motionnet_lr_ratio`` scales the
    learning rate of the MotionNet weights below the temporal head (ignored for
    the spatial stream).
    """

    steps: int = 250
    lr: float = 5e-3
    optimizer: str = "sgd_momentum"
    momentum: float = 0.9
    decay_at: tuple[float, ...] = (0.4, 0.8)
    decay_factor: float = 0.1
    batch_size: int = 32
    motionnet_lr_ratio: float = 1e-3
    augment: AugmentSwitches | None = field(default_factory=AugmentSwitches)
    clip_grad_norm: float | None = 5.0
    flow_loss_weight: float = 0.0  # optional reconstruction term that keeps MotionNet honest
    weight_decay: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.steps < 0:
            raise ValueError("steps must be non-negative")
        if self.lr <= 0 or self.motionnet_lr_ratio <= 0:
            raise ValueError("learning rates must be positive")
        if self.optimizer not in ("sgd_momentum", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if any(not 0 < f < 1 for f in self.decay_at) or any(b <= a for a, b in zip(self.decay_at, self.decay_at[1:])):
            raise ValueError(f"decay points must be increasing fractions in (0, 1), got {self.decay_at}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")

    def milestones(self) -> list[int]:
        return sorted({max(1, int(round(f * self.steps))) for f in self.decay_at})

    def lr_at(self, step: int) -> float:
        return gc.StepDecay(self.lr, self.milestones(), self.decay_factor)(step)


def spatial_schedule(steps: int = 250, **kw) -> TrainSchedule:
    """/10 at 40% and 80% of the horizon."""
    return TrainSchedule(steps=steps, decay_at=(0.4, 0.8), **kw)


def temporal_schedule(steps: int = 250, **kw) -> TrainSchedule:
    """/10 at 5/16 and 10/16 of the horizon; MotionNet learns 1000x slower than the head."""
    return TrainSchedule(steps=steps, decay_at=(5 / 16, 10 / 16), **kw)


@dataclass
class TrainTrace:
    loss: list[float] = field(default_factory=list)
    train_accuracy: list[float] = field(default_factory=list)
    val_accuracy: list[tuple[int, float]] = field(default_factory=list)


@dataclass
class TwoStreamTraces:
    spatial: TrainTrace
    temporal: TrainTrace


def clip_gradients(param_sets, max_norm: float | None) -> float:
    """Rescale all gradients so their joint L2 norm is at most ``max_norm``; returns the norm before clipping."""
    grads = [p.grad for ps in param_sets for p in ps if p.grad is not None]
    norm = math.sqrt(sum(float(np.sum(g.astype(np.float64) ** 2)) for g in grads))
    if max_norm is not None and norm > max_norm and math.isfinite(norm):
        s = max_norm / norm
        for ps in param_sets:
            for p in ps:
                if p.grad is not None:
                    p.tensor.grad = p.grad * s
    return norm


def _optimizer(kind: str, params: gc.ParameterSet, lr: float, sched: TrainSchedule):
    if kind == "adam":
        return gc.Adam(params, lr=lr)
    return gc.SGDMomentum(params, lr=lr, momentum=sched.momentum, weight_decay=sched.weight_decay)


def _batches(n: int, bs: int, rng: np.random.Generator):
    order, cursor = rng.permutation(n), 0
    while True:
        if cursor + bs > n:
            order, cursor = rng.permutation(n), 0
        yield order[cursor:cursor + bs]
        cursor += bs


def _unpack(dataset):
    if hasattr(dataset, "frames"):
        return np.asarray(dataset.frames), np.asarray(dataset.labels)
    frames, labels = dataset
    return np.asarray(frames), np.asarray(labels)


def _run(streams: TwoStream, which: str, frames, labels, sched: TrainSchedule, val, eval_every: int) -> TrainTrace:
    trace = TrainTrace()
    if sched.steps == 0:
        return trace
    rng = np.random.default_rng(sched.seed)
    net = streams.spatial if which == "spatial" else streams.temporal
    opts = [(net.params, _optimizer(sched.optimizer, net.params, sched.lr, sched), 1.0)]
    if which == "temporal":
        mn = streams.motionnet.params
        opts.append((mn, _optimizer(sched.optimizer, mn, sched.lr, sched), sched.motionnet_lr_ratio))
    bs = min(sched.batch_size, len(frames))
    batches = _batches(len(frames), bs, rng)
    size = streams.cfg.input_resolution
    for step in range(sched.steps):
        idx = next(batches)
        batch = frames[idx]
        if sched.augment is not None:
            batch = augment_batch(batch, rng, sched.augment, size)
        batch = batch.astype(streams.dtype, copy=False)
        y = labels[idx]
        for ps, _, _ in opts:
            ps.zero_grad()
        if which == "spatial":
            logits = net.forward(streams.centre_frame(batch), train=True, rng=rng)
            loss = gc.softmax_cross_entropy(logits, y)
        else:
            logits, flows = streams.temporal_logits(batch, train=True, rng=rng, return_flows=True)
            loss = gc.softmax_cross_entropy(logits, y)
            if sched.flow_loss_weight:
                aux = composite_loss(flows, batch, streams.motion_cfg.loss)
                loss = gc.add(loss, gc.scale(aux, sched.flow_loss_weight))
        value = loss.item()
        if not math.isfinite(value):
            raise TrainingDiverged(step, value)
        loss.backward()
        clip_gradients([ps for ps, _, _ in opts], sched.clip_grad_norm)
        lr = sched.lr_at(step)
        for _, opt, ratio in opts:
            opt.step(lr * ratio)
        trace.loss.append(value)
        trace.train_accuracy.append(float(np.mean(logits.data.argmax(axis=1) == y)))
        if val is not None and eval_every and ((step + 1) % eval_every == 0 or step + 1 == sched.steps):
            acc = _stream_accuracy(streams, which, *val)
            trace.val_accuracy.append((step + 1, acc))
            log.info("%s step %d loss %.4f val %.3f", which, step + 1, value, acc)
    return trace


def _stream_accuracy(streams: TwoStream, which: str, frames, labels) -> float:
    sc = streams.score_batch(frames)
    probs = sc.spatial if which == "spatial" else sc.temporal
    return float(np.mean(probs.argmax(axis=1) == labels))


def train_two_stream(streams: TwoStream, dataset, schedules: tuple[TrainSchedule, TrainSchedule] | None = None,
                     val=None, eval_every: int = 0) -> TwoStreamTraces:
    """Train the spatial stream, then the stacked temporal stream (MotionNet included).

    ``dataset`` is an object with ``frames`` / ``labels`` or a (frames, labels)
    pair; ``val`` likewise, used only for the accuracy traces.
    """
    frames, labels = _unpack(dataset)
    if len(frames) == 0:
        raise ValueError("training set is empty")
    if len(frames) != len(labels):
        raise ValueError("frames and labels differ in length")
    if labels.min() < 0 or labels.max() >= streams.cfg.num_classes:
        raise ValueError("labels fall outside the configured class range")
    streams._check(frames[:1])
    sp, tp = schedules or (spatial_schedule(), temporal_schedule())
    val = _unpack(val) if val is not None else None
    return TwoStreamTraces(_run(streams, "spatial", frames, labels, sp, val, eval_every),
                           _run(streams, "temporal", frames, labels, tp, val, eval_every))
