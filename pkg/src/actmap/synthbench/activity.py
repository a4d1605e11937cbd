"""Labelled synthetic activity clips: each class is a motion signature paired
with an appearance signature, so motion-only distinctions can be made
deliberately invisible to a single frame."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .clips import make_texture, render_motion


@dataclass(frozen=True)
class MotionSignature:
    direction: float = 0.0  # radians, 0 = +x (rightwards), pi/2 = +y (downwards)
    speed: float = 2.0  # pixels per frame
    oscillation: bool = False  # reverse direction on every other frame

    def displacements(self, frame_count: int, speed: float, direction: float) -> np.ndarray:
        vx, vy = speed * math.cos(direction), speed * math.sin(direction)
        if self.oscillation:
            steps = [(t % 2) for t in range(frame_count)]
        else:
            steps = list(range(frame_count))
        return np.array([(s * vx, s * vy) for s in steps], dtype=float)


@dataclass(frozen=True)
class AppearanceSignature:
    texture: str = "noise"
    tint: tuple[float, float, float] = (1.0, 1.0, 1.0)


@dataclass(frozen=True)
class SyntheticActivitySpec:
    class_id: int
    motion: MotionSignature
    appearance: AppearanceSignature
    count: int
    name: str = ""
    speed_jitter: float = 0.15
    direction_jitter: float = 0.2


GRAY = (1.0, 1.0, 1.0)


def default_activity_specs(count: int = 60, ambiguous: bool = False, speed: float = 2.5) -> list[SyntheticActivitySpec]:
    """Four classes; "rise" and "shake" share appearance and differ only in motion.

    With ``ambiguous=True`` every class gets the same appearance, so only the
    motion signature separates them.
    """
    tints = [(1.0, 0.35, 0.35), (0.35, 1.0, 0.35), (0.35, 0.35, 1.0), (0.35, 0.35, 1.0)]
    motions = [
        ("pan-right", MotionSignature(0.0, speed)),
        ("pan-down", MotionSignature(math.pi / 2, speed)),
        ("rise", MotionSignature(-math.pi / 2, speed)),
        ("shake", MotionSignature(0.0, speed, oscillation=True)),
    ]
    return [SyntheticActivitySpec(i, m, AppearanceSignature("noise", GRAY if ambiguous else tints[i]), count, name)
            for i, (name, m) in enumerate(motions)]


@dataclass
class ActivityDataset:
    frames: np.ndarray  # [n, 3F, H, W]
    flows: np.ndarray  # [n, 2K, H, W] ground-truth per-pair flow
    labels: np.ndarray
    ids: list[str]
    splits: list[str]
    class_names: list[str] = field(default_factory=list)

    def subset(self, split: str) -> "ActivityDataset":
        keep = [i for i, s in enumerate(self.splits) if s == split]
        return ActivityDataset(self.frames[keep], self.flows[keep], self.labels[keep],
                               [self.ids[i] for i in keep], [split] * len(keep), self.class_names)

    @property
    def train(self) -> "ActivityDataset":
        return self.subset("train")

    @property
    def val(self) -> "ActivityDataset":
        return self.subset("val")

    def __len__(self) -> int:
        return len(self.labels)


def render_activity_clip(spec: SyntheticActivitySpec, rng: np.random.Generator, frame_count: int,
                         resolution: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    speed = spec.motion.speed * (1 + rng.uniform(-spec.speed_jitter, spec.speed_jitter))
    direction = spec.motion.direction + rng.uniform(-spec.direction_jitter, spec.direction_jitter)
    disp = spec.motion.displacements(frame_count, speed, direction)
    h, w = resolution
    margin = int(math.ceil(np.abs(disp).max())) + 2
    canvas = make_texture(spec.appearance.texture, (h + 2 * margin, w + 2 * margin), rng,
                          tint=spec.appearance.tint)
    frames = render_motion(canvas, disp, resolution, margin)
    step = np.diff(disp, axis=0)
    flow = np.empty((2 * (frame_count - 1), h, w))
    flow[0::2] = step[:, 0, None, None]
    flow[1::2] = step[:, 1, None, None]
    return frames, flow


def gen_activity_dataset(specs, split: float = 0.8, frame_count: int = 3, resolution=(32, 32),
                         seed: int = 0) -> ActivityDataset:
    """Render every spec's clips and split each class into train/val at ``split``.

    The split is stratified: each class contributes round(count * (1 - split))
    validation clips (at least one, at most count - 1).
    """
    if not 0 < split < 1:
        raise ValueError(f"split must lie in (0, 1), got {split}")
    specs = list(specs)
    ids_seen = set()
    for s in specs:
        if s.count < 2:
            raise ValueError(f"class {s.class_id} needs at least 2 clips to split, got {s.count}")
        if s.class_id in ids_seen:
            raise ValueError(f"duplicate class id {s.class_id}")
        ids_seen.add(s.class_id)
    rng = np.random.default_rng(seed)
    frames, flows, labels, ids, splits = [], [], [], [], []
    for s in specs:
        n_val = min(s.count - 1, max(1, round(s.count * (1 - split))))
        val_idx = set(rng.permutation(s.count)[:n_val].tolist())
        for i in range(s.count):
            fr, fl = render_activity_clip(s, rng, frame_count, tuple(resolution))
            frames.append(fr)
            flows.append(fl)
            labels.append(s.class_id)
            ids.append(f"c{s.class_id}_{i:05d}")
            splits.append("val" if i in val_idx else "train")
    names = [s.name or f"class{s.class_id}" for s in sorted(specs, key=lambda s: s.class_id)]
    return ActivityDataset(np.stack(frames), np.stack(flows), np.array(labels), ids, splits, names)
