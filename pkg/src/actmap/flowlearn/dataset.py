"""On-disk clip datasets: one checkpoint file per clip plus a CSV index.

Layout::

    <root>/index.csv          id,label,split
    <root>/clips/<id>.ckpt    tensors "frames" [3F,H,W] and optionally "flow" [2K,H,W]
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..gradcore import checkpoint

INDEX_NAME = "index.csv"
CLIP_DIR = "clips"


@dataclass
class ClipEntry:
    id: str
    label: int
    split: str


def write_clip_dataset(root, frames, flows=None, labels=None, splits=None, ids=None) -> list[ClipEntry]:
    """Write clips to ``root``; returns the index entries in write order.

    ``labels`` default to -1 (unlabelled) and ``splits`` to "train".
    """
    root = Path(root)
    (root / CLIP_DIR).mkdir(parents=True, exist_ok=True)
    n = len(frames)
    ids = list(ids) if ids is not None else [f"clip{i:06d}" for i in range(n)]
    labels = [-1] * n if labels is None else [int(v) for v in labels]
    splits = ["train"] * n if splits is None else list(splits)
    if not len(ids) == len(labels) == len(splits) == n:
        raise ValueError("frames, ids, labels and splits must have the same length")
    if len(set(ids)) != n:
        raise ValueError("clip ids must be unique")
    entries = []
    for i in range(n):
        tensors = {"frames": np.asarray(frames[i])}
        if flows is not None:
            tensors["flow"] = np.asarray(flows[i])
        checkpoint.save(root / CLIP_DIR / f"{ids[i]}.ckpt", tensors)
        entries.append(ClipEntry(ids[i], labels[i], splits[i]))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id", "label", "split"])
    for e in entries:
        writer.writerow([e.id, e.label, e.split])
    checkpoint.atomic_write_bytes(root / INDEX_NAME, buf.getvalue().encode())
    return entries


def read_index(root) -> list[ClipEntry]:
    path = Path(root) / INDEX_NAME
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["id", "label", "split"]:
            raise ValueError(f"{path}: expected header id,label,split, got {reader.fieldnames}")
        return [ClipEntry(r["id"], int(r["label"]), r["split"]) for r in reader]


def load_clip(root, clip_id: str) -> tuple[np.ndarray, np.ndarray | None]:
    tensors = checkpoint.load(Path(root) / CLIP_DIR / f"{clip_id}.ckpt")
    return tensors["frames"].astype(np.float64), (tensors["flow"].astype(np.float64) if "flow" in tensors else None)


def read_clip_dataset(root, split: str | None = None):
    """Return (frames, flows or None, labels, entries), optionally filtered by split."""
    entries = [e for e in read_index(root) if split is None or e.split == split]
    frames, flows = [], []
    for e in entries:
        fr, fl = load_clip(root, e.id)
        frames.append(fr)
        flows.append(fl)
    labels = np.array([e.label for e in entries], dtype=int)
    if not entries:
        return np.zeros((0,)), None, labels, entries
    has_flow = all(f is not None for f in flows)
    return np.stack(frames), (np.stack(flows) if has_flow else None), labels, entries
