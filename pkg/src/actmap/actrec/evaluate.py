"""Accuracy, per-class accuracy, confusion matrix and throughput."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np


@dataclass
class Evaluation:
    accuracy: float  # mean over classes of per-class accuracy
    per_class: np.ndarray  # NaN for classes absent from the dataset
    confusion: np.ndarray  # rows: truth, columns: prediction
    fps: float
    frames: int
    seconds: float
    overall: float  # plain fraction of correct clips

    def to_dict(self, class_names=None) -> dict:
        names = list(class_names) if class_names is not None else [str(i) for i in range(len(self.per_class))]
        return {
            "accuracy": self.accuracy,
            "overall": self.overall,
            "per_class": [{"class": n, "accuracy": None if np.isnan(a) else float(a)}
                          for n, a in zip(names, self.per_class)],
            "confusion": self.confusion.tolist(),
        }


def confusion_matrix(truth, pred, num_classes: int) -> np.ndarray:
    truth = np.asarray(truth, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cm, (truth, pred), 1)
    return cm


def per_class_accuracy(cm: np.ndarray) -> np.ndarray:
    support = cm.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(support > 0, np.diag(cm) / np.maximum(support, 1), np.nan)


def mean_average_accuracy(cm: np.ndarray) -> float:
    pc = per_class_accuracy(cm)
    return float(np.nanmean(pc))


def evaluate(streams, dataset, num_classes: int | None = None, clock=time.perf_counter) -> Evaluation:
    """Score every clip with ``streams.predict_scores`` and summarise.

    fps counts input frames (F per clip) over the wall time of the whole
    prediction call, MotionNet included.
    """
    if hasattr(dataset, "frames"):
        frames, labels = np.asarray(dataset.frames), np.asarray(dataset.labels)
    else:
        frames, labels = (np.asarray(a) for a in dataset)
    if len(frames) == 0:
        raise ValueError("cannot evaluate an empty dataset")
    if len(frames) != len(labels):
        raise ValueError("frames and labels differ in length")
    m = num_classes or getattr(getattr(streams, "cfg", None), "num_classes", None) or int(labels.max()) + 1
    t0 = clock()
    scores = np.asarray(streams.predict_scores(frames))
    seconds = clock() - t0
    pred = scores.argmax(axis=1)
    cm = confusion_matrix(labels, pred, m)
    n_frames = len(frames) * (frames.shape[1] // 3)
    fps = n_frames / seconds if seconds > 0 else float("inf")
    return Evaluation(mean_average_accuracy(cm), per_class_accuracy(cm), cm, fps, n_frames, seconds,
                      float(np.mean(pred == labels)))
