import numpy as np


def endpoint_error(pred, truth) -> float:
    """Mean Euclidean distance between flow vectors.

    Both fields are [..., 2K, H, W] with (Vx, Vy) channel pairs; the mean runs
    over every pixel of every pair.
    """
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise ValueError(f"flow shapes disagree: {pred.shape} vs {truth.shape}")
    if pred.ndim < 3 or pred.shape[-3] % 2:
        raise ValueError(f"flow needs (Vx, Vy) channel pairs, got shape {pred.shape}")
    d = pred - truth
    dx = d[..., 0::2, :, :]
    dy = d[..., 1::2, :, :]
    return float(np.sqrt(dx * dx + dy * dy).mean())
