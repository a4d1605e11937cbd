import numpy as np

DEFAULT_FUSION = (1.0, 1.5)  # spatial : temporal


def late_fuse(s, t, weights=DEFAULT_FUSION) -> np.ndarray:
    """Weighted average (w_s * s + w_t * t) / (w_s + w_t) of two score vectors (or batches)."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if s.shape != t.shape:
        raise ValueError(f"score shapes disagree: {s.shape} vs {t.shape}")
    ws, wt = weights
    if ws <= 0 or wt <= 0:
        raise ValueError(f"fusion weights must be positive, got {weights}")
    return (ws * s + wt * t) / (ws + wt)
