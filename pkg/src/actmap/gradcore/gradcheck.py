from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, no_grad


def relative_errors(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> np.ndarray:
    a = np.abs(analytic)
    c = np.abs(numeric)
    return np.abs(analytic - numeric) / np.maximum(np.maximum(a, c), floor)


def gradient_check(fn: Callable[[Tensor], Tensor], point, eps: float = 1e-6,
                   indices: Sequence[int] | None = None, reference_dtype=None) -> float:
    """Max relative error between backward() and central differences of ``fn`` at ``point``.

    ``indices`` restricts the comparison to a subset of flat coordinates.
    ``reference_dtype`` evaluates the central differences in a wider float type
    while the backward pass stays in float64.
    """
    x0 = np.array(point.data if isinstance(point, Tensor) else point, dtype=np.float64)
    x = Tensor(x0.copy(), requires_grad=True)
    fn(x).backward()
    analytic = np.zeros_like(x0) if x.grad is None else x.grad.reshape(x0.shape)
    flat_idx = range(x0.size) if indices is None else indices
    wide = x0.astype(reference_dtype or np.float64)
    an, nu = [], []
    with no_grad():
        for i in flat_idx:
            xp = wide.copy().reshape(-1)
            xm = wide.copy().reshape(-1)
            xp[i] += eps
            xm[i] -= eps
            fp = fn(Tensor(xp.reshape(x0.shape))).data
            fm = fn(Tensor(xm.reshape(x0.shape))).data
            nu.append(float((fp - fm) / (2 * eps)))
            an.append(analytic.reshape(-1)[i])
    if not an:
        return 0.0
    return float(relative_errors(np.array(an), np.array(nu)).max())


def extended_dtype():
    """Widest float type numpy offers here (x87 80-bit on most x86 builds)."""
    return np.longdouble if np.finfo(np.longdouble).eps < np.finfo(np.float64).eps else np.float64


def check_parameters(loss_fn: Callable[[], Tensor], tensors: Sequence[Tensor],
                     picks: Sequence[tuple[int, int]], eps: float = 1e-6,
                     reference: tuple[Callable[[], Tensor], Sequence[Tensor]] | None = None) -> float:
    """Gradient check over chosen (tensor index, flat coordinate) pairs of live parameters.

    ``loss_fn`` re-evaluates the scalar loss from the current parameter values.
    ``reference`` optionally supplies a second (loss_fn, tensors) pair, holding the
    same values in a wider dtype, on which the central differences are taken. The
    analytic side is always the backward pass of ``loss_fn``.
    """
    for t in tensors:
        t.grad = None
    loss_fn().backward()
    ref_fn, ref_tensors = reference if reference is not None else (loss_fn, tensors)
    an, nu = [], []
    with no_grad():
        for ti, ci in picks:
            flat = ref_tensors[ti].data.reshape(-1)
            orig = flat[ci]
            flat[ci] = orig + eps
            fp = ref_fn().data
            flat[ci] = orig - eps
            fm = ref_fn().data
            flat[ci] = orig
            nu.append(float((fp - fm) / (2 * eps)))
            g = tensors[ti].grad
            an.append(0.0 if g is None else g.reshape(-1)[ci])
    return float(relative_errors(np.array(an), np.array(nu)).max())
