"""Differentiable operators.

Only the operators the flow and classification networks need live here:
convolution, transposed convolution, pooling, a handful of elementwise maps,
reductions, channel concat/slice, bilinear sampling and resizing, forward
differences and softmax cross-entropy. Broadcasting is limited to a scalar
against a tensor.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import Tensor, as_tensor, make_result


class ShapeError(ValueError):
    """Operand shapes disagree with an operator's contract."""


# ---------------------------------------------------------------------------
# elementwise
# ---------------------------------------------------------------------------

def _sum_to(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    return np.full(shape, g.sum(), dtype=g.dtype)


def _binary_operands(a, b) -> tuple[Tensor, Tensor]:
    a_t = as_tensor(a)
    b_t = as_tensor(b, dtype=a_t.dtype)
    if a_t.shape != b_t.shape and a_t.size != 1 and b_t.size != 1:
        raise ShapeError(f"elementwise operands disagree: {a_t.shape} vs {b_t.shape}")
    return a_t, b_t


def add(a, b) -> Tensor:
    a, b = _binary_operands(a, b)
    return make_result(a.data + b.data, "add", (a, b),
                       lambda g: (_sum_to(g, a.shape), _sum_to(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = _binary_operands(a, b)
    return make_result(a.data - b.data, "sub", (a, b),
                       lambda g: (_sum_to(g, a.shape), _sum_to(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = _binary_operands(a, b)
    ad, bd = a.data, b.data
    return make_result(ad * bd, "mul", (a, b),
                       lambda g: (_sum_to(g * bd, a.shape), _sum_to(g * ad, b.shape)))


def scale(x, c: float) -> Tensor:
    x = as_tensor(x)
    c = float(c)
    return make_result(x.data * c, "scale", (x,), lambda g: (g * c,))


def add_scalar(x, c: float) -> Tensor:
    x = as_tensor(x)
    return make_result(x.data + float(c), "add", (x,), lambda g: (g,))


def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    return make_result(np.maximum(x.data, 0).astype(x.dtype), "relu", (x,),  # NaN propagates
                       lambda g: (g * mask,))


def leaky_relu(x, slope: float = 0.1) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    factor = np.where(mask, 1.0, slope).astype(x.dtype)
    return make_result(x.data * factor, "relu", (x,), lambda g: (g * factor,))


def power(x, exponent: float) -> Tensor:
    """``x ** exponent`` for a nonnegative base (strictly positive if exponent < 1)."""
    x = as_tensor(x)
    p = float(exponent)
    if np.any(x.data < 0):
        raise ValueError("power() is defined for nonnegative bases only")
    out = np.power(x.data, p)

    def backward(g):
        return (g * p * np.power(x.data, p - 1.0),)

    return make_result(out, "power", (x,), backward)


def clip(x, lo: float, hi: float) -> Tensor:
    x = as_tensor(x)
    inside = (x.data >= lo) & (x.data <= hi)
    return make_result(np.clip(x.data, lo, hi), "clip", (x,), lambda g: (g * inside,))


# ---------------------------------------------------------------------------
# reductions and shape plumbing
# ---------------------------------------------------------------------------

def reduce_sum(x) -> Tensor:
    x = as_tensor(x)
    shape = x.shape
    return make_result(np.asarray(x.data.sum(), dtype=x.dtype), "reduce_sum", (x,),
                       lambda g: (np.broadcast_to(g, shape).copy(),))


def reduce_mean(x) -> Tensor:
    x = as_tensor(x)
    if x.size == 0:
        raise ShapeError("reduce_mean of an empty tensor")
    n = x.size
    shape = x.shape
    return make_result(np.asarray(x.data.sum() / n, dtype=x.dtype), "reduce_mean", (x,),
                       lambda g: (np.full(shape, g.reshape(-1)[0] / n, dtype=g.dtype),))


def reshape(x, shape: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    old = x.shape
    return make_result(x.data.reshape(shape), "reshape", (x,), lambda g: (g.reshape(old),))


def concat(parts: Sequence[Tensor], axis: int = 1) -> Tensor:
    """Concatenate along the channel axis (axis 1 for NCHW)."""
    parts = [as_tensor(p) for p in parts]
    if not parts:
        raise ShapeError("concat needs at least one part")
    ref = parts[0].shape
    for i, p in enumerate(parts[1:], start=1):
        if p.ndim != len(ref):
            raise ShapeError(f"concat part {i} has rank {p.ndim}, expected {len(ref)}")
        for d, (u, v) in enumerate(zip(ref, p.shape)):
            if d != axis and u != v:
                raise ShapeError(f"concat part {i} disagrees on dimension {d}: {v} vs {u}")
    sizes = [p.shape[axis] for p in parts]
    bounds = np.cumsum([0] + sizes)

    def backward(g):
        return [np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=axis) for i in range(len(parts))]

    return make_result(np.concatenate([p.data for p in parts], axis=axis), "concat", parts, backward)


def slice_channels(x, start: int, stop: int) -> Tensor:
    x = as_tensor(x)
    if not 0 <= start < stop <= x.shape[1]:
        raise ShapeError(f"channel slice [{start}:{stop}) out of range for {x.shape[1]} channels")
    shape = x.shape

    def backward(g):
        full = np.zeros(shape, dtype=g.dtype)
        full[:, start:stop] = g
        return (full,)

    return make_result(x.data[:, start:stop].copy(), "slice", (x,), backward)


def forward_diff(x, axis: int) -> Tensor:
    """``x[i+1] - x[i]`` along ``axis``; the last slice is zero."""
    x = as_tensor(x)
    axis = axis % x.ndim
    n = x.shape[axis]
    out = np.zeros_like(x.data)
    lead = [slice(None)] * x.ndim
    nxt = [slice(None)] * x.ndim
    lead[axis] = slice(0, n - 1)
    nxt[axis] = slice(1, n)
    lead, nxt = tuple(lead), tuple(nxt)
    out[lead] = x.data[nxt] - x.data[lead]

    def backward(g):
        gx = np.zeros_like(g)
        gx[nxt] += g[lead]
        gx[lead] -= g[lead]
        return (gx,)

    return make_result(out, "forward_diff", (x,), backward)


# ---------------------------------------------------------------------------
# convolution family
# ---------------------------------------------------------------------------

def _im2col(xp: np.ndarray, kh: int, kw: int, stride: int, oh: int, ow: int) -> np.ndarray:
    """(N,C,Hp,Wp) -> (N*oh*ow, C*kh*kw)."""
    n, c = xp.shape[:2]
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :oh, :ow]
    return win.transpose(0, 2, 3, 1, 4, 5).reshape(n * oh * ow, c * kh * kw)


def _col2im(cols: np.ndarray, shape: tuple[int, int, int, int], kh: int, kw: int,
            stride: int, oh: int, ow: int) -> np.ndarray:
    """Adjoint of :func:`_im2col`; returns the padded-input-sized gradient."""
    n, c, hp, wp = shape
    cols = cols.reshape(n, oh, ow, c, kh, kw)
    out = np.zeros(shape, dtype=cols.dtype)
    hspan = stride * (oh - 1) + 1
    wspan = stride * (ow - 1) + 1
    for u in range(kh):
        for v in range(kw):
            out[:, :, u:u + hspan:stride, v:v + wspan:stride] += cols[:, :, :, :, u, v].transpose(0, 3, 1, 2)
    return out


def conv2d(x, weight, bias=None, stride: int = 1, pad: int = 0) -> Tensor:
    """Cross-correlation of ``x`` [N,C,H,W] with ``weight`` [K,C,kh,kw] plus ``bias`` [K]."""
    x, weight = as_tensor(x), as_tensor(weight)
    if x.ndim != 4 or weight.ndim != 4:
        raise ShapeError(f"conv2d expects 4-d input and weight, got {x.shape} and {weight.shape}")
    n, c, h, w = x.shape
    k, wc, kh, kw = weight.shape
    if wc != c:
        raise ShapeError(f"conv2d channel dimension mismatch: input has {c}, weight expects {wc}")
    if kh > h + 2 * pad or kw > w + 2 * pad:
        raise ShapeError(f"conv2d kernel {kh}x{kw} exceeds padded input {h + 2 * pad}x{w + 2 * pad}")
    if stride < 1:
        raise ShapeError("conv2d stride must be positive")
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (k,):
            raise ShapeError(f"conv2d bias dimension mismatch: expected ({k},), got {bias.shape}")
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (w + 2 * pad - kw) // stride + 1
    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x.data
    cols = _im2col(xp, kh, kw, stride, oh, ow)
    wmat = weight.data.reshape(k, -1)
    out = cols @ wmat.T
    if bias is not None:
        out += bias.data
    out = np.ascontiguousarray(out.reshape(n, oh, ow, k).transpose(0, 3, 1, 2))
    inputs = (x, weight) if bias is None else (x, weight, bias)

    def backward(g):
        gmat = g.transpose(0, 2, 3, 1).reshape(-1, k)
        gw = (gmat.T @ cols).reshape(weight.shape)
        gcols = gmat @ wmat
        gxp = _col2im(gcols, xp.shape, kh, kw, stride, oh, ow)
        gx = gxp[:, :, pad:pad + h, pad:pad + w] if pad else gxp
        res = [np.ascontiguousarray(gx), gw]
        if bias is not None:
            res.append(gmat.sum(axis=0))
        return res

    return make_result(out, "conv2d", inputs, backward)


DECONV_KERNEL = 4
DECONV_STRIDE = 2
DECONV_PAD = 1


def deconv2d(x, weight, stride: int = DECONV_STRIDE) -> Tensor:
    """Transposed convolution that exactly doubles spatial resolution.

    ``weight`` is [C_in, C_out, 4, 4]; the op is the input-adjoint of a
    stride-2, pad-1 convolution with the same kernel.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    if x.ndim != 4 or weight.ndim != 4:
        raise ShapeError(f"deconv2d expects 4-d input and weight, got {x.shape} and {weight.shape}")
    cin, cout, kh, kw = weight.shape
    if stride != DECONV_STRIDE or kh != DECONV_KERNEL or kw != DECONV_KERNEL:
        raise ValueError(f"deconv2d supports only kernel 4 / stride 2, got kernel {kh}x{kw} stride {stride}")
    n, c, h, w = x.shape
    if c != cin:
        raise ShapeError(f"deconv2d channel dimension mismatch: input has {c}, weight expects {cin}")
    p = DECONV_PAD
    oh, ow = 2 * h, 2 * w
    xmat = x.data.transpose(0, 2, 3, 1).reshape(-1, cin)
    wmat = weight.data.reshape(cin, -1)
    cols = xmat @ wmat
    padded_shape = (n, cout, oh + 2 * p, ow + 2 * p)
    outp = _col2im(cols, padded_shape, kh, kw, stride, h, w)
    out = np.ascontiguousarray(outp[:, :, p:p + oh, p:p + ow])

    def backward(g):
        gp = np.pad(g, ((0, 0), (0, 0), (p, p), (p, p)))
        gcols = _im2col(gp, kh, kw, stride, h, w)
        gx = (gcols @ wmat.T).reshape(n, h, w, cin).transpose(0, 3, 1, 2)
        gw = (xmat.T @ gcols).reshape(weight.shape)
        return np.ascontiguousarray(gx), gw

    return make_result(out, "deconv2d", (x, weight), backward)


def maxpool2d(x, k: int = 2, stride: int = 2) -> Tensor:
    """Window maximum; gradient goes to the first row-major maximum."""
    x = as_tensor(x)
    n, c, h, w = x.shape
    if k > h or k > w:
        raise ShapeError(f"maxpool window {k} exceeds input {h}x{w}")
    oh = (h - k) // stride + 1
    ow = (w - k) // stride + 1
    win = sliding_window_view(x.data, (k, k), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :oh, :ow]
    flat = win.reshape(n, c, oh, ow, k * k)
    arg = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]

    def backward(g):
        gx = np.zeros(x.shape, dtype=g.dtype)
        hspan = stride * (oh - 1) + 1
        wspan = stride * (ow - 1) + 1
        for u in range(k):
            for v in range(k):
                sel = np.where(arg == u * k + v, g, 0.0)
                gx[:, :, u:u + hspan:stride, v:v + wspan:stride] += sel
        return (gx,)

    return make_result(np.ascontiguousarray(out), "maxpool2d", (x,), backward)


def avgpool2d(x, k: int) -> Tensor:
    """Non-overlapping k×k average pooling (H, W divisible by k)."""
    x = as_tensor(x)
    n, c, h, w = x.shape
    if h % k or w % k:
        raise ShapeError(f"avgpool factor {k} does not divide {h}x{w}")
    out = x.data.reshape(n, c, h // k, k, w // k, k).mean(axis=(3, 5))

    def backward(g):
        return (np.repeat(np.repeat(g, k, axis=2), k, axis=3) / (k * k),)

    return make_result(out, "avgpool2d", (x,), backward)


# ---------------------------------------------------------------------------
# resampling
# ---------------------------------------------------------------------------

def _interp_matrix(n_out: int, n_in: int, dtype) -> np.ndarray:
    """Half-pixel-centred linear interpolation weights, edges clamped."""
    a = np.zeros((n_out, n_in), dtype=dtype)
    if n_in == 1:
        a[:, 0] = 1.0
        return a
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    i0 = np.minimum(np.floor(src).astype(int), n_in - 2)
    t = src - i0
    rows = np.arange(n_out)
    a[rows, i0] += 1.0 - t
    a[rows, i0 + 1] += t
    return a


def resize_bilinear(x, size: tuple[int, int]) -> Tensor:
    """Bilinear resize of the two trailing axes to ``size``."""
    x = as_tensor(x)
    h, w = x.shape[-2:]
    ay = _interp_matrix(size[0], h, x.dtype)
    ax = _interp_matrix(size[1], w, x.dtype)
    out = ay @ x.data @ ax.T

    def backward(g):
        return (ay.T @ g @ ax,)

    return make_result(out, "resize_bilinear", (x,), backward)


def bilinear_sample(image, sx, sy) -> Tensor:
    """Sample ``image`` [N,C,H,W] at column ``sx`` / row ``sy`` coordinates [N,H',W'].

    Coordinates are clamped to the image border. Differentiable with respect to
    the image and both coordinate maps.
    """
    image, sx, sy = as_tensor(image), as_tensor(sx), as_tensor(sy)
    n, c, h, w = image.shape
    if sx.shape != sy.shape or sx.ndim != 3 or sx.shape[0] != n:
        raise ShapeError(f"sample grid {sx.shape}/{sy.shape} incompatible with image {image.shape}")
    # non-finite coordinates sample (0, 0) and poison the output below
    bad = ~(np.isfinite(sx.data) & np.isfinite(sy.data))
    xc = np.clip(np.where(bad, 0.0, sx.data), 0.0, w - 1)
    yc = np.clip(np.where(bad, 0.0, sy.data), 0.0, h - 1)
    x0 = np.minimum(np.floor(xc).astype(np.int64), max(w - 2, 0))
    y0 = np.minimum(np.floor(yc).astype(np.int64), max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    wx = (xc - x0).astype(image.dtype)
    wy = (yc - y0).astype(image.dtype)
    bidx = np.arange(n)[:, None, None]
    img = image.data.transpose(0, 2, 3, 1)  # N,H,W,C for fancy indexing
    v00 = img[bidx, y0, x0]
    v01 = img[bidx, y0, x1]
    v10 = img[bidx, y1, x0]
    v11 = img[bidx, y1, x1]
    wx_, wy_ = wx[..., None], wy[..., None]
    out = ((1 - wx_) * (1 - wy_) * v00 + wx_ * (1 - wy_) * v01
           + (1 - wx_) * wy_ * v10 + wx_ * wy_ * v11)
    out = np.ascontiguousarray(out.transpose(0, 3, 1, 2))
    if bad.any():
        out[np.broadcast_to(bad[:, None], out.shape)] = np.nan
    in_x = (sx.data > 0) & (sx.data < w - 1)
    in_y = (sy.data > 0) & (sy.data < h - 1)

    def backward(g):
        gl = g.transpose(0, 2, 3, 1)  # N,H',W',C
        gimg = None
        if image.requires_grad or image.node is not None:
            flat = np.zeros(n * h * w * c, dtype=g.dtype)
            base = (bidx * h * w * c)
            cidx = np.arange(c)
            for yy, xx, wt in ((y0, x0, (1 - wx) * (1 - wy)), (y0, x1, wx * (1 - wy)),
                               (y1, x0, (1 - wx) * wy), (y1, x1, wx * wy)):
                pos = (base + (yy * w + xx) * c)[..., None] + cidx
                flat += np.bincount(pos.reshape(-1), weights=(gl * wt[..., None]).reshape(-1),
                                    minlength=flat.size)
            gimg = flat.reshape(n, h, w, c).transpose(0, 3, 1, 2)
        dx = ((1 - wy_) * (v01 - v00) + wy_ * (v11 - v10))
        dy = ((1 - wx_) * (v10 - v00) + wx_ * (v11 - v01))
        gsx = (gl * dx).sum(axis=-1) * in_x
        gsy = (gl * dy).sum(axis=-1) * in_y
        return gimg, gsx, gsy

    return make_result(out, "bilinear_sample", (image, sx, sy), backward)


# ---------------------------------------------------------------------------
# classification loss
# ---------------------------------------------------------------------------

def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits, labels) -> Tensor:
    """Mean negative log-likelihood of ``labels`` under softmax(``logits``) [N,M]."""
    logits = as_tensor(logits)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if logits.ndim != 2 or logits.shape[0] != labels.size:
        raise ShapeError(f"logits {logits.shape} incompatible with {labels.size} labels")
    n, m = logits.shape
    if np.any(labels < 0) or np.any(labels >= m):
        raise ValueError(f"labels must lie in [0, {m}), got {labels.min()}..{labels.max()}")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    nll = logsum - z[np.arange(n), labels]
    probs = np.exp(z - logsum[:, None])

    def backward(g):
        d = probs.copy()
        d[np.arange(n), labels] -= 1.0
        return (d * (g.reshape(-1)[0] / n),)

    return make_result(np.asarray(nll.mean(), dtype=logits.dtype), "softmax_cross_entropy",
                       (logits,), backward)
