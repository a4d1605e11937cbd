"""Dense tensors and a small reverse-mode differentiation engine."""
from .tensor import Tensor, TapeNode, as_tensor, is_grad_enabled, no_grad
from .ops import (
    ShapeError,
    add,
    add_scalar,
    avgpool2d,
    bilinear_sample,
    clip,
    concat,
    conv2d,
    deconv2d,
    forward_diff,
    leaky_relu,
    maxpool2d,
    mul,
    power,
    reduce_mean,
    reduce_sum,
    relu,
    reshape,
    resize_bilinear,
    scale,
    slice_channels,
    softmax,
    softmax_cross_entropy,
    sub,
)
from .params import Adam, Parameter, ParameterSet, SGDMomentum, StepDecay, he_normal
from .gradcheck import check_parameters, extended_dtype, gradient_check, relative_errors
from . import checkpoint

__all__ = [
    "Tensor", "TapeNode", "as_tensor", "is_grad_enabled", "no_grad", "ShapeError",
    "add", "add_scalar", "avgpool2d", "bilinear_sample", "clip", "concat", "conv2d",
    "deconv2d", "forward_diff", "leaky_relu", "maxpool2d", "mul", "power", "reduce_mean", "reduce_sum",
    "relu", "reshape", "resize_bilinear", "scale", "slice_channels", "softmax",
    "softmax_cross_entropy", "sub", "Adam", "Parameter", "ParameterSet", "SGDMomentum",
    "StepDecay", "he_normal", "check_parameters", "extended_dtype", "gradient_check", "relative_errors",
    "checkpoint",
]
