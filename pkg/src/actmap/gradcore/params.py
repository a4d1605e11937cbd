"""Named parameters, initialisation and the optimizers used for training."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .tensor import Tensor


@dataclass
class Parameter:
    name: str
    tensor: Tensor
    optimizer_state: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def data(self) -> np.ndarray:
        return self.tensor.data

    @property
    def grad(self) -> np.ndarray | None:
        return self.tensor.grad


class ParameterSet:
    """Ordered, uniquely named collection of trainable tensors."""

    def __init__(self, dtype=np.float64):
        self.dtype = np.dtype(dtype)
        self._params: dict[str, Parameter] = {}
        self.frozen = False

    def add(self, name: str, data: np.ndarray) -> Tensor:
        if name in self._params:
            raise KeyError(f"duplicate parameter name {name!r}")
        t = Tensor(np.asarray(data, dtype=self.dtype), requires_grad=True, name=name)
        self._params[name] = Parameter(name, t)
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name].tensor

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[Parameter]:
        return iter(self._params.values())

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def parameter(self, name: str) -> Parameter:
        return self._params[name]

    def zero_grad(self) -> None:
        for p in self:
            p.tensor.grad = None

    def count(self) -> int:
        return sum(p.data.size for p in self)

    def state_dict(self) -> dict[str, np.ndarray]:
        return {p.name: p.data.copy() for p in self}

    def load_state_dict(self, state: dict[str, np.ndarray], strict: bool = True) -> None:
        missing = [n for n in self._params if n not in state]
        if strict and missing:
            raise KeyError(f"state is missing parameters: {missing[:5]}")
        for name, arr in state.items():
            if name not in self._params:
                if strict:
                    raise KeyError(f"unexpected parameter {name!r}")
                continue
            p = self._params[name]
            if p.data.shape != tuple(arr.shape):
                raise ValueError(f"{name}: shape {arr.shape} does not match {p.data.shape}")
            p.tensor.data = np.asarray(arr, dtype=self.dtype).copy()

    def astype(self, dtype) -> None:
        self.dtype = np.dtype(dtype)
        for p in self:
            p.tensor.data = p.tensor.data.astype(self.dtype)
            p.optimizer_state.clear()

    def freeze(self) -> None:
        """Mark read-only for sharing across inference threads."""
        self.frozen = True
        for p in self:
            p.tensor.requires_grad = False
            p.tensor.data.flags.writeable = False


def he_normal(rng: np.random.Generator, shape: Sequence[int], fan_in: int) -> np.ndarray:
    return rng.normal(0.0, math.sqrt(2.0 / fan_in), size=tuple(shape))


# ---------------------------------------------------------------------------
# optimizers
# ---------------------------------------------------------------------------

class Adam:
    def __init__(self, params: ParameterSet, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0

    def step(self, lr: float | None = None) -> None:
        lr = self.lr if lr is None else lr
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p in self.params:
            g = p.grad
            if g is None:
                continue
            st = p.optimizer_state
            if "m" not in st:
                st["m"] = np.zeros_like(p.data)
                st["v"] = np.zeros_like(p.data)
            m, v = st["m"], st["v"]
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            p.tensor.data = p.data - lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class SGDMomentum:
    """SGD with heavy-ball momentum; ``lr_scale`` maps parameter-name prefixes to lr multipliers."""

    def __init__(self, params: ParameterSet, lr: float = 1e-3, momentum: float = 0.9,
                 weight_decay: float = 0.0, lr_scale: dict[str, float] | None = None):
        self.params = params
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.lr_scale = dict(lr_scale or {})

    def _scale_for(self, name: str) -> float:
        for prefix, s in self.lr_scale.items():
            if name.startswith(prefix):
                return s
        return 1.0

    def step(self, lr: float | None = None) -> None:
        lr = self.lr if lr is None else lr
        for p in self.params:
            g = p.grad
            if g is None:
                continue
            if self.weight_decay:
                g = g + self.weight_decay * p.data
            buf = p.optimizer_state.get("momentum")
            if buf is None:
                buf = p.optimizer_state["momentum"] = np.zeros_like(p.data)
            buf *= self.momentum
            buf += g
            p.tensor.data = p.data - lr * self._scale_for(p.name) * buf


class StepDecay:
    """Piecewise-constant learning rate: multiply by ``factor`` at each milestone."""

    def __init__(self, base_lr: float, milestones: Sequence[int] = (), factor: float = 0.1):
        if base_lr <= 0:
            raise ValueError("learning rate must be positive")
        ms = list(milestones)
        if any(b <= a for a, b in zip(ms, ms[1:])):
            raise ValueError(f"decay milestones must be increasing, got {ms}")
        self.base_lr = base_lr
        self.milestones = ms
        self.factor = factor

    def __call__(self, step: int) -> float:
        passed = sum(1 for m in self.milestones if step >= m)
        return self.base_lr * self.factor ** passed

    @classmethod
    def every(cls, base_lr: float, period: int, horizon: int, factor: float) -> "StepDecay":
        return cls(base_lr, list(range(period, horizon, period)), factor)
