"""Optimizers: SGD on a cosine schedule (prompt tuning) and Adam (surrogate pre-training)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tensor import Tensor


def cosine_lr(base_lr: float, step: int, total_steps: int) -> float:
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * step / total_steps))


@dataclass
class OptimizerState:
    base_lr: float = 0.0025
    total_steps: int = 1
    current_step: int = 0

    def __post_init__(self):
        if self.total_steps < 1:
            raise ValueError(f"total_steps must be positive, got {self.total_steps}")
        if not 0 <= self.current_step <= self.total_steps:
            raise ValueError(f"current_step {self.current_step} outside [0, {self.total_steps}]")

    @property
    def lr(self) -> float:
        return cosine_lr(self.base_lr, self.current_step, self.total_steps)


def _check_grads(params: list[Tensor]) -> None:
    for i, p in enumerate(params):
        if p.grad is None:
            raise ValueError(f"parameter {p.name or i!s} has no gradient")


class SGDCosine:
    """Plain SGD, ``p <- p - lr(s) * grad``, with optional heavy-ball momentum."""

    def __init__(self, params, base_lr: float = 0.0025, total_steps: int = 1, momentum: float = 0.0):
        self.params = list(params)
        self.state = OptimizerState(base_lr=base_lr, total_steps=total_steps)
        self.momentum = momentum
        self._velocity = [np.zeros_like(p.data) for p in self.params] if momentum else None

    @property
    def lr(self) -> float:
        return self.state.lr

    def step(self) -> None:
        st = self.state
        if st.current_step >= st.total_steps:
            raise RuntimeError(f"schedule exhausted at step {st.current_step}/{st.total_steps}")
        _check_grads(self.params)
        lr = st.lr
        for i, p in enumerate(self.params):
            g = p.grad
            if self._velocity is not None:
                self._velocity[i] = self.momentum * self._velocity[i] + g
                g = self._velocity[i]
            p.data = p.data - lr * g
            p.grad = None
        st.current_step += 1

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


def sgd_cosine_step(state: OptimizerState, params) -> None:
    """Functional form of one plain SGD step on the cosine schedule."""
    params = list(params)
    if state.current_step >= state.total_steps:
        raise RuntimeError(f"schedule exhausted at step {state.current_step}/{state.total_steps}")
    _check_grads(params)
    lr = state.lr
    for p in params:
        p.data = p.data - lr * p.grad
        p.grad = None
    state.current_step += 1


class Adam:
    def __init__(self, params, lr: float = 1e-3, betas=(0.9, 0.999), eps: float = 1e-8,
                 total_steps: int | None = None):
        self.params = list(params)
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.total_steps = total_steps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        _check_grads(self.params)
        lr = self.lr if self.total_steps is None else cosine_lr(self.lr, self.t, self.total_steps)
        self.t += 1
        c1 = 1 - self.b1**self.t
        c2 = 1 - self.b2**self.t
        for i, p in enumerate(self.params):
            g = p.grad
            self.m[i] = self.b1 * self.m[i] + (1 - self.b1) * g
            self.v[i] = self.b2 * self.v[i] + (1 - self.b2) * g * g
            p.data = p.data - lr * (self.m[i] / c1) / (np.sqrt(self.v[i] / c2) + self.eps)
            p.grad = None
