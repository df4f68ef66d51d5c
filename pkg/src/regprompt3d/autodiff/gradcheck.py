"""Central finite-difference gradient oracle."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor


@dataclass
class GradCheckReport:
    errors: dict[str, float] = field(default_factory=dict)
    tol: float = 1e-4
    nonfinite: list[str] = field(default_factory=list)

    @property
    def max_error(self) -> float:
        return max(self.errors.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return not self.nonfinite and self.max_error <= self.tol


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """max|a - n| / max(max|a|, max|n|); zero when both vanish."""
    scale = max(np.abs(analytic).max(initial=0.0), np.abs(numeric).max(initial=0.0))
    diff = np.abs(analytic - numeric).max(initial=0.0)
    if scale == 0.0:
        return float(diff)
    return float(diff / scale)


def numerical_gradient(fn: Callable[[], Tensor], param: Tensor, step: float = 1e-5) -> np.ndarray:
    grad = np.zeros_like(param.data)
    flat = param.data.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        up = float(fn().data)
        flat[i] = orig - step
        down = float(fn().data)
        flat[i] = orig
        gflat[i] = (up - down) / (2 * step)
    return grad


def finite_diff_check(fn: Callable[[], Tensor], params: Sequence[Tensor], step: float = 1e-5,
                      tol: float = 1e-4) -> GradCheckReport:
    """Compare backprop gradients of the scalar ``fn()`` with central differences.

    ``fn`` must rebuild its graph from ``params`` on every call. Non-finite
    outputs are recorded in ``report.nonfinite`` instead of raising.
    """
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    params = list(params)
    names = [p.name or f"param{i}" for i, p in enumerate(params)]
    report = GradCheckReport(tol=tol)
    for p in params:
        p.grad = None
    loss = fn()
    if not np.all(np.isfinite(loss.data)):
        report.nonfinite.append("loss")
        return report
    loss.backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]
    for p in params:
        p.grad = None
    for name, p, a in zip(names, params, analytic):
        with np.errstate(all="ignore"):
            n = numerical_gradient(fn, p, step)
        if not (np.all(np.isfinite(n)) and np.all(np.isfinite(a))):
            report.nonfinite.append(name)
            continue
        report.errors[name] = relative_error(a, n)
    return report
