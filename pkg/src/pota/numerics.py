"""Dense float64 primitives with hand-written backward passes, Adam, and a
central-difference gradient checker.

Matrices are plain 2-D ``np.ndarray`` of dtype float64. Each forward op has a
``*_backward`` partner taking the upstream gradient plus whatever the forward
returned, so a fixed network can be differentiated by chaining calls.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import GradientCheckError, ShapeError

Params = dict[str, np.ndarray]


def as_matrix(x) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {a.shape}")
    return a


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    return a @ b


def matmul_backward(grad_out: np.ndarray, a: np.ndarray, b: np.ndarray):
    """Return (grad_a, grad_b) for ``out = a @ b``."""
    return grad_out @ b.T, a.T @ grad_out


def tanh_elem(a: np.ndarray) -> np.ndarray:
    return np.tanh(a)


def tanh_backward(grad_out: np.ndarray, out: np.ndarray) -> np.ndarray:
    return grad_out * (1.0 - out * out)


def relu_elem(a: np.ndarray) -> np.ndarray:
    return np.maximum(a, 0.0)


def relu_backward(grad_out: np.ndarray, inp: np.ndarray) -> np.ndarray:
    # subgradient at exactly 0 is 0
    return np.where(inp > 0.0, grad_out, 0.0)


def sigmoid_elem(a: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    a = np.asarray(a, dtype=np.float64)
    out = np.empty_like(a)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    e = np.exp(a[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def sigmoid_backward(grad_out: np.ndarray, out: np.ndarray) -> np.ndarray:
    return grad_out * out * (1.0 - out)


def log_softmax_rows(a: np.ndarray) -> np.ndarray:
    if a.ndim != 2 or a.shape[1] < 2:
        raise ShapeError(f"log_softmax_rows needs >= 2 columns, got shape {a.shape}")
    shifted = a - a.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def log_softmax_backward(grad_out: np.ndarray, out: np.ndarray) -> np.ndarray:
    return grad_out - np.exp(out) * grad_out.sum(axis=1, keepdims=True)


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Params = field(default_factory=dict)
    v: Params = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: Mapping[str, np.ndarray], **kw) -> "AdamState":
        st = cls(**kw)
        for k, p in params.items():
            st.m[k] = np.zeros_like(p)
            st.v[k] = np.zeros_like(p)
        return st


def adam_step(params: Params, grads: Mapping[str, np.ndarray], state: AdamState, lr: float):
    """Bias-corrected Adam update, in place. Returns ``(params, state)``."""
    for k, p in params.items():
        g = grads[k]
        if g.shape != p.shape:
            raise ShapeError(f"gradient for {k!r} has shape {g.shape}, parameter {p.shape}")
        if k not in state.m:
            state.m[k] = np.zeros_like(p)
            state.v[k] = np.zeros_like(p)
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    for k, p in params.items():
        g = grads[k]
        m = state.m[k]
        v = state.v[k]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params, state


def finite_diff_check(
    forward: Callable[[Params], float],
    params: Params,
    analytic_grads: Mapping[str, np.ndarray],
    epsilon: float = 1e-6,
) -> float:
    """Max over all coordinates of |a - n| / max(1e-8, |a| + |n|).

    ``forward`` is called with ``params`` perturbed in place one coordinate at
    a time; every coordinate is restored before returning.
    """
    if not 1e-7 <= epsilon <= 1e-3:
        raise GradientCheckError(f"epsilon {epsilon} outside [1e-7, 1e-3]")
    worst = 0.0
    for name, p in params.items():
        g = analytic_grads[name]
        flat = p.reshape(-1)
        gflat = np.asarray(g, dtype=np.float64).reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            up = forward(params)
            flat[i] = orig - epsilon
            down = forward(params)
            flat[i] = orig
            if not (np.isfinite(up) and np.isfinite(down)):
                raise GradientCheckError(f"non-finite loss while perturbing {name}[{i}]")
            num = (up - down) / (2.0 * epsilon)
            err = abs(gflat[i] - num) / max(1e-8, abs(gflat[i]) + abs(num))
            worst = max(worst, err)
    return worst
