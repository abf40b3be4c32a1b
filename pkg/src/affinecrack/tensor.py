"""Dense float64 kernels: matmul, ReLU, softmax cross-entropy, gradient checking."""
from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np

from .errors import LabelError, ShapeError


class LossAndGrad(NamedTuple):
    loss: float
    dlogits: np.ndarray


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(x: np.ndarray, dy: np.ndarray) -> np.ndarray:
    """Gradient of ReLU w.r.t. its input ``x``; zero at and below zero."""
    x = np.asarray(x)
    dy = np.asarray(dy)
    if x.shape != dy.shape:
        raise ShapeError(f"relu_backward shapes differ: {x.shape} vs {dy.shape}")
    return np.where(x > 0, dy, 0.0)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, labels) -> LossAndGrad:
    """Mean cross-entropy over the batch and its gradient w.r.t. ``logits``."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeError(f"logits {logits.shape} incompatible with labels {labels.shape}")
    n, k = logits.shape
    if n and (labels.min() < 0 or labels.max() >= k):
        raise LabelError(f"labels must lie in 0..{k - 1}")
    rows = np.arange(n)
    z = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    loss = float(np.mean(log_norm - z[rows, labels]))
    probs = np.exp(z - log_norm[:, None])
    probs[rows, labels] -= 1.0
    return LossAndGrad(loss, probs / n)


def grad_check(
    f: Callable[[np.ndarray], float],
    theta: np.ndarray,
    grad: np.ndarray,
    eps: float = 1e-5,
    skip: Callable[[np.ndarray], bool] | None = None,
) -> float:
    """Max relative error between ``grad`` and central differences of ``f`` at ``theta``.

    The relative error per coordinate uses the denominator
    ``max(|analytic|, |numeric|, 1e-12)``. If ``skip`` is given it is called
    right after each evaluation of ``f``; a coordinate for which it returns
    true at either perturbed point is left out (e.g. when the step crosses a
    non-differentiable point).
    """
    theta = np.array(theta, dtype=np.float64).ravel()
    grad = np.asarray(grad, dtype=np.float64).ravel()
    if grad.shape != theta.shape:
        raise ShapeError(f"gradient shape {grad.shape} != parameter shape {theta.shape}")
    worst = 0.0
    for i in range(theta.size):
        orig = theta[i]
        theta[i] = orig + eps
        up = f(theta)
        bad = skip is not None and skip(theta)
        theta[i] = orig - eps
        down = f(theta)
        bad = bad or (skip is not None and skip(theta))
        theta[i] = orig
        if bad:
            continue
        numeric = (up - down) / (2 * eps)
        denom = max(abs(grad[i]), abs(numeric), 1e-12)
        worst = max(worst, abs(grad[i] - numeric) / denom)
    return worst
