"""Soft dynamic time warping (Cuturi & Blondel, 2017) with its analytic gradient.

Cost between points is the squared Euclidean distance. The soft minimum is
``-gamma * log(sum(exp(-a / gamma)))``, evaluated with the max-shift trick.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ..errors import InvalidArgument
from ..tensor import Tensor, custom_op


def sq_dist_matrix(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - y[None, :, :]
    return (diff * diff).sum(axis=-1)


@njit(cache=True)
def _forward(d, gamma):
    n, m = d.shape
    r = np.full((n + 1, m + 1), np.inf)
    r[0, 0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            a = -r[i - 1, j - 1] / gamma
            b = -r[i - 1, j] / gamma
            c = -r[i, j - 1] / gamma
            mx = max(a, max(b, c))
            s = np.exp(a - mx) + np.exp(b - mx) + np.exp(c - mx)
            r[i, j] = d[i - 1, j - 1] - gamma * (np.log(s) + mx)
    return r


@njit(cache=True)
def _backward(d, r, gamma):
    # e[i, j] = dR[n, m] / dR[i, j], 1-based on the forward table
    n, m = d.shape
    e = np.zeros((n + 2, m + 2))
    e[n, m] = 1.0
    for i in range(n, 0, -1):
        for j in range(m, 0, -1):
            if i == n and j == m:
                continue
            acc = 0.0
            if i < n:
                acc += e[i + 1, j] * np.exp((r[i + 1, j] - d[i, j - 1] - r[i, j]) / gamma)
            if j < m:
                acc += e[i, j + 1] * np.exp((r[i, j + 1] - d[i - 1, j] - r[i, j]) / gamma)
            if i < n and j < m:
                acc += e[i + 1, j + 1] * np.exp((r[i + 1, j + 1] - d[i, j] - r[i, j]) / gamma)
            e[i, j] = acc
    return e[1:n + 1, 1:m + 1]


def _check(x, y, gamma):
    if not gamma > 0:
        raise InvalidArgument(f"gamma must be positive, got {gamma}")
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 2 or x.shape[1] != y.shape[1] or len(x) == 0 or len(y) == 0:
        raise InvalidArgument(f"softdtw needs non-empty (L, k) inputs, got {x.shape} and {y.shape}")
    return x, y


def softdtw(x: np.ndarray, y: np.ndarray, gamma: float) -> tuple[float, np.ndarray]:
    """Soft-DTW value and its gradient with respect to ``x``."""
    x, y = _check(x, y, gamma)
    d = sq_dist_matrix(x, y)
    r = _forward(d, float(gamma))
    w = _backward(d, r, float(gamma))
    grad = 2.0 * (w.sum(axis=1)[:, None] * x - w @ y)
    return float(r[-1, -1]), grad


def softdtw_value(x: np.ndarray, y: np.ndarray, gamma: float) -> float:
    x, y = _check(x, y, gamma)
    return float(_forward(sq_dist_matrix(x, y), float(gamma))[-1, -1])


def softdtw_loss(pred: Tensor, target: np.ndarray, gamma: float) -> Tensor:
    """Soft-DTW of a prediction tensor against a fixed target, as a tape op."""
    value, grad = softdtw(pred.data, target, gamma)
    return custom_op(np.array(value), (pred,), lambda g: (g * grad,))
