"""Dense numeric kernel for the bigram CNN.

The few tensor operations the scorer needs, each with a hand-derived
backward pass, plus a central-difference gradient checker. Matrices are
2-D float64 ndarrays (rows x cols); every backward pass here is verified
against finite_diff_check in the test suite.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NumericError
from .validation import as_vector

P_CLAMP = 1e-7


@dataclass(frozen=True)
class GradCheckReport:
    """Outcome of a finite-difference check over one parameter vector."""

    max_rel_err: float
    worst_index: int
    passed: bool


def _bigram_rows(x: np.ndarray) -> np.ndarray:
    # (len-1) x 2*depth matrix of adjacent-row pairs
    return np.concatenate([x[:-1], x[1:]], axis=1)


def conv_bigram_pre(x: np.ndarray, filters: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Pre-activation bigram convolution: out[i, f] = filters[f] . [x[i]; x[i+1]] + bias[f]."""
    if x.shape[0] < 2:
        raise ValueError(f"input has {x.shape[0]} rows; a width-2 filter needs at least 2")
    return _bigram_rows(x) @ filters.T + bias


def conv_bigram(x: np.ndarray, filters: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """tanh of the width-2 full-depth convolution over adjacent rows."""
    return np.tanh(conv_bigram_pre(x, filters, bias))


def conv_bigram_backward(
    x: np.ndarray, filters: np.ndarray, out: np.ndarray, d_out: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Backward pass of conv_bigram; out must be the forward tanh output.

    Returns (d_x, d_filters, d_bias).
    """
    d_pre = d_out * (1.0 - out * out)
    rows = _bigram_rows(x)
    d_filters = d_pre.T @ rows
    d_bias = d_pre.sum(axis=0)
    d_rows = d_pre @ filters
    depth = x.shape[1]
    d_x = np.zeros_like(x)
    d_x[:-1] += d_rows[:, :depth]
    d_x[1:] += d_rows[:, depth:]
    return d_x, d_filters, d_bias


def avg_pool2(x: np.ndarray) -> np.ndarray:
    """Column-wise mean over non-overlapping windows of 2, stride 2.

    A trailing odd row forms its own window instead of being dropped.
    """
    n = x.shape[0]
    even = n - (n % 2)
    out = np.empty(((n + 1) // 2, x.shape[1]))
    out[: even // 2] = (x[0:even:2] + x[1:even:2]) / 2.0
    if n % 2:
        out[-1] = x[-1]
    return out


def avg_pool2_backward(d_out: np.ndarray, n_rows: int) -> np.ndarray:
    """Backward pass of avg_pool2 for an input with n_rows rows."""
    even = n_rows - (n_rows % 2)
    d_x = np.empty((n_rows, d_out.shape[1]))
    d_x[0:even:2] = d_out[: even // 2] / 2.0
    d_x[1:even:2] = d_out[: even // 2] / 2.0
    if n_rows % 2:
        d_x[-1] = d_out[-1]
    return d_x


def global_avg_pool(x: np.ndarray) -> np.ndarray:
    """Column means, collapsing a length x n_f map to an n_f vector."""
    return x.mean(axis=0)


def global_avg_pool_backward(d_out: np.ndarray, n_rows: int) -> np.ndarray:
    return np.tile(d_out / n_rows, (n_rows, 1))


def sigmoid(x: float) -> float:
    """Logistic function, stable for large |x|."""
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def bce_loss(p: float, label: int) -> float:
    """Binary cross-entropy with p clamped to [P_CLAMP, 1 - P_CLAMP]."""
    p = min(max(p, P_CLAMP), 1.0 - P_CLAMP)
    return -label * math.log(p) - (1 - label) * math.log(1.0 - p)


def bce_sigmoid_backward(p: float, label: int) -> float:
    """d bce_loss(sigmoid(z), label) / dz given p = sigmoid(z).

    Zero in the clamped regime, where the loss is locally constant in z.
    """
    if p < P_CLAMP or p > 1.0 - P_CLAMP:
        return 0.0
    return p - label


def finite_diff_check(
    f: Callable[[np.ndarray], float],
    analytic_grad,
    theta,
    eps: float = 1e-5,
    tol: float = 1e-4,
) -> GradCheckReport:
    """Compare an analytic gradient against central finite differences.

    Per coordinate: numeric = (f(theta + eps e_i) - f(theta - eps e_i)) / (2 eps),
    rel err = |a - n| / max(1e-8, |a| + |n|). Passes iff the max rel err is
    below tol. Raises NumericError if f evaluates to a non-finite value.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    theta = as_vector(theta, "theta")
    analytic = as_vector(analytic_grad, "analytic_grad")
    if analytic.shape != theta.shape:
        raise ValueError(f"analytic_grad shape {analytic.shape} != theta shape {theta.shape}")
    numeric = np.empty_like(theta)
    for i in range(theta.size):
        probe = theta.copy()
        probe[i] = theta[i] + eps
        f_plus = float(f(probe))
        probe[i] = theta[i] - eps
        f_minus = float(f(probe))
        if not (math.isfinite(f_plus) and math.isfinite(f_minus)):
            raise NumericError(f"objective is non-finite near coordinate {i}")
        numeric[i] = (f_plus - f_minus) / (2.0 * eps)
    rel = np.abs(analytic - numeric) / np.maximum(1e-8, np.abs(analytic) + np.abs(numeric))
    worst = int(np.argmax(rel)) if rel.size else 0
    max_rel = float(rel[worst]) if rel.size else 0.0
    return GradCheckReport(max_rel_err=max_rel, worst_index=worst, passed=max_rel < tol)
