"""Forecast error metrics and closed-form robustness/convergence bound
calculators.

Metrics are computed on denormalized values so MAPE percentages are
physically meaningful; targets with |y| <= 1e-6 are excluded from MAPE and
the exclusion count is reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Scaler
from .errors import AllTargetsZero, LengthMismatch, PreconditionUnsatisfied

MAPE_ZERO_TOL = 1e-6


@dataclass(frozen=True)
class MetricsReport:
    mse: float
    rmse: float
    mape_pct: float
    n_samples: int
    n_excluded_zero_targets: int


def metrics(pred: np.ndarray, actual: np.ndarray, denorm: Scaler) -> MetricsReport:
    pred = np.asarray(pred, dtype=np.float64)
    actual = np.asarray(actual, dtype=np.float64)
    if pred.shape != actual.shape or pred.ndim != 1 or len(pred) < 1:
        raise LengthMismatch(f"pred {pred.shape} vs actual {actual.shape}")
    y_hat = denorm.denormalize(pred)
    y = denorm.denormalize(actual)
    err = y_hat - y
    mse = float(np.mean(err * err))
    included = np.abs(y) > MAPE_ZERO_TOL
    n_excluded = int(np.sum(~included))
    if n_excluded == len(y):
        raise AllTargetsZero("every target excluded from MAPE")
    mape = float(100.0 * np.mean(np.abs(err[included]) / np.abs(y[included])))
    return MetricsReport(
        mse=mse,
        rmse=math.sqrt(mse),
        mape_pct=mape,
        n_samples=len(y),
        n_excluded_zero_targets=n_excluded,
    )


def theorem1_bound(l1_norm_l: float, f0: float, fstar: float, sigma_l1: float, k: int) -> float:
    """Sign-descent convergence bound: (1/sqrt(N)) * [sqrt(||L||_1)(f0 - f* + 1/2)
    + 2||sigma||_1] with N = K^2 gradient calls."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if l1_norm_l <= 0:
        raise ValueError("l1_norm_l must be positive")
    n_calls = k * k
    return (math.sqrt(l1_norm_l) * (f0 - fstar + 0.5) + 2.0 * sigma_l1) / math.sqrt(n_calls)


def theorem2_bound(l_smooth: float, eta: float, t: int, delta_frac: float, n: int, rounds: int) -> float:
    """Parameter-deviation bound under data poisoning by t clients with
    poisoned fraction delta_frac."""
    if l_smooth <= 0 or n < 1 or rounds < 0 or t < 0:
        raise ValueError("l_smooth > 0, n >= 1, rounds >= 0, t >= 0 required")
    if not delta_frac < 1.0 / (8.0 * l_smooth * (t + 1)):
        raise PreconditionUnsatisfied("delta_frac < 1/(8L(t+1))")
    if not eta < 1.0 / (4.0 * l_smooth):
        raise PreconditionUnsatisfied("eta < 1/(4L)")
    sqrt_n = math.sqrt(n)
    inner = (1.0 + 2.0 * (t + 1) * delta_frac / sqrt_n) ** sqrt_n + 1.0 / sqrt_n
    return (1.0 + l_smooth * eta) ** rounds * inner


def theorem3_bound(m_bound: float, eta: float, t: int, n: int, l_smooth: float,
                   rounds: int, delta0: float) -> float:
    """Parameter-deviation bound under model poisoning by t of n clients,
    for M-bounded parameters; log is natural."""
    if n < 1 or rounds < 0 or t < 0 or l_smooth <= 0:
        raise ValueError("n >= 1, rounds >= 0, t >= 0, l_smooth > 0 required")
    if not t < n / 4.0:
        raise PreconditionUnsatisfied("t < n/4")
    if not eta < 1.0 / l_smooth:
        raise PreconditionUnsatisfied("eta < 1/L")
    growth = (1.0 + 2.0 * m_bound * m_bound * eta * t / n) ** rounds
    tail = (2.0 * m_bound * m_bound * eta / l_smooth) * growth * math.sqrt(
        8.0 * (t + 1) * math.log(n) / n
    )
    return growth * delta0 + tail
