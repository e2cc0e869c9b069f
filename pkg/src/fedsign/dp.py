"""Gaussian-mechanism calibration and seeded noise application.

Sampling goes through the inverse normal CDF applied to uniforms from the
caller's generator, so draws are bit-reproducible across platforms
regardless of the generator's native normal algorithm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .errors import BudgetOutOfRange

# Per-coordinate sensitivity of a sign vector: a flipped sign moves -1 <-> +1.
SIGN_SENSITIVITY = 2.0

_U53 = float(1 << 53)


@dataclass(frozen=True)
class PrivacyBudget:
    epsilon: float
    delta: float
    sensitivity: float = SIGN_SENSITIVITY

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise BudgetOutOfRange(f"epsilon {self.epsilon} outside (0,1)")
        if not 0.0 < self.delta < 1.0:
            raise BudgetOutOfRange(f"delta {self.delta} outside (0,1)")
        if self.sensitivity <= 0.0:
            raise BudgetOutOfRange(f"sensitivity {self.sensitivity} must be positive")


def gaussian_sigma(budget: PrivacyBudget) -> float:
    """Minimal compliant noise scale c * sensitivity / epsilon with
    c = sqrt(2 ln(1.25/delta))."""
    c = math.sqrt(2.0 * math.log(1.25 / budget.delta))
    return c * budget.sensitivity / budget.epsilon


def standard_normal(rng: np.random.Generator, size) -> np.ndarray:
    """Inverse-CDF standard normals from the generator's uniform stream.

    Uniforms are taken on the open interval (0,1) via 53-bit integers so
    ndtri never sees 0 or 1.
    """
    u = rng.integers(1, 1 << 53, size=size, dtype=np.int64) / _U53
    return ndtri(u)


def perturb(v: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Add i.i.d. Gaussian(0, sigma^2) noise from the given stream."""
    v = np.asarray(v, dtype=np.float64)
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0.0:
        return v.copy()
    return v + sigma * standard_normal(rng, v.shape)
