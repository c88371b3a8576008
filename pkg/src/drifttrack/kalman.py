"""Scalar Kalman filter for the Gaussian random-walk state model.

State: theta_k = theta_{k-1} + delta_k eps_k; observation: X_k =
theta_k + xi_k with noise variance var_noise.  The normalized posterior
variance gamma_k obeys a rational recursion and doubles as the gain of
the tracking recursion, which is how the cross-check with the generic
tracker works.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = ["KalmanConfig", "kalman_gain_sequence", "kalman_filter_run"]


@dataclass(frozen=True)
class KalmanConfig:
    m0: float                      # prior mean
    var0: float                    # prior variance
    var_noise: float               # observation noise variance
    deltas: Sequence[float] = ()   # state innovation scales; empty = static

    def __post_init__(self):
        if self.var0 <= 0 or self.var_noise <= 0:
            raise ValueError("variances must be positive")
        if any(d < 0 for d in self.deltas):
            raise ValueError("innovation scales must be nonnegative")

    def delta(self, k: int) -> float:
        if not self.deltas:
            return 0.0
        if k - 1 < len(self.deltas):
            return float(self.deltas[k - 1])
        return float(self.deltas[-1])


def kalman_gain_sequence(config: KalmanConfig, n: int) -> np.ndarray:
    """Gains gamma_1..gamma_n from gamma_0 = var0/var_noise and
    gamma_k = (gamma_{k-1} + delta_k^2/var_noise) / (same + 1)."""
    gamma = config.var0 / config.var_noise
    out = np.empty(n)
    for k in range(1, n + 1):
        drift = config.delta(k) ** 2 / config.var_noise
        num = gamma + drift
        gamma = num / (num + 1.0)
        out[k - 1] = gamma
    return out


def kalman_filter_run(config: KalmanConfig, observations) -> tuple[np.ndarray, np.ndarray]:
    """Estimates theta_hat_0..theta_hat_n and exact MSE values.

    theta_hat_k = theta_hat_{k-1} + gamma_k (X_k - theta_hat_{k-1});
    the filter MSE at step k is var_noise * gamma_k.
    """
    observations = np.atleast_1d(np.asarray(observations, dtype=float))
    n = observations.size
    gains = kalman_gain_sequence(config, n)
    estimates = np.empty(n + 1)
    estimates[0] = config.m0
    est = config.m0
    for k in range(n):
        est = est + gains[k] * (observations[k] - est)
        estimates[k + 1] = est
    mse = config.var_noise * gains
    return estimates, mse
