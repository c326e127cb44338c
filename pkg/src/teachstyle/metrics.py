"""Regression metrics: RMSE and Lin's concordance correlation coefficient."""

from __future__ import annotations

import numpy as np


def _pair(y, y_hat, min_len: int) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=np.float64).ravel()
    y_hat = np.asarray(y_hat, dtype=np.float64).ravel()
    if y.shape != y_hat.shape:
        raise ValueError(f"length mismatch: {y.size} vs {y_hat.size}")
    if y.size < min_len:
        raise ValueError(f"need at least {min_len} values, got {y.size}")
    return y, y_hat


def _centre(x: np.ndarray) -> tuple[float, np.ndarray]:
    # a constant vector gets exact zero deviations (np.mean may be off by an ulp)
    if x[0] == x.min() == x.max():
        return float(x[0]), np.zeros_like(x)
    m = x.mean()
    return m, x - m


def rmse(y, y_hat) -> float:
    y, y_hat = _pair(y, y_hat, 1)
    return float(np.sqrt(np.mean((y_hat - y) ** 2)))


def ccc(y, y_hat) -> float:
    """Lin's concordance correlation coefficient with population moments.

    When both vectors are constant the coefficient is undefined; it is then
    1 if the vectors are identical and 0 otherwise.
    """
    y, y_hat = _pair(y, y_hat, 2)
    my, dy = _centre(y)
    mp, dp = _centre(y_hat)
    cov = np.mean(dy * dp)
    denom = np.mean(dy**2) + np.mean(dp**2) + (my - mp) ** 2
    if denom == 0.0:
        return 1.0 if np.array_equal(y, y_hat) else 0.0
    return float(np.clip(2.0 * cov / denom, -1.0, 1.0))
