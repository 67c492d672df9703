"""Local convex lower bound on the logistic sigmoid.

    sigma(x) >= sigma(xi) exp{(x - xi)/2 - lambda(xi) (x^2 - xi^2)}

with lambda(xi) = tanh(xi/2) / (4 xi). The bound is exact at x = +-xi and is
quadratic in x inside the exponent, which keeps the gate factors Gaussian.
"""

from __future__ import annotations

import logging

import numpy as np
from scipy.special import log_expit

logger = logging.getLogger(__name__)

_TAYLOR_RADIUS = 1e-4


def lambda_of_xi(xi):
    """tanh(xi/2) / (4 xi), with the limit 1/8 at xi = 0. Accepts scalars or arrays."""
    xi = np.abs(np.asarray(xi, dtype=float))
    small = xi < _TAYLOR_RADIUS
    safe = np.where(small, 1.0, xi)
    value = np.where(small, 0.125 - xi**2 / 192.0, np.tanh(safe / 2.0) / (4.0 * safe))
    return value if value.ndim else float(value)


def log_bound_F(x, xi):
    """ln F(x, xi) = ln sigma(xi) + (x - xi)/2 - lambda(xi) (x^2 - xi^2)."""
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    value = log_expit(xi) + (x - xi) / 2.0 - lambda_of_xi(xi) * (x**2 - xi**2)
    return value if np.ndim(value) else float(value)


def optimal_xi_squared(x_n: np.ndarray, second_moment: np.ndarray) -> float:
    """x_n' <v v'> x_n, the xi^2 that makes the bound tightest in expectation.

    A negative quadratic form can only come from round-off; it is clamped to
    zero and logged.
    """
    x_n = np.asarray(x_n, dtype=float).reshape(-1)
    value = float(x_n @ np.asarray(second_moment, dtype=float) @ x_n)
    if value < 0.0:
        logger.warning("Clamped negative xi^2 = %.3e to zero", value)
        return 0.0
    return value


def optimal_xi_squared_batch(
    inputs: np.ndarray, second_moment: np.ndarray
) -> tuple[np.ndarray, int]:
    """Row-wise :func:`optimal_xi_squared`; returns (values, number clamped)."""
    values = np.einsum("np,pq,nq->n", inputs, second_moment, inputs)
    negative = values < 0.0
    clamped = int(np.count_nonzero(negative))
    if clamped:
        logger.warning(
            "Clamped %d negative xi^2 values (min %.3e) to zero",
            clamped,
            float(values.min()),
        )
    return np.where(negative, 0.0, values), clamped
