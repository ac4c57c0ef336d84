"""Caputo fractional derivatives and the scaled CFGD search direction.

Three independent evaluation routes live here:

* closed forms for the identity and the square map,
* Taylor-series evaluation around the terminal ``c``,
* Gauss-Jacobi quadrature of the coordinate-restricted derivatives.

For a quadratic objective the direction also has an exact closed form,
``A x + b + gamma * diag(A) (x - c)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, DomainError
from .linalg import as_matrix, as_vector
from .special import QuadratureRule, c_alpha, gamma_fn, gauss_jacobi

SERIES_MAX_TERMS = 30
_SERIES_STOP_WINDOW = 4


@dataclass(frozen=True)
class FracParams:
    alpha: float
    beta: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not math.isfinite(self.beta):
            raise DomainError(f"beta must be finite, got {self.beta}")

    @classmethod
    def from_gamma(cls, alpha: float, gamma: float) -> "FracParams":
        return cls(alpha, gamma + gamma_shift(alpha))

    @property
    def gamma(self) -> float:
        return self.beta - gamma_shift(self.alpha)


def gamma_shift(alpha: float) -> float:
    """(1 - alpha) / (2 - alpha); beta minus this is the effective regularization."""
    return (1.0 - alpha) / (2.0 - alpha)


def caputo_identity(alpha: float, c: float, x: float) -> float:
    """Left (x > c) or right (x < c) Caputo derivative of z -> z."""
    h = x - c
    if h == 0.0:
        return 0.0
    return math.copysign(abs(h) ** (1.0 - alpha), h) / gamma_fn(2.0 - alpha)


def caputo_square(alpha: float, c: float, x: float) -> float:
    """Left/right Caputo derivative of z -> z^2."""
    return 2.0 * caputo_identity(alpha, c, x) * (x - gamma_shift(alpha) * (x - c))


def _series_sums(coeffs, alpha, c, x, K):
    coeffs = [float(v) for v in coeffs]
    if K is None:
        K = SERIES_MAX_TERMS
    K = min(int(K), len(coeffs) - 1)
    if K < 1:
        raise DomainError("series needs at least the first derivative at c")
    h = x - c
    g2 = gamma_fn(2.0 - alpha)
    first = second = 0.0
    recent = []
    hp = 1.0  # h^(k-1)
    for k in range(1, K + 1):
        t1 = g2 / gamma_fn(k + 1.0 - alpha) * coeffs[k] * hp
        t2 = g2 / gamma_fn(k - alpha) * coeffs[k] * hp if k >= 2 else 0.0
        first += t1
        second += t2
        # f^(k)(c) can vanish for isolated k (odd/even functions), so only stop
        # after a run of negligible terms
        recent.append(max(abs(t1), abs(t2)))
        if len(recent) >= _SERIES_STOP_WINDOW:
            scale = max(abs(first), abs(second))
            if scale > 0.0 and max(recent[-_SERIES_STOP_WINDOW:]) < 1e-16 * scale:
                break
        hp *= h
    return first, second


def caputo_series(coeffs, alpha: float, c: float, x: float, K: int | None = None):
    """Caputo derivatives of an analytic f from its Taylor data at c.

    ``coeffs[k]`` is f^(k)(c). Returns ``(D^alpha f, |x - c| D^(1+alpha) f)``
    at x, both as D^alpha I(x) times the truncated series. Exact for a
    polynomial whose degree does not exceed K.
    """
    first, second = _series_sums(coeffs, alpha, c, x, K)
    dI = caputo_identity(alpha, c, x)
    return dI * first, dI * second


def scaled_cfd_series(coeffs, alpha: float, beta: float, c: float, x: float, K: int | None = None) -> float:
    """Scaled fractional derivative (D^a f + beta |x-c| D^(1+a) f) / D^a I via series.

    Evaluated without forming the ratio, so x == c is allowed (gives f'(c)).
    """
    first, second = _series_sums(coeffs, alpha, c, x, K)
    return first + beta * second


def node_map(x: np.ndarray, c: np.ndarray, rule: QuadratureRule) -> np.ndarray:
    """Evaluation points t[j, l] = c_j + (x_j - c_j)(1 + u_l)/2.

    The singular end u = 1 always lands on x_j, for x_j on either side of c_j.
    """
    return c[:, None] + (x - c)[:, None] * (0.5 * (1.0 + rule.nodes))[None, :]


def scaled_direction_quadrature(obj, x, c, params: FracParams, rule: QuadratureRule | None = None,
                                quad_points: int | None = None) -> np.ndarray:
    """Scaled CFGD direction from s-point Gauss-Jacobi quadrature.

    Component j is ``C_a sum_l w_l f'_j(t_jl) + C_a beta (x_j - c_j) sum_l w_l f''_j(t_jl)``.
    The second term carries the sign of x_j - c_j: the right-sided derivative
    of order 1 + alpha divided by the right-sided D^alpha I flips sign.
    """
    x = as_vector(x)
    c = as_vector(c)
    if x.shape != c.shape or x.size != obj.dim:
        raise DimensionMismatch(f"iterate {x.shape}, terminal {c.shape}, objective dim {obj.dim}")
    if rule is None:
        rule = gauss_jacobi(quad_points or 10, params.alpha)
    elif rule.alpha != params.alpha:
        raise DomainError(f"rule built for alpha={rule.alpha}, params have alpha={params.alpha}")
    T = node_map(x, c, rule)
    need_second = params.beta != 0.0
    f1, f2 = obj.coord_derivatives(x, T, second=need_second)
    ca = c_alpha(params.alpha)
    d = ca * (f1 @ rule.weights)
    if need_second:
        d += ca * params.beta * (x - c) * (f2 @ rule.weights)
    return d


def scaled_direction_closed_quadratic(A, b, x, c, params: FracParams) -> np.ndarray:
    """Exact scaled direction for f = x^T A x / 2 + b^T x."""
    A = as_matrix(A)
    b, x, c = as_vector(b), as_vector(x), as_vector(c)
    d = A.shape[0]
    if A.shape != (d, d) or b.size != d or x.size != d or c.size != d:
        raise DimensionMismatch(f"A {A.shape}, b {b.shape}, x {x.shape}, c {c.shape}")
    return A @ x + b + params.gamma * np.diag(A) * (x - c)
