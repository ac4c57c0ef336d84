"""Theory-side oracles: Tikhonov fixed points, rate constants and error bounds."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .caputo import gamma_shift
from .errors import DimensionMismatch, DomainError
from .linalg import (as_matrix, as_vector, condition_number, extreme_singular_values,
                     spd_solve, spectral_norm, sym_eigvalsh)
from .special import gamma_fn

# --- Tikhonov regularization ------------------------------------------------


@dataclass(frozen=True)
class TikhonovProblem:
    """min ||W^T x - y||^2 + gamma ||R^T (x - xbar)||^2 with R_jj = sqrt(sum_k W[j, k]^2)."""

    W: np.ndarray
    y: np.ndarray
    gamma: float
    xbar: np.ndarray

    def __post_init__(self):
        W = as_matrix(self.W)
        y = as_vector(self.y)
        xbar = as_vector(self.xbar)
        if W.shape != (xbar.size, y.size):
            raise DimensionMismatch(f"W {W.shape}, y {y.shape}, xbar {xbar.shape}")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "xbar", xbar)

    @property
    def R(self) -> np.ndarray:
        return np.diag(np.sqrt(np.sum(self.W**2, axis=1)))


def tikhonov_solution(p: TikhonovProblem) -> np.ndarray:
    W = p.W
    R = p.R
    M = W @ W.T + p.gamma * (R @ R.T)
    return p.xbar + spd_solve(0.5 * (M + M.T), W @ (p.y - W.T @ p.xbar))


def tilde_A(W, alpha: float, beta: float) -> np.ndarray:
    """W W^T with its diagonal scaled by beta + 1/(2 - alpha)."""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    A = as_matrix(W) @ as_matrix(W).T
    A = 0.5 * (A + A.T)
    np.fill_diagonal(A, (beta + 1.0 / (2.0 - alpha)) * np.diag(A))
    return A


def tilde_A_gamma(A, gamma: float) -> np.ndarray:
    """A + gamma diag(A); equals tilde_A when A = W W^T and gamma = beta - (1-alpha)/(2-alpha)."""
    A = as_matrix(A)
    return A + gamma * np.diag(np.diag(A))


def na_rate_bound(W, alpha: float, beta: float, eta: float, k: int) -> float:
    """|1 - eta / kappa|^k, the squared-distance decay factor for NA-CFGD."""
    if not 0.0 < eta < 2.0:
        raise DomainError(f"eta must lie in (0, 2), got {eta}")
    kappa = condition_number(tilde_A(W, alpha, beta))
    return abs(1.0 - eta / kappa) ** k


# --- adaptive terminal bound --------------------------------------------------


@dataclass
class BoundMatrices:
    """The matrices A_{k,j}, j = 0..L, for k = 1..k_max (``mats[k-1][j]``)."""

    L: int
    mats: list
    _norms: dict = field(default_factory=dict, repr=False)

    @property
    def k_max(self) -> int:
        return len(self.mats)

    def get(self, k: int, j: int) -> np.ndarray:
        return self.mats[k - 1][j]

    def norm(self, k: int, j: int) -> float:
        key = (k, j)
        if key not in self._norms:
            self._norms[key] = spectral_norm(self.get(k, j))
        return self._norms[key]

    def bound(self, k: int, init_errors) -> float:
        """sum_j ||A_{k,j}|| ||x^(-j) - x*||, with init_errors[j] = ||x^(-j) - x*||."""
        if len(init_errors) != self.L + 1:
            raise DimensionMismatch(f"need {self.L + 1} initial errors, got {len(init_errors)}")
        return sum(self.norm(k, j) * float(e) for j, e in enumerate(init_errors))


def at_bound_matrices(A, gamma: float, eta: float, L: int, k_max: int) -> BoundMatrices:
    A = as_matrix(A)
    if L < 1 or k_max < 1:
        raise DomainError("need L >= 1 and k_max >= 1")
    d = A.shape[0]
    D = np.diag(np.diag(A))
    first = [np.zeros((d, d)) for _ in range(L + 1)]
    first[0] = np.eye(d) - eta * (A + gamma * D)
    first[L] = first[L] + eta * gamma * D
    mats = [first]
    for _ in range(2, k_max + 1):
        prev = mats[-1]
        cur = [None] * (L + 1)
        cur[0] = prev[0] @ first[0] + prev[1]
        for j in range(1, L):
            cur[j] = prev[j + 1]
        cur[L] = prev[0] @ first[L]
        mats.append(cur)
    return BoundMatrices(L, mats)


# --- adaptive order bound -----------------------------------------------------


def ao_error_bound(W, y, gammas, etas, ks, x0, c, grid_points: int = 100):
    """Bound on ||x_s - x*|| after each stage s = 1..S of AO-CFGD.

    ``etas`` are the normalized stepsizes (the actual step is eta_s / sigma_max).
    Returns ``(bounds, info)`` where info carries the constant C and B_max.
    """
    W = as_matrix(W)
    y = as_vector(y)
    gammas = [float(g) for g in gammas]
    if any(g < 0 for g in gammas):
        raise DomainError("adaptive-order bound needs gamma_s >= 0")
    if not (len(gammas) == len(etas) == len(ks)):
        raise DimensionMismatch("gammas, etas and ks must have equal length")
    x0 = as_vector(x0)
    c = as_vector(c)
    A = W @ W.T
    A = 0.5 * (A + A.T)
    D = np.diag(np.diag(A))

    x_star = spd_solve(A, W @ y)
    R = []
    for g, eta, k in zip(gammas, etas, ks):
        kappa = condition_number(A + g * D)
        R.append(abs(1.0 - eta / kappa) ** (k / 2.0))

    b_max = 0.0
    for g in np.linspace(0.0, max(gammas), grid_points):
        lam_min = sym_eigvalsh(A + g * D)[0]
        if lam_min <= 0:
            raise DomainError(f"W W^T + gamma R R^T is singular at gamma={g}")
        b_max = max(b_max, 1.0 / lam_min)
    w_norm = extreme_singular_values(W)[1]
    r_norm2 = float(np.max(np.diag(A)))  # ||R||^2
    C = b_max**2 * w_norm**2 * r_norm2 * float(np.linalg.norm(x_star - c))

    x_tik1 = tikhonov_solution(TikhonovProblem(W, y, gammas[0], c))
    e0 = float(np.linalg.norm(x0 - x_tik1))
    bounds = []
    for s in range(1, len(gammas) + 1):
        # R[i - 1] is R_i
        prod_all = np.prod([R[s - 1 - j] for j in range(s)])
        tail = 0.0
        for i in range(1, s):
            prod_i = np.prod([R[s - 1 - j] for j in range(i)])
            tail += prod_i * abs(gammas[s - i - 1] - gammas[s - i])
        bounds.append(prod_all * e0 + C * (tail + abs(gammas[s - 1])))
    info = {"C": C, "B_max": b_max, "R": R, "x_star": x_star, "grid_points": grid_points}
    return np.array(bounds), info


# --- smoothing ------------------------------------------------------------


def smoothing_coefficient(k: int, alpha: float, beta: float) -> float:
    """Damping factor applied to the k-th Taylor term (k >= 2)."""
    if k < 2:
        raise DomainError("smoothing coefficients start at k = 2")
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    g2 = gamma_fn(2.0 - alpha)
    gk = gamma_fn(k)
    return g2 * gk / gamma_fn(k + 1.0 - alpha) + beta * g2 * gk / gamma_fn(k - alpha)


SMOOTHING_MAX_TERMS = 40


@dataclass(frozen=True)
class SmoothingSeries:
    """Taylor data of f at c; ``coeffs[k] = f^(k)(c)``."""

    alpha: float
    beta: float
    c: float
    coeffs: tuple
    K: int | None = None

    @property
    def order(self) -> int:
        K = SMOOTHING_MAX_TERMS if self.K is None else self.K
        return min(K, len(self.coeffs) - 1)

    def scaled_coeffs(self) -> np.ndarray:
        """Taylor coefficients of the smoothing F, i.e. F^(k)(c) / k!."""
        out = np.zeros(self.order + 1)
        fact = 1.0
        for k in range(self.order + 1):
            if k > 0:
                fact *= k
            ck = 1.0 if k < 2 else smoothing_coefficient(k, self.alpha, self.beta)
            out[k] = ck * float(self.coeffs[k]) / fact
        return out


def smoothing_value(s: SmoothingSeries, z):
    p = np.polynomial.Polynomial(s.scaled_coeffs())
    out = p(np.asarray(z, dtype=float) - s.c)
    return float(out) if np.ndim(out) == 0 else out


def smoothing_derivative(s: SmoothingSeries, z):
    p = np.polynomial.Polynomial(s.scaled_coeffs()).deriv()
    out = p(np.asarray(z, dtype=float) - s.c)
    return float(out) if np.ndim(out) == 0 else out


def gamma_of(alpha: float, beta: float) -> float:
    return beta - gamma_shift(alpha)
