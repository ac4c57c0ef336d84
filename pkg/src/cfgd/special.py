"""Gamma function and Gauss-Jacobi rules for the weight (1 - u)^(-alpha) on [-1, 1]."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError, PoleError
from .linalg import SymTridiagonal, sym_eigenvalues

# Lanczos coefficients, g = 7, n = 9
_LANCZOS_G = 7
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def gamma_fn(x: float) -> float:
    """Gamma function via the Lanczos approximation (reflection below 1/2)."""
    x = float(x)
    if x <= 0.0 and x == math.floor(x):
        raise PoleError(f"Gamma has a pole at {x}")
    if x < 0.5:
        return math.pi / (math.sin(math.pi * x) * gamma_fn(1.0 - x))
    x -= 1.0
    acc = _LANCZOS_COEF[0]
    for i in range(1, _LANCZOS_G + 2):
        acc += _LANCZOS_COEF[i] / (x + i)
    t = x + _LANCZOS_G + 0.5
    return math.sqrt(2.0 * math.pi) * t ** (x + 0.5) * math.exp(-t) * acc


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"fractional order must lie in (0, 1), got {alpha}")
    return alpha


def c_alpha(alpha: float) -> float:
    """Normalizing constant (1 - alpha) 2^(alpha - 1)."""
    alpha = _check_alpha(alpha)
    return (1.0 - alpha) * 2.0 ** (alpha - 1.0)


@dataclass(frozen=True)
class QuadratureRule:
    alpha: float
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def s(self) -> int:
        return self.nodes.size

    @property
    def points(self):
        return list(zip(self.nodes.tolist(), self.weights.tolist()))

    def integrate(self, g) -> float:
        """Approximate the weighted integral of g over [-1, 1]."""
        return float(self.weights @ np.asarray(g(self.nodes), dtype=float))


def jacobi_recurrence(s: int, a: float, b: float):
    """Diagonal and off-diagonal of the Jacobi matrix for weight (1-u)^a (1+u)^b."""
    k = np.arange(s, dtype=float)
    ab = a + b
    diag = np.empty(s)
    diag[0] = (b - a) / (ab + 2.0)
    kk = k[1:]
    diag[1:] = (b * b - a * a) / ((2 * kk + ab) * (2 * kk + ab + 2.0))
    j = np.arange(1, s, dtype=float)
    t = 2 * j + ab
    beta = 4 * j * (j + a) * (j + b) * (j + ab) / (t * t * (t + 1.0) * (t - 1.0))
    return diag, np.sqrt(beta)


@lru_cache(maxsize=256)
def gauss_jacobi(s: int, alpha: float) -> QuadratureRule:
    """s-point Gauss rule for (1 - u)^(-alpha), built with Golub-Welsch."""
    if int(s) != s or s < 1:
        raise DomainError(f"number of quadrature points must be a positive integer, got {s}")
    s = int(s)
    alpha = _check_alpha(alpha)
    mu0 = 2.0 ** (1.0 - alpha) / (1.0 - alpha)
    diag, off = jacobi_recurrence(s, -alpha, 0.0)
    nodes, first = sym_eigenvalues(SymTridiagonal(diag, off), first_components=True)
    weights = mu0 * first**2
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(alpha, nodes, weights)
