"""Objective functions exposing coordinate-restricted derivatives.

Every objective implements ``coord_derivatives(x, T)``: for each coordinate j
and each column l, the first and second derivative of
``t -> f(x + (t - x_j) e_j)`` at ``t = T[j, l]``. The fractional direction
only ever needs these, which keeps one CFGD step at O(s) gradient-like work.
"""
from __future__ import annotations

import numpy as np

from .errors import CacheMissing, DimensionMismatch, DomainError, NotSPD
from .linalg import as_matrix, as_vector, cholesky


class Objective:
    dim: int
    is_quadratic = False
    has_coordinate_second_derivative = True

    def value(self, x) -> float:
        raise NotImplementedError

    def gradient(self, x) -> np.ndarray:
        raise NotImplementedError

    def coord_derivatives(self, x, T, second=True):
        """Return (F1, F2) with shapes matching T (d x s); F2 is None if not requested."""
        raise NotImplementedError

    def coord_first(self, j: int, x, u: float) -> float:
        return float(self._single(j, x, u, second=False)[0])

    def coord_second(self, j: int, x, u: float) -> float:
        return float(self._single(j, x, u, second=True)[1])

    def _single(self, j, x, u, second):
        x = self._check(x)
        if not 0 <= j < self.dim:
            raise DimensionMismatch(f"coordinate {j} out of range for dimension {self.dim}")
        T = np.repeat(x[:, None], 1, axis=1)
        T[j, 0] = u
        f1, f2 = self.coord_derivatives(x, T, second=second)
        return f1[j, 0], (f2[j, 0] if second else None)

    def _check(self, x) -> np.ndarray:
        x = as_vector(x)
        if x.size != self.dim:
            raise DimensionMismatch(f"expected dimension {self.dim}, got {x.size}")
        return x

    def describe(self) -> dict:
        return {"objective": type(self).__name__, "dim": self.dim}


class QuadraticObjective(Objective):
    """f(x) = x^T A x / 2 + b^T x + c0 with A symmetric positive definite."""

    is_quadratic = True

    def __init__(self, A, b, c0: float = 0.0, check_pd: bool = True):
        A = as_matrix(A)
        b = as_vector(b)
        if A.shape != (b.size, b.size):
            raise DimensionMismatch(f"A {A.shape} incompatible with b of length {b.size}")
        scale = max(float(np.max(np.abs(A))), 1.0)
        if np.max(np.abs(A - A.T)) > 1e-12 * scale:
            raise NotSPD("A is not symmetric")
        if check_pd:
            cholesky(A)
        self.A = A
        self.b = b
        self.c0 = float(c0)
        self.dim = b.size
        self._diag = np.diag(A).copy()

    def value(self, x) -> float:
        x = self._check(x)
        return float(0.5 * x @ (self.A @ x) + self.b @ x + self.c0)

    def gradient(self, x) -> np.ndarray:
        x = self._check(x)
        return self.A @ x + self.b

    def coord_derivatives(self, x, T, second=True):
        x = self._check(x)
        g = self.A @ x + self.b
        f1 = g[:, None] + self._diag[:, None] * (T - x[:, None])
        f2 = np.broadcast_to(self._diag[:, None], T.shape) if second else None
        return f1, f2

    def minimizer(self) -> np.ndarray:
        from .linalg import spd_solve
        return spd_solve(self.A, -self.b)


class LeastSquaresObjective(QuadraticObjective):
    """f(x) = ||W^T x - y||^2 / 2 with W of shape d x m."""

    def __init__(self, W, y):
        W = as_matrix(W)
        y = as_vector(y)
        if W.shape[1] != y.size:
            raise DimensionMismatch(f"W {W.shape} incompatible with y of length {y.size}")
        A = W @ W.T
        A = 0.5 * (A + A.T)
        try:
            cholesky(A)
            full_rank = True
        except NotSPD:
            full_rank = False
        super().__init__(A, -(W @ y), 0.5 * float(y @ y), check_pd=False)
        self.W = W
        self.y = y
        self.full_rank = full_rank

    def value(self, x) -> float:
        x = self._check(x)
        r = self.W.T @ x - self.y
        return 0.5 * float(r @ r)

    def describe(self) -> dict:
        d, m = self.W.shape
        return {"objective": "LeastSquaresObjective", "dim": d, "m": m, "full_rank": self.full_rank}


def _dtanh(t):
    return 1.0 - t * t


class TwoLayerTanhNet(Objective):
    """Loss of N(z; x) = sum_j a3_j tanh(a1_j z + a2_j) against targets y.

    Parameters are flattened as ``x[(s-1) n + j] = a_{s,j}``, i.e. all input
    weights, then all biases, then all output coefficients.
    """

    def __init__(self, z, y, n: int):
        z = as_vector(z)
        y = as_vector(y)
        if z.size != y.size:
            raise DimensionMismatch(f"{z.size} inputs but {y.size} targets")
        if n < 1:
            raise DomainError("network width must be positive")
        self.z = z
        self.y = y
        self.n = int(n)
        self.dim = 3 * self.n
        self._cache = None

    @property
    def m(self) -> int:
        return self.z.size

    def unpack(self, x):
        x = self._check(x)
        n = self.n
        return x[:n], x[n:2 * n], x[2 * n:]

    def features(self, x, z=None) -> np.ndarray:
        a1, a2, _ = self.unpack(x)
        z = self.z if z is None else np.asarray(z, dtype=float)
        return np.tanh(np.outer(z, a1) + a2)

    def predict(self, x, z) -> np.ndarray:
        a3 = self.unpack(x)[2]
        return self.features(x, z) @ a3

    def value(self, x) -> float:
        r = self.predict(x, self.z) - self.y
        return 0.5 * float(r @ r)

    def gradient(self, x) -> np.ndarray:
        a1, a2, a3 = self.unpack(x)
        Phi = self.features(x)
        r = Phi @ a3 - self.y
        dphi = _dtanh(Phi)
        g1 = (r[:, None] * dphi * self.z[:, None]).sum(axis=0) * a3
        g2 = (r[:, None] * dphi).sum(axis=0) * a3
        g3 = Phi.T @ r
        return np.concatenate([g1, g2, g3])

    def prepare_cache(self, x):
        """Store tanh features and the misfit at base point x; O(mn)."""
        x = self._check(x).copy()
        x.setflags(write=False)
        Phi = self.features(x)
        misfit = Phi @ x[2 * self.n:] - self.y
        self._cache = (x, Phi, misfit)
        return self._cache

    def _cached(self, x):
        if self._cache is None or not np.array_equal(self._cache[0], x):
            raise CacheMissing("prepare_cache(x) must be called at this base point first")
        return self._cache

    def value_cached(self, x) -> float:
        _, _, r = self._cached(self._check(x))
        return 0.5 * float(r @ r)

    def coord_derivatives(self, x, T, second=True):
        x = self._check(x)
        _, Phi, r = self._cached(x)
        n, z = self.n, self.z
        a1, a2, a3 = x[:n], x[n:2 * n], x[2 * n:]
        T = np.asarray(T, dtype=float)
        s = T.shape[1]
        f1 = np.empty_like(T)
        f2 = np.empty_like(T) if second else None
        zc = z[:, None, None]
        rc = r[:, None, None]
        base = Phi[:, :, None]
        c3 = a3[None, :, None]

        # weights a1: t = j
        th = np.tanh(T[None, :n, :] * zc + a2[None, :, None])
        dp = _dtanh(th)
        mis = rc + c3 * (th - base)
        f1[:n] = np.sum(mis * c3 * dp * zc, axis=0)
        if second:
            f2[:n] = np.sum(mis * c3 * (-2.0 * th * dp) * zc**2 + (c3 * dp * zc) ** 2, axis=0)

        # biases a2: t = n + j
        th = np.tanh((np.outer(z, a1))[:, :, None] + T[None, n:2 * n, :])
        dp = _dtanh(th)
        mis = rc + c3 * (th - base)
        f1[n:2 * n] = np.sum(mis * c3 * dp, axis=0)
        if second:
            f2[n:2 * n] = np.sum(mis * c3 * (-2.0 * th * dp) + (c3 * dp) ** 2, axis=0)

        # coefficients a3: t = 2n + j, quadratic in u
        mis = rc + (T[None, 2 * n:, :] - c3) * base
        f1[2 * n:] = np.sum(mis * base, axis=0)
        if second:
            f2[2 * n:] = np.broadcast_to(np.sum(Phi**2, axis=0)[:, None], (n, s))
        return f1, f2

    def describe(self) -> dict:
        return {"objective": "TwoLayerTanhNet", "dim": self.dim, "m": self.m, "n": self.n}


def h1(z):
    return np.sin(5.0 * np.pi * np.asarray(z, dtype=float))


def h2(z):
    z = np.asarray(z, dtype=float)
    return np.sin(2.0 * np.pi * z) * np.exp(-z * z)


def h3(z):
    z = np.asarray(z, dtype=float)
    return (z > 0).astype(float) + 0.2 * np.sin(2.0 * np.pi * z)


# (z - 6)(z + 4)(7 z^2 + 10 z + 24)
LANDSCAPE_QUARTIC = np.polynomial.Polynomial.fromroots([6.0, -4.0]) * np.polynomial.Polynomial([24.0, 10.0, 7.0])


def landscape_quartic(z):
    return LANDSCAPE_QUARTIC(np.asarray(z, dtype=float))


SCALAR_TESTS = {"h1": h1, "h2": h2, "h3": h3, "landscape_quartic": landscape_quartic}


def scalar_test(selector: str, z):
    try:
        fn = SCALAR_TESTS[selector]
    except KeyError:
        raise DomainError(f"unknown test function {selector!r}; choose from {sorted(SCALAR_TESTS)}") from None
    out = fn(z)
    return float(out) if np.ndim(out) == 0 else out


def taylor_coefficients(poly: np.polynomial.Polynomial, c: float) -> list[float]:
    """[f(c), f'(c), ..., f^(deg)(c)] for a numpy polynomial."""
    out = []
    p = poly
    for _ in range(poly.degree() + 1):
        out.append(float(p(c)))
        p = p.deriv()
    return out
