"""Dense linear algebra used across the package.

Vectors and matrices are plain float64 numpy arrays. The factorizations here
(Cholesky, Householder tridiagonalization, implicit-shift QL) are written out
rather than delegated so that the quadrature rules and the conditioning
reports rest on code with known iteration caps and failure modes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, DomainError, NoConvergence, NotSPD

QL_MAX_SWEEPS = 50
_EPS = np.finfo(float).eps


def as_vector(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise DimensionMismatch(f"expected a vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise DomainError("vector has non-finite entries")
    return v


def as_matrix(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.size == 0:
        raise DimensionMismatch(f"expected a non-empty matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise DomainError("matrix has non-finite entries")
    return m


def _check_symmetric(A: np.ndarray) -> None:
    if A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"matrix must be square, got {A.shape}")
    scale = max(float(np.max(np.abs(A))), 1.0)
    if np.max(np.abs(A - A.T)) > 1e-10 * scale:
        raise NotSPD("matrix is not symmetric")


@dataclass(frozen=True)
class SymTridiagonal:
    diagonal: np.ndarray
    off_diagonal: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.diagonal, dtype=float).copy()
        e = np.asarray(self.off_diagonal, dtype=float).copy()
        if d.ndim != 1 or d.size == 0:
            raise DimensionMismatch("diagonal must be a non-empty vector")
        if e.shape != (d.size - 1,):
            raise DimensionMismatch(
                f"off-diagonal must have length {d.size - 1}, got {e.shape}"
            )
        d.setflags(write=False)
        e.setflags(write=False)
        object.__setattr__(self, "diagonal", d)
        object.__setattr__(self, "off_diagonal", e)

    @property
    def n(self) -> int:
        return self.diagonal.size

    def to_dense(self) -> np.ndarray:
        T = np.diag(self.diagonal)
        if self.n > 1:
            T += np.diag(self.off_diagonal, 1) + np.diag(self.off_diagonal, -1)
        return T


def cholesky(A) -> np.ndarray:
    """Lower-triangular L with A = L L^T. Raises NotSPD on a non-positive pivot."""
    A = as_matrix(A)
    _check_symmetric(A)
    n = A.shape[0]
    L = np.zeros_like(A)
    for j in range(n):
        s = A[j, j] - L[j, :j] @ L[j, :j]
        if not s > 0.0:
            raise NotSPD(f"non-positive pivot {s:.3e} at column {j}")
        L[j, j] = math.sqrt(s)
        L[j + 1:, j] = (A[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def _forward(L, b):
    y = np.empty_like(b)
    for i in range(b.size):
        y[i] = (b[i] - L[i, :i] @ y[:i]) / L[i, i]
    return y


def _backward(L, y):
    # solves L^T x = y
    n = y.size
    x = np.empty_like(y)
    for i in range(n - 1, -1, -1):
        x[i] = (y[i] - L[i + 1:, i] @ x[i + 1:]) / L[i, i]
    return x


def spd_solve(A, b) -> np.ndarray:
    A = as_matrix(A)
    b = as_vector(b)
    if A.shape[0] != b.size:
        raise DimensionMismatch(f"matrix {A.shape} incompatible with vector of length {b.size}")
    L = cholesky(A)
    x = _backward(L, _forward(L, b))
    # one step of iterative refinement
    r = b - A @ x
    x += _backward(L, _forward(L, r))
    return x


def sym_eigenvalues(T: SymTridiagonal, first_components: bool = False):
    """Eigenvalues of a symmetric tridiagonal matrix by implicit-shift QL.

    Returns the eigenvalues in ascending order, and with
    ``first_components=True`` also the first component of each unit-norm
    eigenvector (what Golub-Welsch needs for quadrature weights).
    """
    n = T.n
    d = np.array(T.diagonal, dtype=float)
    e = np.zeros(n)
    e[: n - 1] = T.off_diagonal
    z = np.zeros(n)
    z[0] = 1.0

    for l in range(n):
        sweeps = 0
        while True:
            m = l
            while m < n - 1:
                if abs(e[m]) <= _EPS * (abs(d[m]) + abs(d[m + 1])):
                    break
                m += 1
            if m == l:
                break
            if sweeps == QL_MAX_SWEEPS:
                raise NoConvergence(f"QL did not converge for eigenvalue {l} in {QL_MAX_SWEEPS} sweeps")
            sweeps += 1

            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            i = m - 1
            underflow = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                if first_components:
                    fz = z[i + 1]
                    z[i + 1] = s * z[i] + c * fz
                    z[i] = c * z[i] - s * fz
                i -= 1
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0

    order = np.argsort(d, kind="stable")
    if first_components:
        return d[order], z[order]
    return d[order]


def tridiagonalize(A) -> SymTridiagonal:
    """Householder reduction of a symmetric matrix to tridiagonal form."""
    A = as_matrix(A)
    _check_symmetric(A)
    A = 0.5 * (A + A.T)
    n = A.shape[0]
    for k in range(n - 2):
        x = A[k + 1:, k]
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        v = x.copy()
        v[0] += math.copysign(alpha, x[0])
        vnorm2 = v @ v
        if vnorm2 == 0.0:
            continue
        beta = 2.0 / vnorm2
        sub = A[k + 1:, k + 1:]
        p = beta * (sub @ v)
        w = p - (0.5 * beta * (p @ v)) * v
        sub -= np.outer(v, w) + np.outer(w, v)
        A[k + 1:, k] = 0.0
        A[k, k + 1:] = 0.0
        A[k + 1, k] = A[k, k + 1] = -math.copysign(alpha, x[0])
    return SymTridiagonal(np.diag(A).copy(), np.diag(A, 1).copy())


def sym_eigvalsh(A) -> np.ndarray:
    """All eigenvalues (ascending) of a dense symmetric matrix."""
    return sym_eigenvalues(tridiagonalize(A))


def extreme_singular_values(M) -> tuple[float, float]:
    M = as_matrix(M)
    if not np.any(M):
        raise DomainError("extreme_singular_values needs a nonzero matrix")
    G = M.T @ M if M.shape[1] <= M.shape[0] else M @ M.T
    lam = sym_eigvalsh(0.5 * (G + G.T))
    # G is min(rows, cols) square, one eigenvalue per singular value
    return math.sqrt(max(lam[0], 0.0)), math.sqrt(max(lam[-1], 0.0))


def power_sigma_max(M, tol: float = 1e-12, max_iter: int = 10_000) -> float:
    """Largest singular value by power iteration on M^T M from the all-ones vector."""
    M = as_matrix(M)
    v = np.ones(M.shape[1]) / math.sqrt(M.shape[1])
    lam = 0.0
    for _ in range(max_iter):
        w = M.T @ (M @ v)
        new = float(np.linalg.norm(w))
        if new == 0.0:
            return 0.0
        v = w / new
        if abs(new - lam) <= tol * new:
            return math.sqrt(new)
        lam = new
    raise NoConvergence(f"power iteration did not converge in {max_iter} steps")


def spectral_norm(M) -> float:
    M = as_matrix(M)
    if not np.any(M):
        return 0.0
    return extreme_singular_values(M)[1]


def condition_number(A) -> float:
    A = as_matrix(A)
    cholesky(A)  # raises NotSPD
    lam = sym_eigvalsh(A)
    if lam[0] <= 0.0:
        raise NotSPD(f"smallest eigenvalue {lam[0]:.3e} is not positive")
    return float(lam[-1] / lam[0])
