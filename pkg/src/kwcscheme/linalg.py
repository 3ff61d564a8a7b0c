"""Tridiagonal matrices and the Thomas solve used by both implicit updates."""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

__all__ = ["Tridiagonal", "thomas_solve", "dense_solve", "SingularSystemError"]


class SingularSystemError(ArithmeticError):
    pass


class Tridiagonal(NamedTuple):
    """Square tridiagonal matrix stored by diagonals.

    ``lower[i]`` is entry ``(i+1, i)``, ``upper[i]`` is entry ``(i, i+1)``.
    """

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray

    @property
    def n(self) -> int:
        return len(self.diag)

    def to_dense(self) -> np.ndarray:
        return (np.diag(self.diag) + np.diag(self.lower, -1) + np.diag(self.upper, 1))

    def matvec(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = self.diag * x
        y[:-1] += self.upper * x[1:]
        y[1:] += self.lower * x[:-1]
        return y

    def dominance_margin(self) -> np.ndarray:
        """Row-wise ``|a_ii| - sum_{j != i} |a_ij|``; all positive iff strictly dominant."""
        off = np.zeros(self.n)
        off[:-1] += np.abs(self.upper)
        off[1:] += np.abs(self.lower)
        return np.abs(self.diag) - off

    def is_strictly_diagonally_dominant(self) -> bool:
        return bool(np.all(self.dominance_margin() > 0.0))


def thomas_solve(A: Tridiagonal, rhs) -> np.ndarray:
    """Solve ``A x = rhs`` by forward elimination and back substitution.

    No pivoting; stable for the strictly diagonally dominant systems arising
    here. A zero pivot raises :class:`SingularSystemError`.
    """
    a = A.lower.tolist()
    b = A.diag.tolist()
    c = A.upper.tolist()
    d = np.asarray(rhs, dtype=float).tolist()
    n = len(b)
    if len(d) != n or len(a) != n - 1 or len(c) != n - 1:
        raise ValueError("inconsistent tridiagonal system sizes")
    cp = [0.0] * n
    dp = [0.0] * n
    piv = b[0]
    if piv == 0.0:
        raise SingularSystemError("zero pivot in row 0")
    cp[0] = c[0] / piv if n > 1 else 0.0
    dp[0] = d[0] / piv
    for i in range(1, n):
        piv = b[i] - a[i - 1] * cp[i - 1]
        if piv == 0.0:
            raise SingularSystemError(f"zero pivot in row {i}")
        if i < n - 1:
            cp[i] = c[i] / piv
        dp[i] = (d[i] - a[i - 1] * dp[i - 1]) / piv
    x = dp
    for i in range(n - 2, -1, -1):
        x[i] -= cp[i] * x[i + 1]
    return np.array(x)


def dense_solve(A: Tridiagonal, rhs) -> np.ndarray:
    """Dense Gaussian elimination with partial pivoting; test oracle for small systems."""
    M = A.to_dense()
    b = np.asarray(rhs, dtype=float).copy()
    n = len(b)
    for col in range(n):
        p = col + int(np.argmax(np.abs(M[col:, col])))
        if M[p, col] == 0.0:
            raise SingularSystemError(f"singular at column {col}")
        if p != col:
            M[[col, p]] = M[[p, col]]
            b[[col, p]] = b[[p, col]]
        f = M[col + 1:, col] / M[col, col]
        M[col + 1:, col:] -= np.outer(f, M[col, col:])
        b[col + 1:] -= f * b[col]
    x = np.zeros(n)
    for i in range(n - 1, -1, -1):
        x[i] = (b[i] - M[i, i + 1:] @ x[i + 1:]) / M[i, i]
    return x
