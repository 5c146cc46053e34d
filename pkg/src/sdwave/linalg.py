"""Direct solvers for the small symmetric systems produced by the schemes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ._kernels import ldl_factor, ldl_solve
from .errors import NotPositiveDefiniteError, ShapeError, SingularMatrixError
from .fem import SpectralDecomp, SymTridiagonal

__all__ = [
    "DenseSym",
    "TridiagFactor",
    "solve_sym_tridiag",
    "gen_sym_eig",
    "solve_dense",
]


class TridiagFactor:
    """LDL^T factorisation of a symmetric positive definite tridiagonal matrix.

    Factor once, then call :meth:`solve` for each right-hand side. Solving
    a batch ``(n, B)`` treats every column independently.
    """

    def __init__(self, A: SymTridiagonal):
        self.dim = A.dim
        d, l, bad = ldl_factor(A.diag, A.off)
        if bad >= 0:
            raise NotPositiveDefiniteError(
                f"non-positive pivot {d[bad]:.3e} at row {bad}"
            )
        self.d = d
        self.l = l

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.dim:
            raise ShapeError(f"right-hand side of length {b.shape[0]} for dim {self.dim}")
        x = np.array(b.reshape(self.dim, -1), order="C")
        ldl_solve(self.d, self.l, x)
        return x.reshape(b.shape)


def solve_sym_tridiag(A: SymTridiagonal, b) -> np.ndarray:
    return TridiagFactor(A).solve(b)


def gen_sym_eig(S: SymTridiagonal, M: SymTridiagonal) -> SpectralDecomp:
    """Generalized eigenpairs of S v = lam M v with M-orthonormal vectors."""
    if S.dim != M.dim:
        raise ShapeError(f"pencil dimensions differ: {S.dim} vs {M.dim}")
    try:
        lam, vecs = scipy.linalg.eigh(S.to_dense(), M.to_dense())
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"mass matrix is not positive definite: {exc}") from exc
    return SpectralDecomp(lam, vecs)


@dataclass(frozen=True, eq=False)
class DenseSym:
    entries: np.ndarray

    def __post_init__(self):
        a = np.array(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ShapeError(f"expected a square matrix, got shape {a.shape}")
        scale = max(np.abs(a).max(), np.finfo(float).tiny)
        if np.abs(a - a.T).max() > 1e-14 * scale:
            raise ShapeError("matrix is not symmetric")
        object.__setattr__(self, "entries", a)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


def solve_dense(A, b) -> np.ndarray:
    """Gaussian elimination with partial pivoting.

    Kept deliberately independent of the tridiagonal path so it can serve
    as a test oracle for it.
    """
    a = np.array(A.entries if isinstance(A, DenseSym) else A, dtype=float)
    x = np.array(b, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n) or x.shape[0] != n:
        raise ShapeError(f"incompatible shapes {a.shape} and {x.shape}")
    tol = n * np.finfo(float).eps * max(np.abs(a).max(), np.finfo(float).tiny)
    for c in range(n):
        p = c + int(np.argmax(np.abs(a[c:, c])))
        if abs(a[p, c]) <= tol:
            raise SingularMatrixError(f"matrix is singular to working precision (column {c})")
        if p != c:
            a[[c, p]] = a[[p, c]]
            x[[c, p]] = x[[p, c]]
        factors = a[c + 1:, c] / a[c, c]
        a[c + 1:, c:] -= np.outer(factors, a[c, c:])
        x[c + 1:] -= np.multiply.outer(factors, x[c])
    for c in range(n - 1, -1, -1):
        x[c] = (x[c] - a[c, c + 1:] @ x[c + 1:]) / a[c, c]
    return x
