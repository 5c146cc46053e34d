"""Piecewise-linear finite elements for -u'' on (0, 1) with homogeneous
Dirichlet data.

Unknowns live on the interior nodes only; a coefficient vector of length
``n_cells - 1`` represents a member of V_h in the hat basis. Most routines
accept either a single vector of shape ``(N,)`` or a batch of column
vectors of shape ``(N, B)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import (
    DomainError,
    EvaluationError,
    InvalidMeshError,
    ShapeError,
    UnsupportedInputError,
)

__all__ = [
    "GAUSS_NODES",
    "GAUSS_WEIGHTS",
    "Mesh1D",
    "SymTridiagonal",
    "SpectralDecomp",
    "SineSeries",
    "FemFunction",
    "build_mesh",
    "assemble_stiffness",
    "assemble_mass",
    "gauss_loads",
    "sine_hat_integrals",
    "l2_project",
    "ritz_project",
    "discrete_l2_norm",
    "discrete_fractional_norm",
    "eval_fem_function",
    "l2_error_against",
]

# 3-point Gauss-Legendre on the reference cell [0, 1]
GAUSS_NODES = 0.5 + 0.5 * np.array([-np.sqrt(0.6), 0.0, np.sqrt(0.6)])
GAUSS_WEIGHTS = np.array([5.0, 8.0, 5.0]) / 18.0


@dataclass(frozen=True)
class Mesh1D:
    """Uniform partition of (0, 1) into ``n_cells`` cells."""

    n_cells: int

    def __post_init__(self):
        if int(self.n_cells) != self.n_cells or self.n_cells < 2:
            raise InvalidMeshError(
                f"need an integer n_cells >= 2 (got {self.n_cells!r})"
            )

    @property
    def h(self) -> float:
        return 1.0 / self.n_cells

    @property
    def n_interior(self) -> int:
        return self.n_cells - 1

    @property
    def interior_nodes(self) -> np.ndarray:
        return np.arange(1, self.n_cells) * self.h

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n_cells + 1) * self.h


def build_mesh(n_cells: int) -> Mesh1D:
    return Mesh1D(n_cells)


@dataclass(frozen=True, eq=False)
class SymTridiagonal:
    """Symmetric tridiagonal matrix stored as its diagonal and one off-diagonal."""

    diag: np.ndarray
    off: np.ndarray

    def __post_init__(self):
        diag = np.array(self.diag, dtype=float).ravel()
        off = np.array(self.off, dtype=float).ravel()
        if diag.size < 1 or off.size != diag.size - 1:
            raise ShapeError(
                f"off-diagonal must have length dim-1 (dim={diag.size}, off={off.size})"
            )
        diag.flags.writeable = False
        off.flags.writeable = False
        object.__setattr__(self, "diag", diag)
        object.__setattr__(self, "off", off)

    @property
    def dim(self) -> int:
        return self.diag.size

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.dim:
            raise ShapeError(f"vector of length {x.shape[0]} for matrix of dim {self.dim}")
        d = self.diag if x.ndim == 1 else self.diag[:, None]
        e = self.off if x.ndim == 1 else self.off[:, None]
        y = d * x
        y[:-1] += e * x[1:]
        y[1:] += e * x[:-1]
        return y

    __matmul__ = matvec

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1)

    def inf_norm(self) -> float:
        row = np.abs(self.diag).copy()
        row[:-1] += np.abs(self.off)
        row[1:] += np.abs(self.off)
        return float(row.max())

    def __add__(self, other: SymTridiagonal) -> SymTridiagonal:
        if not isinstance(other, SymTridiagonal):
            return NotImplemented
        if other.dim != self.dim:
            raise ShapeError(f"dimension mismatch {self.dim} vs {other.dim}")
        return SymTridiagonal(self.diag + other.diag, self.off + other.off)

    def __mul__(self, scalar: float) -> SymTridiagonal:
        return SymTridiagonal(scalar * self.diag, scalar * self.off)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class SpectralDecomp:
    """Generalized eigenpairs of the pencil (S, M).

    ``eigvecs[:, j]`` is M-orthonormal and ``eigvals`` is ascending.
    """

    eigvals: np.ndarray
    eigvecs: np.ndarray

    @property
    def dim(self) -> int:
        return self.eigvals.size


def assemble_stiffness(mesh: Mesh1D) -> SymTridiagonal:
    n = mesh.n_interior
    return SymTridiagonal(np.full(n, 2.0 / mesh.h), np.full(n - 1, -1.0 / mesh.h))


def assemble_mass(mesh: Mesh1D) -> SymTridiagonal:
    n = mesh.n_interior
    return SymTridiagonal(np.full(n, 2.0 * mesh.h / 3.0), np.full(n - 1, mesh.h / 6.0))


class SineSeries:
    """The function x -> sum_j c_j sqrt(2) sin(j pi x).

    Load vectors of a sine series are integrated in closed form, so
    projections of such data carry no quadrature error.
    """

    def __init__(self, coefs):
        self.coefs = np.atleast_1d(np.asarray(coefs, dtype=float))

    @property
    def freqs(self) -> np.ndarray:
        return np.pi * np.arange(1, self.coefs.size + 1)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.sqrt(2.0) * np.sin(np.multiply.outer(x, self.freqs)) @ self.coefs

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        return np.sqrt(2.0) * np.cos(np.multiply.outer(x, self.freqs)) @ (self.coefs * self.freqs)


@dataclass(frozen=True, eq=False)
class FemFunction:
    """A member of V_h: hat coefficients bound to their mesh."""

    mesh: Mesh1D
    values: np.ndarray

    def __call__(self, x):
        return eval_fem_function(self.values, self.mesh, x)


def sine_hat_integrals(mesh: Mesh1D, freqs) -> np.ndarray:
    """Matrix of integrals of sin(w x) against each interior hat.

    Entry ``[i, j]`` is the exact value of the integral of
    ``sin(freqs[j] x) phi_i(x)`` over (0, 1).
    """
    w = np.asarray(freqs, dtype=float)
    h = mesh.h
    scale = 2.0 * (1.0 - np.cos(w * h)) / (w * w * h)
    return np.sin(np.outer(mesh.interior_nodes, w)) * scale


def _padded(v: np.ndarray) -> np.ndarray:
    pad = [(1, 1)] + [(0, 0)] * (v.ndim - 1)
    return np.pad(v, pad)


def gauss_loads(f: Callable, mesh: Mesh1D) -> np.ndarray:
    """Loads int f phi_i dx by composite 3-point Gauss-Legendre."""
    left = mesh.nodes[:-1]
    x = left[:, None] + mesh.h * GAUSS_NODES[None, :]
    with np.errstate(all="ignore"):
        fx = np.asarray(f(x), dtype=float)
    if fx.shape != x.shape:
        fx = np.broadcast_to(fx, x.shape)
    if not np.all(np.isfinite(fx)):
        raise EvaluationError("integrand produced non-finite values")
    wf = mesh.h * GAUSS_WEIGHTS * fx
    # rising half of hat i lives on cell i-1, falling half on cell i
    rising = wf @ GAUSS_NODES
    falling = wf @ (1.0 - GAUSS_NODES)
    return rising[:-1] + falling[1:]


def _mass_solve(mesh: Mesh1D, b: np.ndarray, M: SymTridiagonal | None) -> np.ndarray:
    from .linalg import solve_sym_tridiag

    return solve_sym_tridiag(assemble_mass(mesh) if M is None else M, b)


def l2_project(f, mesh: Mesh1D, M: SymTridiagonal | None = None) -> np.ndarray:
    """Coefficients of the L2 projection of ``f`` onto V_h.

    ``f`` may be a :class:`SineSeries` (exact loads), a :class:`FemFunction`
    or any vectorised callable (3-point Gauss per cell).
    """
    if isinstance(f, SineSeries):
        b = np.sqrt(2.0) * sine_hat_integrals(mesh, f.freqs) @ f.coefs
    elif callable(f):
        b = gauss_loads(f, mesh)
    else:
        raise UnsupportedInputError(
            f"cannot project object of type {type(f).__name__}; pass a pointwise-evaluable function"
        )
    return _mass_solve(mesh, b, M)


def _nodal_stiffness_loads(values_at_nodes: np.ndarray, h: float) -> np.ndarray:
    # exact for any H^1_0 function: int f' phi_i' = (2 f(x_i) - f(x_{i-1}) - f(x_{i+1})) / h
    f = values_at_nodes
    return (2.0 * f[1:-1] - f[:-2] - f[2:]) / h


def ritz_project(f, mesh: Mesh1D, derivative: Callable | None = None,
                 S: SymTridiagonal | None = None) -> np.ndarray:
    """Coefficients of the Ritz (energy) projection of ``f`` onto V_h.

    Accepts a :class:`SineSeries`, a :class:`FemFunction` on a nested finer
    mesh, or a callable together with its ``derivative``.
    """
    from .linalg import solve_sym_tridiag

    if isinstance(f, SineSeries):
        # cell integrals of f' are exact differences of nodal values
        b = _nodal_stiffness_loads(f(mesh.nodes), mesh.h)
    elif isinstance(f, FemFunction):
        ratio = f.mesh.n_cells // mesh.n_cells
        if ratio * mesh.n_cells != f.mesh.n_cells:
            raise UnsupportedInputError("FemFunction must live on a nested refinement of the mesh")
        fine = _padded(np.asarray(f.values, dtype=float))
        b = _nodal_stiffness_loads(fine[::ratio], mesh.h)
    elif callable(f) and derivative is not None:
        left = mesh.nodes[:-1]
        x = left[:, None] + mesh.h * GAUSS_NODES[None, :]
        dfx = np.asarray(derivative(x), dtype=float)
        if not np.all(np.isfinite(dfx)):
            raise EvaluationError("derivative produced non-finite values")
        cell = (mesh.h * GAUSS_WEIGHTS * dfx).sum(axis=1) / mesh.h
        b = cell[:-1] - cell[1:]
    else:
        raise UnsupportedInputError("Ritz projection needs the derivative of f")
    return solve_sym_tridiag(assemble_stiffness(mesh) if S is None else S, b)


def _check_dim(v: np.ndarray, dim: int):
    if v.shape[0] != dim:
        raise ShapeError(f"coefficient vector of length {v.shape[0]}, expected {dim}")


def discrete_l2_norm(v, M: SymTridiagonal):
    """sqrt(v^T M v); columnwise for a batch."""
    v = np.asarray(v, dtype=float)
    _check_dim(v, M.dim)
    quad = np.sum(v * M.matvec(v), axis=0)
    return np.sqrt(np.maximum(quad, 0.0))


def discrete_fractional_norm(v, s: float, decomp: SpectralDecomp, M: SymTridiagonal):
    """||A_h^{s/2} v|| in the discrete L2 norm, for s in [-2, 2]."""
    if not -2.0 <= s <= 2.0:
        raise DomainError(f"fractional order {s} outside [-2, 2]")
    v = np.asarray(v, dtype=float)
    _check_dim(v, M.dim)
    if decomp.dim != M.dim:
        raise ShapeError("spectral decomposition built for a different mesh")
    c = decomp.eigvecs.T @ M.matvec(v)
    lam_s = decomp.eigvals ** s
    if c.ndim > 1:
        lam_s = lam_s[:, None]
    return np.sqrt(np.sum(lam_s * c * c, axis=0))


def eval_fem_function(v, mesh: Mesh1D, x):
    v = np.asarray(v, dtype=float)
    _check_dim(v, mesh.n_interior)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise DomainError("evaluation point outside [0, 1]")
    out = np.interp(x, mesh.nodes, _padded(v))
    return float(out) if out.ndim == 0 else out


def l2_error_against(v, mesh: Mesh1D, f: Callable) -> float:
    """Continuous L2 distance between a V_h member and a function.

    Integrated cellwise with 3-point Gauss; for smooth ``f`` the rule error
    is far below the discretisation error.
    """
    v = np.asarray(v, dtype=float)
    _check_dim(v, mesh.n_interior)
    vals = _padded(v)
    left = mesh.nodes[:-1]
    x = left[:, None] + mesh.h * GAUSS_NODES[None, :]
    uh = vals[:-1, None] * (1.0 - GAUSS_NODES) + vals[1:, None] * GAUSS_NODES
    diff = uh - f(x)
    return float(np.sqrt(np.sum(mesh.h * GAUSS_WEIGHTS * diff * diff)))
