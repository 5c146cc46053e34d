"""Linear implicit Euler time stepping for the strongly damped wave equation

    u_tt = u_xx + alpha u_txx + F(u) + dW/dt   on (0, 1),  u = 0 on the boundary,

together with a mode-by-mode exact solution of the linear problem used as
an oracle.

The block backward-Euler system for (U^n, V^n) is reduced to one
tridiagonal solve per step by substituting U^n = U^{n-1} + k V^n:

    (M + (alpha k + k^2) S) V^n = M V^{n-1} - k S U^{n-1} + k f^{n-1} + w^n.

States may carry a trailing batch axis, which is how the Monte-Carlo
harness advances many samples at once.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import integrate

from ._kernels import add_sine_load, implicit_step
from .errors import ConfigurationError, ShapeError
from .fem import (
    Mesh1D,
    SpectralDecomp,
    SymTridiagonal,
    assemble_mass,
    assemble_stiffness,
    discrete_fractional_norm,
    discrete_l2_norm,
)
from .linalg import TridiagFactor
from .noise import ModeIncrements, QSpec, SineLoadTable, increments_to_load

__all__ = [
    "FemState",
    "SchemeConfig",
    "ModalState",
    "deterministic_step",
    "stochastic_step",
    "run_deterministic",
    "run_stochastic",
    "integrate_batch",
    "sine_nonlinearity_load",
    "spectral_exact_linear",
    "modal_propagator",
    "modal_exact_covariance",
    "discrete_energy",
    "write_trajectory_csv",
]

ZERO = "zero"
SINE = "sine"


@dataclass(frozen=True, eq=False)
class FemState:
    u: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        if np.shape(self.u) != np.shape(self.v):
            raise ShapeError("displacement and velocity have different shapes")
        if self.t < 0:
            raise ValueError("negative time")

    @classmethod
    def zeros(cls, mesh: Mesh1D, batch: int | None = None) -> FemState:
        shape = (mesh.n_interior,) if batch is None else (mesh.n_interior, batch)
        return cls(np.zeros(shape), np.zeros(shape), 0.0)


@dataclass(eq=False)
class SchemeConfig:
    mesh: Mesh1D
    alpha: float = 1.0
    k: float = 1.0 / 64
    T: float = 1.0
    nonlinearity: str = ZERO
    M: SymTridiagonal | None = None
    S: SymTridiagonal | None = None

    def __post_init__(self):
        if self.alpha <= 0 or self.k <= 0 or self.T <= 0:
            raise ConfigurationError("alpha, k and T must be positive")
        if self.k > self.T * (1 + 1e-12):
            raise ConfigurationError(f"time step {self.k} exceeds final time {self.T}")
        if self.nonlinearity not in (ZERO, SINE):
            raise ConfigurationError(f"unknown nonlinearity {self.nonlinearity!r}")
        if self.M is None:
            self.M = assemble_mass(self.mesh)
        if self.S is None:
            self.S = assemble_stiffness(self.mesh)
        if self.M.dim != self.mesh.n_interior or self.S.dim != self.mesh.n_interior:
            raise ConfigurationError("matrix dimensions do not match the mesh")

    @cached_property
    def factor(self) -> TridiagFactor:
        return TridiagFactor(self.M + (self.alpha * self.k + self.k * self.k) * self.S)

    @property
    def n_steps(self) -> int:
        n = int(round(self.T / self.k))
        if n < 1 or abs(n * self.k - self.T) > 1e-9:
            raise ConfigurationError(f"T/k = {self.T / self.k} is not an integer")
        return n


def sine_nonlinearity_load(u, mesh: Mesh1D) -> np.ndarray:
    """Raw loads of -sin(u_h) against each hat, 3-point Gauss per cell."""
    u = np.asarray(u, dtype=float)
    u2 = np.ascontiguousarray(u.reshape(u.shape[0], -1))
    out = np.zeros_like(u2)
    add_sine_load(u2, mesh.h, 1.0, out)
    return out.reshape(u.shape)


_NO_LOAD = np.empty((0, 0))


def _advance(u, v, cfg: SchemeConfig, load=None):
    shape = np.shape(u)
    u2 = np.ascontiguousarray(np.reshape(u, (shape[0], -1)), dtype=float)
    v2 = np.ascontiguousarray(np.reshape(v, (shape[0], -1)), dtype=float)
    if load is None:
        ld = _NO_LOAD
    else:
        ld = np.ascontiguousarray(np.reshape(load, u2.shape), dtype=float)
    f = cfg.factor
    u_new, v_new = implicit_step(u2, v2, cfg.M.diag, cfg.M.off, cfg.S.diag, cfg.S.off,
                                 cfg.k, cfg.mesh.h, f.d, f.l, cfg.nonlinearity == SINE, ld)
    return u_new.reshape(shape), v_new.reshape(shape)


def deterministic_step(state: FemState, cfg: SchemeConfig) -> FemState:
    if cfg.nonlinearity != ZERO:
        raise ConfigurationError("the deterministic step is for the linear problem")
    u, v = _advance(state.u, state.v, cfg)
    return FemState(u, v, state.t + cfg.k)


def stochastic_step(state: FemState, noise_load, cfg: SchemeConfig) -> FemState:
    """One linear implicit Euler step; ``noise_load`` is the raw hat-integral load of the increment."""
    noise_load = np.asarray(noise_load, dtype=float)
    if noise_load.shape != np.shape(state.u):
        raise ShapeError(f"noise load of shape {noise_load.shape} for state {np.shape(state.u)}")
    u, v = _advance(state.u, state.v, cfg, noise_load)
    return FemState(u, v, state.t + cfg.k)


def run_deterministic(w0: FemState, cfg: SchemeConfig) -> list[FemState]:
    n = cfg.n_steps
    traj = [w0]
    for _ in range(n):
        traj.append(deterministic_step(traj[-1], cfg))
    return traj


def run_stochastic(w0: FemState, inc: ModeIncrements, table: SineLoadTable,
                   cfg: SchemeConfig) -> list[FemState]:
    n = cfg.n_steps
    if inc.n_steps != n or abs(inc.k - cfg.k) > 1e-12 * cfg.k:
        raise ConfigurationError(
            f"increments cover {inc.n_steps} steps of {inc.k}, scheme needs {n} of {cfg.k}"
        )
    if table.mesh.n_cells != cfg.mesh.n_cells:
        raise ConfigurationError("load table built for a different mesh")
    loads = increments_to_load(inc.increments, table)
    traj = [w0]
    for row in loads:
        traj.append(stochastic_step(traj[-1], row, cfg))
    return traj


def integrate_batch(u0, v0, cfg: SchemeConfig, loads=None, keep: bool = False):
    """March a batch of states to T.

    ``u0``/``v0`` have shape ``(N, B)``; ``loads`` (optional) has shape
    ``(n_steps, N, B)``. Returns the terminal ``(u, v)`` or, with
    ``keep=True``, arrays of shape ``(n_steps + 1, N, B)``.
    """
    n = cfg.n_steps
    if loads is not None and loads.shape[0] != n:
        raise ConfigurationError(f"{loads.shape[0]} load rows for {n} steps")
    u, v = np.array(u0, dtype=float), np.array(v0, dtype=float)
    if keep:
        us = np.empty((n + 1,) + u.shape)
        vs = np.empty((n + 1,) + v.shape)
        us[0], vs[0] = u, v
    for step in range(n):
        u, v = _advance(u, v, cfg, None if loads is None else loads[step])
        if keep:
            us[step + 1], vs[step + 1] = u, v
    return (us, vs) if keep else (u, v)


@dataclass(frozen=True, eq=False)
class ModalState:
    """Coefficients of u and u_t in the basis sqrt(2) sin(j pi x), j = 1..J."""

    a: np.ndarray
    b: np.ndarray
    eigvals: np.ndarray = field(default=None)

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if a.shape != b.shape:
            raise ShapeError("modal coefficient vectors differ in length")
        lam = self.eigvals
        if lam is None:
            lam = (np.pi * np.arange(1, a.size + 1)) ** 2
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "eigvals", np.asarray(lam, dtype=float))


def modal_propagator(lam, t: float, alpha: float) -> np.ndarray:
    """exp(t [[0, 1], [-lam, -alpha lam]]) for each lam; shape ``(J, 2, 2)``."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    out = np.empty(lam.shape + (2, 2))
    m = -0.5 * alpha * lam
    disc = m * m - lam
    confluent = np.abs(disc) < 1e-8 * m * m
    real = (disc > 0) & ~confluent
    cplx = (disc < 0) & ~confluent

    if np.any(real):
        # overdamped: two negative roots; r_plus from the root product avoids cancellation
        lr, mr = lam[real], m[real]
        r_minus = mr - np.sqrt(disc[real])
        r_plus = lr / r_minus
        ep, em = np.exp(r_plus * t), np.exp(r_minus * t)
        gap = r_plus - r_minus
        c0 = (r_plus * em - r_minus * ep) / gap
        c1 = (ep - em) / gap
        out[real] = _from_coeffs(c0, c1, lr, alpha)
    if np.any(cplx):
        lc, mc = lam[cplx], m[cplx]
        w = np.sqrt(-disc[cplx])
        decay = np.exp(mc * t)
        c0 = decay * (np.cos(w * t) - mc * np.sin(w * t) / w)
        c1 = decay * np.sin(w * t) / w
        out[cplx] = _from_coeffs(c0, c1, lc, alpha)
    if np.any(confluent):
        # near the double root: cosh/sinh form, free of the 1/(r_plus - r_minus) cancellation
        ld, md = lam[confluent], m[confluent]
        z = disc[confluent] * t * t
        s = np.sqrt(np.abs(z))
        with np.errstate(invalid="ignore", divide="ignore"):
            shc = np.where(z > 0, np.sinh(s) / s, np.sin(s) / s)
        shc = np.where(s == 0, 1.0, shc)
        ch = np.where(z > 0, np.cosh(s), np.cos(s))
        decay = np.exp(md * t)
        c0 = decay * (ch - md * t * shc)
        c1 = decay * t * shc
        out[confluent] = _from_coeffs(c0, c1, ld, alpha)
    return out


def _from_coeffs(c0, c1, lam, alpha):
    # exp(tA) = c0 I + c1 A
    res = np.empty(c0.shape + (2, 2))
    res[:, 0, 0] = c0
    res[:, 0, 1] = c1
    res[:, 1, 0] = -lam * c1
    res[:, 1, 1] = c0 - alpha * lam * c1
    return res


def spectral_exact_linear(m0: ModalState, t: float, alpha: float) -> ModalState:
    if t < 0:
        raise ValueError("negative time")
    P = modal_propagator(m0.eigvals, t, alpha)
    a = P[:, 0, 0] * m0.a + P[:, 0, 1] * m0.b
    b = P[:, 1, 0] * m0.a + P[:, 1, 1] * m0.b
    return ModalState(a, b, m0.eigvals)


def modal_exact_covariance(q: QSpec, t: float, alpha: float) -> np.ndarray:
    """Covariance of (a_j, b_j) for the stochastic convolution; shape ``(J, 2, 2)``.

    Each entry is integrated by adaptive quadrature to absolute tolerance 1e-10.
    """
    J = q.n_modes
    cov = np.zeros((J, 2, 2))
    if t == 0:
        return cov
    for j in range(J):
        lam = q.mode_eigvals[j]

        def outer(s, lam=lam):
            g = modal_propagator(lam, s, alpha)[0, :, 1]
            return np.array([g[0] * g[0], g[0] * g[1], g[1] * g[1]])

        # the fast root's transient lives on the scale 1/(alpha lam)
        brk = [p for p in (1.0 / (alpha * lam), 10.0 / (alpha * lam)) if p < t]
        val, _ = integrate.quad_vec(outer, 0.0, t, epsabs=1e-10, epsrel=1e-12,
                                    points=brk or None)
        val = q.mode_weights[j] * val
        cov[j] = [[val[0], val[1]], [val[1], val[2]]]
    return cov


def discrete_energy(state: FemState, M: SymTridiagonal, decomp: SpectralDecomp):
    """||U||^2 + ||T_h^{1/2} V||^2 with T_h = A_h^{-1} on V_h."""
    return (discrete_l2_norm(state.u, M) ** 2
            + discrete_fractional_norm(state.v, -1.0, decomp, M) ** 2)


def write_trajectory_csv(traj: list[FemState], mesh: Mesh1D, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "node_index", "u", "v"])
        for st in traj:
            for i, (ui, vi) in enumerate(zip(st.u, st.v), start=1):
                w.writerow([format(st.t, ".17g"), i, format(float(ui), ".17g"),
                            format(float(vi), ".17g")])
