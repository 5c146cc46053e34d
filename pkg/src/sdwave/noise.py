"""Truncated Karhunen-Loeve sampling of the Q-Wiener process.

The noise is expanded in the Dirichlet-Laplacian eigenfunctions
e_j(x) = sqrt(2) sin(j pi x) with eigenvalues (j pi)^2. Increments are drawn
on the finest time grid of an experiment and summed to coarser grids, so
every resolution sees the same Brownian path.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidSpecError, ShapeError
from .fem import Mesh1D, sine_hat_integrals

__all__ = [
    "QSpec",
    "ModeIncrements",
    "SineLoadTable",
    "build_q_spec",
    "hs_norm_partial",
    "mode_seed",
    "BrownianStream",
    "sample_mode_increments",
    "coarsen_increments",
    "build_sine_load_table",
    "increments_to_load",
    "dump_increments",
    "load_increments",
]

WHITE = "white"
FRACTIONAL = "fractional"

_MAGIC = b"SDWINC\x00\x00"
_VERSION = 1
_HEADER = struct.Struct("<8sIIQdQ")


@dataclass(frozen=True, eq=False)
class QSpec:
    kind: str
    r: float
    n_modes: int
    mode_weights: np.ndarray
    mode_eigvals: np.ndarray

    @property
    def sqrt_weights(self) -> np.ndarray:
        return np.sqrt(self.mode_weights)


def build_q_spec(kind: str, r: float = 0.0, n_modes: int = 256) -> QSpec:
    """Mode weights q_j = 1 (white) or lambda_j^{-r} (fractional)."""
    if kind not in (WHITE, FRACTIONAL):
        raise InvalidSpecError(f"unknown noise kind {kind!r}")
    if int(n_modes) != n_modes or n_modes < 1:
        raise InvalidSpecError(f"n_modes must be a positive integer (got {n_modes!r})")
    if r < 0:
        raise InvalidSpecError(f"exponent r must be nonnegative (got {r})")
    lam = (np.pi * np.arange(1, int(n_modes) + 1)) ** 2
    if kind == WHITE:
        r = 0.0
    q = lam ** (-float(r))
    return QSpec(kind, float(r), int(n_modes), q, lam)


def hs_norm_partial(q: QSpec, gamma: float) -> float:
    """Truncated Hilbert-Schmidt norm of A^{(gamma-1)/2} Q^{1/2}."""
    terms = q.mode_eigvals ** (gamma - 1.0) * q.mode_weights
    # ascending-magnitude summation keeps long partial sums accurate
    return float(np.sqrt(np.sum(np.sort(terms))))


@dataclass(frozen=True, eq=False)
class ModeIncrements:
    """Row n holds sqrt(q_j) * (beta_j(t_n) - beta_j(t_{n-1})) for every mode j."""

    increments: np.ndarray
    k: float
    seed: int = 0

    @property
    def n_steps(self) -> int:
        return self.increments.shape[0]

    @property
    def n_modes(self) -> int:
        return self.increments.shape[1]


def mode_seed(seed: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(seed), spawn_key=tuple(int(x) for x in key))


class BrownianStream:
    """Sequential source of scaled mode increments for one seed.

    Mode j draws from its own Philox stream keyed by ``(seed, j)``, so the
    increment at (step n, mode j) is the n-th normal of stream j no matter
    how many modes are requested, in what order, or in what block sizes
    the path is pulled.
    """

    def __init__(self, q: QSpec, k: float, seed: int):
        if k <= 0:
            raise ShapeError(f"time step must be positive (got {k})")
        self.q = q
        self.k = float(k)
        self.seed = int(seed)
        self._gens = [np.random.Generator(np.random.Philox(mode_seed(seed, j)))
                      for j in range(q.n_modes)]
        self._scale = np.sqrt(self.k) * q.sqrt_weights

    def draw(self, n_steps: int) -> np.ndarray:
        out = np.empty((int(n_steps), self.q.n_modes))
        for j, gen in enumerate(self._gens):
            out[:, j] = gen.standard_normal(int(n_steps))
        out *= self._scale
        return out


def sample_mode_increments(q: QSpec, n_steps: int, k: float, seed: int) -> ModeIncrements:
    """Scaled Brownian increments, entry (n, j) = sqrt(q_j k) xi_{n,j}."""
    if n_steps < 1:
        raise ShapeError(f"need n_steps >= 1 (got {n_steps})")
    return ModeIncrements(BrownianStream(q, k, seed).draw(n_steps), float(k), int(seed))


def coarsen_increments(fine: ModeIncrements, factor: int) -> ModeIncrements:
    if factor < 1 or fine.n_steps % factor:
        raise ShapeError(f"cannot coarsen {fine.n_steps} steps by a factor {factor}")
    coarse = fine.increments.reshape(fine.n_steps // factor, factor, fine.n_modes).sum(axis=1)
    return ModeIncrements(coarse, fine.k * factor, fine.seed)


@dataclass(frozen=True, eq=False)
class SineLoadTable:
    """``G[i, j]`` = integral of sqrt(2) sin(j pi x) phi_i(x) over (0, 1)."""

    mesh: Mesh1D
    G: np.ndarray

    @property
    def n_modes(self) -> int:
        return self.G.shape[1]


def build_sine_load_table(mesh: Mesh1D, n_modes: int) -> SineLoadTable:
    freqs = np.pi * np.arange(1, n_modes + 1)
    return SineLoadTable(mesh, np.sqrt(2.0) * sine_hat_integrals(mesh, freqs))


def increments_to_load(inc_row, table: SineLoadTable) -> np.ndarray:
    """Raw load vector(s) b = G @ row; a 2-D ``(n_steps, J)`` input gives one row per step."""
    inc_row = np.asarray(inc_row, dtype=float)
    if inc_row.shape[-1] != table.n_modes:
        raise ShapeError(f"{inc_row.shape[-1]} modes given, table built for {table.n_modes}")
    return inc_row @ table.G.T


def dump_increments(inc: ModeIncrements, path) -> None:
    header = _HEADER.pack(_MAGIC, _VERSION, inc.n_modes, inc.n_steps, inc.k, inc.seed)
    body = np.ascontiguousarray(inc.increments, dtype="<f8").tobytes()
    Path(path).write_bytes(header + body)


def load_increments(path) -> ModeIncrements:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ShapeError("increment file too short")
    magic, version, n_modes, n_steps, k, seed = _HEADER.unpack_from(raw)
    if magic != _MAGIC or version != _VERSION:
        raise ShapeError("not an increment dump (bad magic or version)")
    body = raw[_HEADER.size:]
    if len(body) != 8 * n_modes * n_steps:
        raise ShapeError("increment file body does not match its header")
    data = np.frombuffer(body, dtype="<f8").reshape(n_steps, n_modes).astype(float)
    return ModeIncrements(data, k, seed)
