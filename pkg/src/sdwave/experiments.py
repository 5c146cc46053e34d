"""Monte-Carlo error measurement and convergence-rate estimation.

Every Monte-Carlo sample owns one Brownian path, generated on the finest
time grid of the experiment. Spatial levels share that path through their
own load tables; temporal levels see it through exact summation of fine
increments. Samples are processed in chunks that are advanced together as
a batch, and chunks may run on worker threads; results are reduced in
sample order so the output does not depend on scheduling.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DegenerateDataError, ShapeError
from .fem import (
    Mesh1D,
    SineSeries,
    SpectralDecomp,
    SymTridiagonal,
    build_mesh,
    discrete_l2_norm,
    l2_error_against,
    l2_project,
)
from .noise import (
    BrownianStream,
    ModeIncrements,
    QSpec,
    build_sine_load_table,
    coarsen_increments,
    increments_to_load,
    mode_seed,
)
from .schemes import (
    SINE,
    ZERO,
    FemState,
    ModalState,
    SchemeConfig,
    _advance,
    discrete_energy,
    integrate_batch,
    spectral_exact_linear,
)

__all__ = [
    "ExperimentConfig",
    "LevelErrors",
    "ConvergenceReport",
    "EnergyLedger",
    "HolderFit",
    "mc_rms_error",
    "rms_with_jackknife",
    "estimate_rates",
    "restrict_nodal",
    "prolong_nested",
    "sample_seed",
    "run_spatial_convergence",
    "run_temporal_convergence",
    "run_deterministic_convergence",
    "energy_audit",
    "random_energy_sweep",
    "holder_increments",
    "holder_estimate",
    "run_regularity",
]

# float64 noise entries drawn per block, and samples advanced per batch
_BLOCK_BUDGET = 8_000_000
_MAX_BATCH = 128


@dataclass
class ExperimentConfig:
    """Inputs of a Monte-Carlo convergence experiment.

    Spatial runs use ``h_levels`` against ``h_ref`` with the shared step
    ``k_ref``; temporal runs use ``k_levels`` against ``k_ref`` on the
    fixed mesh ``h_ref``. ``q=None`` switches the noise off.
    """

    q: QSpec | None
    alpha: float = 1.0
    T: float = 1.0
    nonlinearity: str = SINE
    n_samples: int = 100
    seed: int = 0
    h_levels: tuple = (1 / 2, 1 / 4, 1 / 8, 1 / 16, 1 / 32)
    h_ref: float = 1 / 128
    k_levels: tuple = (1 / 8, 1 / 16, 1 / 32, 1 / 64, 1 / 128)
    k_ref: float = 1 / 1024
    u0: object = None
    v0: object = None
    threads: int = 1

    def echo(self) -> dict:
        return {
            "noise": "none" if self.q is None else self.q.kind,
            "r": None if self.q is None else self.q.r,
            "n_modes": None if self.q is None else self.q.n_modes,
            "alpha": self.alpha,
            "T": self.T,
            "nonlinearity": self.nonlinearity,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "h_levels": list(self.h_levels),
            "h_ref": self.h_ref,
            "k_levels": list(self.k_levels),
            "k_ref": self.k_ref,
        }


@dataclass
class LevelErrors:
    levels: list
    errors_u: np.ndarray
    errors_v: np.ndarray
    n_samples: int
    se_u: np.ndarray = None
    se_v: np.ndarray = None

    def __post_init__(self):
        self.errors_u = np.asarray(self.errors_u, dtype=float)
        self.errors_v = np.asarray(self.errors_v, dtype=float)
        n = len(self.levels)
        if self.errors_u.size != n or self.errors_v.size != n:
            raise ShapeError("one error per level is required")
        if np.any(self.errors_u < 0) or np.any(self.errors_v < 0):
            raise ValueError("errors must be nonnegative")
        self.se_u = np.zeros(n) if self.se_u is None else np.asarray(self.se_u, dtype=float)
        self.se_v = np.zeros(n) if self.se_v is None else np.asarray(self.se_v, dtype=float)


@dataclass
class ConvergenceReport:
    errors: LevelErrors
    axis: str
    fitted_slope_u: float
    fitted_slope_v: float
    pairwise_u: np.ndarray
    pairwise_v: np.ndarray
    seed: int = 0
    config: dict = field(default_factory=dict)

    @property
    def steps(self) -> np.ndarray:
        idx = 0 if self.axis == "h" else 1
        return np.array([lvl[idx] for lvl in self.errors.levels])

    @property
    def degenerate(self) -> bool:
        return bool(np.isnan(self.fitted_slope_u) or np.isnan(self.fitted_slope_v))


def rms_with_jackknife(sq_norms) -> tuple[float, float]:
    """RMS of per-sample squared norms and its leave-one-out standard error."""
    sq = np.asarray(sq_norms, dtype=float)
    m = sq.size
    if m == 0:
        raise ConfigurationError("no samples")
    rms = float(np.sqrt(sq.mean()))
    if m == 1:
        return rms, 0.0
    loo = np.sqrt((sq.sum() - sq) / (m - 1))
    se = float(np.sqrt((m - 1) / m * np.sum((loo - loo.mean()) ** 2)))
    return rms, se


def mc_rms_error(samples, M: SymTridiagonal) -> tuple[float, float]:
    """Root-mean-square M-norm distance over (approx, reference) state pairs."""
    if len(samples) == 0:
        raise ConfigurationError("empty sample list")
    du = np.stack([np.asarray(a.u) - np.asarray(r.u) for a, r in samples], axis=-1)
    dv = np.stack([np.asarray(a.v) - np.asarray(r.v) for a, r in samples], axis=-1)
    eu = float(np.sqrt(np.mean(discrete_l2_norm(du, M) ** 2)))
    ev = float(np.sqrt(np.mean(discrete_l2_norm(dv, M) ** 2)))
    return eu, ev


def estimate_rates(errors, steps) -> tuple[float, np.ndarray]:
    """Least-squares slope of log(error) against log(step), plus pairwise slopes."""
    e = np.asarray(errors, dtype=float)
    s = np.asarray(steps, dtype=float)
    if e.size != s.size or e.size < 2:
        raise ShapeError("need at least two (error, step) pairs of equal length")
    if np.any(~np.isfinite(e)) or np.any(e <= 0):
        raise DegenerateDataError("errors must be positive to fit a rate")
    if np.any(s <= 0) or np.any(np.diff(s) >= 0):
        raise ConfigurationError("steps must be positive and strictly decreasing")
    le, ls = np.log(e), np.log(s)
    pairwise = np.diff(le) / np.diff(ls)
    slope = float(np.polyfit(ls, le, 1)[0])
    return slope, pairwise


def _rates_or_nan(errors, steps):
    try:
        return estimate_rates(errors, steps)
    except DegenerateDataError:
        return float("nan"), np.full(len(errors) - 1, np.nan)


def restrict_nodal(fine, n_fine: int, n_coarse: int) -> np.ndarray:
    """Values of a fine-mesh V_h member at the nodes of a nested coarse mesh."""
    ratio = n_fine // n_coarse
    if ratio * n_coarse != n_fine:
        raise ConfigurationError(f"mesh with {n_coarse} cells is not nested in {n_fine} cells")
    return np.asarray(fine)[ratio - 1::ratio][: n_coarse - 1]


def prolong_nested(coarse, n_coarse: int, n_fine: int) -> np.ndarray:
    """Coefficients on a nested fine mesh of the same piecewise-linear function (exact)."""
    ratio = n_fine // n_coarse
    if ratio * n_coarse != n_fine:
        raise ConfigurationError(f"mesh with {n_coarse} cells is not nested in {n_fine} cells")
    coarse = np.asarray(coarse, dtype=float)
    vals = np.pad(coarse, [(1, 1)] + [(0, 0)] * (coarse.ndim - 1))
    p = np.arange(1, n_fine)
    cell, frac = np.divmod(p, ratio)
    frac = (frac / ratio).reshape((-1,) + (1,) * (coarse.ndim - 1))
    return (1.0 - frac) * vals[cell] + frac * vals[cell + 1]


def sample_seed(base: int, index: int) -> int:
    return int(mode_seed(base, index).generate_state(1, np.uint64)[0])


def _cells(h: float) -> int:
    n = int(round(1.0 / h))
    if n < 2 or abs(n * h - 1.0) > 1e-9:
        raise ConfigurationError(f"mesh width {h} is not 1/n for an integer n >= 2")
    return n


def _is_pow2(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


def _initial(data, mesh: Mesh1D, batch: int) -> np.ndarray:
    if data is None:
        return np.zeros((mesh.n_interior, batch))
    c = l2_project(data, mesh)
    return np.repeat(c[:, None], batch, axis=1)


def _chunks(n_samples: int, threads: int):
    parts = 1 if threads == 1 else max(threads if threads > 0 else (os.cpu_count() or 1), 1)
    size = max(1, min(_MAX_BATCH, -(-n_samples // parts)))
    return [range(i, min(i + size, n_samples)) for i in range(0, n_samples, size)]


def _map(fn, jobs, threads: int):
    if threads == 1 or len(jobs) == 1:
        return [fn(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=threads if threads > 0 else None) as pool:
        return list(pool.map(fn, jobs))


def _march(cfg: ExperimentConfig, runs, keep: bool = False):
    """Advance every run over every Monte-Carlo sample.

    ``runs`` is a list of ``(SchemeConfig, SineLoadTable, time_factor)``;
    the first run has the finest step and run ``i`` consumes the fine path
    coarsened by ``time_factor``. The path is pulled in blocks and all runs
    advance in lockstep, so memory stays bounded for long paths. Returns
    per run the terminal ``(u, v)`` of shape ``(N, M)`` or, with ``keep``,
    full arrays of shape ``(n_steps + 1, N, M)``.
    """
    k_fine = runs[0][0].k
    n_fine = runs[0][0].n_steps
    fmax = max(r[2] for r in runs)
    J = 0 if cfg.q is None else cfg.q.n_modes

    def job(chunk):
        b = len(chunk)
        streams = None
        if cfg.q is not None:
            streams = [BrownianStream(cfg.q, k_fine, sample_seed(cfg.seed, i)) for i in chunk]
        block = fmax * max(1, _BLOCK_BUDGET // (fmax * b * max(J, 1)))
        state = []
        for sc, _, _ in runs:
            u0 = _initial(cfg.u0, sc.mesh, b)
            v0 = _initial(cfg.v0, sc.mesh, b)
            if keep:
                us = np.empty((sc.n_steps + 1,) + u0.shape)
                vs = np.empty_like(us)
                us[0], vs[0] = u0, v0
                state.append([u0, v0, us, vs])
            else:
                state.append([u0, v0])
        done = 0
        while done < n_fine:
            nb = min(block, n_fine - done)
            draws = None if streams is None else [s.draw(nb) for s in streams]
            for (sc, table, f), st in zip(runs, state):
                loads = None
                if draws is not None:
                    coarse = np.stack([coarsen_increments(ModeIncrements(d, k_fine), f).increments
                                       for d in draws])
                    loads = np.ascontiguousarray(
                        increments_to_load(coarse, table).transpose(1, 2, 0))
                first = done // f
                for n in range(nb // f):
                    st[0], st[1] = _advance(st[0], st[1], sc, None if loads is None else loads[n])
                    if keep:
                        st[2][first + n + 1], st[3][first + n + 1] = st[0], st[1]
            done += nb
        return [(st[2], st[3]) if keep else (st[0], st[1]) for st in state]

    results = _map(job, _chunks(cfg.n_samples, cfg.threads), cfg.threads)
    return [
        (np.concatenate([r[i][0] for r in results], axis=-1),
         np.concatenate([r[i][1] for r in results], axis=-1))
        for i in range(len(runs))
    ]


def _report(axis, levels, sq_u, sq_v, cfg: ExperimentConfig) -> ConvergenceReport:
    eu, su, ev, sv = [], [], [], []
    for a, b in zip(sq_u, sq_v):
        r, s = rms_with_jackknife(a)
        eu.append(r)
        su.append(s)
        r, s = rms_with_jackknife(b)
        ev.append(r)
        sv.append(s)
    errs = LevelErrors(levels, eu, ev, cfg.n_samples, su, sv)
    steps = [lvl[0 if axis == "h" else 1] for lvl in levels]
    slope_u, pw_u = _rates_or_nan(eu, steps)
    slope_v, pw_v = _rates_or_nan(ev, steps)
    return ConvergenceReport(errs, axis, slope_u, slope_v, pw_u, pw_v, cfg.seed, cfg.echo())


def _check_samples(cfg: ExperimentConfig):
    if cfg.n_samples < 1:
        raise ConfigurationError("at least one Monte-Carlo sample is required")


def run_spatial_convergence(cfg: ExperimentConfig, comparison: str = "prolong") -> ConvergenceReport:
    """Mean-square spatial errors at T against a finer reference mesh.

    With ``comparison="prolong"`` each level's terminal state is carried
    exactly onto the nested reference mesh and the L2 distance is taken
    there. ``"nodal"`` instead samples the reference at the coarse nodes;
    in 1-D this only sees the (superconvergent) nodal error.
    """
    if comparison not in ("prolong", "nodal"):
        raise ConfigurationError(f"unknown comparison {comparison!r}")
    _check_samples(cfg)
    n_ref = _cells(cfg.h_ref)
    n_lvls = [_cells(h) for h in cfg.h_levels]
    if not all(n_ref > n for n in n_lvls):
        raise ConfigurationError("reference mesh must be finer than every level")
    if not all(_is_pow2(n) for n in n_lvls + [n_ref]):
        raise ConfigurationError("mesh ladder must be dyadic")
    meshes = [build_mesh(n) for n in [n_ref] + n_lvls]
    J = 0 if cfg.q is None else cfg.q.n_modes
    runs = []
    for mesh in meshes:
        sc = SchemeConfig(mesh, cfg.alpha, cfg.k_ref, cfg.T, cfg.nonlinearity)
        runs.append((sc, None if cfg.q is None else build_sine_load_table(mesh, J), 1))
    finals = _march(cfg, runs)

    ref_u, ref_v = finals[0]
    M_ref = runs[0][0].M
    sq_u, sq_v, levels = [], [], []
    for (sc, _, _), (u, v), n in zip(runs[1:], finals[1:], n_lvls):
        if comparison == "prolong":
            du = prolong_nested(u, n, n_ref) - ref_u
            dv = prolong_nested(v, n, n_ref) - ref_v
            M = M_ref
        else:
            du = u - restrict_nodal(ref_u, n_ref, n)
            dv = v - restrict_nodal(ref_v, n_ref, n)
            M = sc.M
        sq_u.append(discrete_l2_norm(du, M) ** 2)
        sq_v.append(discrete_l2_norm(dv, M) ** 2)
        levels.append((1.0 / n, cfg.k_ref))
    return _report("h", levels, sq_u, sq_v, cfg)


def run_temporal_convergence(cfg: ExperimentConfig) -> ConvergenceReport:
    """Mean-square temporal errors at T against a finer reference step, fixed mesh."""
    _check_samples(cfg)
    mesh = build_mesh(_cells(cfg.h_ref))
    factors = []
    for k in cfg.k_levels:
        f = int(round(k / cfg.k_ref))
        if abs(f * cfg.k_ref - k) > 1e-12 * k or f < 2 or not _is_pow2(f):
            raise ConfigurationError(f"step {k} is not a dyadic coarsening of {cfg.k_ref}")
        factors.append(f)
    J = 0 if cfg.q is None else cfg.q.n_modes
    table = None if cfg.q is None else build_sine_load_table(mesh, J)
    runs = [(SchemeConfig(mesh, cfg.alpha, cfg.k_ref, cfg.T, cfg.nonlinearity), table, 1)]
    for k, f in zip(cfg.k_levels, factors):
        runs.append((SchemeConfig(mesh, cfg.alpha, k, cfg.T, cfg.nonlinearity), table, f))
    finals = _march(cfg, runs)

    ref_u, ref_v = finals[0]
    M = runs[0][0].M
    sq_u = [discrete_l2_norm(u - ref_u, M) ** 2 for u, _ in finals[1:]]
    sq_v = [discrete_l2_norm(v - ref_v, M) ** 2 for _, v in finals[1:]]
    levels = [(mesh.h, k) for k in cfg.k_levels]
    return _report("k", levels, sq_u, sq_v, cfg)


def run_deterministic_convergence(axis: str, levels, fixed: float, u0: SineSeries,
                                  v0: SineSeries | None = None, alpha: float = 1.0,
                                  T: float = 1.0) -> ConvergenceReport:
    """Errors of the linear scheme against the exact modal solution at T.

    ``axis="h"`` sweeps mesh widths ``levels`` at step ``fixed``;
    ``axis="k"`` sweeps steps at mesh width ``fixed``. Errors are the
    continuous L2 distances of U^N and V^N to the exact u(T), u_t(T).
    """
    if axis not in ("h", "k"):
        raise ConfigurationError(f"axis must be 'h' or 'k', got {axis!r}")
    v0 = SineSeries(np.zeros_like(u0.coefs)) if v0 is None else v0
    J = max(u0.coefs.size, v0.coefs.size)
    a0 = np.zeros(J)
    b0 = np.zeros(J)
    a0[: u0.coefs.size] = u0.coefs
    b0[: v0.coefs.size] = v0.coefs
    exact = spectral_exact_linear(ModalState(a0, b0), T, alpha)
    u_T, v_T = SineSeries(exact.a), SineSeries(exact.b)

    eu, ev, lv = [], [], []
    for step in levels:
        h, k = (step, fixed) if axis == "h" else (fixed, step)
        mesh = build_mesh(_cells(h))
        sc = SchemeConfig(mesh, alpha, k, T, ZERO)
        u, v = integrate_batch(l2_project(u0, mesh), l2_project(v0, mesh), sc)
        eu.append(l2_error_against(u, mesh, u_T))
        ev.append(l2_error_against(v, mesh, v_T))
        lv.append((h, k))
    errs = LevelErrors(lv, eu, ev, 1)
    slope_u, pw_u = _rates_or_nan(eu, levels)
    slope_v, pw_v = _rates_or_nan(ev, levels)
    echo = {"axis": axis, "levels": list(levels), "fixed": fixed, "alpha": alpha, "T": T}
    return ConvergenceReport(errs, axis, slope_u, slope_v, pw_u, pw_v, 0, echo)


@dataclass
class EnergyLedger:
    energy: np.ndarray
    dissipation: np.ndarray
    slack: np.ndarray

    @property
    def min_relative_slack(self) -> float:
        """Smallest slack divided by the initial energy (per sample, then min)."""
        e0 = np.where(self.energy[0] > 0, self.energy[0], 1.0)
        if self.slack.size == 0:
            return 0.0
        return float(np.min(self.slack / e0))

    def ok(self, rtol: float = 1e-10) -> bool:
        return bool(np.all(self.slack >= -rtol * self.energy[0]))


def energy_audit(trajectory, M: SymTridiagonal, S: SymTridiagonal, decomp: SpectralDecomp,
                 alpha: float) -> EnergyLedger:
    """Per-step energy balance E^{n-1} - E^n - 2 alpha k ||V^n||^2 of a linear run.

    ``S`` only serves to check that the decomposition belongs to this mesh.
    """
    if decomp.dim != S.dim or M.dim != S.dim:
        raise ShapeError("matrices and decomposition disagree in dimension")
    E = np.array([discrete_energy(st, M, decomp) for st in trajectory])
    diss = []
    for prev, cur in zip(trajectory[:-1], trajectory[1:]):
        k = cur.t - prev.t
        diss.append(2.0 * alpha * k * discrete_l2_norm(cur.v, M) ** 2)
    diss = np.array(diss).reshape((len(trajectory) - 1,) + E.shape[1:])
    slack = E[:-1] - E[1:] - diss
    return EnergyLedger(E, diss, slack)


def random_energy_sweep(n_cells: int, k: float, n_steps: int, n_states: int,
                        alpha: float = 1.0, seed: int = 0) -> EnergyLedger:
    """Energy audit of the linear scheme from random coefficient initial states."""
    from .linalg import gen_sym_eig

    mesh = build_mesh(n_cells)
    sc = SchemeConfig(mesh, alpha, k, n_steps * k, ZERO)
    rng = np.random.Generator(np.random.Philox(mode_seed(seed, 0)))
    u0 = rng.standard_normal((mesh.n_interior, n_states))
    v0 = rng.standard_normal((mesh.n_interior, n_states))
    us, vs = integrate_batch(u0, v0, sc, keep=True)
    traj = [FemState(us[n], vs[n], n * k) for n in range(n_steps + 1)]
    return energy_audit(traj, sc.M, sc.S, gen_sym_eig(sc.S, sc.M), alpha)


@dataclass
class HolderFit:
    component: str
    lags: np.ndarray
    rms: np.ndarray
    exponent: float


def _as_array(trajectory, component: str) -> tuple[np.ndarray, float]:
    states = [getattr(st, component) for st in trajectory]
    arr = np.stack([np.asarray(s, dtype=float) for s in states])
    if arr.ndim == 2:
        arr = arr[:, :, None]
    k = trajectory[1].t - trajectory[0].t
    return arr, k


def holder_increments(trajectory, M: SymTridiagonal, component: str):
    """Dyadic lags in [4k, T/4] and the RMS M-norm increment at each lag.

    The mean is taken over all start times and all samples of the batch.
    """
    if component not in ("u", "v"):
        raise ConfigurationError(f"component must be 'u' or 'v', got {component!r}")
    if len(trajectory) - 1 < 64:
        raise ConfigurationError("Hölder estimate needs a trajectory of at least 64 steps")
    x, k = _as_array(trajectory, component)
    n = x.shape[0] - 1
    lags, rms = [], []
    lag = 4
    while lag <= n // 4:
        d = x[lag:] - x[:-lag]
        sq = discrete_l2_norm(d.transpose(1, 0, 2).reshape(x.shape[1], -1), M) ** 2
        lags.append(lag * k)
        rms.append(np.sqrt(sq.mean()))
        lag *= 2
    return np.array(lags), np.array(rms)


def holder_estimate(trajectory, M: SymTridiagonal, component: str) -> float:
    lags, rms = holder_increments(trajectory, M, component)
    slope, _ = estimate_rates(rms[::-1], lags[::-1])
    return slope


def run_regularity(cfg: ExperimentConfig) -> list[HolderFit]:
    """Empirical temporal Hölder exponents of u and u_t on mesh ``h_ref`` with step ``k_ref``."""
    _check_samples(cfg)
    mesh = build_mesh(_cells(cfg.h_ref))
    sc = SchemeConfig(mesh, cfg.alpha, cfg.k_ref, cfg.T, cfg.nonlinearity)
    J = 0 if cfg.q is None else cfg.q.n_modes
    table = None if cfg.q is None else build_sine_load_table(mesh, J)
    n = sc.n_steps
    [(us, vs)] = _march(cfg, [(sc, table, 1)], keep=True)
    traj = [FemState(us[i], vs[i], i * cfg.k_ref) for i in range(n + 1)]
    fits = []
    for comp in ("u", "v"):
        lags, rms = holder_increments(traj, sc.M, comp)
        slope, _ = estimate_rates(rms[::-1], lags[::-1])
        fits.append(HolderFit(comp, lags, rms, slope))
    return fits
