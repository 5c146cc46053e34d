"""Command-line driver: ``sdwave CONFIG [--seed S] [--samples M] [--out-dir D] [--threads N]``.

Exit status
-----------
0  every requested check passed
1  a requested check failed (slope range, energy slack, HS limit)
2  the configuration could not be read or is invalid
3  the data are degenerate (e.g. zero errors, no rate can be fitted)
4  an output file could not be written
"""
from __future__ import annotations

import argparse
import csv
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, parse_config
from .errors import DegenerateDataError, ParseError, SDWaveError, ValidationError
from .experiments import (
    ExperimentConfig,
    estimate_rates,
    random_energy_sweep,
    run_deterministic_convergence,
    run_regularity,
    run_spatial_convergence,
    run_temporal_convergence,
    sample_seed,
)
from .fem import SineSeries
from .noise import build_q_spec, dump_increments, hs_norm_partial, sample_mode_increments

__all__ = ["main", "run_command", "CommandResult"]

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_DEGENERATE, EXIT_IO = 0, 1, 2, 3, 4


def _f(x) -> str:
    return format(float(x), ".17g")


def _write_csv(path: Path, header, rows):
    with path.open("w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


class CommandResult:
    """Outcome of one command: exit status, human-readable lines, files written."""

    def __init__(self):
        self.status = EXIT_OK
        self.messages: list[str] = []
        self.files: list[Path] = []

    def fail(self, status: int, message: str):
        # keep the most severe status
        self.status = max(self.status, status)
        self.messages.append(message)


def _q(cfg: RunConfig):
    if cfg.noise == "none":
        return None
    return build_q_spec(cfg.noise, cfg.noise_r, cfg.n_modes)


def _experiment(cfg: RunConfig, threads: int) -> ExperimentConfig:
    return ExperimentConfig(
        q=_q(cfg), alpha=cfg.alpha, T=cfg.T, nonlinearity=cfg.nonlinearity,
        n_samples=cfg.mc_samples, seed=cfg.seed, h_levels=tuple(cfg.h_levels),
        h_ref=cfg.h_ref, k_levels=tuple(cfg.k_levels), k_ref=cfg.k_ref, threads=threads,
    )


def _check_range(res: CommandResult, name: str, value: float, rng):
    if rng is None:
        return
    ok = bool(np.isfinite(value)) and rng[0] <= value <= rng[1]
    line = f"{name} = {value:.4f}, expected [{rng[0]}, {rng[1]}]: {'PASS' if ok else 'FAIL'}"
    if ok:
        res.messages.append(line)
    else:
        res.fail(EXIT_CHECK, line)


def _write_report(report, out: Path, res: CommandResult):
    e = report.errors
    rows = [
        [i, _f(h), _f(k), _f(eu), _f(ev), _f(su), _f(sv)]
        for i, ((h, k), eu, ev, su, sv) in enumerate(
            zip(e.levels, e.errors_u, e.errors_v, e.se_u, e.se_v))
    ]
    _write_csv(out / "errors.csv", ["level_index", "h", "k", "err_u", "err_v", "se_u", "se_v"], rows)
    rates = []
    for comp, pw, g in (("u", report.pairwise_u, report.fitted_slope_u),
                        ("v", report.pairwise_v, report.fitted_slope_v)):
        rates += [[comp, f"{i}-{i + 1}", _f(s)] for i, s in enumerate(pw)]
        rates.append([comp, "global", _f(g)])
    _write_csv(out / "rates.csv", ["component", "pair", "slope"], rates)
    res.files += [out / "errors.csv", out / "rates.csv"]
    res.messages.append(f"slopes: u {report.fitted_slope_u:.4f}, v {report.fitted_slope_v:.4f}")


def _convergence(cfg: RunConfig, out: Path, res: CommandResult, threads: int, figures: bool):
    if cfg.command == "deterministic":
        levels = cfg.h_levels if cfg.sweep == "h" else cfg.k_levels
        fixed = cfg.k_ref if cfg.sweep == "h" else cfg.h_ref
        report = run_deterministic_convergence(cfg.sweep, levels, fixed, SineSeries([1.0]),
                                               alpha=cfg.alpha, T=cfg.T)
    elif cfg.command == "spatial":
        report = run_spatial_convergence(_experiment(cfg, threads), comparison=cfg.comparison)
    else:
        report = run_temporal_convergence(_experiment(cfg, threads))
    _write_report(report, out, res)
    if figures:
        from .plotting import plot_convergence

        plot_convergence(report, out / "convergence.png")
        res.files.append(out / "convergence.png")
    if report.degenerate:
        res.fail(EXIT_DEGENERATE, "degenerate data: errors vanish, no rate can be fitted")
        return
    _check_range(res, "slope_u", report.fitted_slope_u, cfg.expect_u)
    _check_range(res, "slope_v", report.fitted_slope_v, cfg.expect_v)


def _energy(cfg: RunConfig, out: Path, res: CommandResult, figures: bool):
    n_cells = int(round(1 / cfg.h_ref))
    n_steps = int(round(cfg.T / cfg.k_ref))
    ledger = random_energy_sweep(n_cells, cfg.k_ref, n_steps, cfg.mc_samples, cfg.alpha, cfg.seed)
    e0 = np.where(ledger.energy[0] > 0, ledger.energy[0], 1.0)
    rel = (ledger.slack / e0).min(axis=-1)
    E = ledger.energy.mean(axis=-1)
    D = np.concatenate([[0.0], ledger.dissipation.mean(axis=-1)])
    S = np.concatenate([[0.0], rel])
    t = cfg.k_ref * np.arange(n_steps + 1)
    rows = [[n, _f(t[n]), _f(E[n]), _f(D[n]), _f(S[n])] for n in range(n_steps + 1)]
    _write_csv(out / "energy.csv", ["step", "t", "energy", "dissipation", "min_rel_slack"], rows)
    res.files.append(out / "energy.csv")
    if figures:
        from .plotting import plot_energy

        plot_energy(t, E, rel, out / "energy.png")
        res.files.append(out / "energy.png")
    line = f"min slack / E0 = {ledger.min_relative_slack:.3e} (tolerance -1e-10)"
    if ledger.ok(1e-10):
        res.messages.append(line + ": PASS")
    else:
        res.fail(EXIT_CHECK, line + ": FAIL")


def _regularity(cfg: RunConfig, out: Path, res: CommandResult, threads: int, figures: bool):
    fits = run_regularity(_experiment(cfg, threads))
    _write_csv(out / "holder.csv", ["component", "lag", "rms"],
               [[f.component, _f(l), _f(r)] for f in fits for l, r in zip(f.lags, f.rms)])
    rates = []
    for f in fits:
        _, pw = estimate_rates(f.rms[::-1], f.lags[::-1])
        rates += [[f.component, f"{i}-{i + 1}", _f(s)] for i, s in enumerate(pw)]
        rates.append([f.component, "global", _f(f.exponent)])
    _write_csv(out / "rates.csv", ["component", "pair", "slope"], rates)
    res.files += [out / "holder.csv", out / "rates.csv"]
    if figures:
        from .plotting import plot_holder

        plot_holder(fits, out / "holder.png")
        res.files.append(out / "holder.png")
    exps = {f.component: f.exponent for f in fits}
    res.messages.append(f"Hölder exponents: u {exps['u']:.4f}, v {exps['v']:.4f}")
    _check_range(res, "exponent_u", exps["u"], cfg.expect_u)
    _check_range(res, "exponent_v", exps["v"], cfg.expect_v)


def _hs_check(cfg: RunConfig, out: Path, res: CommandResult, figures: bool):
    gamma = 0.0 if cfg.gamma_label is None else cfg.gamma_label
    kind = "white" if cfg.noise == "none" else cfg.noise
    norms = [hs_norm_partial(build_q_spec(kind, cfg.noise_r, m), gamma) for m in cfg.hs_modes]
    _write_csv(out / "hs.csv", ["n_modes", "norm"],
               [[m, _f(v)] for m, v in zip(cfg.hs_modes, norms)])
    res.files.append(out / "hs.csv")
    for m, v in zip(cfg.hs_modes, norms):
        res.messages.append(f"J = {m}: {v:.10g}")
    if figures:
        from .plotting import plot_hs

        plot_hs(cfg.hs_modes, norms, out / "hs.png", cfg.hs_limit)
        res.files.append(out / "hs.png")
    if cfg.hs_limit is not None:
        rel = abs(norms[-1] - cfg.hs_limit) / abs(cfg.hs_limit)
        line = f"relative distance to {cfg.hs_limit:.10g} at J = {cfg.hs_modes[-1]}: {rel:.3e}"
        if rel <= 0.01:
            res.messages.append(line + ": PASS")
        else:
            res.fail(EXIT_CHECK, line + ": FAIL")


def _write_meta(cfg: RunConfig, out: Path, res: CommandResult):
    import numba
    import scipy

    lines = [
        f"command = {cfg.command}",
        f"seed = {cfg.seed}",
        f"n_modes = {cfg.n_modes}",
        f"mc_samples = {cfg.mc_samples}",
        f"sdwave = {__version__}",
        f"python = {platform.python_version()}",
        f"numpy = {np.__version__}",
        f"scipy = {scipy.__version__}",
        f"numba = {numba.__version__}",
    ]
    (out / "meta.txt").write_text("\n".join(lines) + "\n", encoding="ascii")
    res.files.append(out / "meta.txt")


def _dump(cfg: RunConfig, out: Path, res: CommandResult):
    q = _q(cfg)
    if q is None:
        return
    n = int(round(cfg.T / cfg.k_ref))
    inc = sample_mode_increments(q, n, cfg.k_ref, sample_seed(cfg.seed, 0))
    dump_increments(inc, out / "increments.bin")
    res.files.append(out / "increments.bin")


def run_command(cfg: RunConfig, out_dir=None, threads: int = 1, figures: bool = True) -> CommandResult:
    """Run ``cfg.command`` and write its outputs under ``out_dir`` (default ``cfg.output_path``)."""
    res = CommandResult()
    out = Path(cfg.output_path if out_dir is None else out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        _write_meta(cfg, out, res)
        if cfg.command in ("spatial", "temporal", "deterministic"):
            _convergence(cfg, out, res, threads, figures)
        elif cfg.command == "energy":
            _energy(cfg, out, res, figures)
        elif cfg.command == "regularity":
            _regularity(cfg, out, res, threads, figures)
        else:
            _hs_check(cfg, out, res, figures)
        if cfg.dump_increments:
            _dump(cfg, out, res)
    except DegenerateDataError as exc:
        res.fail(EXIT_DEGENERATE, f"degenerate data: {exc}")
    except OSError as exc:
        res.fail(EXIT_IO, f"cannot write output: {exc}")
    return res


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sdwave", description="Run a damped stochastic wave experiment.")
    p.add_argument("config", help="path to a key = value configuration file")
    p.add_argument("--seed", type=lambda s: int(s, 0), help="override the configured seed")
    p.add_argument("--samples", type=int, help="override mc_samples")
    p.add_argument("--out-dir", help="output directory (overrides output_path)")
    p.add_argument("--threads", type=int, default=1, help="worker threads, 0 = one per CPU")
    p.add_argument("--no-figures", action="store_true", help="skip the PNG figures")
    p.add_argument("--echo", action="store_true", help="print the parsed configuration and exit")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"sdwave: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = parse_config(text)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.samples is not None:
            cfg.mc_samples = args.samples
        cfg.validate()
        if args.threads < 0:
            raise ValidationError("--threads must be nonnegative")
    except (ParseError, ValidationError) as exc:
        print(f"sdwave: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.echo:
        sys.stdout.write(cfg.echo())
        return EXIT_OK
    try:
        res = run_command(cfg, args.out_dir, args.threads, not args.no_figures)
    except SDWaveError as exc:
        print(f"sdwave: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for line in res.messages:
        print(line, file=sys.stdout if res.status == EXIT_OK else sys.stderr)
    return res.status


if __name__ == "__main__":
    sys.exit(main())
