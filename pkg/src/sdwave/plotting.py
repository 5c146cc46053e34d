"""PNG figures for CLI reports. matplotlib is imported only when a figure is drawn."""
from __future__ import annotations

import numpy as np

__all__ = ["plot_convergence", "plot_energy", "plot_holder", "plot_hs"]


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    fig.clf()
    import matplotlib.pyplot as plt

    plt.close(fig)


def plot_convergence(report, path) -> None:
    """Log-log error curves with a reference line of the fitted slope."""
    plt = _pyplot()
    steps = report.steps
    fig, ax = plt.subplots(figsize=(5, 4))
    for name, err, se, slope in (
        ("u", report.errors.errors_u, report.errors.se_u, report.fitted_slope_u),
        ("u_t", report.errors.errors_v, report.errors.se_v, report.fitted_slope_v),
    ):
        ok = err > 0
        if not np.any(ok):
            continue
        label = f"{name} (slope {slope:.2f})" if np.isfinite(slope) else name
        ax.errorbar(steps[ok], err[ok], yerr=se[ok], marker="o", capsize=3, label=label)
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel(report.axis)
    ax.set_ylabel("RMS L2 error at T")
    if ax.get_legend_handles_labels()[0]:
        ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    _save(fig, path)


def plot_energy(t, energy, slack, path) -> None:
    plt = _pyplot()
    fig, (a1, a2) = plt.subplots(2, 1, figsize=(5, 5), sharex=True)
    a1.plot(t, energy)
    a1.set_ylabel("mean energy")
    a2.plot(t[1:], slack)
    a2.set_ylabel("min slack / E0")
    a2.set_xlabel("t")
    _save(fig, path)


def plot_holder(fits, path) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 4))
    for fit in fits:
        ax.loglog(fit.lags, fit.rms, marker="o", label=f"{fit.component} (exponent {fit.exponent:.2f})")
    ax.set_xlabel("lag")
    ax.set_ylabel("RMS increment")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    _save(fig, path)


def plot_hs(modes, norms, path, limit=None) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.semilogx(modes, norms, marker="o")
    if limit is not None:
        ax.axhline(limit, ls="--", color="gray")
    ax.set_xlabel("modes J")
    ax.set_ylabel("truncated HS norm")
    _save(fig, path)
