"""Figures for CLI reports. Uses the non-interactive Agg backend."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from finitary.statistics import StatReport, TailCurve, TailFit  # noqa: E402


def survival_figure(curve: TailCurve, path: str | Path, fits: Sequence[TailFit] = (),
                    title: str | None = None) -> Path:
    """Log-log empirical survival with any fitted tail laws overlaid."""
    rows = curve.csv_rows()
    n = np.array([r[0] for r in rows], dtype=float)
    s = np.array([r[1] for r in rows])
    keep = (n >= 1) & (s > 0)
    fig, ax = plt.subplots(figsize=(5.5, 4))
    if keep.any():
        ax.loglog(n[keep], s[keep], lw=1.2, label="empirical P[R > n]")
    for fit in fits:
        lo, hi = fit.fit_window
        grid = np.geomspace(max(lo, 1), hi, 64)
        if fit.family == "power":
            y = np.exp(fit.intercept) * grid ** (-fit.exponent_or_rate)
            label = f"power fit, exponent {fit.exponent_or_rate:.3f}"
        else:
            y = np.exp(fit.intercept - fit.exponent_or_rate * grid)
            label = f"exponential fit, rate {fit.exponent_or_rate:.3f}"
        ax.loglog(grid, y, "--", lw=1, label=label)
    ax.set_xlabel("n")
    ax.set_ylabel("survival")
    if curve.censored:
        ax.axvline(curve.cap, color="grey", lw=0.8, ls=":")
    if title:
        ax.set_title(title)
    if keep.any() or fits:
        ax.legend(fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def positive_part_figure(report: StatReport, path: str | Path, bins: int = 50) -> Path:
    """Histogram of the per-rep positive-part statistic with the Gaussian limit marked."""
    values = report.values if report.values is not None else np.zeros(0)
    fig, ax = plt.subplots(figsize=(5.5, 4))
    if values.size:
        ax.hist(values, bins=bins, density=True, alpha=0.7)
    ax.axvline(report.estimate, color="k", lw=1, label=f"mean {report.estimate:.4f}")
    target = report.extra.get("target_sigma_reading")
    if target is not None:
        ax.axvline(target, color="C3", ls="--", lw=1, label=f"sigma/sqrt(2 pi) = {target:.4f}")
    ax.set_xlabel("positive part of normalized sum")
    ax.set_ylabel("density")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
