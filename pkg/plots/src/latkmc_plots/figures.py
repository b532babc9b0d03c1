"""Figure builders: exit-time PDF overlays, hysteresis loops, trajectories.

Each builder takes already-parsed series and an output path, draws with a
non-interactive backend and writes the image file.  Means and censoring are
annotated from the CSV contents alone.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .csvio import SeriesFile, read_series, require_columns, warn_on_config_mismatch
from .kde import gaussian_kde

MIN_SAMPLES = 100


@dataclass
class PlotJob:
    inputs: dict[str, Path]  # label -> CSV path
    kind: str  # exit_pdf | hysteresis | trajectory
    output: Path
    bandwidth: float | None = None  # None = Silverman's rule


def _annotate_means(ax, entries: list[str]) -> None:
    ax.text(
        0.98,
        0.97,
        "\n".join(entries),
        transform=ax.transAxes,
        ha="right",
        va="top",
        fontsize=9,
        bbox=dict(boxstyle="round", facecolor="white", alpha=0.8),
    )


def plot_exit_pdf(job: PlotJob) -> Path:
    """Overlay per-method exit-time densities with annotated means.

    Censored samples are excluded from the density and the mean; when more
    than 1% of a series is censored an inset shows the censored mass pinned
    at the simulation window end.
    """
    series = {label: read_series(p) for label, p in job.inputs.items()}
    for s in series.values():
        require_columns(s, ["tau", "censored"])
    warn_on_config_mismatch(list(series.values()))

    fig, ax = plt.subplots(figsize=(7, 4.5))
    annotations = []
    censored_info = []
    drawn = 0
    for label, s in series.items():
        tau = s.data["tau"][~s.data["censored"]]
        n_cens = int(s.data["censored"].sum())
        total = s.data["tau"].size
        if tau.size == 0:
            warnings.warn(f"{label}: no uncensored samples, skipping")
            censored_info.append((label, 1.0, float(s.data["tau"].max(initial=0.0))))
            continue
        if tau.size < MIN_SAMPLES:
            warnings.warn(f"{label}: only {tau.size} samples (< {MIN_SAMPLES})")
        lo = max(0.0, tau.min() - 0.15 * np.ptp(tau) - 1e-9)
        hi = tau.max() + 0.15 * np.ptp(tau) + 1e-9
        grid = np.linspace(lo, hi, 512)
        density = gaussian_kde(tau, grid, bandwidth=job.bandwidth)
        ax.plot(grid, density, label=label)
        annotations.append(f"{label}: mean {tau.mean():.2f}")
        if n_cens / total > 0.01:
            censored_info.append((label, n_cens / total, float(s.data["tau"].max())))
        drawn += 1
    ax.set_xlabel("exit time")
    ax.set_ylabel("probability density")
    if drawn:
        ax.legend(loc="upper left")
    _annotate_means(ax, annotations)
    if censored_info:
        inset = fig.add_axes([0.66, 0.35, 0.22, 0.25])
        labels = [c[0] for c in censored_info]
        fracs = [c[1] for c in censored_info]
        inset.bar(range(len(fracs)), fracs, color="tab:red")
        inset.set_xticks(range(len(fracs)))
        inset.set_xticklabels(labels, rotation=45, fontsize=7)
        inset.set_title("censored mass at window end", fontsize=8)
        inset.set_ylim(0, 1)
    fig.tight_layout()
    job.output.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(job.output, dpi=150)
    plt.close(fig)
    return job.output


def plot_hysteresis(job: PlotJob) -> Path:
    """Up/down coverage branches against the field, one pair per series."""
    series = {label: read_series(p) for label, p in job.inputs.items()}
    for s in series.values():
        require_columns(s, ["direction", "h", "mean_coverage"])
    warn_on_config_mismatch(list(series.values()))

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label, s in series.items():
        direction = s.data["direction"]
        for branch, style in (("up", "-o"), ("down", "--s")):
            mask = direction == branch
            h = s.data["h"][mask]
            c = s.data["mean_coverage"][mask]
            order = np.argsort(h)
            ax.plot(h[order], c[order], style, markersize=3, label=f"{label} ({branch})")
    ax.set_xlabel("external field h")
    ax.set_ylabel("mean coverage")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(fontsize=8)
    fig.tight_layout()
    job.output.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(job.output, dpi=150)
    plt.close(fig)
    return job.output


def _autocorrelation(series: np.ndarray, max_lag: int) -> np.ndarray:
    """Biased autocorrelation estimator of a uniformly sampled series."""
    x = series - series.mean()
    var = float(np.dot(x, x)) / x.size
    if var == 0:
        return np.ones(max_lag + 1)
    return np.array([np.dot(x[: x.size - k], x[k:]) / (x.size * var) for k in range(max_lag + 1)])


def plot_trajectory(job: PlotJob) -> Path:
    """Replica-averaged coverage vs time with an autocorrelation inset."""
    series = {label: read_series(p) for label, p in job.inputs.items()}
    for s in series.values():
        require_columns(s, ["replica", "t", "coverage"])
    warn_on_config_mismatch(list(series.values()))

    fig, ax = plt.subplots(figsize=(7, 4.5))
    inset = fig.add_axes([0.58, 0.25, 0.3, 0.28])
    for label, s in series.items():
        replicas = s.data["replica"].astype(int)
        grid_len = int(np.sum(replicas == replicas[0]))
        t = s.data["t"][:grid_len]
        cov = s.data["coverage"].reshape(-1, grid_len)
        mean = cov.mean(axis=0)
        ax.plot(t, mean, label=label)
        acf = _autocorrelation(mean, max_lag=min(grid_len - 1, 50))
        inset.plot(np.arange(acf.size), acf)
    ax.set_xlabel("time")
    ax.set_ylabel("mean coverage")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(loc="upper left", fontsize=8)
    inset.set_title("autocorrelation", fontsize=8)
    inset.axhline(0.0, color="gray", lw=0.5)
    fig.tight_layout()
    job.output.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(job.output, dpi=150)
    plt.close(fig)
    return job.output


BUILDERS = {
    "exit_pdf": plot_exit_pdf,
    "hysteresis": plot_hysteresis,
    "trajectory": plot_trajectory,
}


def render(job: PlotJob) -> Path:
    try:
        builder = BUILDERS[job.kind]
    except KeyError:
        raise ValueError(f"unknown figure kind {job.kind!r}; choose from {sorted(BUILDERS)}")
    return builder(job)
