"""File-target figure rendering for sweep reports.

Everything here draws from an ``ExperimentReport`` and writes PNG files;
there is no interactive display path, so the Agg backend is forced.  Curves
aggregate fold rows within a seed first and show the across-seed standard
error, matching how the acceptance comparisons are computed.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluation import ExperimentReport

__all__ = [
    "plot_f1_vs_pi",
    "plot_f1_vs_sigma",
    "plot_naive_quality",
    "render_sweep_figures",
]

_COLORS = {
    "lrm": "tab:blue",
    "nnm": "tab:cyan",
    "mi": "tab:orange",
    "lrn": "tab:red",
    "supervised": "tab:green",
    "naive_labels": "tab:gray",
}


def _curve(
    report: ExperimentReport, method: str, axis: str, metric: str = "f1"
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mean and across-seed standard error of a metric along one axis."""
    values = sorted({getattr(r, axis) for r in report.select(method=method)})
    means, errs = [], []
    for value in values:
        rows = report.select(**{"method": method, axis: value})
        seeds = sorted({r.seed for r in rows})
        per_seed = [
            np.mean([getattr(r, metric) for r in rows if r.seed == s]) for s in seeds
        ]
        means.append(np.mean(per_seed))
        errs.append(np.std(per_seed) / np.sqrt(len(per_seed)) if len(per_seed) > 1 else 0.0)
    return np.asarray(values, dtype=float), np.asarray(means), np.asarray(errs)


def _methods(report: ExperimentReport, axis: str) -> list[str]:
    seen: list[str] = []
    for row in report.rows:
        if row.method != "naive_labels" and getattr(row, axis) is not None:
            if row.method not in seen:
                seen.append(row.method)
    return seen


def _axis_values(report: ExperimentReport, axis: str) -> list[float]:
    return sorted({getattr(r, axis) for r in report.rows if getattr(r, axis) is not None})


def _f1_axis_figure(
    report: ExperimentReport, axis: str, xlabel: str, path: Path
) -> Path:
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for method in _methods(report, axis):
        x, mean, err = _curve(report, method, axis)
        ax.errorbar(
            x, mean, yerr=err, marker="o", capsize=3,
            label=method.upper() if method != "naive_labels" else method,
            color=_COLORS.get(method),
        )
    ax.set_xlabel(xlabel)
    ax.set_ylabel("F1 against true labels")
    ax.set_ylim(-0.02, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_f1_vs_sigma(report: ExperimentReport, path) -> Path:
    """Detector F1 as the timestamp jitter scale grows."""
    return _f1_axis_figure(report, "sigma", "timestamp noise sigma", Path(path))


def plot_f1_vs_pi(report: ExperimentReport, path) -> Path:
    """Detector F1 as the emission probability varies."""
    return _f1_axis_figure(report, "pi", "emission probability pi", Path(path))


def plot_naive_quality(report: ExperimentReport, path) -> Path:
    """Precision/recall/F1 of the naive alignment labels along sigma."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    styles = {"recall": "-o", "precision": "--s", "f1": ":^"}
    for metric, style in styles.items():
        x, mean, err = _curve(report, "naive_labels", "sigma", metric)
        ax.errorbar(x, mean, yerr=err, fmt=style, capsize=3, label=f"naive {metric}")
    ax.set_xlabel("timestamp noise sigma")
    ax.set_ylabel("naive-label quality vs true labels")
    ax.set_ylim(-0.02, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_sweep_figures(report: ExperimentReport, out_dir) -> list[Path]:
    """Render every figure whose x-axis actually varies in the report."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    if len(_axis_values(report, "sigma")) >= 2:
        if _methods(report, "sigma"):
            written.append(plot_f1_vs_sigma(report, out_dir / "f1_vs_sigma.png"))
        if report.select(method="naive_labels"):
            written.append(
                plot_naive_quality(report, out_dir / "naive_label_quality.png")
            )
    if len(_axis_values(report, "pi")) >= 2 and _methods(report, "pi"):
        written.append(plot_f1_vs_pi(report, out_dir / "f1_vs_pi.png"))
    return written
