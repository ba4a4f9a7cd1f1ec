"""SVG figure rendering for fragility curves and bootstrap bands.

Figures are written next to the CSV outputs.  The SVG backend is seeded
(hash salt, no date metadata) so repeated runs emit identical bytes.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "seisfrag"

_SAVE_KW = {"format": "svg", "metadata": {"Date": None}}


def save_fragility_figure(curves: dict, path, title: str = "") -> None:
    """Line plot of one curve family (same IM kind and threshold)."""
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    for label, curve in curves.items():
        mask = curve.defined()
        ax.plot(curve.im_grid[mask], curve.probabilities[mask], label=label)
    _decorate(ax, next(iter(curves.values())), title)
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_bootstrap_figure(ensemble, original, path, title: str = "") -> None:
    """Median curve, confidence band, and the original-data curve."""
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    grid = ensemble.im_grid
    band = ensemble.lower.defined() & ensemble.upper.defined()
    ax.fill_between(grid[band], ensemble.lower.probabilities[band],
                    ensemble.upper.probabilities[band], alpha=0.3,
                    label=f"{100 * ensemble.level:.0f}% band")
    med = ensemble.median.defined()
    ax.plot(grid[med], ensemble.median.probabilities[med], "--",
            label="bootstrap median")
    if original is not None:
        mask = original.defined()
        ax.plot(original.im_grid[mask], original.probabilities[mask],
                label="original data")
    _decorate(ax, ensemble.median, title)
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def _decorate(ax, curve, title):
    ax.set_xscale("log")
    ax.set_ylim(-0.02, 1.02)
    ax.set_xlabel(f"{curve.im_kind.upper()} (g)")
    ax.set_ylabel("probability of exceedance")
    if title:
        ax.set_title(title)
    ax.legend(loc="best", fontsize=9)
    ax.grid(True, which="both", alpha=0.3)
