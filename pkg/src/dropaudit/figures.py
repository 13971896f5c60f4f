"""Optional rendered figures for report subcommands.

Rendering is opt-in from the CLI; the delimited outputs remain the primary
artifact.  Matplotlib runs on the Agg backend so no display is needed.
"""

from __future__ import annotations

import os

__all__ = [
    "render_audit_figure",
    "render_coverage_figure",
    "render_interpolation_figure",
]


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def render_audit_figure(rows: list[dict], out_dir: str, eta: float) -> str:
    """Drop effect and its interval per alpha; returns the written path."""
    plt = _pyplot()
    alphas = [r["alpha"] for r in rows]
    deltas = [r["delta_hat"] for r in rows]
    lbs = [r["lb"] for r in rows]
    ubs = [r["ub"] for r in rows]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.fill_between(alphas, lbs, ubs, alpha=0.25, label=f"{eta:.0%} bootstrap interval")
    ax.plot(alphas, deltas, marker="o", label="estimated drop effect")
    ax.set_xscale("log")
    ax.set_xlabel("drop fraction alpha")
    ax.set_ylabel("delta")
    ax.legend()
    fig.tight_layout()
    path = os.path.join(out_dir, "audit.png")
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_coverage_figure(records, out_dir: str, filename: str, nominal: float) -> str:
    """Coverage point with Clopper-Pearson bars per alpha vs the nominal level."""
    plt = _pyplot()
    live = [r for r in records if r.coverage_point is not None]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    if live:
        alphas = [r.alpha for r in live]
        points = [r.coverage_point for r in live]
        err_lo = [r.coverage_point - r.coverage_interval[0] for r in live]
        err_hi = [r.coverage_interval[1] - r.coverage_point for r in live]
        ax.errorbar(alphas, points, yerr=[err_lo, err_hi], fmt="o", capsize=3, label="estimated coverage")
        ax.set_xscale("log")
    ax.axhline(nominal, linestyle="--", linewidth=1, label=f"nominal {nominal:g}")
    ax.set_xlabel("drop fraction alpha")
    ax.set_ylabel("coverage")
    ax.set_ylim(0.0, 1.05)
    ax.legend()
    fig.tight_layout()
    path = os.path.join(out_dir, filename)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_interpolation_figure(report, out_dir: str) -> str:
    """Exact refit vs linear prediction along the downweighting path."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(report.zeta_grid, report.refit, marker="o", label="exact refit")
    ax.plot(report.zeta_grid, report.linear, marker="s", label="linear prediction")
    ax.set_xlabel("zeta (fraction of the selected set's weight removed)")
    ax.set_ylabel("QoI")
    ax.legend()
    fig.tight_layout()
    path = os.path.join(out_dir, "interpolation.png")
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
