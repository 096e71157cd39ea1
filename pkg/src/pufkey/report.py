"""Figure rendering for the report-producing CLI commands.

Figures are written next to the delimited output: QoS trade-off curves
(correctness vs. usable percentage), the rate region, and per-coefficient
bit-flip tallies from a simulation run.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .fcs import RateRegion
from .pipeline import SimulationSummary


def save_qos_figure(path, curves, title: str | None = None) -> None:
    """Plot correctness probability against usable percentage per (j, m)."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for (j, m) in sorted(curves):
        pts = curves[(j, m)]
        ax.plot([p.beta_percent for p in pts], [p.p_c for p in pts],
                marker=".", markersize=3, label=f"coefficient {j}, m={m}")
    ax.set_xlabel(r"usable realizations $\beta$ (%)")
    ax.set_ylabel(r"correctness probability $P_c$")
    ax.invert_xaxis()
    ax.grid(True, alpha=0.4)
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_rate_region_figure(path, region: RateRegion) -> None:
    """Shade the achievable (secret-key, privacy-leakage) rate pairs."""
    cap = region.max_secret_key_rate
    rs = np.linspace(0.0, cap, 200)
    boundary = 1.0 - rs
    fig, ax = plt.subplots(figsize=(5.2, 4.2))
    top = 1.05
    ax.fill_between(rs, boundary, top, alpha=0.25, label="achievable region")
    ax.plot(rs, boundary, lw=1.5)
    opt = region.optimal_point
    ax.plot([opt.secret_key_rate], [opt.privacy_leakage_rate], "o", ms=6,
            label=f"optimal ({opt.secret_key_rate:.4f}, {opt.privacy_leakage_rate:.4f})")
    ax.set_xlabel(r"secret-key rate $R_s$")
    ax.set_ylabel(r"privacy-leakage rate $R_\ell$")
    ax.set_xlim(0.0, 1.0)
    ax.set_ylim(0.0, top)
    ax.grid(True, alpha=0.4)
    ax.legend(fontsize=8)
    ax.set_title(f"BSC crossover p = {region.crossover}")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_simulation_figure(path, summary: SimulationSummary) -> None:
    """Bar chart of accumulated bit flips per coefficient."""
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    if summary.flips_by_coefficient:
        idx = list(summary.flips_by_coefficient)
        ax.bar(idx, [summary.flips_by_coefficient[j] for j in idx], width=0.8)
    ax.set_xlabel("coefficient index")
    ax.set_ylabel("bit flips (all trials)")
    ax.set_title(f"{summary.num_trials} trials, "
                 f"{summary.rejected} rejected, {summary.key_errors} key errors")
    ax.grid(True, axis="y", alpha=0.4)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
