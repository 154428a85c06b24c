"""Figure rendering for analysis reports. All figures go to files through the
Agg backend; nothing here opens a display.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_MARKERS = "osD^vP*"
_COLORS = plt.rcParams["axes.prop_cycle"].by_key()["color"]


def _style(i: int) -> dict:
    return {"marker": _MARKERS[i % len(_MARKERS)], "color": _COLORS[i % len(_COLORS)],
            "linestyle": "none", "markersize": 5}


def save_kz_fit(path: Path, groups: list[dict]) -> None:
    """Log-log defect density vs annealing time with per-range fit lines."""
    fig, ax = plt.subplots(figsize=(5.2, 4.0))
    for i, grp in enumerate(groups):
        tq = np.asarray(grp["tau_q"])
        y = np.asarray(grp["kappa1"])
        ax.loglog(tq, y, label=f"r={grp['r']}", **_style(i))
        if grp.get("exponent") is not None:
            xs = np.geomspace(tq.min(), tq.max(), 64)
            ax.loglog(xs, grp["prefactor"] * xs ** grp["exponent"],
                      color=_COLORS[i % len(_COLORS)], linewidth=1.0, alpha=0.7)
    ax.set_xlabel(r"$\tau_Q$")
    ax.set_ylabel(grp.get("observable", "density") if groups else "density")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_exp_fit(path: Path, x: np.ndarray, y: np.ndarray, rate: float, prefactor: float,
                 xlabel: str, ylabel: str) -> None:
    fig, ax = plt.subplots(figsize=(5.2, 4.0))
    ax.semilogy(x, y, "o", markersize=5)
    xs = np.linspace(min(x), max(x), 64)
    ax.semilogy(xs, prefactor * np.exp(rate * xs), "-", linewidth=1.0, alpha=0.8,
                label=f"rate = {rate:.3g}")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_collapse(path: Path, curves: list[tuple[np.ndarray, np.ndarray, str]],
                  score: float, xlabel: str, ylabel: str, logy: bool = False) -> None:
    fig, ax = plt.subplots(figsize=(5.2, 4.0))
    for i, (x, y, label) in enumerate(curves):
        ax.plot(x, y, label=str(label), linewidth=1.0,
                marker=_MARKERS[i % len(_MARKERS)], markersize=3,
                color=_COLORS[i % len(_COLORS)])
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(f"collapse score = {score:.3g}", fontsize=9)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_ratio_trend(path: Path, c_values: np.ndarray, ratios: np.ndarray, errors: np.ndarray,
                     ylabel: str) -> None:
    fig, ax = plt.subplots(figsize=(5.2, 4.0))
    ax.errorbar(c_values, ratios, yerr=errors, fmt="o", markersize=5, capsize=3)
    ax.set_xlabel("connectance c")
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_profiles(path: Path, profiles: list[dict], rescale_r2: bool = False) -> None:
    """Correlator profiles; optionally r^2 G(d) vs d/xi."""
    fig, ax = plt.subplots(figsize=(5.2, 4.0))
    for i, info in enumerate(profiles):
        d = np.asarray(info["distances"], dtype=float)
        g = np.asarray(info["g_values"], dtype=float)
        label = info.get("label", f"eps={info.get('epsilon', float('nan')):.3g}")
        if rescale_r2 and info.get("xi"):
            r = info.get("r", 1)
            ax.semilogy(d / info["xi"], r * r * g, label=label, **_style(i))
        else:
            sel = g > 0
            ax.semilogy(d[sel], g[sel], label=label, **_style(i))
    ax.set_xlabel(r"$d/\xi$" if rescale_r2 else "d")
    ax.set_ylabel(r"$r^2 G(d)$" if rescale_r2 else "G(d)")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
