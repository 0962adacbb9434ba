"""Figures for CLI reports.  matplotlib is optional and imported only here, on demand."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Sequence

log = logging.getLogger(__name__)


def _pyplot():
    try:
        import matplotlib
    except ImportError:
        return None
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def available() -> bool:
    try:
        import matplotlib  # noqa: F401
    except ImportError:
        return False
    return True


def _save(fig, path: Path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})


def convergence(rows: Sequence[dict], path, title: str = "") -> bool:
    """Exploitability proxy and total violation against iterations (log-log)."""
    plt = _pyplot()
    if plt is None:
        log.info("matplotlib not installed; skipping %s", path)
        return False
    its = [r["iteration"] for r in rows]
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    ax.loglog(its, [max(r["exploitability"], 1e-16) for r in rows], label="exploitability proxy")
    if any(r["total_violation"] > 0 for r in rows):
        ax.loglog(its, [max(r["total_violation"], 1e-16) for r in rows], label="total violation")
    ax.loglog(its, [r["viol_rhs"] for r in rows], "--", label="violation bound")
    ax.set_xlabel("iteration")
    ax.set_title(title)
    ax.legend()
    _save(fig, path)
    plt.close(fig)
    return True


def tradeoff(bounds: Sequence[float], risk: Sequence[float], expl: Sequence[float], path) -> bool:
    """Measured risk against exploitability, one point per risk bound."""
    plt = _pyplot()
    if plt is None:
        log.info("matplotlib not installed; skipping %s", path)
        return False
    fig, ax = plt.subplots(figsize=(5, 3.8))
    ax.plot(risk, expl, "o-")
    for b, r, e in zip(bounds, risk, expl):
        ax.annotate(f"b={b:g}", (r, e), textcoords="offset points", xytext=(4, 4), fontsize=8)
    ax.set_xlabel("risk of not returning to base")
    ax.set_ylabel("exploitability")
    _save(fig, path)
    plt.close(fig)
    return True


def learning_curve(curves: dict[float, tuple[list, list, list, list]], nash: float, br: float,
                   path) -> bool:
    """Value against the target versus observed games, with min/max error bars."""
    plt = _pyplot()
    if plt is None:
        log.info("matplotlib not installed; skipping %s", path)
        return False
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    for gamma, (ns, mean, lo, hi) in sorted(curves.items()):
        err = [[m - a for m, a in zip(mean, lo)], [b - m for m, b in zip(mean, hi)]]
        ax.errorbar(ns, mean, yerr=err, marker="o", capsize=3, label=f"gamma={gamma:g}")
    ax.axhline(nash, color="gray", ls="--", label="equilibrium")
    ax.axhline(br, color="black", ls=":", label="best response")
    ax.set_xscale("log")
    ax.set_xlabel("observed games")
    ax.set_ylabel("value against target")
    ax.legend(fontsize=8)
    _save(fig, path)
    plt.close(fig)
    return True
