"""Figures for the CLI report paths, written to files with the Agg backend."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_STYLE = {"figure.dpi": 110, "axes.grid": True, "grid.alpha": 0.3, "font.size": 9}


def _save(fig, out_dir, name: str) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_suite(rows: list[dict], methods: list[str], out_dir) -> list[Path]:
    """Relative error against strike ratio and maturity, one series per method."""
    paths = []
    with plt.rc_context(_STYLE):
        for x_key, label, name in (("strike_ratio", "K*/B*_0", "suite_error_vs_strike.png"),
                                   ("maturity", "T (years)", "suite_error_vs_maturity.png")):
            fig, ax = plt.subplots(figsize=(6, 4))
            for m in methods:
                pts = [(r[x_key], r[f"{m}_error"]) for r in rows if r[f"{m}_error"] != ""]
                if pts:
                    x, y = np.array(pts, dtype=float).T
                    ax.scatter(x, 100 * y, s=10, label=m, alpha=0.7)
            ax.axhline(5.0, color="k", lw=0.8, ls="--")
            ax.set_xlabel(label)
            ax.set_ylabel("relative error vs MC (%)")
            ax.set_yscale("symlog", linthresh=0.1)
            ax.legend(fontsize=8)
            paths.append(_save(fig, out_dir, name))
    return paths


def plot_hedge(report, out_dir, n_show: int = 20) -> list[Path]:
    """Terminal hedge errors and a sample of Delta paths."""
    terminal = np.array([r.terminal_error for r in report.records])
    times = np.arange(report.n_rebalance)
    paths = []
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.hist(terminal, bins=40, color="tab:blue", alpha=0.8)
        ax.axvline(0.0, color="k", lw=0.8)
        ax.axvline(report.c10, color="tab:red", lw=1.0, label=f"mean {report.c10:.4f}")
        ax.set_xlabel("terminal portfolio value")
        ax.set_ylabel("paths")
        ax.legend(fontsize=8)
        paths.append(_save(fig, out_dir, "hedge_terminal_error.png"))

        fig, ax = plt.subplots(figsize=(6, 4))
        for r in report.records[:n_show]:
            ax.plot(times, r.deltas, lw=0.8, alpha=0.7)
        ax.set_xlabel("rebalance index")
        ax.set_ylabel("Delta")
        paths.append(_save(fig, out_dir, "hedge_delta_paths.png"))
    return paths


def plot_table2(prices: dict[str, list[float]], mc_values, mc_errors, out_dir) -> list[Path]:
    """Hermite prices minus the MC price per basket, with 3 SE bands."""
    mc_values = np.asarray(mc_values, dtype=float)
    mc_errors = np.asarray(mc_errors, dtype=float)
    x = np.arange(1, mc_values.size + 1)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.fill_between(x, -3 * mc_errors, 3 * mc_errors, color="0.85", label="MC 3 SE")
        width = 0.8 / max(1, len(prices))
        for j, (m, vals) in enumerate(prices.items()):
            vals = np.asarray(vals, dtype=float)
            ax.bar(x - 0.4 + (j + 0.5) * width, vals - mc_values, width=width, label=m)
        ax.axhline(0.0, color="k", lw=0.8)
        ax.set_xticks(x)
        ax.set_xlabel("basket")
        ax.set_ylabel("price - MC")
        ax.legend(fontsize=8)
        return [_save(fig, out_dir, "table2_price_diff.png")]
