"""Figures for the CLI outputs (matplotlib, Agg backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams.update({
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
})


def _save(fig, path: Path) -> Path:
    path = Path(path)
    fig.tight_layout()
    tmp = path.with_name(f".{path.stem}.tmp.png")
    fig.savefig(tmp)
    plt.close(fig)
    tmp.replace(path)
    return path


def rate_figure(report, path: Path, xlabel: str, title: str = "") -> Path:
    x = np.asarray(report.param_values)
    y = np.asarray(report.errors)
    fig, ax = plt.subplots(figsize=(5, 4))
    se = report.extra.get("standard_errors")
    if se is not None and np.all(np.isfinite(se)):
        ax.errorbar(x, y, yerr=3 * np.asarray(se), fmt="o", ms=4, capsize=2, label="measured (3 SE)")
    else:
        ax.plot(x, y, "o", ms=4, label="measured")
    ax.plot(x, np.exp(report.intercept) * x ** report.slope, "-", lw=1,
            label=f"fit slope {report.slope:.3f} (r² {report.r_squared:.4f})")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("error")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    return _save(fig, path)


def trajectory_figure(traj, path: Path) -> Path:
    t = traj.times
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.6))
    zero = traj.lattice.index_of((0, 0))
    for b in range(min(traj.count, 8)):
        axes[0].plot(t, traj.psi[:, b, zero].real, lw=0.8)
    axes[0].set_xlabel("t")
    axes[0].set_ylabel("Re psi(0)")
    l2 = np.sqrt(np.nansum(np.abs(traj.psi) ** 2, axis=-1))
    axes[1].plot(t, np.nanmean(l2, axis=1), lw=1)
    axes[1].set_xlabel("t")
    axes[1].set_ylabel("mean L2 norm")
    return _save(fig, path)


def zscore_figure(rows: list, path: Path, title: str = "") -> Path:
    names = [r["observable"] for r in rows]
    z = [r["z"] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 0.35 * len(rows) + 1.2))
    ax.barh(range(len(z)), z, color=["tab:red" if abs(v) >= 3 else "tab:blue" for v in z])
    ax.axvline(3, color="k", lw=0.8, ls="--")
    ax.axvline(-3, color="k", lw=0.8, ls="--")
    ax.set_yticks(range(len(z)))
    ax.set_yticklabels(names, fontsize=7)
    ax.set_xlabel("z")
    if title:
        ax.set_title(title)
    return _save(fig, path)


def weights_figure(log_weight: np.ndarray, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.6))
    ax.hist(log_weight, bins=60)
    ax.set_xlabel("log weight")
    ax.set_ylabel("count")
    return _save(fig, path)


def wick_figure(report, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.6))
    for lo in sorted({r["n_lo"] for r in report.pairs}):
        sel = [r for r in report.pairs if r["n_lo"] == lo]
        ax.errorbar([r["n_hi"] for r in sel], [r["mean"] for r in sel], yerr=[3 * r["se"] for r in sel],
                    marker="o", ms=4, capsize=2, label=f"N_lo = {lo}")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("N_hi")
    ax.set_ylabel("mean difference")
    ax.set_title(f"H_{{{report.m},{report.n}}}, delta = {report.delta:g}")
    ax.legend(fontsize=8)
    return _save(fig, path)


def bounds_figure(results: dict, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 3.6))
    labels = None
    for i, (alpha, entries) in enumerate(results.items()):
        items = [e for e in entries if e["worst_margin"] is not None]
        labels = [e["item"] for e in items]
        ax.plot(range(len(items)), [e["worst_margin"] for e in items], "o-", ms=4, label=alpha)
    ax.axhline(0, color="k", lw=0.8)
    if labels:
        ax.set_xticks(range(len(labels)))
        ax.set_xticklabels(labels)
    ax.set_yscale("symlog", linthresh=1e-4)
    ax.set_ylabel("worst slack")
    ax.legend(fontsize=8)
    return _save(fig, path)


def energy_figure(probe, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.6))
    for key, vals in probe.constants.items():
        ax.plot(probe.eps_values, vals, "o-", ms=4, label=key)
    ax.set_xscale("log", base=2)
    ax.set_xlabel("eps")
    ax.set_ylabel("empirical constant")
    ax.legend(fontsize=8)
    return _save(fig, path)
