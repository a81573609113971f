"""PNG figures rendered from the CSV artifacts of a run directory.

Figures only ever read the files the CLI wrote, so a plot can be redrawn
from an old run without recomputing anything.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

RC = {
    "figure.figsize": (5.0, 3.6),
    "figure.dpi": 120,
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.frameon": False,
    "savefig.bbox": "tight",
}


def _read(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def plot_moments(csv_path, png_path) -> None:
    rows = _read(csv_path)
    cols = [c for c in rows[0] if c not in ("m", "max_dev")]
    ms = [int(r["m"]) for r in rows]
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        for k, c in enumerate(cols):
            ax.plot(ms, [float(r[c]) for r in rows], marker="osd"[k % 3], ms=5 - k,
                    lw=1, label=c)
        ax.set_xlabel("m")
        ax.set_ylabel("moment")
        if all(float(r[cols[0]]) > 0 for r in rows):
            ax.set_yscale("log")
        ax.legend()
        fig.savefig(png_path)
        plt.close(fig)


def plot_density(csv_path, png_path) -> None:
    rows = _read(csv_path)
    x = [float(r["x"]) for r in rows]
    y = [float(r["density"]) for r in rows]
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        ax.plot(x, y, color="k", lw=1.2)
        ax.fill_between(x, y, color="0.85")
        ax.set_xlabel("x")
        ax.set_ylabel("density")
        ax.set_ylim(bottom=0)
        fig.savefig(png_path)
        plt.close(fig)


def plot_rmt(csv_path, png_path) -> None:
    """Estimates with 3-sigma bars against oracles; sweeps go on log-log axes."""
    rows = _read(csv_path)
    sweep = [r for r in rows if r["target"].startswith("sweep:")]
    other = [r for r in rows if not r["target"].startswith("sweep:")]
    panels = int(bool(sweep)) + int(bool(other))
    with plt.rc_context(RC):
        fig, axes = plt.subplots(1, panels, figsize=(5.0 * panels, 3.6), squeeze=False)
        axes = list(axes[0])
        if other:
            ax = axes.pop(0)
            oracle = [float(r["oracle"]) for r in other]
            est = [float(r["estimate"]) for r in other]
            err = [3 * float(r["stderr"]) for r in other]
            lo, hi = min(oracle + est), max(oracle + est)
            ax.plot([lo, hi], [lo, hi], color="0.6", lw=0.8)
            ax.errorbar(oracle, est, yerr=err, fmt="o", ms=3, lw=0.8, color="C0")
            ax.set_xlabel("Fock limit")
            ax.set_ylabel("Monte-Carlo estimate")
        if sweep:
            ax = axes.pop(0)
            ns = [int(r["n"]) for r in sweep]
            ax.errorbar(ns, [float(r["abs_error"]) for r in sweep],
                        yerr=[2 * float(r["stderr"]) for r in sweep], fmt="s-", ms=4, lw=1,
                        color="C3")
            ax.set_xscale("log", base=2)
            ax.set_yscale("log")
            ax.set_xlabel("n")
            ax.set_ylabel("|estimate - limit|")
        fig.savefig(png_path)
        plt.close(fig)


_PLOTTERS = {
    "moments": ("moments.csv", plot_moments),
    "density": ("density.csv", plot_density),
    "rmt": ("rmt.csv", plot_rmt),
}


def render_outputs(out_dir, kind: str, names) -> list[str]:
    """Render the figure for ``kind`` if its CSV is among ``names``; return new file names."""
    if kind not in _PLOTTERS:
        return []
    src, fn = _PLOTTERS[kind]
    if src not in names:
        return []
    png = Path(src).with_suffix(".png").name
    fn(Path(out_dir) / src, Path(out_dir) / png)
    return [png]
