"""Render the report CSVs of a result directory as PNG figures.

Figures go to ``<dir>/figures``.  Only the CSV files are read, so figures can
be re-rendered without touching the records.
"""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

GOLDEN = (math.sqrt(5) - 1.0) / 2.0

# applied through rc_context so importing this module leaves global state alone
STYLE = {
    "font.size": 9,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.dpi": 120,
    "savefig.bbox": "tight",
    "axes.grid": True,
    "grid.alpha": 0.3,
}


def _read(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _figure(width: float = 5.0, height: float | None = None, ncols: int = 1):
    return plt.subplots(1, ncols, figsize=(width * ncols, height or width * GOLDEN), squeeze=False)


def lineplots(out: Path, figdir: Path) -> list[Path]:
    """AR vs load per resource level, with 95% CI bands (one panel per algorithm)."""
    rows = [r for r in _read(out / "lineplot.csv") if r["reduction"] == "best"]
    fig, axes = _figure(ncols=2)
    for ax, alg, label in zip(axes[0], ("qaoa", "sa"), ("layers", "temperature steps")):
        series = defaultdict(list)
        for r in rows:
            if r["algorithm"] == alg:
                series[int(r["s"])].append((float(r["load"]), float(r["mean_ar"]), float(r["ci95"])))
        for s in sorted(series)[-4:]:
            pts = sorted(series[s])
            x = np.array([p[0] for p in pts]) * 100
            y = np.array([p[1] for p in pts])
            ci = np.array([p[2] for p in pts])
            ax.plot(x, y, marker="o", ms=3, label=f"{s} {label}")
            ax.fill_between(x, y - ci, y + ci, alpha=0.2)
        ax.set_xlabel("load [% of capacity]")
        ax.set_ylabel("approximation ratio")
        ax.set_title(alg.upper())
        ax.legend()
    path = figdir / "ar_vs_load.png"
    fig.savefig(path)
    plt.close(fig)
    return [path]


def scaling(out: Path, figdir: Path) -> list[Path]:
    """AR vs resource level at the largest qubit count, one line per load."""
    rows = _read(out / "scaling.csv")
    if not rows:
        return []
    fig, axes = _figure(ncols=2)
    for ax, alg in zip(axes[0], ("qaoa", "sa")):
        series = defaultdict(list)
        for r in rows:
            if r["algorithm"] == alg:
                series[float(r["load"])].append((int(r["s"]), float(r["best_ar"])))
        for load in sorted(series):
            pts = sorted(series[load])
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker=".", label=f"{load:.0%}")
        if alg == "qaoa":
            ax.set_xscale("log", base=2)
            ax.set_xlabel("layers p")
        else:
            ax.set_xlabel("temperature steps")
        ax.set_ylabel("approximation ratio")
        ax.set_title(f"{alg.upper()}, {rows[0]['qubits']} qubits")
        ax.legend(ncol=2, fontsize=6)
    path = figdir / "ar_vs_resources.png"
    fig.savefig(path)
    plt.close(fig)
    return [path]


def _grid(rows, value="ar"):
    qubits = sorted({int(r["qubits"]) for r in rows})
    loads = sorted({float(r["load"]) for r in rows})
    z = np.full((len(qubits), len(loads)), np.nan)
    for r in rows:
        z[qubits.index(int(r["qubits"])), loads.index(float(r["load"]))] = float(r[value])
    return qubits, loads, z


def _heat(ax, qubits, loads, z, cmap, vmin, vmax, title):
    im = ax.imshow(z, origin="lower", aspect="auto", cmap=cmap, vmin=vmin, vmax=vmax)
    ax.set_xticks(range(len(loads)), [f"{l:.0%}" for l in loads], rotation=45)
    ax.set_yticks(range(len(qubits)), qubits)
    ax.set_xlabel("load")
    ax.set_ylabel("qubits")
    ax.set_title(title)
    ax.grid(False)
    return im


def heatmaps(out: Path, figdir: Path) -> list[Path]:
    diff_rows = _read(out / "heatmap_diff.csv")
    if not diff_rows:
        return []
    p_sel, t_sel = diff_rows[0]["qaoa_layers"], diff_rows[0]["sa_temperature_steps"]
    heat = _read(out / "heatmap.csv")
    q_rows = [r for r in heat if r["algorithm"] == "qaoa" and r["s"] == p_sel]
    s_rows = [r for r in heat if r["algorithm"] == "sa" and r["s"] == t_sel]
    zs = [_grid(q_rows), _grid(s_rows)]
    # shared colour range for both panels
    vmin = min(np.nanmin(z) for _, _, z in zs)
    fig, axes = _figure(ncols=2)
    for ax, (q, l, z), title in zip(axes[0], zs, (f"QAOA p={p_sel}", f"SA {t_sel} steps")):
        im = _heat(ax, q, l, z, "viridis", vmin, 1.0, title)
    fig.colorbar(im, ax=axes[0].tolist(), label="approximation ratio")
    p1 = figdir / "heatmaps.png"
    fig.savefig(p1)
    plt.close(fig)

    q, l, z = _grid(diff_rows, "difference")
    lim = max(np.nanmax(np.abs(z)), 1e-6)
    fig, axes = _figure()
    im = _heat(axes[0][0], q, l, z, "RdBu", -lim, lim, "QAOA minus SA")
    fig.colorbar(im, ax=axes[0][0], label="AR difference")
    p2 = figdir / "heatmap_diff.png"
    fig.savefig(p2)
    plt.close(fig)
    return [p1, p2]


def tts(out: Path, figdir: Path) -> list[Path]:
    rows = _read(out / "tts.csv")
    fits = {r["algorithm"]: r for r in _read(out / "tts_fit.csv") if r["slope"]}
    fig, axes = _figure()
    ax = axes[0][0]
    for alg in ("qaoa", "sa"):
        pts = sorted((int(r["qubits"]), float(r["mean_tts"])) for r in rows if r["algorithm"] == alg)
        pts = [p for p in pts if math.isfinite(p[1])]
        if not pts:
            continue
        x = np.array([p[0] for p in pts])
        (line,) = ax.plot(x, [p[1] for p in pts], "o", label=alg.upper())
        if alg in fits:
            slope, icpt = float(fits[alg]["slope"]), float(fits[alg]["intercept"])
            ax.plot(x, 2.0 ** (slope * x + icpt), "--", color=line.get_color(),
                    label=f"{alg.upper()} fit, slope {slope:.3f}")
    ax.set_yscale("log", base=2)
    ax.set_xlabel("qubits")
    ax.set_ylabel("time to solution [steps]")
    ax.legend()
    path = figdir / "tts.png"
    fig.savefig(path)
    plt.close(fig)
    return [path]


def render_all(out: str | Path) -> list[Path]:
    out = Path(out)
    figdir = out / "figures"
    figdir.mkdir(exist_ok=True)
    paths: list[Path] = []
    with plt.rc_context(STYLE):
        for fn in (lineplots, scaling, heatmaps, tts):
            paths += fn(out, figdir)
    return paths
