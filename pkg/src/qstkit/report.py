"""Render PNG figures from the CSV tables written by ``qst simulate``."""
from __future__ import annotations

import json
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import ArgumentError  # noqa: E402
from .formats import read_csv  # noqa: E402


def _f(x) -> float:
    return float(x) if x not in ("", "nan") else float("nan")


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _histograms(out: Path) -> list[Path]:
    paths = []
    for csv_path in sorted(out.glob("histogram_*.csv")):
        _, _, rows = read_csv(csv_path, "histogram")
        left = np.array([_f(r["bin_left"]) for r in rows])
        right = np.array([_f(r["bin_right"]) for r in rows])
        counts = np.array([_f(r["count"]) for r in rows])
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.bar(left, counts, width=right - left, align="edge", edgecolor="black", linewidth=0.3)
        name = csv_path.stem.removeprefix("histogram_")
        ax.set_xlabel(name)
        ax.set_ylabel("count")
        paths.append(_save(fig, out / f"{csv_path.stem}.png"))
    return paths


def _mse_vs_r(out: Path, agg) -> list[Path]:
    series = defaultdict(list)
    for row in agg:
        series[row["estimator"]].append((int(row["r"]), _f(row["mean_mse"]), _f(row["stderr"]), _f(row["theory"])))
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, pts in series.items():
        pts.sort()
        r, m, se, th = map(np.array, zip(*pts))
        ax.errorbar(r, m, yerr=2 * se, marker="o", ms=3, capsize=2, label=name)
        if np.isfinite(th).all():
            ax.plot(r, th, "k--", lw=1, label=f"{name} theory")
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("shots per observable r")
    ax.set_ylabel("mean squared error")
    ax.legend(fontsize=7)
    return [_save(fig, out / "mse_vs_r.png")]


def _spectral(out: Path, agg) -> list[Path]:
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    for row in agg:
        eig = [_f(v) for k, v in row.items() if k.startswith("eig_err_")]
        vec = [_f(v) for k, v in row.items() if k.startswith("vec_err_")]
        idx = np.arange(1, len(eig) + 1)
        axes[0].plot(idx, eig, marker="o", label=row["estimator"])
        axes[1].plot(idx, vec, marker="o", label=row["estimator"])
    axes[0].set_ylabel("mean |eigenvalue error|")
    axes[1].set_ylabel("mean eigenvector error")
    for ax in axes:
        ax.set_xlabel("eigenvalue index (descending)")
    axes[0].legend(fontsize=7)
    return [_save(fig, out / "spectral_errors.png")]


def _mub(out: Path, agg) -> list[Path]:
    k = np.array([int(r["k"]) for r in agg])
    m = np.array([_f(r["mean_mse"]) for r in agg])
    se = np.array([_f(r["stderr"]) for r in agg])
    th = np.array([_f(r["theory"]) for r in agg])
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.errorbar(k, m, yerr=2 * se, marker="o", capsize=3, label="MUB reconstruction")
    ax.plot(k, th, "k--", label="closed form")
    ax.set_yscale("log")
    ax.set_xlabel("qubits k")
    ax.set_ylabel("mean squared error")
    ax.legend()
    return [_save(fig, out / "mub_vs_theory.png")]


def _qmd(out: Path, runs) -> list[Path]:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    eta = np.array([_f(r["eta"]) for r in runs])
    ax.scatter(eta, [_f(r["bitflip_sup_brute"]) for r in runs], s=8, label="mesh search")
    grid = np.unique(eta)
    sup = {e: _f(r["bitflip_sup"]) for e, r in zip(eta, runs)}
    ax.plot(grid, [sup[e] for e in grid], "k-", label="closed form")
    ax.set_xlabel("flip probability")
    ax.set_ylabel("maximal discrepancy")
    ax.legend()
    return [_save(fig, out / "qmd_noise.png")]


def _concentration(out: Path, agg) -> list[Path]:
    fig, ax = plt.subplots(figsize=(6, 4))
    by_dir = defaultdict(list)
    for row in agg:
        by_dir[row["direction"]].append(row)
    for i, (d, rows) in enumerate(sorted(by_dir.items())):
        x = [_f(r["t_over_sigma"]) for r in rows]
        c = f"C{i}"
        ax.plot(x, [_f(r["empirical_tail"]) for r in rows], color=c, marker=".", label=f"direction {d}")
        ax.plot(x, [_f(r["bennett"]) for r in rows], color=c, ls="--")
    ax.set_yscale("log")
    ax.set_xlabel("t / sigma")
    ax.set_ylabel("tail probability (dashed: Bennett bound)")
    ax.legend(fontsize=7)
    return [_save(fig, out / "concentration.png")]


def render_report(out_dir) -> list[Path]:
    """Render every figure that applies to the experiment stored in ``out_dir``."""
    out = Path(out_dir)
    cfg_path = out / "config.json"
    if not cfg_path.exists():
        raise ArgumentError(f"{out} does not hold simulation output (config.json missing)")
    kind = json.loads(cfg_path.read_text()).get("kind")
    _, _, agg = read_csv(out / "aggregate.csv", "aggregate")
    paths = _histograms(out)
    if kind == "mse_vs_r":
        paths += _mse_vs_r(out, agg)
    elif kind == "spectral":
        paths += _spectral(out, agg)
    elif kind == "mub_vs_theory":
        paths += _mub(out, agg)
    elif kind == "qmd_noise":
        _, _, runs = read_csv(out / "runs.csv", "runs")
        paths += _qmd(out, runs)
    elif kind == "concentration":
        paths += _concentration(out, agg)
    return paths
