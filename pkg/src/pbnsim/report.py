"""Benchmark output: CSV, gnuplot data files and matplotlib figures."""

from __future__ import annotations

import csv
import math
import os
from pathlib import Path
from typing import Sequence

from .bench import BenchmarkRecord

__all__ = ["COLUMNS", "plot_speedups", "read_csv", "report", "write_csv", "write_gnuplot"]

COLUMNS = (
    "model", "n", "target_density", "target_leaf_pct", "seed", "density", "leaf_fraction", "n_kept",
    "method", "steps", "prep_time", "sim_time", "one_count_total",
    "speedup_reduced_old", "speedup_new_reduced", "speedup_new_old", "speedup_new_old_with_prep",
)
INT_COLUMNS = {"model", "n", "seed", "n_kept", "steps", "one_count_total"}


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    x = float(x)
    if math.isnan(x):
        return "nan"
    return f"{x:.12g}"


def _rows(records: Sequence[BenchmarkRecord]):
    for idx, rec in enumerate(records):
        for method in rec.sim_time:
            yield {
                "model": idx, "n": rec.n, "target_density": rec.target_density,
                "target_leaf_pct": rec.target_leaf_pct, "seed": rec.seed, "density": rec.density,
                "leaf_fraction": rec.leaf_fraction, "n_kept": rec.n_kept, "method": method,
                "steps": rec.steps, "prep_time": rec.prep_time[method], "sim_time": rec.sim_time[method],
                "one_count_total": rec.one_count_total.get(method, 0),
                "speedup_reduced_old": rec.speedup_reduced_old,
                "speedup_new_reduced": rec.speedup_new_reduced,
                "speedup_new_old": rec.speedup_new_old,
                "speedup_new_old_with_prep": rec.speedup_new_old_with_prep,
            }


def write_csv(records: Sequence[BenchmarkRecord], path) -> int:
    """One row per (model, method); returns the number of data rows."""
    if not records:
        raise ValueError("no benchmark records to report")
    n_rows = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COLUMNS)
        for row in _rows(records):
            writer.writerow([_fmt(row[c]) for c in COLUMNS])
            n_rows += 1
    return n_rows


def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        out = []
        for row in csv.DictReader(fh):
            parsed = {}
            for key, value in row.items():
                if key == "method":
                    parsed[key] = value
                elif key in INT_COLUMNS:
                    parsed[key] = int(value)
                else:
                    parsed[key] = float(value)
            out.append(parsed)
    return out


def write_gnuplot(records: Sequence[BenchmarkRecord], out_dir) -> list[Path]:
    """``speedup.dat`` blocks per target density, ready for ``splot``; one timing file per method."""
    if not records:
        raise ValueError("no benchmark records to report")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []

    speed = out_dir / "speedup.dat"
    by_density: dict[float, list[BenchmarkRecord]] = {}
    for rec in records:
        by_density.setdefault(rec.target_density, []).append(rec)
    with open(speed, "w", encoding="utf-8") as fh:
        fh.write("# leaf_fraction density speedup_new_old speedup_reduced_old speedup_new_reduced\n")
        for key in sorted(by_density):
            for rec in sorted(by_density[key], key=lambda r: r.leaf_fraction):
                fh.write(" ".join(_fmt(v) for v in (rec.leaf_fraction, rec.density, rec.speedup_new_old,
                                                    rec.speedup_reduced_old, rec.speedup_new_reduced)))
                fh.write("\n")
            fh.write("\n")
    paths.append(speed)

    methods = sorted({m for rec in records for m in rec.sim_time})
    for method in methods:
        p = out_dir / f"time_{method}.dat"
        with open(p, "w", encoding="utf-8") as fh:
            fh.write("# n density leaf_fraction prep_time sim_time\n")
            for rec in records:
                if method in rec.sim_time:
                    fh.write(" ".join(_fmt(v) for v in (rec.n, rec.density, rec.leaf_fraction,
                                                        rec.prep_time[method], rec.sim_time[method])))
                    fh.write("\n")
        paths.append(p)
    return paths


def plot_speedups(records: Sequence[BenchmarkRecord], out_dir) -> list[Path]:
    """Speedup against leaf fraction (coloured by density) and against density."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    leaves = [100 * r.leaf_fraction for r in records]
    dens = [r.density for r in records]
    paths = []

    for name, title in (("speedup_new_old", "grouped vs old"),
                        ("speedup_reduced_old", "reduced vs old")):
        ys = [getattr(r, name) for r in records]
        if all(math.isnan(y) for y in ys):
            continue
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.6))
        sc = ax1.scatter(leaves, ys, c=dens, cmap="viridis", s=18, edgecolors="0.3", linewidths=0.4)
        ax1.set_xlabel("leaves (%)")
        ax1.set_ylabel("speedup")
        fig.colorbar(sc, ax=ax1, label="density")
        sc2 = ax2.scatter(dens, ys, c=leaves, cmap="magma", s=18, edgecolors="0.3", linewidths=0.4)
        ax2.set_xlabel("density")
        fig.colorbar(sc2, ax=ax2, label="leaves (%)")
        for ax in (ax1, ax2):
            ax.axhline(1.0, color="0.6", lw=0.8, ls="--")
            ax.grid(alpha=0.3)
        fig.suptitle(f"speedup, {title}")
        fig.tight_layout()
        p = out_dir / f"{name}.png"
        fig.savefig(p, dpi=120)
        plt.close(fig)
        paths.append(p)
    return paths


def report(records: Sequence[BenchmarkRecord], out_dir, stem: str = "benchmark") -> dict[str, list]:
    """Write CSV, gnuplot data and PNG figures into ``out_dir``."""
    if not records:
        raise ValueError("no benchmark records to report")
    os.makedirs(out_dir, exist_ok=True)
    csv_path = Path(out_dir) / f"{stem}.csv"
    write_csv(records, csv_path)
    return {
        "csv": [csv_path],
        "gnuplot": write_gnuplot(records, out_dir),
        "figures": plot_speedups(records, out_dir),
    }
