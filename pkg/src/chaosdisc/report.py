"""Result persistence: CSV, JSONL, and rendered figures.

CSV files carry one header row, '.'-radix decimals and newline line ends,
so they are byte-identical across reruns with the same seed. Figures are
rendered to PNG next to the delimited output.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path, fieldnames, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([_fmt(row[k]) for k in fieldnames])
    return path


def write_jsonl(path, dicts) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for d in dicts:
            fh.write(json.dumps(d, sort_keys=True))
            fh.write("\n")
    return path


def render_figure(result, path) -> Path:
    """Log-log slope plot or series plot, depending on the experiment."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    name = result.name
    if name in ("x-moment", "log-phi"):
        x = np.array([row["r"] for row in result.table])
        y = np.array([row["estimate"] for row in result.table])
        e = np.array([row["se"] for row in result.table])
        ax.errorbar(1.0 - x, y, yerr=e, fmt="o", capsize=3, label="estimate")
        _add_fit_line(ax, 1.0 - x, y, result.summary["slope"])
        ax.set_xlabel("1 - r")
        ax.set_ylabel("estimate")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_title(f"{name}: slope {result.summary['slope']:.4f} "
                     f"(expected {result.summary['expected_slope']:.4f})")
    elif name in ("mass-scaling", "multifractal"):
        xkey = "eps"
        ykey = "estimate" if name == "mass-scaling" else "count_mean"
        x = np.array([row[xkey] for row in result.table])
        y = np.array([row[ykey] for row in result.table])
        e = np.array([row["se"] for row in result.table])
        ax.errorbar(x, y, yerr=e, fmt="o", capsize=3, label="estimate")
        _add_fit_line(ax, x, y, result.summary["slope"] * (1 if name == "mass-scaling" else -1))
        ax.set_xlabel(xkey)
        ax.set_ylabel(ykey)
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_title(f"{name}: slope {result.summary['slope']:.4f} "
                     f"(expected {result.summary['expected_slope']:.4f})")
    elif name == "zero-density":
        betas = sorted({row["beta"] for row in result.table})
        for beta in betas:
            pts = [(row["k"], row["median_beta_sum"]) for row in result.table
                   if row["beta"] == beta]
            pts.sort()
            ax.plot([p[0] for p in pts], [p[1] for p in pts], "o-",
                    label=f"beta={beta}")
        ax.set_xlabel("k  (r_max = 1 - 2^-k)")
        ax.set_ylabel("median beta-sum")
        ax.set_title(f"zero-density (beta* = {result.summary['beta_star']:.3f})")
        ax.legend()
    elif name == "seiberg":
        ss = sorted({row["s"] for row in result.table})
        for s in ss:
            pts = sorted((row["N"], row["estimate"]) for row in result.table
                         if row["s"] == s)
            ax.plot([p[0] for p in pts], [p[1] for p in pts], "o-", label=f"s={s}")
        ax.set_xscale("log", base=2)
        ax.set_xlabel("truncation N")
        ax.set_ylabel("moment estimate")
        ax.set_title(f"seiberg (threshold s(p) = {result.summary['s_threshold']:.3f})")
        ax.legend()
    elif name == "imag-bound":
        x = np.array([row["r"] for row in result.table])
        y = np.array([row["estimate"] for row in result.table])
        e = np.array([row["se"] for row in result.table])
        ax.errorbar(1.0 - x, y, yerr=e, fmt="o-", capsize=3)
        ax.set_xscale("log")
        ax.set_xlabel("1 - r")
        ax.set_ylabel("negative-moment estimate")
        ax.set_title(f"imag-bound: max/min = {result.summary['max_over_min']:.3f}")
    else:
        ax.set_title(name)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def _add_fit_line(ax, x, y, slope):
    mask = (x > 0) & (y > 0)
    lx, ly = np.log(x[mask]), np.log(y[mask])
    intercept = ly.mean() - slope * lx.mean()
    xs = np.linspace(lx.min(), lx.max(), 50)
    ax.plot(np.exp(xs), np.exp(intercept + slope * xs), "--", label="fit")
    ax.legend()
