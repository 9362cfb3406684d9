"""Plot one quantity from a CLI output CSV against drive.

Needs matplotlib, which is not a package dependency.  One curve is drawn per
(N, detuning, subsystem) group.

    python scripts/plot_csv.py out/qfi-sweep.csv --quantity qfi --png qfi.png
"""
from __future__ import annotations

import argparse
import csv
from collections import defaultdict


def load(path, quantity):
    groups = defaultdict(list)
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            if r["quantity"] != quantity:
                continue
            key = (r["N"], r["detuning_ratio"], r["subsystem"])
            groups[key].append((float(r["drive_ratio"]), float(r["value"])))
    return {k: sorted(v) for k, v in groups.items()}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("csv")
    ap.add_argument("--quantity", default="qfi")
    ap.add_argument("--png", default="plot.png")
    ap.add_argument("--logy", action="store_true")
    args = ap.parse_args()
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for (N, det, sub), pts in load(args.csv, args.quantity).items():
        x, y = zip(*pts)
        ax.plot(x, y, marker=".", label=f"N={N} Δ/g={det} {sub}")
    ax.set_xlabel("drive / g")
    ax.set_ylabel(args.quantity)
    if args.logy:
        ax.set_yscale("log")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(args.png, dpi=150)


if __name__ == "__main__":
    main()
