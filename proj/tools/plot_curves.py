#!/usr/bin/env python3
"""Plot median/IQR suboptimality from a run-experiment output directory."""

import argparse
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("dirs", nargs="+", type=Path, help="run-experiment output directories")
    ap.add_argument("--out", type=Path, default=Path("suboptimality.png"))
    ap.add_argument("--log", action="store_true", help="log-scale y axis")
    args = ap.parse_args()

    fig, ax = plt.subplots(figsize=(6, 4))
    for d in args.dirs:
        agg = json.loads((d / "aggregate.json").read_text())
        med, lo, hi = agg["suboptimality_median"], agg["suboptimality_q25"], agg["suboptimality_q75"]
        manifest = json.loads((d / "manifest.json").read_text())
        grid = manifest["config"]["config"]["n_grid"] if agg["algorithm"] == "rep_lcb" else None
        x = grid if grid else list(range(1, len(med) + 1))
        ax.plot(x, med, label=f"{agg['algorithm']} ({d.name})")
        ax.fill_between(x, lo, hi, alpha=0.25)
    ax.set_xlabel("dataset size n" if grid else "episode")
    ax.set_ylabel("V* - V(pi)")
    if args.log:
        ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.out, dpi=120)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
