#!/usr/bin/env python3
"""Plot adaptive convergence histories produced by `podopt history`.

Reads every history_beta*.csv in the results directory and draws, per run,
the certified lower/upper bounds, the true control error, and the gradient
norm against the outer iteration, plus the growth of the reduced basis.

Requires matplotlib (not a package dependency):  pip install matplotlib
"""

import argparse
import csv
import sys
from pathlib import Path


def load_history(path: Path) -> dict[str, list[float]]:
    with path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    series: dict[str, list[float]] = {}
    for key in rows[0]:
        series[key] = [float(r[key]) for r in rows if r[key] != ""]
    return series


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "results", nargs="?", default="results", help="directory with history CSVs"
    )
    parser.add_argument("--out", default=None, help="write the figure here (PNG)")
    args = parser.parse_args()

    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print(
            "matplotlib is required for plotting: pip install matplotlib",
            file=sys.stderr,
        )
        return 1

    results = Path(args.results)
    paths = sorted(results.glob("history_beta*.csv"))
    if not paths:
        print(f"no history_beta*.csv files found in {results}/", file=sys.stderr)
        return 1

    fig, (ax_err, ax_rank) = plt.subplots(1, 2, figsize=(11, 4.2))
    for path in paths:
        tag = path.stem.replace("history_beta", "")
        h = load_history(path)
        k = h["k"]
        ax_err.semilogy(k, h["upper"], "o-", label=f"upper, beta={tag}")
        ax_err.semilogy(k, h["lower"], "s--", label=f"lower, beta={tag}")
        if h.get("true_error"):
            ax_err.semilogy(k, h["true_error"], "k.:", label=f"error, beta={tag}")
        ax_rank.step(k, h["r"], where="post", label=f"beta={tag}")

    ax_err.set_xlabel("outer iteration")
    ax_err.set_ylabel("control error and certified bounds")
    ax_err.legend(fontsize=8)
    ax_err.grid(True, which="both", alpha=0.3)
    ax_rank.set_xlabel("outer iteration")
    ax_rank.set_ylabel("reduced basis size")
    ax_rank.legend(fontsize=8)
    ax_rank.grid(True, alpha=0.3)
    fig.tight_layout()

    out = Path(args.out) if args.out else results / "history.png"
    fig.savefig(out, dpi=150)
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
