"""Convergence figure from a harness report CSV (order,n,e_n columns): log2
axes, one error series per order, dashed reference lines with the ideal
slope anchored at each series' last point. Rows are plotted in file order;
nothing is sorted.

Usage: plot_convergence.py REPORT_CSV OUTPUT_PNG [--dpi N]
"""

import argparse
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from figspec import FigureSpec, MissingColumnError, read_columns, \
    require_columns, save


def plot_convergence(spec):
    cols = read_columns(spec.csv_path)
    require_columns(cols, ["n", "e_n"], spec.csv_path)
    rows = [(n, e) for n, e in zip(cols["n"], cols["e_n"])
            if n is not None and e is not None]
    if len(rows) < 2:
        raise ValueError(
            f"{spec.csv_path}: need at least 2 data rows to draw a "
            f"convergence plot, got {len(rows)}")
    orders = cols.get("order")
    if orders is None:
        orders = [None] * len(rows)

    series = {}  # order value (or None) -> list of (n, e_n), file order
    for mo, (n, e) in zip(orders, rows):
        series.setdefault(mo, []).append((n, e))

    fig, ax = plt.subplots(figsize=(4.2, 3.4))
    for k, (mo, pts) in enumerate(series.items()):
        ns = [n for n, _ in pts]
        es = [e for _, e in pts]
        label = f"order {mo:g}" if mo is not None else "e_n"
        ax.plot(ns, es, "o-", ms=3.5, color=f"C{k}", label=label)
        if mo is not None and len(pts) >= 2:
            # ideal-slope guide through the finest-grid point
            n_ref, e_ref = pts[-1]
            guide = [e_ref * (n_ref / n) ** mo for n in ns]
            ax.plot(ns, guide, "--", lw=0.8, color=f"C{k}", alpha=0.6)
    ax.set_xscale("log", base=2)
    ax.set_yscale("log", base=2)
    ax.set_xlabel("N")
    ax.set_ylabel("relative L2 error")
    ax.legend(loc="best", fontsize=8, frameon=False)
    fig.tight_layout()
    return fig


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("csv_path")
    ap.add_argument("output_path")
    ap.add_argument("--dpi", type=int, default=150)
    args = ap.parse_args(argv)
    try:
        spec = FigureSpec(csv_path=args.csv_path, output_path=args.output_path,
                          dpi=args.dpi)
        fig = plot_convergence(spec)
    except (OSError, ValueError, MissingColumnError) as exc:
        print(f"plot_convergence: {exc}", file=sys.stderr)
        return 2
    save(fig, spec.output_path, spec.dpi)
    plt.close(fig)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
