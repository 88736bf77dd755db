"""Profile figure: one panel per variable, solver samples as markers, the
exact solution (when the CSV carries <var>_exact columns with values) as a
line. Zoom windows clamp axis limits on the named panels.

Usage: plot_profiles.py SOLUTION_CSV OUTPUT_PNG [--var NAME ...]
                        [--zoom VAR=XLO:XHI[:YLO:YHI] ...] [--dpi N]
"""

import argparse
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from figspec import FigureSpec, MissingColumnError, parse_zoom, read_columns, \
    require_columns, save


def plot_profiles(spec):
    cols = read_columns(spec.csv_path)
    require_columns(cols, ["x"], spec.csv_path)
    variables = spec.resolve_variables(cols)
    for var in spec.zoom:
        require_columns(cols, [var], spec.csv_path)

    if spec.layout is not None:
        nrows, ncols = spec.layout
        if nrows * ncols < len(variables):
            raise ValueError(
                f"layout {spec.layout} too small for {len(variables)} panels")
    else:
        nrows, ncols = 1, len(variables)
    fig, axes = plt.subplots(
        nrows, ncols, figsize=(3.2 * ncols, 2.8 * nrows), squeeze=False)

    x = cols["x"]
    for k, var in enumerate(variables):
        ax = axes[k // ncols][k % ncols]
        exact = cols.get(f"{var}_exact")
        if exact is not None and any(v is not None for v in exact):
            pairs = [(a, b) for a, b in zip(x, exact) if b is not None]
            ax.plot([a for a, _ in pairs], [b for _, b in pairs],
                    "-", color="0.35", lw=1.0, label="exact", zorder=1)
        pairs = [(a, b) for a, b in zip(x, cols[var]) if b is not None]
        ax.plot([a for a, _ in pairs], [b for _, b in pairs],
                "o", ms=2.2, mew=0, color="C0", label="solver", zorder=2)
        ax.set_xlabel("x")
        ax.set_ylabel(var)
        window = spec.zoom.get(var)
        if window:
            ax.set_xlim(window[0], window[1])
            if len(window) == 4:
                ax.set_ylim(window[2], window[3])
        if k == 0:
            ax.legend(loc="best", fontsize=8, frameon=False)
    for k in range(len(variables), nrows * ncols):
        axes[k // ncols][k % ncols].set_axis_off()
    fig.tight_layout()
    return fig


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("csv_path")
    ap.add_argument("output_path")
    ap.add_argument("--var", action="append", default=[],
                    help="plot only this column (repeatable; default: all)")
    ap.add_argument("--zoom", action="append", default=[], metavar="VAR=XLO:XHI[:YLO:YHI]")
    ap.add_argument("--dpi", type=int, default=150)
    args = ap.parse_args(argv)
    try:
        spec = FigureSpec(csv_path=args.csv_path, output_path=args.output_path,
                          variables=tuple(args.var), zoom=parse_zoom(args.zoom),
                          dpi=args.dpi)
        fig = plot_profiles(spec)
    except (OSError, ValueError, MissingColumnError) as exc:
        print(f"plot_profiles: {exc}", file=sys.stderr)
        return 2
    save(fig, spec.output_path, spec.dpi)
    plt.close(fig)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
