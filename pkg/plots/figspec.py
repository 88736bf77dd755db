"""Shared plumbing for the figure scripts: CSV loading and the figure spec.

These scripts are pure CSV-to-image transforms. They never recompute physics;
everything plotted comes out of a solver CSV verbatim.
"""

from dataclasses import dataclass, field


class MissingColumnError(ValueError):
    pass


def read_columns(path):
    """Parse a harness CSV into {name: list of float-or-None}, file order.

    Blank cells become None so callers can tell 'column present but empty'
    apart from 'column absent'.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        header_line = fh.readline().strip()
        if not header_line:
            raise ValueError(f"{path}: empty file, no header row")
        names = header_line.split(",")
        cols = {name: [] for name in names}
        if len(cols) != len(names):
            raise ValueError(f"{path}: duplicate column names in header")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if len(cells) != len(names):
                raise ValueError(
                    f"{path}:{lineno}: expected {len(names)} cells, "
                    f"got {len(cells)}")
            for name, cell in zip(names, cells):
                cols[name].append(float(cell) if cell else None)
    return cols


def require_columns(cols, needed, path):
    for name in needed:
        if name not in cols:
            raise MissingColumnError(
                f"column '{name}' not found in {path} "
                f"(has: {', '.join(cols)})")


@dataclass(frozen=True)
class FigureSpec:
    """What to draw and where to put it.

    zoom maps a variable name to (xlo, xhi) or (xlo, xhi, ylo, yhi); panels
    without an entry autoscale. layout is (nrows, ncols); None lays all
    panels out in one row. variables () means every data column in file
    order, skipping x and *_exact.
    """

    csv_path: str
    output_path: str
    variables: tuple = ()
    zoom: dict = field(default_factory=dict)
    layout: tuple = None
    dpi: int = 150

    def resolve_variables(self, cols):
        if self.variables:
            require_columns(cols, self.variables, self.csv_path)
            return tuple(self.variables)
        found = tuple(n for n in cols
                      if n != "x" and not n.endswith("_exact"))
        if not found:
            raise ValueError(f"{self.csv_path}: no data columns besides x")
        return found


def parse_zoom(items):
    """--zoom VAR=XLO:XHI[:YLO:YHI] occurrences into a spec zoom dict."""
    zoom = {}
    for item in items:
        try:
            var, window = item.split("=", 1)
            parts = tuple(float(p) for p in window.split(":"))
        except ValueError:
            raise ValueError(f"bad zoom {item!r}, want VAR=XLO:XHI[:YLO:YHI]")
        if len(parts) not in (2, 4):
            raise ValueError(f"bad zoom {item!r}, want 2 or 4 bounds")
        zoom[var] = parts
    return zoom


def save(fig, path, dpi):
    # a pinned Date keeps the PNG bytes identical across reruns
    fig.savefig(path, dpi=dpi, metadata={"Date": None})
