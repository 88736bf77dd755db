import matplotlib.pyplot as plt
import pytest

import plot_convergence as pc
from figspec import FigureSpec

REPORT = (
    "order,n,e_n,rate\n"
    "3,10,1.99e-2,nan\n"
    "3,20,2.409e-3,3.046\n"
    "4,10,1.324e-3,nan\n"
    "4,20,7.65e-5,4.113\n"
    "5,10,1.104e-4,nan\n"
    "5,20,3.216e-6,5.101\n"
)


def write(tmp_path, text, name="report.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def spec_for(path):
    return FigureSpec(csv_path=path, output_path="out.png")


@pytest.fixture(autouse=True)
def close_figures():
    yield
    plt.close("all")


def test_one_series_per_order_with_guides(tmp_path):
    fig = pc.plot_convergence(spec_for(write(tmp_path, REPORT)))
    ax = fig.axes[0]
    # three error series plus a dashed ideal-slope guide each
    assert len(ax.lines) == 6
    labels = [ln.get_label() for ln in ax.lines if not ln.get_label().startswith("_")]
    assert labels == ["order 3", "order 4", "order 5"]


def test_log2_axes(tmp_path):
    fig = pc.plot_convergence(spec_for(write(tmp_path, REPORT)))
    ax = fig.axes[0]
    assert ax.get_xscale() == "log" and ax.get_yscale() == "log"
    assert ax.xaxis.get_transform().base == 2.0
    assert ax.yaxis.get_transform().base == 2.0


def test_single_order_single_series(tmp_path):
    csv = "order,n,e_n,rate\n4,10,1e-3,nan\n4,20,6e-5,4.06\n"
    fig = pc.plot_convergence(spec_for(write(tmp_path, csv)))
    assert len(fig.axes[0].lines) == 2  # series + guide


def test_no_order_column_plots_plain_series(tmp_path):
    csv = "n,e_n\n10,1e-3\n20,6e-5\n"
    fig = pc.plot_convergence(spec_for(write(tmp_path, csv)))
    assert len(fig.axes[0].lines) == 1  # no ideal slope known, no guide


def test_fewer_than_two_rows_is_an_error(tmp_path):
    csv = "order,n,e_n,rate\n4,10,1e-3,nan\n"
    with pytest.raises(ValueError, match="at least 2"):
        pc.plot_convergence(spec_for(write(tmp_path, csv)))


def test_missing_error_column_names_it(tmp_path):
    csv = "order,n,rate\n4,10,nan\n4,20,4.0\n"
    with pytest.raises(ValueError, match="'e_n'"):
        pc.plot_convergence(spec_for(write(tmp_path, csv)))


def test_non_monotone_rows_still_plot(tmp_path):
    csv = "order,n,e_n,rate\n4,40,3e-6,nan\n4,10,1e-3,nan\n4,20,6e-5,4.0\n"
    fig = pc.plot_convergence(spec_for(write(tmp_path, csv)))
    xs = list(fig.axes[0].lines[0].get_xdata())
    assert xs == [40.0, 10.0, 20.0]  # file order preserved, no sorting


def test_cli_too_few_rows_exits_2(tmp_path, capsys):
    path = write(tmp_path, "order,n,e_n,rate\n4,10,1e-3,nan\n")
    rc = pc.main([path, str(tmp_path / "o.png")])
    assert rc == 2
    assert "at least 2" in capsys.readouterr().err


def test_cli_renders_deterministic_png(tmp_path):
    path = write(tmp_path, REPORT)
    out1, out2 = tmp_path / "a.png", tmp_path / "b.png"
    assert pc.main([path, str(out1)]) == 0
    assert pc.main([path, str(out2)]) == 0
    blob = out1.read_bytes()
    assert blob and blob == out2.read_bytes()
