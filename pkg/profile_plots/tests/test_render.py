import os
import subprocess
import sys

import numpy as np
import pytest

from profile_plots.cli import main
from profile_plots.render import build_figure, parse_curves

DATA = os.path.join(os.path.dirname(__file__), "data")
FIXTURE = os.path.join(DATA, "two_solver_curves.csv")


def lines_by_label(fig):
    return {line.get_label(): line for line in fig.axes[0].get_lines()}


def test_two_solver_fixture_breakpoints_exact():
    # derived by enumerating cost ratios r1 = (1, 2, inf), r2 = (2, 1, 1)
    # over three problems: pi1 = (1/3, 2/3), pi2 = (2/3, 1) at alpha = 1, 2
    curves = parse_curves(FIXTURE)
    fig = build_figure(curves, "1e-3")
    lines = lines_by_label(fig)
    assert set(lines) == {"s1", "s2"}
    np.testing.assert_array_equal(
        lines["s1"].get_xydata(), [[0.0, 1.0 / 3.0], [1.0, 2.0 / 3.0]]
    )
    np.testing.assert_array_equal(
        lines["s2"].get_xydata(), [[0.0, 2.0 / 3.0], [1.0, 1.0]]
    )


def test_steps_are_right_continuous():
    curves = parse_curves(FIXTURE)
    fig = build_figure(curves, "1e-3")
    for line in fig.axes[0].get_lines():
        assert line.get_drawstyle() == "steps-post"


def test_single_fully_solved_solver_is_a_flat_line(tmp_path):
    path = os.path.join(tmp_path, "one.csv")
    with open(path, "w") as handle:
        handle.write("solver_id,alpha,pi\nonly,1.0,1.0\n")
    fig = build_figure(parse_curves(path), "1e-3")
    (line,) = fig.axes[0].get_lines()
    data = line.get_xydata()
    assert np.all(data[:, 1] == 1.0)
    assert data[0][0] == 0.0 and data[-1][0] == fig.axes[0].get_xlim()[1]


def test_tau_label_appears_in_title():
    fig = build_figure(parse_curves(FIXTURE), "1e-3")
    assert "1e-3" in fig.axes[0].get_title()


def test_axis_spans_observed_ratios():
    fig = build_figure(parse_curves(FIXTURE), "1e-3")
    assert fig.axes[0].get_xlim() == (0.0, 1.0)
    lo, hi = fig.axes[0].get_ylim()
    assert lo == 0.0 and hi >= 1.0


def test_rendering_is_pure():
    first = build_figure(parse_curves(FIXTURE), "1e-5")
    second = build_figure(parse_curves(FIXTURE), "1e-5")
    for a, b in zip(first.axes[0].get_lines(), second.axes[0].get_lines()):
        np.testing.assert_array_equal(a.get_xydata(), b.get_xydata())
        assert a.get_label() == b.get_label()


def test_cli_writes_figure(tmp_path):
    out = os.path.join(tmp_path, "fig.png")
    assert main(["--in", FIXTURE, "--out", out, "--tau", "1e-3"]) == 0
    assert os.path.getsize(out) > 0


def test_malformed_header_rejected(tmp_path, capsys):
    path = os.path.join(tmp_path, "bad.csv")
    with open(path, "w") as handle:
        handle.write("solver,ratio,fraction\ns1,1.0,1.0\n")
    assert main(["--in", path, "--out", os.path.join(tmp_path, "f.png")]) == 2
    assert "error" in capsys.readouterr().err


def test_non_numeric_rows_rejected(tmp_path):
    path = os.path.join(tmp_path, "bad.csv")
    with open(path, "w") as handle:
        handle.write("solver_id,alpha,pi\ns1,one,1.0\n")
    with pytest.raises(ValueError):
        parse_curves(path)


def test_empty_input_rejected(tmp_path, capsys):
    path = os.path.join(tmp_path, "empty.csv")
    with open(path, "w") as handle:
        handle.write("solver_id,alpha,pi\n")
    assert main(["--in", path, "--out", os.path.join(tmp_path, "f.png")]) == 2
    assert "no curves" in capsys.readouterr().err


def test_round_trip_from_solver_cli(tmp_path):
    # the upstream benchmark CLI produces the curves file; it must be
    # consumable here without modification
    bench_dir = os.path.join(tmp_path, "bench")
    curves = os.path.join(tmp_path, "curves.csv")
    fig = os.path.join(tmp_path, "fig.png")
    run = subprocess.run(
        [sys.executable, "-m", "dfolm.cli", "bench", "run", "--problems", "ex4,mgh1-mod-n2",
         "--solvers", "fd,ossv1", "--reps", "1", "--seed", "0", "--tau", "1e-3",
         "--out", bench_dir],
        capture_output=True, text=True,
    )
    if run.returncode != 0 and "No module named" in run.stderr:
        pytest.skip("solver package not installed")
    assert run.returncode == 0, run.stderr
    subprocess.run(
        [sys.executable, "-m", "dfolm.cli", "bench", "profile", "--in", bench_dir,
         "--tau", "1e-3", "--out", curves],
        check=True,
    )
    assert main(["--in", curves, "--out", fig, "--tau", "1e-3"]) == 0
    assert os.path.getsize(fig) > 0
