import csv
import io
import math

import numpy as np
import pytest

from stiefel import __version__
from stiefel.cli import EXIT_NOT_CONVERGED, EXIT_OK, EXIT_USAGE, EXIT_VERIFY, main
from stiefel.manifold import read_matrix, write_matrix
from stiefel.numerics import random_stiefel


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def _table(text):
    lines = text.splitlines()
    assert lines[0].startswith(f"# stiefel {__version__} backend=")
    body = [ln for ln in lines if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(body))))


def _keyvals(text):
    return dict(line.split(" ", 1) for line in text.splitlines())


# -- exp and log ---------------------------------------------------------------

def test_exp_random_point_is_orthonormal(capsys):
    code, out, _ = _run(capsys, "exp", "--n", "5", "--p", "2", "--beta", "0.5", "--seed", "3")
    assert code == EXIT_OK
    head, *rows = out.splitlines()
    assert head == "5 2"
    y = np.array([[float(x) for x in r.split()] for r in rows])
    assert np.linalg.norm(y.T @ y - np.eye(2)) <= 1e-12


def test_exp_then_log_roundtrip(tmp_path, capsys):
    u = random_stiefel(6, 3, 4)
    write_matrix(tmp_path / "u.txt", u)
    code, _, _ = _run(capsys, "exp", "--point", str(tmp_path / "u.txt"), "--norm", "0.7",
                      "--beta", "2", "--seed", "1", "--out", str(tmp_path / "v.txt"))
    assert code == EXIT_OK
    code, out, _ = _run(capsys, "log", "--beta", "2", "--u", str(tmp_path / "u.txt"),
                        "--utilde", str(tmp_path / "v.txt"), "--out", str(tmp_path / "d.txt"))
    assert code == EXIT_OK
    info = _keyvals(out)
    assert abs(float(info["length"]) - 0.7) <= 1e-8
    assert info["certificate"] in ("CertifiedMinimal", "WithinBounds")
    assert float(info["residual"]) <= 1e-10
    assert read_matrix(tmp_path / "d.txt").shape == (6, 3)


def test_exp_with_explicit_tangent(tmp_path, capsys):
    write_matrix(tmp_path / "u.txt", np.eye(3, 2))
    write_matrix(tmp_path / "z.txt", np.zeros((3, 2)))
    code, out, _ = _run(capsys, "exp", "--point", str(tmp_path / "u.txt"),
                        "--tangent", str(tmp_path / "z.txt"))
    assert code == EXIT_OK
    assert np.abs(np.array([[float(x) for x in r.split()] for r in out.splitlines()[1:]])
                  - np.eye(3, 2)).max() <= 1e-15


def test_log_reports_non_convergence(tmp_path, capsys):
    g = np.random.default_rng(2)
    write_matrix(tmp_path / "u.txt", random_stiefel(6, 3, g))
    write_matrix(tmp_path / "v.txt", random_stiefel(6, 3, g))
    code, out, _ = _run(capsys, "log", "--u", str(tmp_path / "u.txt"),
                        "--utilde", str(tmp_path / "v.txt"), "--max-iter", "1")
    assert code == EXIT_NOT_CONVERGED
    assert _keyvals(out)["certificate"] == "NotConverged"


def test_log_note_for_wide_frames(tmp_path, capsys):
    u = random_stiefel(5, 3, 0)
    write_matrix(tmp_path / "u.txt", u)
    code, out, _ = _run(capsys, "log", "--u", str(tmp_path / "u.txt"),
                        "--utilde", str(tmp_path / "u.txt"))
    assert code == EXIT_OK
    info = _keyvals(out)
    assert float(info["length"]) == 0.0 and "advisory" in info["note"]


@pytest.mark.parametrize("argv", [
    ["log", "--u", "/nonexistent/u.txt", "--utilde", "/nonexistent/v.txt"],
    ["exp", "--n", "2", "--p", "3"],
    ["exp", "--n", "65", "--p", "2"],
    ["exp", "--beta", "-1"],
    ["bounds", "--grid", "1"],
    ["bounds", "--delta", "9", "--n", "4", "--p", "2"],
    ["sample", "--samples", "0"],
    ["sample", "--branch-inits", "--p", "2", "--beta", "1"],
    ["sample", "--branch-inits", "--n", "5", "--p", "3", "--beta", "2"],
    ["branch-demo", "--beta", "1"],
    ["slope", "--betas", "0.5,x"],
    ["bounds", "--format", "svg"],
    ["verify", "--tolerance-scale", "0"],
])
def test_usage_errors_exit_64(argv, capsys):
    code, _, err = _run(capsys, *argv)
    assert code == EXIT_USAGE
    assert err.startswith(f"stiefel {argv[0]}:")


@pytest.mark.parametrize("argv", [[], ["frobnicate"], ["exp", "--n", "four"], ["log"]])
def test_parser_errors_exit_64(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == EXIT_USAGE


def test_large_n_warns(capsys):
    code, _, err = _run(capsys, "exp", "--n", "22", "--p", "2")
    assert code == EXIT_OK and "warning" in err


# -- bounds --------------------------------------------------------------------

def test_bounds_grid_columns(capsys):
    code, out, _ = _run(capsys, "bounds", "--n", "6", "--p", "3", "--beta", "0.75", "--grid", "11")
    assert code == EXIT_OK
    rows = _table(out)
    assert len(rows) == 11
    assert float(rows[-1]["delta"]) == pytest.approx(2 * math.sqrt(3))
    assert all(r["w_upper_on_lower"] for r in rows)
    for r in rows:
        assert float(r["lower"]) <= float(r["w_upper_on_lower"]) + 1e-13
        assert float(r["lower"]) <= float(r["upper"]) + 1e-13


def test_bounds_w_column_empty_outside_its_range(capsys):
    _, out, _ = _run(capsys, "bounds", "--p", "2", "--grid", "5")
    assert all(r["w_upper_on_lower"] == "" for r in _table(out))
    _, out, _ = _run(capsys, "bounds", "--p", "3", "--n", "7", "--beta", "2", "--grid", "5")
    assert all(r["w_upper_on_lower"] == "" for r in _table(out))


def test_bounds_single_delta_and_note(capsys):
    code, out, _ = _run(capsys, "bounds", "--n", "5", "--p", "3", "--delta", "2.0")
    assert code == EXIT_OK
    assert "# note:" in out
    (row,) = _table(out)
    assert float(row["upper"]) == pytest.approx(math.pi)


def test_bounds_svg_is_deterministic(tmp_path, capsys):
    paths = [tmp_path / "a.svg", tmp_path / "b.svg"]
    for path in paths:
        assert _run(capsys, "bounds", "--p", "3", "--n", "6", "--beta", "0.5", "--format", "svg",
                    "--out", str(path))[0] == EXIT_OK
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert paths[0].read_text().lstrip().startswith("<?xml")
    assert _table(paths[0].with_suffix(".csv").read_text())


# -- sample --------------------------------------------------------------------

def test_sample_is_reproducible_and_worker_independent(tmp_path, capsys):
    argv = ["sample", "--n", "4", "--p", "2", "--samples", "6", "--beta", "1", "--beta2", "0.5",
            "--seed", "9"]
    outs = []
    for i, extra in enumerate([[], [], ["--workers", "2"]]):
        path = tmp_path / f"s{i}.csv"
        assert _run(capsys, *argv, *extra, "--out", str(path))[0] == EXIT_OK
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]
    assert outs[0] == outs[2]
    rows = _table(outs[0].decode())
    assert [int(r["pair_id"]) for r in rows] == list(range(6))
    for r in rows:
        if r["ratio"]:
            assert math.sqrt(2) / 2 - 1e-6 <= float(r["ratio"]) <= 1 + 1e-6
        assert float(r["length_beta"]) >= float(r["lower"]) - 1e-8


def test_sample_antipodal_row(capsys):
    code, out, _ = _run(capsys, "sample", "--n", "5", "--p", "2", "--samples", "1",
                        "--include-antipodal")
    assert code == EXIT_OK
    (row,) = _table(out)
    assert float(row["frob_dist"]) == pytest.approx(2 * math.sqrt(2), rel=1e-14)
    assert float(row["length_beta"]) == pytest.approx(math.pi * math.sqrt(2), abs=1e-8)
    assert row["certificate"] == "CertifiedMinimal"


def test_sample_branch_inits_find_both_lengths(capsys):
    code, out, _ = _run(capsys, "sample", "--n", "3", "--p", "2", "--beta", "2", "--samples", "1",
                        "--include-antipodal", "--branch-inits")
    assert code == EXIT_OK
    rows = {r["init"]: r for r in _table(out)}
    assert set(rows) == {"default", "branch1", "branch2"}
    assert float(rows["branch1"]["length_beta"]) == pytest.approx(2 * math.pi, abs=1e-8)
    assert float(rows["branch2"]["length_beta"]) == pytest.approx(5.13020, abs=1e-5)
    assert float(rows["default"]["length_beta"]) == pytest.approx(5.13020, abs=1e-5)


# -- families, branch demo, slope ----------------------------------------------

def test_families_endpoints(capsys):
    code, out, _ = _run(capsys, "families", "--grid", "3")
    assert code == EXIT_OK
    rows = _table(out)
    labels = sorted({r["curve_family"] for r in rows})
    assert labels == ["GammaK1", "GammaK2", "GammaK3", "GammaK4", "PlanarRotation"]
    for k in range(1, 5):
        sel = [r for r in rows if r["curve_family"] == f"GammaK{k}"]
        assert float(sel[0]["t"]) == 0.0 and float(sel[0]["geodesic_dist"]) == 0.0
        assert float(sel[-1]["frob_dist"]) == pytest.approx(2 * math.sqrt(k), abs=1e-10)
        assert float(sel[-1]["geodesic_dist"]) == pytest.approx(math.pi * math.sqrt(k), abs=1e-8)


def test_families_single_k(capsys):
    code, out, _ = _run(capsys, "families", "--k", "2", "--grid", "5", "--n", "6", "--p", "3")
    assert code == EXIT_OK
    assert {r["curve_family"] for r in _table(out)} == {"GammaK2"}
    assert _run(capsys, "families", "--k", "5", "--n", "6", "--p", "3")[0] == EXIT_USAGE


def test_branch_demo(capsys):
    code, out, _ = _run(capsys, "branch-demo")
    assert code == EXIT_OK
    assert "branch1 length 6.28319" in out
    assert "branch2 length 5.13020" in out
    margin = float(out.split("margin ")[1].split()[0])
    assert margin > 1.1


def test_slope_bounds(capsys):
    code, out, _ = _run(capsys, "slope", "--betas", "0.25,2", "--samples", "4")
    assert code == EXIT_OK
    rows = _table(out)
    assert len(rows) == 2 * (4 + 2)
    for r in rows:
        ratio, lo, hi = float(r["ratio"]), float(r["lower"]), float(r["upper"])
        assert lo - 1e-3 <= ratio <= hi + 1e-3
        if r["kind"] == "normal_only":
            assert ratio == pytest.approx(1.0, abs=1e-3)
        if r["kind"] == "skew_only":
            assert ratio == pytest.approx(math.sqrt(float(r["beta"])), abs=1e-3)


# -- verify --------------------------------------------------------------------

def test_verify_passes(capsys):
    code, out, _ = _run(capsys, "verify")
    assert code == EXIT_OK
    assert "FAIL" not in out
    assert out.strip().endswith("checks passed")


def test_verify_fails_with_impossible_tolerance(capsys):
    code, out, _ = _run(capsys, "verify", "--tolerance-scale", "1e-20")
    assert code == EXIT_VERIFY
    assert "FAIL" in out
