import json
import subprocess
import sys

import pytest

from critomech.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, main
from critomech.export import read_csv


def run(tmp_path, *argv):
    return main([*argv, "--out", str(tmp_path)])


def rows_of(path):
    _, cols, rows = read_csv(path)
    return [dict(zip(cols, r)) for r in rows]


def test_steady_star_point(tmp_path, capsys):
    assert run(tmp_path, "steady", "--preset", "fig2") == EXIT_OK
    rows = rows_of(tmp_path / "steady.csv")
    assert len(rows) == 1 and rows[0]["stability"] == "ParametricUnstable"
    assert "ParametricUnstable" in capsys.readouterr().out


def test_steady_fig3(tmp_path):
    assert run(tmp_path, "steady", "--preset", "fig3") == EXIT_OK
    rows = rows_of(tmp_path / "steady.csv")
    assert [r["stability"] for r in rows] == ["Stable"]


def test_steady_undriven(tmp_path):
    assert run(tmp_path, "steady", "--preset", "fig2", "--set", "I_in=0") == EXIT_OK
    (row,) = rows_of(tmp_path / "steady.csv")
    assert float(row["x_s"]) == 0 and row["stability"] == "Stable"


def test_provenance_header(tmp_path):
    run(tmp_path, "steady", "--preset", "fig2", "--set", "Delta=-15.5")
    header, _, _ = read_csv(tmp_path / "steady.csv")
    assert header[0].startswith("critomech ")
    assert header[1] == "command: steady"
    assert "--set Delta=-15.5" in header[2]
    params = json.loads(header[3].split(": ", 1)[1])
    assert params["Delta"] == -15.5 and params["g1"] == 0.03


def test_byte_identical(tmp_path):
    argv = ("map", "--preset", "fig2", "--resolution", "31")
    run(tmp_path, *argv)
    first = {p.name: p.read_bytes() for p in tmp_path.iterdir()}
    run(tmp_path, *argv)
    second = {p.name: p.read_bytes() for p in tmp_path.iterdir()}
    assert first == second and len(first) == 3


def test_map_regions(tmp_path):
    assert run(tmp_path, "map", "--preset", "fig2", "--resolution", "61") == EXIT_OK
    regions = {r["region"] for r in rows_of(tmp_path / "regions.csv")}
    assert regions == {"I", "II", "III"}
    assert rows_of(tmp_path / "saddle_node.csv") and rows_of(tmp_path / "hopf.csv")


def test_map_linear(tmp_path):
    assert run(tmp_path, "map", "--preset", "fig2", "--set", "g1=0", "--resolution", "21") == 0
    assert {r["region"] for r in rows_of(tmp_path / "regions.csv")} == {"I"}


def test_map_threads_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["map", "--preset", "fig2", "--resolution", "31", "--out", str(a)])
    main(["map", "--preset", "fig2", "--resolution", "31", "--out", str(b), "--threads", "3"])
    assert read_csv(a / "regions.csv")[2] == read_csv(b / "regions.csv")[2]


def test_json_format(tmp_path):
    assert run(tmp_path, "steady", "--preset", "fig3", "--format", "json") == EXIT_OK
    env = json.loads((tmp_path / "steady.json").read_text())
    assert env["tool"] == "critomech" and env["command"] == "steady"
    assert env["columns"][0] == "root" and len(env["rows"]) == 1


def test_sweep_flags_isola(tmp_path, capsys):
    # drive 200 sits inside the isola window; 230 does not (decisions ledger)
    assert run(tmp_path, "sweep", "--preset", "fig3", "--iin", "200", "--no-hysteresis") == 0
    labels = {r["label"] for r in rows_of(tmp_path / "branches.csv")}
    assert labels == {"Main", "Isola"}
    assert "Isola (closed)" in capsys.readouterr().out


def test_sweep_hysteresis(tmp_path):
    assert run(tmp_path, "sweep", "--preset", "fig2", "--sweep-step", "0.05") == EXIT_OK
    rows = rows_of(tmp_path / "hysteresis.csv")
    jumps = [r for r in rows if r["jump"] == "true"]
    assert {r["direction"] for r in jumps} == {"up", "down"}


def test_spectrum(tmp_path):
    assert run(tmp_path, "spectrum", "--preset", "fig4", "--n", "41") == EXIT_OK
    rows = rows_of(tmp_path / "spectrum.csv")
    assert len(rows) == 41 and rows[0]["stability"] == "Stable"


def test_sense(tmp_path):
    assert run(tmp_path, "sense", "--preset", "fig4", "--n", "11") == EXIT_OK
    rows = rows_of(tmp_path / "psd.csv")
    assert len(rows) == 11 and all(float(r["S_shot"]) >= 0 for r in rows)


def test_optimize_sensing(tmp_path, capsys):
    assert run(tmp_path, "optimize", "--preset", "sensing") == EXIT_OK
    out = capsys.readouterr().out
    assert "u_star = 1.448" in out
    env = json.loads((tmp_path / "optimum.json").read_text())
    sens = env["optimum"]["physical"]["sensitivity"]
    assert sens == pytest.approx(17e-18, rel=0.1)


def test_dynamics_star_point(tmp_path):
    assert run(tmp_path, "dynamics", "--preset", "fig2", "--t-end", "1200") == EXIT_OK
    env = json.loads((tmp_path / "limit_cycle.json").read_text())
    assert env["limit_cycle"]["converged"] is True
    assert (tmp_path / "trajectory.csv").exists() and (tmp_path / "phase_portrait.csv").exists()


def test_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# fig3 at higher drive\nkappa_a = 0.1\nkappa_b = 0.0002\nkappa_ex = 0.1\n"
                   "delta = 0\nDelta = 0.2\ng1 = 0.001\ng2 = 0.02\ngamma_m = 0.001\nI_in = 200\n")
    assert run(tmp_path, "steady", "--config", str(cfg)) == EXIT_OK
    assert len(rows_of(tmp_path / "steady.csv")) >= 1


@pytest.mark.parametrize("argv", [
    ("steady",),
    ("steady", "--preset", "nope"),
    ("steady", "--preset", "fig2", "--set", "bogus=1"),
    ("steady", "--preset", "fig2", "--set", "g1"),
    ("steady", "--preset", "fig2", "--set", "g1=abc"),
    ("steady", "--preset", "fig2", "--set", "kappa_a=-1"),
    ("steady", "--preset", "fig2", "--threads", "0"),
    ("sense", "--preset", "fig2"),
    ("frobnicate",),
])
def test_bad_config_exit_code(tmp_path, argv):
    assert run(tmp_path, *argv) == EXIT_CONFIG


def test_numerical_failure_exit_code(tmp_path, capsys):
    assert run(tmp_path, "sense", "--preset", "fig4", "--set", "I_in=0") == EXIT_NUMERIC
    assert "noise spectrum" in capsys.readouterr().err


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "critomech.cli", "steady", "--preset", "fig3",
                          "--out", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0 and "Stable" in res.stdout
