import csv
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from halpern_cert import cli

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def call(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_stationary_csv_contract(tmp_path, capsys):
    out = tmp_path / "t.csv"
    code, _, _ = call(capsys, "run", "--builtin", "stationary", "--steps", "50", "--out", str(out))
    assert code == cli.EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "n,step_residual,fix_residual,kp_n"
    assert len(lines) == 51
    rows = list(csv.reader(lines[1:]))
    assert [int(r[0]) for r in rows] == list(range(50))
    assert all(float(r[1]) == 0 and float(r[2]) == 0 for r in rows)


def test_csv_values_round_trip(tmp_path, capsys):
    from halpern_cert.builtins import ex3_linear
    from halpern_cert.iteration import run
    out = tmp_path / "ex3.csv"
    call(capsys, "run", "--builtin", "ex3-linear", "--steps", "300", "--out", str(out))
    data = np.loadtxt(out, delimiter=",", skiprows=1)
    sc = ex3_linear(300)
    tr = run(sc.instance, sc.schedule, 300)
    assert np.array_equal(data[:, 1], tr.step_residuals[:300])
    assert np.array_equal(data[:, 2], tr.fix_residuals[:300])


def test_run_without_output_is_input_error(capsys):
    code, _, err = call(capsys, "run", "--builtin", "stationary")
    assert code == cli.EXIT_INPUT and "output" in err


def test_verify_exit_codes(capsys):
    assert call(capsys, "verify", "--builtin", "stationary")[0] == cli.EXIT_OK
    code, out, _ = call(capsys, "verify", "--builtin", "fault-perturbed-point")
    assert code == cli.EXIT_VIOLATION and "FAIL" in out
    code, _, err = call(capsys, "verify", "--config", str(CONFIGS / "bad-rho.yaml"))
    assert code == cli.EXIT_INPUT and "bad-rho.yaml:5:" in err
    assert call(capsys, "verify", "--builtin", "nope")[0] == cli.EXIT_INPUT
    assert call(capsys, "verify", "--config", "/no/such/file.yaml")[0] == cli.EXIT_INPUT


def test_verify_writes_report_and_rows(tmp_path, capsys):
    rep, rows = tmp_path / "r.txt", tmp_path / "r.csv"
    code, out, _ = call(capsys, "verify", "--builtin", "fault-wrong-sigma2", "--out", str(rep),
                        "--rows", str(rows))
    assert code == cli.EXIT_VIOLATION
    assert rep.read_text() == out
    table = list(csv.reader(rows.read_text().splitlines()))
    assert table[0][:4] == ["scenario", "class", "check", "status"]
    assert any(r[1] == "moduli" and r[3] == "violation" for r in table[1:])


def test_rates_table(capsys):
    code, out, _ = call(capsys, "rates", "--config", str(CONFIGS / "ex3-rates-L5.yaml"), "--k", "0", "1", "2")
    assert code == cli.EXIT_OK
    phi = [l.split("\t")[3] for l in out.splitlines() if l.startswith("Ex3-linear-Phi\t")]
    assert phi == ["20", "40", "60"]
    assert "# note:" in out


def test_rates_bare_k_prints_header_only(capsys):
    code, out, _ = call(capsys, "rates", "--builtin", "ex3-linear", "--k")
    assert code == cli.EXIT_OK and out.splitlines()[0] == "certificate\ttarget\tk\trate"
    assert not [l for l in out.splitlines()[1:] if not l.startswith("#")]


def test_rates_scientific_annotation(capsys):
    _, out, _ = call(capsys, "rates", "--builtin", "ex1-exponential", "--k", "0")
    line = next(l for l in out.splitlines() if l.startswith("Ex1-Phi\t"))
    assert line.endswith("5517026909046340412572939639805322 (~5.52E+33)")


def test_rates_verbose_appends_formulas(capsys):
    _, out, _ = call(capsys, "rates", "--builtin", "ex3-linear", "--k", "0", "-v")
    assert "# certificate Ex3-linear-Phi" in out and "formula:" in out


def test_examples_lists_every_builtin(capsys):
    code, out, _ = call(capsys, "examples")
    assert code == cli.EXIT_OK
    from halpern_cert.builtins import all_names
    assert [l.split()[0] for l in out.splitlines()] == all_names()


def test_bad_arguments_exit_2(capsys):
    assert call(capsys, "nonsense")[0] == cli.EXIT_INPUT
    assert call(capsys, "run", "--steps", "x")[0] == cli.EXIT_INPUT


def test_atomic_write_leaves_old_file_on_failure(tmp_path):
    target = tmp_path / "keep.txt"
    target.write_text("old")

    def boom(fh):
        fh.write("partial")
        raise RuntimeError("disk on fire")

    with pytest.raises(RuntimeError):
        cli.write_atomic(str(target), boom)
    assert target.read_text() == "old"
    assert [p.name for p in tmp_path.iterdir()] == ["keep.txt"]


def test_missing_output_directory(capsys, tmp_path):
    code, _, err = call(capsys, "run", "--builtin", "stationary", "--out", str(tmp_path / "no" / "t.csv"))
    assert code == cli.EXIT_INPUT and "does not exist" in err


def test_console_script_entry():
    r = subprocess.run([sys.executable, "-m", "halpern_cert.cli", "verify", "--builtin", "stationary",
                        "--steps", "100"], capture_output=True, text=True)
    assert r.returncode == 0 and "suite: PASS" in r.stdout
