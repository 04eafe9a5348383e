import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from plateau import zx
from plateau.cli import CSV_FIELDS, main, parse_int_list
from plateau.closed_form import qmps_zero_case


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(line for line in io.StringIO(text) if not line.startswith("#")))


def test_variance_qmps3(capsys):
    code, out, _ = run(capsys, "variance", "--ansatz", "qmps", "--qubits", "3", "--observable", "X:3",
                       "--param", "1,1", "--method", "tn")
    assert code == 0
    assert out.splitlines()[0] == ",".join(CSV_FIELDS)
    (row,) = rows(out)
    assert float(row["variance"]) == 0.03515625
    assert (row["ansatz"], row["observable"], row["method"]) == ("qMPS", "X:3", "tn")


def test_variance_qmera16_lower_site(capsys):
    code, out, _ = run(capsys, "variance", "--ansatz", "qmera", "--qubits", "16", "--observable", "X:16")
    assert code == 0
    assert float(rows(out)[0]["variance"]) == pytest.approx(0.000622, rel=5e-3)


@pytest.mark.parametrize("argv, flag", [
    (["--qubits", "4", "--observable", "X:1", "--param", "9,1"], "--param"),
    (["--qubits", "4", "--observable", "X:9"], "--observable"),
    (["--qubits", "4", "--observable", "Q:1"], "--observable"),
    (["--qubits", "6", "--observable", "X:1", "--ansatz", "qttn"], "--qubits"),
    (["--qubits", "4", "--observable", "Y:2", "--method", "closed"], "--method"),
])
def test_variance_usage_errors_name_flag(capsys, argv, flag):
    if "--ansatz" not in argv:
        argv = ["--ansatz", "qmps", *argv]
    code, out, err = run(capsys, "variance", *argv)
    assert code == 2 and out == ""
    assert flag in err


def test_grid_over_cap_is_usage_error(capsys, monkeypatch):
    import plateau.oracle as oracle
    monkeypatch.setattr(oracle, "MAX_GRID_WIDTH", 1)
    code, _, err = run(capsys, "variance", "--ansatz", "qmps", "--qubits", "4", "--observable", "X:2",
                       "--method", "grid")
    assert code == 2 and "--method" in err


def test_argparse_errors_exit_2():
    proc = subprocess.run([sys.executable, "-m", "plateau", "variance", "--ansatz", "qmps"],
                          capture_output=True, text=True)
    assert proc.returncode == 2


def test_closed_method(capsys):
    code, out, _ = run(capsys, "variance", "--ansatz", "qttn", "--qubits", "8", "--observable", "X:8",
                       "--method", "closed")
    assert code == 0
    assert float(rows(out)[0]["variance"]) == pytest.approx(0.25 * (3 / 8) ** 3, abs=1e-15)


def test_mc_output_is_byte_identical(capsys):
    argv = ["variance", "--ansatz", "qmps", "--qubits", "3", "--observable", "X:3", "--method", "mc",
            "--samples", "5000", "--seed", "7"]
    _, a, _ = run(capsys, *argv)
    _, b, _ = run(capsys, *argv)
    assert a == b
    row = rows(a)[0]
    assert row["seed"] == "7" and row["samples"] == "5000" and float(row["stderr"]) > 0


def test_seed_from_environment(capsys, monkeypatch):
    argv = ["variance", "--ansatz", "qmps", "--qubits", "3", "--observable", "X:3", "--method", "mc",
            "--samples", "3000"]
    monkeypatch.setenv("PLATEAU_SEED", "99")
    _, from_env, _ = run(capsys, *argv)
    _, explicit, _ = run(capsys, *argv, "--seed", "99")
    assert from_env == explicit and rows(from_env)[0]["seed"] == "99"
    monkeypatch.setenv("PLATEAU_SEED", "nope")
    code, _, err = run(capsys, *argv)
    assert code == 2 and "PLATEAU_SEED" in err


def test_json_format_and_out_file(capsys, tmp_path):
    path = tmp_path / "r.json"
    code, out, _ = run(capsys, "variance", "--ansatz", "qmps", "--qubits", "3", "--observable", "X:3",
                       "--format", "json", "--out", str(path))
    assert code == 0 and out == ""
    (rec,) = json.loads(path.read_text())
    assert list(rec) == list(CSV_FIELDS)
    assert rec["variance"] == 0.03515625


def test_presets_give_per_term_rows(capsys):
    code, out, _ = run(capsys, "variance", "--ansatz", "qmps", "--qubits", "3", "--observable", "ising:1,0.5")
    assert code == 0
    got = rows(out)
    assert sorted(r["observable"] for r in got) == sorted(["-1*Z:1*Z:2", "-1*Z:2*Z:3", "-0.5*X:1", "-0.5*X:2", "-0.5*X:3"])
    _, out, _ = run(capsys, "variance", "--ansatz", "qmps", "--qubits", "3", "--observable", "heisenberg")
    assert len(rows(out)) == 6


def test_timing_column(capsys):
    _, out, _ = run(capsys, "variance", "--ansatz", "qmps", "--qubits", "3", "--observable", "X:3")
    assert rows(out)[0]["ms"] == "0"
    _, out, _ = run(capsys, "variance", "--ansatz", "qmps", "--qubits", "3", "--observable", "X:3", "--timing")
    assert int(rows(out)[0]["ms"]) >= 0


# ---------------------------------------------------------------- scan

def test_parse_int_list():
    assert parse_int_list("4,8,16", "--x") == [4, 8, 16]
    assert parse_int_list("2:5", "--x") == [2, 3, 4, 5]
    assert parse_int_list("2:16:x2", "--x") == [2, 4, 8, 16]
    assert parse_int_list("1:N", "--site-range", 3) == [1, 2, 3]


def test_scan_qmera_lower_fit(capsys):
    code, out, _ = run(capsys, "scan", "--ansatz", "qmera", "--qubits-range", "4,8,16",
                       "--observable", "X:{lower}", "--fit")
    assert code == 0
    fit_line = [line for line in out.splitlines() if line.startswith("# fit")]
    exponent = float(fit_line[0].split("exponent=")[1].split(",")[0])
    assert exponent == pytest.approx(-2.7, abs=0.2)


def test_scan_fit_json(capsys):
    code, out, _ = run(capsys, "scan", "--ansatz", "qttn", "--qubits-range", "2:16:x2",
                       "--observable", "X:{N}", "--fit", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and len(doc["records"]) == 4
    assert doc["fit"]["exponent"] == pytest.approx(np.log(3 / 8) / np.log(2), abs=1e-12)


def test_scan_qmps_last_site_column(capsys):
    code, out, _ = run(capsys, "scan", "--ansatz", "qmps", "--qubits-range", "2:10", "--observable", "X:{N}")
    assert code == 0
    got = {int(r["n_qubits"]): float(r["variance"]) for r in rows(out)}
    assert sorted(got) == list(range(2, 11))
    for n, v in got.items():
        assert v == pytest.approx(0.25 * (3 / 8) ** (n - 1), abs=1e-12)


def test_scan_all_params_zero_pattern(capsys):
    code, out, _ = run(capsys, "scan", "--ansatz", "qmps", "--qubits", "4", "--observable", "X:2", "--all-params")
    assert code == 0
    got = rows(out)
    assert len(got) == 6 * 2 + 8
    for r in got:
        j, k = int(r["param_j"]), int(r["param_k"])
        if qmps_zero_case(4, 2, j, k):
            assert float(r["variance"]) == 0.0


def test_scan_all_params_grid_matches_tn(capsys):
    base = ["scan", "--ansatz", "qmps", "--qubits", "3", "--observable", "X:2", "--all-params"]
    _, tn, _ = run(capsys, *base)
    _, grid, _ = run(capsys, *base, "--method", "grid")
    a = {(r["param_j"], r["param_k"]): float(r["variance"]) for r in rows(tn)}
    b = {(r["param_j"], r["param_k"]): float(r["variance"]) for r in rows(grid)}
    assert a.keys() == b.keys()
    for key in a:
        assert a[key] == pytest.approx(b[key], abs=1e-12)


def test_scan_site_range(capsys):
    code, out, _ = run(capsys, "scan", "--ansatz", "qttn", "--qubits", "8", "--observable", "X:{i}",
                       "--site-range", "1:N")
    assert code == 0
    assert [r["observable"] for r in rows(out)] == [f"X:{i}" for i in range(1, 9)]


@pytest.mark.parametrize("argv, flag", [
    (["--observable", "X:1"], "--qubits-range"),
    (["--qubits-range", "4,8", "--observable", "X:{i}"], "--observable"),
    (["--qubits-range", "4", "--observable", "X:1", "--fit"], "--fit"),
    (["--qubits", "4", "--observable", "X:{i}", "--site-range", "0:2"], "--site-range"),
    (["--qubits-range", "a:b", "--observable", "X:1"], "--qubits-range"),
])
def test_scan_usage_errors(capsys, argv, flag):
    code, _, err = run(capsys, "scan", "--ansatz", "qmps", *argv)
    assert code == 2 and flag in err


def test_scan_rows_sorted(capsys):
    _, out, _ = run(capsys, "scan", "--ansatz", "qmps", "--qubits-range", "6,3,4", "--observable", "X:1")
    assert [int(r["n_qubits"]) for r in rows(out)] == [3, 4, 6]


# ---------------------------------------------------------------- verify

def test_verify_fast_reports_every_check(capsys):
    code, out, _ = run(capsys, "verify", "--level", "fast", "--format", "json")
    checks = json.loads(out)
    names = {c["name"] for c in checks}
    assert {"transfer maps", "qttn X_N", "qttn X_1", "qmera reference table (relative)", "qmps zero cases"} <= names
    for c in checks:
        assert set(c) == {"name", "worst", "tolerance", "instances", "passed", "detail"}
    assert code == (0 if all(c["passed"] for c in checks) else 1)


def test_verify_fast_checks_that_must_hold(capsys):
    _, out, _ = run(capsys, "verify", "--format", "json")
    status = {c["name"]: c["passed"] for c in json.loads(out)}
    for name in ("transfer maps", "hadamard edge identities", "block map invariants",
                 "qttn transfer eigenvalues", "qmps X_N, j<N", "qmps X_i, j<i", "qmps zero cases",
                 "qmps X_iX_i+1, 1<i<N-1", "qttn X_N", "qttn X_1", "qmera reference table (relative)"):
        assert status[name], name


def test_verify_text_summary(capsys):
    code, out, _ = run(capsys, "verify")
    lines = out.splitlines()
    assert lines[-1].endswith("checks passed")
    assert all(line.startswith(("PASS", "FAIL")) for line in lines[:-1])
    assert code in (0, 1)


def test_verify_detects_tampered_transfer_map(capsys, monkeypatch):
    tampered = zx.M_DOWN.copy()
    tampered[1, 1] += 1 / 64
    monkeypatch.setattr(zx, "M_DOWN", tampered)
    code, out, _ = run(capsys, "verify", "--format", "json")
    status = {c["name"]: c["passed"] for c in json.loads(out)}
    assert code == 1
    assert status["transfer maps"] is False
