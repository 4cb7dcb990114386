"""Command-line surface: exit codes, formats, and round-trips."""
import csv
import io
import json
import math

import pytest

from divbarrier.cli import main
from divbarrier.goldens import BASE_CONFIG

BASE = dict(BASE_CONFIG, beta1=1.0, beta2=1.0)


@pytest.fixture
def cfg_file(tmp_path):
    def write(cfg, name="cfg.json"):
        path = tmp_path / name
        path.write_text(json.dumps(cfg))
        return str(path)
    return write


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_solve_reports_reference_numbers(capsys, cfg_file):
    code, out, _ = run(capsys, "--config", cfg_file(BASE), "solve")
    assert code == 0
    doc = json.loads(out)
    assert doc["w0"] == pytest.approx(0.6744453, abs=5e-6)
    assert doc["bstar"] == pytest.approx(1.951939, abs=5e-5)
    assert doc["regime"] == "GeneralInterior_NeqCase"
    assert doc["params"]["mu1"] == 4.0


def test_solution_document_round_trips(capsys, cfg_file, tmp_path):
    sol_path = str(tmp_path / "sol.json")
    code, _, _ = run(capsys, "--config", cfg_file(BASE), "--out", sol_path,
                     "solve")
    assert code == 0
    code, out, _ = run(capsys, "--config", sol_path, "solve")
    assert code == 0
    first = json.loads(open(sol_path).read())
    second = json.loads(out)
    assert first == second


def test_classify_psi_dump(capsys, cfg_file):
    code, out, _ = run(capsys, "--config", cfg_file(BASE), "classify")
    doc = json.loads(out)
    assert code == 0 and "psi_coeffs" not in doc
    code, out, _ = run(capsys, "--config", cfg_file(BASE), "classify",
                       "--dump-psi")
    doc = json.loads(out)
    assert doc["psi_coeffs"] == pytest.approx(
        {"c0": -0.9216, "c1": 3.6544, "c2": 12.6864, "c3": 9.3504,
         "c4": -2.0196}, abs=1e-10)


def test_eval_table_shape(capsys, cfg_file):
    code, out, _ = run(capsys, "--config", cfg_file(BASE), "eval",
                       "--n", "41")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [c for c in rows[0]] == ["x", "g", "g_prime", "pi1", "pi2",
                                    "theta1", "theta2", "entropy_rate"]
    assert float(rows[0]["g"]) == 0.0
    assert rows[0]["g_prime"] == "inf"
    ent0 = float(rows[1]["entropy_rate"])
    w0 = 0.6744453
    below = [r for r in rows if 0 < float(r["x"]) < w0]
    at_or_above = [r for r in rows if w0 <= float(r["x"])]
    # entropy rate is level until the first full-retention point
    for r in below:
        assert float(r["entropy_rate"]) == pytest.approx(ent0, rel=1e-6)
    # the binding line retains everything from w0 on
    for r in at_or_above:
        assert float(r["pi1"]) == pytest.approx(1.0, abs=1e-9)
    last = rows[-1]
    assert float(last["x"]) == pytest.approx(2 * 1.9519387, rel=1e-5)


def test_eval_json_format(capsys, cfg_file):
    code, out, _ = run(capsys, "--format", "json", "--config", cfg_file(BASE),
                       "eval", "--n", "5")
    assert code == 0
    docs = json.loads(out)
    assert len(docs) == 5 and docs[0]["g_prime"] == "inf"


def test_sweep_axes_and_error_rows(capsys, cfg_file):
    code, out, _ = run(capsys, "--config", cfg_file(BASE), "sweep",
                       "--axis1", "delta:0.5:60:4")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [c for c in rows[0]] == ["delta", "regime", "w0", "bstar",
                                    "w1", "w2"]
    assert rows[0]["regime"] == "GeneralInterior_NeqCase"
    assert rows[-1]["regime"] == "Degenerate"
    assert rows[-1]["w0"] == "" and float(rows[-1]["bstar"]) == 0.0
    # grid order: axis1 outer, axis2 inner
    code, out, _ = run(capsys, "--config", cfg_file(BASE), "sweep",
                       "--axis1", "beta1:0:1:2", "--axis2", "beta2:0:1:3")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 6
    assert [r["beta1"] for r in rows] == ["0.0"] * 3 + ["1.0"] * 3
    assert [r["beta2"] for r in rows[:3]] == ["0.0", "0.5", "1.0"]


def test_sweep_rejects_bad_axis(capsys, cfg_file):
    code, _, err = run(capsys, "--config", cfg_file(BASE), "sweep",
                       "--axis1", "nope:0:1:5")
    assert code == 2 and "sweep" in err or "nope" in err


def test_reproduce_both_tables(capsys, cfg_file):
    for table in ("ambiguity", "symmetric"):
        code, out, _ = run(capsys, "reproduce", table)
        assert code == 0
        assert out.strip().endswith("PASS")
        assert out.count("pass") == 4


def test_verify_exit_codes(capsys, cfg_file):
    code, out, _ = run(capsys, "--config",
                       cfg_file(dict(BASE, delta=100.0), "deg.json"),
                       "verify", "--grid-n", "64")
    assert code == 0
    assert json.loads(out)["passed"] is True
    code, out, _ = run(capsys, "--config", cfg_file(BASE), "verify",
                       "--grid-n", "64")
    assert code == 1
    doc = json.loads(out)
    assert doc["passed"] is False and doc["max_pasting_gap"] > 0.1


def test_simulate_smoke(capsys, cfg_file, tmp_path):
    paths = str(tmp_path / "paths.csv")
    code, out, _ = run(capsys, "--config", cfg_file(BASE), "--seed", "4",
                       "simulate", "--x0", "1.0", "--dt", "0.01",
                       "--n-paths", "64", "--t-max", "2.0",
                       "--paths-csv", paths)
    assert code == 0
    doc = json.loads(out)
    assert math.isfinite(doc["j_hat"]) and doc["n_paths"] == 64
    assert doc["g_exact"] == pytest.approx(6.3473, abs=1e-3)
    assert len(list(csv.DictReader(open(paths)))) == 64


def test_simulate_policy_flags(capsys, cfg_file):
    code, out, _ = run(capsys, "--config", cfg_file(BASE), "simulate",
                       "--x0", "1.0", "--dt", "0.01", "--n-paths", "16",
                       "--t-max", "1.0", "--policy-pi", "0,0")
    assert code == 0 and json.loads(out)["j_hat"] == 0.0
    code, _, _ = run(capsys, "--config", cfg_file(BASE), "simulate",
                     "--x0", "1.0", "--policy-pi", "0,0",
                     "--policy-theta", "0,0")
    assert code == 2
    code, _, _ = run(capsys, "--config", cfg_file(BASE), "simulate",
                     "--x0", "1.0", "--policy-pi", "0.5")
    assert code == 2


def test_validation_exit_codes(capsys, cfg_file, tmp_path):
    code, _, err = run(capsys, "--config",
                       cfg_file(dict(BASE, sigma1=-1.0), "bad.json"), "solve")
    assert code == 2 and "error" in err
    code, _, _ = run(capsys, "--config", str(tmp_path / "missing.json"),
                     "solve")
    assert code == 2
    code, _, _ = run(capsys, "solve")  # --config required
    assert code == 2


def test_json_only_commands_reject_csv(capsys, cfg_file):
    code, _, err = run(capsys, "--format", "csv", "--config", cfg_file(BASE),
                       "solve")
    assert code == 2 and "JSON" in err


def test_out_writes_file(capsys, cfg_file, tmp_path):
    target = tmp_path / "out.json"
    code, out, _ = run(capsys, "--config", cfg_file(BASE), "--out",
                       str(target), "classify")
    assert code == 0 and out == ""
    assert json.loads(target.read_text())["regime"] == "GeneralInterior_NeqCase"


def test_root_policy_flag(capsys, cfg_file):
    code, out, _ = run(capsys, "--root-policy", "largest", "--config",
                       cfg_file(BASE), "solve")
    assert code == 0
    assert json.loads(out)["root_policy"] == "largest"
