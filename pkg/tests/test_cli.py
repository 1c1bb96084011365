import csv
import json
import os
import subprocess
import sys

import pytest

from mppcausal.cli import main

from conftest import config_path

DEMO = config_path("demo_two_period.json")
SHARED = config_path("d5_shared_atom.json")
POISSON = config_path("poisson_unit_rate.json")
PREVENT = config_path("prevent_treatment.json")


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestSimulate:
    def test_writes_events_and_summary(self, tmp_path):
        out = str(tmp_path / "run")
        rc = main(["simulate", "--config", DEMO, "--n", "50", "--out", out])
        assert rc == 0
        events = read_csv(os.path.join(out, "events.csv"))
        summary = read_csv(os.path.join(out, "summary.csv"))
        assert events[0] == ["subject_id", "arm", "t", "mark"]
        assert summary[0] == ["subject_id", "tau_J", "Y_T", "W_T"]
        assert len(summary) == 51
        arms = {row[1] for row in events[1:]}
        assert arms <= {"observed", "potential"}

    def test_rerun_is_byte_identical(self, tmp_path):
        out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
        for out in (out1, out2):
            assert main(["simulate", "--config", DEMO, "--n", "30",
                         "--seed", "5", "--out", out]) == 0
        for name in ("events.csv", "summary.csv"):
            with open(os.path.join(out1, name), "rb") as f1, \
                 open(os.path.join(out2, name), "rb") as f2:
                assert f1.read() == f2.read()

    def test_n_zero_gives_headers_only(self, tmp_path):
        out = str(tmp_path / "empty")
        assert main(["simulate", "--config", DEMO, "--n", "0", "--out", out]) == 0
        assert read_csv(os.path.join(out, "events.csv")) == [
            ["subject_id", "arm", "t", "mark"]
        ]
        assert len(read_csv(os.path.join(out, "summary.csv"))) == 1

    def test_shared_atom_config_rejected(self, tmp_path, capsys):
        rc = main(["simulate", "--config", SHARED, "--n", "5",
                   "--out", str(tmp_path)])
        assert rc == 1
        assert "regularity" in capsys.readouterr().err

    def test_threads_match_serial(self, tmp_path):
        serial, parallel = str(tmp_path / "s"), str(tmp_path / "p")
        main(["simulate", "--config", DEMO, "--n", "40", "--out", serial])
        main(["simulate", "--config", DEMO, "--n", "40", "--threads", "4",
              "--out", parallel])
        for name in ("events.csv", "summary.csv"):
            assert read_csv(os.path.join(serial, name)) == read_csv(
                os.path.join(parallel, name)
            )


class TestEstimate:
    def test_ipw_json_report(self, tmp_path, capsys):
        out = str(tmp_path / "est")
        rc = main(["estimate", "--config", DEMO, "--method", "ipw",
                   "--n", "500", "--out", out])
        assert rc == 0
        with open(os.path.join(out, "estimate.json")) as fh:
            report = json.load(fh)
        assert report["method"] == "ipw"
        assert report["n"] == 500
        assert 0.0 < report["value"] < 2.0
        assert len(report["scenario_hash"]) == 16
        printed = json.loads(capsys.readouterr().out)
        assert printed == report

    def test_methods_agree_roughly(self, tmp_path):
        values = {}
        for method in ("ipw", "gformula", "joint"):
            out = str(tmp_path / method)
            main(["estimate", "--config", DEMO, "--method", method,
                  "--n", "4000", "--seed", "2", "--out", out])
            with open(os.path.join(out, "estimate.json")) as fh:
                values[method] = json.load(fh)["value"]
        # oracle value for the shipped demo is 0.72875
        for v in values.values():
            assert abs(v - 0.72875) < 0.05

    def test_dump_weights(self, tmp_path):
        out = str(tmp_path / "dw")
        main(["estimate", "--config", PREVENT, "--method", "ipw",
              "--n", "20", "--out", out, "--dump-weights"])
        rows = read_csv(os.path.join(out, "weights.csv"))
        assert rows[0] == ["subject_id", "t", "Lambda_c", "Lambda_atoms_logprod", "W"]

    def test_bad_method_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["estimate", "--config", DEMO, "--method", "tmle"])
        assert exc.value.code == 2

    def test_missing_config_is_error(self, tmp_path, capsys):
        rc = main(["estimate", "--config", str(tmp_path / "nope.json")])
        assert rc == 1
        assert "error" in capsys.readouterr().err


class TestOracle:
    def test_demo_report(self, tmp_path, capsys):
        out = str(tmp_path / "or")
        rc = main(["oracle", "--config", DEMO, "--out", out])
        assert rc == 0
        with open(os.path.join(out, "oracle.json")) as fh:
            report = json.load(fh)
        assert report["g_formula"] == pytest.approx(0.72875, abs=1e-12)
        assert report["ipw"] == pytest.approx(report["g_formula"], abs=1e-12)
        assert report["worlds"] == 32
        assert report["positivity"] == "ok"
        assert report["cross_check"]["ok"]

    def test_shared_atom_surfaces_regularity_finding(self, tmp_path):
        out = str(tmp_path / "sa")
        rc = main(["oracle", "--config", SHARED, "--out", out])
        assert rc == 0
        with open(os.path.join(out, "oracle.json")) as fh:
            report = json.load(fh)
        assert not report["cross_check"]["ok"]
        assert not report["cross_check"]["regularity_ok"]
        assert any("t=1" in m for m in report["cross_check"]["messages"])

    def test_continuous_config_rejected(self, tmp_path, capsys):
        rc = main(["oracle", "--config", POISSON, "--out", str(tmp_path)])
        assert rc == 1
        assert "discrete" in capsys.readouterr().err


class TestWeightsAndCheck:
    def test_weights_csv(self, tmp_path):
        out = str(tmp_path / "w")
        rc = main(["weights", "--config", PREVENT, "--n", "30", "--out", out])
        assert rc == 0
        rows = read_csv(os.path.join(out, "weights.csv"))
        assert rows[0] == ["subject_id", "t", "Lambda_c", "Lambda_atoms_logprod", "W"]
        # weights are nonnegative and zero exactly from the deviation time on
        for row in rows[1:]:
            assert float(row[4]) >= 0.0

    def test_check_clean_config(self, capsys):
        rc = main(["check", "--config", DEMO, "--n", "20"])
        assert rc == 0
        findings = json.loads(capsys.readouterr().out)
        assert findings == {"regularity": [], "predictability": [], "positivity": []}

    def test_check_flags_shared_atoms(self, capsys):
        rc = main(["check", "--config", SHARED, "--n", "5"])
        assert rc == 1
        findings = json.loads(capsys.readouterr().out)
        assert findings["regularity"]


def test_console_script_help():
    proc = subprocess.run(
        [sys.executable, "-m", "mppcausal.cli", "--help"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    for name in ("simulate", "estimate", "oracle", "weights", "check"):
        assert name in proc.stdout
