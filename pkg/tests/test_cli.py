"""Command line front end: exit codes, envelopes, determinism."""

import json

import numpy as np
import pytest

from openext import MeasureAtom, PointMeasure, kernel_of_measure
from openext.cli import main
from openext.serialization import (
    dumps,
    measure_to_json,
    system_from_json,
    system_to_json,
    write_kernel_csv,
)


@pytest.fixture
def worked_file(tmp_path, worked_system):
    p = tmp_path / "system.json"
    p.write_text(dumps(system_to_json(worked_system)))
    return str(p)


@pytest.fixture
def measure_file(tmp_path):
    mu = PointMeasure.create(
        2, [(1.0, np.diag([2.0, 0.0])), (2.0, np.diag([0.5, 1.0]))]
    )
    p = tmp_path / "measure.json"
    p.write_text(dumps(measure_to_json(mu)))
    return str(p)


@pytest.fixture
def bad_measure_file(tmp_path):
    mu = PointMeasure(2, (MeasureAtom(1.0, np.diag([1.0, -0.5])),))
    p = tmp_path / "bad.json"
    p.write_text(dumps(measure_to_json(mu)))
    return str(p)


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out


class TestExitCodes:
    def test_validate_ok(self, capsys, worked_file):
        code, out = run_cli(capsys, "validate", worked_file)
        assert code == 0
        payload = json.loads(out)
        assert payload["ok"] is True

    def test_validate_failure_is_exit_one(self, capsys, bad_measure_file):
        code, out = run_cli(capsys, "validate", bad_measure_file)
        assert code == 1
        payload = json.loads(out)
        assert payload["ok"] is False
        assert payload["violations"][0]["code"] == "mass_not_psd"

    def test_missing_file_is_exit_one(self, capsys, tmp_path):
        code, _ = run_cli(capsys, "validate", str(tmp_path / "absent.json"))
        assert code == 1

    def test_malformed_payload_is_exit_one(self, capsys, tmp_path):
        p = tmp_path / "junk.json"
        p.write_text("{\"schema\": \"openext/v1\"}")
        code, _ = run_cli(capsys, "validate", str(p))
        assert code == 1


class TestEnvelope:
    def test_common_fields(self, capsys, worked_file):
        _, out = run_cli(capsys, "decompose", worked_file)
        payload = json.loads(out)
        assert payload["schema"] == "openext/v1"
        assert payload["command"] == "decompose"
        assert len(payload["input_digest"]) == 64
        assert payload["tolerances"]["tau_rank"] == 1e-9

    def test_deterministic_output(self, capsys, worked_file):
        _, out1 = run_cli(capsys, "decompose", worked_file)
        _, out2 = run_cli(capsys, "decompose", worked_file)
        assert out1 == out2

    def test_out_flag_writes_file(self, tmp_path, capsys, worked_file):
        target = tmp_path / "result.json"
        code, out = run_cli(capsys, "decompose", worked_file, "--out", str(target))
        assert code == 0
        assert out == ""
        assert json.loads(target.read_text())["command"] == "decompose"


class TestToleranceFlags:
    def test_flag_override(self, capsys, worked_file):
        _, out = run_cli(capsys, "decompose", worked_file, "--tau-rank", "1e-6")
        assert json.loads(out)["tolerances"]["tau_rank"] == 1e-6

    def test_env_override(self, capsys, worked_file, tmp_path, monkeypatch):
        tol_file = tmp_path / "tol.json"
        tol_file.write_text(json.dumps({"tau_eig_cluster": 1e-5}))
        monkeypatch.setenv("OPENEXT_TOLERANCES", str(tol_file))
        _, out = run_cli(capsys, "decompose", worked_file)
        assert json.loads(out)["tolerances"]["tau_eig_cluster"] == 1e-5

    def test_flag_beats_env(self, capsys, worked_file, tmp_path, monkeypatch):
        tol_file = tmp_path / "tol.json"
        tol_file.write_text(json.dumps({"tau_rank": 1e-5}))
        monkeypatch.setenv("OPENEXT_TOLERANCES", str(tol_file))
        _, out = run_cli(capsys, "decompose", worked_file, "--tau-rank", "1e-7")
        assert json.loads(out)["tolerances"]["tau_rank"] == 1e-7

    def test_nonpositive_rejected(self, capsys, worked_file):
        code, _ = run_cli(capsys, "decompose", worked_file, "--tau-rank", "-1")
        assert code == 1


class TestExtendAndFit:
    def test_extend_emits_loadable_system(self, capsys, measure_file):
        code, out = run_cli(capsys, "extend", measure_file)
        assert code == 0
        payload = json.loads(out)
        sys_ = system_from_json(payload)
        assert sys_.n1 == 2
        assert sys_.n2 == 3  # atom ranks 1 + 2
        assert np.max(np.abs(sys_.omega1)) == 0.0

    def test_kernel_then_fit_round_trip(self, capsys, tmp_path, measure_file):
        mu = PointMeasure.create(
            2, [(1.0, np.diag([2.0, 0.0])), (2.0, np.diag([0.5, 1.0]))]
        )
        times = np.arange(128) * 0.1
        csv_text = write_kernel_csv(times, kernel_of_measure(mu, times).values)
        csv_path = tmp_path / "kernel.csv"
        csv_path.write_text(csv_text)
        code, out = run_cli(capsys, "fit", str(csv_path), "--max-atoms", "4")
        assert code == 0
        payload = json.loads(out)
        freqs = [a["omega"] for a in payload["atoms"]]
        assert freqs == pytest.approx([1.0, 2.0], abs=1e-8)

    def test_kernel_csv_output(self, capsys, worked_file):
        code, out = run_cli(
            capsys, "kernel", worked_file, "--t0", "0", "--t1", "1", "--steps", "5"
        )
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0].startswith("t,")
        assert len(lines) == 6

    def test_fit_rejects_damped_data(self, capsys, tmp_path):
        times = np.arange(64) * 0.1
        vals = (np.exp((-0.4 - 1j) * times))[:, None, None] * np.ones((1, 1))
        p = tmp_path / "damped.csv"
        p.write_text(write_kernel_csv(times, vals))
        code, _ = run_cli(capsys, "fit", str(p))
        assert code == 2


class TestAnalysisCommands:
    def test_decompose_worked_example(self, capsys, worked_file):
        _, out = run_cli(capsys, "decompose", worked_file)
        payload = json.loads(out)
        dims = payload["parts"]
        assert dims["h1c"]["dim"] == 1
        assert dims["h1d"]["dim"] == 1
        assert dims["h2c"]["dim"] == 2
        assert dims["h2d"]["dim"] == 0
        assert payload["strings"]["count"] == 1
        assert payload["multiplicity_bounds"]["ok"] is True

    def test_channels_worked_example(self, capsys, worked_file):
        _, out = run_cli(capsys, "channels", worked_file)
        payload = json.loads(out)
        assert payload["rank"] == 1
        assert payload["gammas"][0] == pytest.approx(2.0)

    def test_canonical_worked_example(self, capsys, worked_file):
        _, out = run_cli(capsys, "canonical", worked_file)
        payload = json.loads(out)
        assert payload["count"] == 2
        assert payload["assignment"] == [0]

    def test_check_worked_example(self, capsys, worked_file):
        code, out = run_cli(capsys, "check", worked_file)
        payload = json.loads(out)
        rec = payload["reconstructible"]
        assert rec["verdict"] is False
        assert rec["witness"]["eigenvalue"] == pytest.approx(3.0)
        assert payload["dissipation"]["verdict"] is True
        assert code == 0

    def test_check_requires_a_system(self, capsys, bad_measure_file):
        # measures go through validate; check inspects extensions
        code, _ = run_cli(capsys, "check", bad_measure_file)
        assert code == 1

    def test_simulate_both_reports_residual(self, capsys, worked_file):
        code, out = run_cli(
            capsys,
            "simulate",
            worked_file,
            "--both",
            "--forcing",
            "pulse",
            "--t-on",
            "0.5",
            "--t-off",
            "1.5",
            "--dt",
            "1e-2",
            "--T",
            "3",
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["residual"] < 1e-2

    def test_simulate_open_writes_csv(self, capsys, worked_file):
        code, out = run_cli(
            capsys, "simulate", worked_file, "--open", "--dt", "1e-2", "--T", "1"
        )
        assert code == 0
        assert out.startswith("t,")

    def test_lattice_report(self, capsys):
        code, out = run_cli(
            capsys,
            "lattice",
            "--d", "1", "--L", "1", "--N", "2",
            "--gammas", "0,1",
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["frozen_dim_complex"] == 3
        assert payload["satisfied"] is True

    def test_lattice_scan_csv(self, capsys):
        code, out = run_cli(
            capsys,
            "lattice",
            "--d", "1", "--L", "1", "--N", "2",
            "--gammas", "0,1",
            "--scan", "0,1,2",
        )
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "L,volume,max_mult,ratio"
        assert len(lines) == 4

    def test_lattice_budget_exit_code(self, capsys):
        code, _ = run_cli(
            capsys,
            "lattice",
            "--d", "3", "--L", "5", "--N", "3",
            "--gammas", "1,0,0",
        )
        assert code == 1

    def test_lattice_coupling_count_cross_check(self, capsys):
        code, out = run_cli(
            capsys,
            "lattice",
            "--d", "1", "--L", "1", "--N", "2", "--J", "1",
            "--gammas", "0,1",
        )
        assert code == 0
        code, _ = run_cli(
            capsys,
            "lattice",
            "--d", "1", "--L", "1", "--N", "2", "--J", "2",
            "--gammas", "0,1",
        )
        assert code == 1
