"""End-to-end command-line tests using the bundled fixtures."""

import json

import pytest

from qpflow import cases
from qpflow.cli import main

FIVE_BUS = str(cases.case_path("five_bus"))


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestSolve:
    @pytest.mark.parametrize("method", ["qpf", "fd", "nr"])
    def test_solve_succeeds(self, capsys, method):
        code, out, _ = run(capsys, "solve", "--case", FIVE_BUS, "--method", method)
        assert code == 0
        payload = json.loads(out)
        assert payload["converged"] is True
        assert payload["method"] == method

    def test_outputs_written_to_files(self, tmp_path, capsys):
        out_path = tmp_path / "report.json"
        trace_path = tmp_path / "trace.csv"
        code, _, _ = run(
            capsys, "solve", "--case", FIVE_BUS, "--method", "fd",
            "--out", str(out_path), "--trace", str(trace_path),
        )
        assert code == 0
        payload = json.loads(out_path.read_text())
        assert payload["iterations"] == len(trace_path.read_text().splitlines()) - 1
        assert trace_path.read_bytes().endswith(b"\n")
        assert b"\r" not in trace_path.read_bytes()

    def test_determinism_byte_identical(self, tmp_path, capsys):
        paths = [tmp_path / "a.json", tmp_path / "b.json"]
        for p in paths:
            run(capsys, "solve", "--case", FIVE_BUS, "--method", "qpf", "--out", str(p))
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_missing_case_exits_2(self, capsys):
        code, _, err = run(capsys, "solve", "--case", "/nope/missing.json", "--method", "fd")
        assert code == 2
        assert "cannot read" in err

    def test_non_convergence_exits_1(self, capsys):
        code, out, _ = run(
            capsys, "solve", "--case", FIVE_BUS, "--method", "fd", "--max-iter", "2"
        )
        assert code == 1
        assert json.loads(out)["converged"] is False

    def test_unknown_flag_exits_2(self, capsys):
        code, _, _ = run(capsys, "solve", "--case", FIVE_BUS, "--frobnicate")
        assert code == 2

    def test_matpower_input(self, capsys):
        path = str(cases.case_path("five_bus").with_suffix(".m"))
        with pytest.warns(UserWarning):
            code, out, _ = run(capsys, "solve", "--case", path, "--method", "fd")
        assert code == 0
        assert json.loads(out)["converged"] is True

    def test_degrees_flag(self, capsys):
        code, out, _ = run(
            capsys, "solve", "--case", FIVE_BUS, "--method", "nr", "--degrees"
        )
        assert code == 0
        assert json.loads(out)["angle_unit"] == "degrees"


class TestMonteCarlo:
    def test_small_study(self, capsys):
        code, out, _ = run(
            capsys, "montecarlo", "--case", FIVE_BUS, "--samples", "40", "--seed", "5"
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["samples"] == 40
        assert payload["converged_samples"] == 40
        assert payload["injection_correlation"][0]["rho"] == pytest.approx(0.75, abs=0.25)

    def test_zero_samples_exits_2(self, capsys):
        code, _, err = run(
            capsys, "montecarlo", "--case", FIVE_BUS, "--samples", "0", "--seed", "5"
        )
        assert code == 2
        assert "samples" in err

    def test_seed_determinism(self, tmp_path, capsys):
        paths = [tmp_path / "a.json", tmp_path / "b.json"]
        for p in paths:
            run(
                capsys, "montecarlo", "--case", FIVE_BUS,
                "--samples", "30", "--seed", "77", "--out", str(p),
            )
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_case_without_uncertainty_exits_2(self, capsys):
        path = str(cases.case_path("two_bus"))
        code, _, err = run(capsys, "montecarlo", "--case", path, "--samples", "5", "--seed", "1")
        assert code == 2
        assert "uncertainty" in err


class TestResources:
    def test_five_bus(self, capsys):
        code, out, _ = run(capsys, "resources", "--case", FIVE_BUS)
        assert code == 0
        payload = json.loads(out)
        assert payload == {"n_clock": 4, "n_vector": 2, "qubits_total": 7}

    def test_clock_register_option(self, capsys):
        code, out, _ = run(
            capsys, "resources", "--case", FIVE_BUS, "--clock-qubits", "6"
        )
        assert code == 0
        assert json.loads(out)["qubits_total"] == 9
