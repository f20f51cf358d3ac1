import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

from qcorr import cli
from qcorr.cli import EXIT_INPUT, EXIT_NUMERIC, EXIT_OK, RunReport, main, run_classify

GOLDEN = Path(__file__).parent / "golden"


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def write_json(path, payload):
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


class TestGolden:
    def test_table1_byte_identical(self, capsys):
        code, out, _ = run(["table1"], capsys)
        assert code == EXIT_OK
        assert out.encode() == (GOLDEN / "table1.csv").read_bytes()

    def test_tripartite_byte_identical(self, capsys):
        code, out, _ = run(["tripartite"], capsys)
        assert code == EXIT_OK
        assert out.encode() == (GOLDEN / "tripartite.csv").read_bytes()

    def test_repeatable(self):
        assert cli.cmd_tripartite() == cli.cmd_tripartite()
        assert cli.cmd_table1() == cli.cmd_table1()

    def test_csv_conventions(self):
        text = cli.cmd_table1()
        assert "\r" not in text
        assert text.splitlines()[0] == "vector,g0,g_pm,g_sep0,g_sep_pm"
        assert text.count("n.a.") == 6


class TestFig2:
    def test_small_grid(self, capsys, tmp_path):
        out_file = tmp_path / "fig2.csv"
        code, out, _ = run(["fig2", "--kappa", "0.5", "--nmax", "64", "--grid", "5", "--out", str(out_file)], capsys)
        assert code == EXIT_OK
        assert "threshold" in out and "1.0471975" in out
        lines = out_file.read_text().splitlines()
        assert lines[0] == "delta_phi,L_analytic,L_numeric,g0,gplus,gsep0,gsep_plus"
        assert lines[1].split(",")[1:] == ["3", "3", "1", "1", "1", "2"]
        last = lines[-1].split(",")
        assert float(last[0]) == pytest.approx(math.pi)
        assert float(last[1]) == 1 and float(last[2]) == pytest.approx(1, abs=1e-9)

    def test_threshold_to_stderr_without_out(self, capsys):
        code, out, err = run(["fig2", "--grid", "3"], capsys)
        assert code == EXIT_OK
        assert out.startswith("delta_phi,")
        assert "threshold" in err

    def test_bad_kappa(self, capsys):
        code, _, err = run(["fig2", "--kappa", "1.5"], capsys)
        assert code == EXIT_INPUT
        assert "kappa" in err

    def test_bad_grid(self, capsys):
        code, _, _ = run(["fig2", "--grid", "1"], capsys)
        assert code == EXIT_INPUT


class TestClassify:
    def test_builtin_psi1_plus(self, capsys):
        code, out, _ = run(["classify", "--builtin", "psi1_plus"], capsys)
        assert code == EXIT_OK
        data = json.loads(out)
        bounds = data["bounds"]
        assert bounds["g0"] == pytest.approx(0.25, abs=1e-10)
        assert bounds["gplus"] == pytest.approx(0.5, abs=1e-10)
        assert bounds["gminus"] is None
        assert bounds["violated"] == {"g0": True, "gplus": True, "gsep0": True, "gsep_plus": False}
        assert data["inputs"]["seed"] == 42
        assert data["provenance"]["solver_tol"] == 1e-10

    def test_classical_state_file(self, capsys, tmp_path):
        path = write_json(tmp_path / "zero.json", {"n_particles": 1, "local_dim": 2, "amplitudes": [[1, 0], [0, 0]]})
        code, out, _ = run(["classify", "--state", path], capsys)
        assert code == EXIT_OK
        gammas = json.loads(out)["bounds"]["gammas"]
        assert gammas and all(v == 0 for v in gammas.values())

    def test_unnormalized_file_is_renormalized(self, tmp_path):
        path = write_json(tmp_path / "s.json", {"n_particles": 1, "local_dim": 2, "amplitudes": [[1, 0], [1, 0]]})
        report = run_classify(state_file=path)
        assert report.inputs["input_norm"] == pytest.approx(math.sqrt(2))
        assert report.bounds.gammas["g0"] == pytest.approx(1)

    def test_density_matrix_with_operator(self, tmp_path):
        rho = [[[0.5, 0], [0.5, 0]], [[0.5, 0], [0.5, 0]]]
        state = write_json(tmp_path / "rho.json", {"n_particles": 1, "local_dim": 2, "matrix": rho})
        op = write_json(tmp_path / "op.json", {"n_particles": 1, "local_dim": 2, "amplitudes": [[1, 0], [1, 0]]})
        report = run_classify(state_file=state, operator_file=op)
        # L = |v><v| with raw v = (1, 1): <L> = 2, g0 = 1
        assert report.bounds.expectation == pytest.approx(2)
        assert report.bounds.g0 == pytest.approx(1)

    def test_density_matrix_needs_operator(self, capsys, tmp_path):
        rho = [[[1, 0], [0, 0]], [[0, 0], [0, 0]]]
        path = write_json(tmp_path / "rho.json", {"n_particles": 1, "local_dim": 2, "matrix": rho})
        code, _, err = run(["classify", "--state", path], capsys)
        assert code == EXIT_INPUT
        assert "--operator" in err

    def test_malformed_json(self, capsys, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"n_particles": 1,\n  "local_dim": }', encoding="utf-8")
        code, _, err = run(["classify", "--state", str(path)], capsys)
        assert code == EXIT_INPUT
        assert "line 2" in err and "column" in err

    def test_dimension_mismatch(self, capsys, tmp_path):
        path = write_json(tmp_path / "s.json", {"n_particles": 2, "local_dim": 2, "amplitudes": [[1, 0]]})
        code, _, err = run(["classify", "--state", path], capsys)
        assert code == EXIT_INPUT
        assert "expected 4 amplitudes" in err

    def test_operator_space_mismatch(self, capsys, tmp_path):
        state = write_json(tmp_path / "s.json", {"n_particles": 1, "local_dim": 2, "amplitudes": [[1, 0], [0, 0]]})
        op = write_json(tmp_path / "o.json", {"n_particles": 1, "local_dim": 3, "amplitudes": [[1, 0], [0, 0], [0, 0]]})
        code, _, _ = run(["classify", "--state", state, "--operator", op], capsys)
        assert code == EXIT_INPUT

    def test_missing_file(self, capsys, tmp_path):
        code, _, err = run(["classify", "--state", str(tmp_path / "nope.json")], capsys)
        assert code == EXIT_INPUT
        assert "cannot read" in err

    def test_null_vector(self, capsys, tmp_path):
        path = write_json(tmp_path / "s.json", {"n_particles": 1, "local_dim": 2, "amplitudes": [[0, 0], [0, 0]]})
        code, _, _ = run(["classify", "--state", path], capsys)
        assert code == EXIT_INPUT

    def test_unknown_builtin_rejected_by_parser(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["classify", "--builtin", "nope"])
        assert exc.value.code == EXIT_INPUT

    def test_out_file(self, tmp_path, capsys):
        out = tmp_path / "report.json"
        code, stdout, _ = run(["classify", "--builtin", "s01", "--out", str(out)], capsys)
        assert code == EXIT_OK and stdout == ""
        assert json.loads(out.read_text())["bounds"]["gammas"]["g0"] == pytest.approx(1)

    def test_cv_builtin(self, capsys):
        code, out, _ = run(["classify", "--builtin", "cv_dephased", "--kappa", "0.5", "--dphi", "0"], capsys)
        assert code == EXIT_OK
        data = json.loads(out)
        assert data["bounds"]["expectation"] == pytest.approx(3, abs=1e-9)
        assert data["bounds"]["gsep_plus"] == pytest.approx(2, abs=1e-9)
        assert data["provenance"]["truncated_weight"] == pytest.approx(2.0**-130)


class TestRunReport:
    @pytest.mark.parametrize("builtin", ["psi1_plus", "psi3_minus", "psi4_0", "s01"])
    def test_round_trip(self, builtin):
        report = run_classify(builtin=builtin, restarts=4)
        assert RunReport.parse(report.serialize()) == report

    def test_serialized_is_sorted_json(self):
        text = run_classify(builtin="psi2_0").serialize()
        assert json.loads(text)["inputs"]["builtin"] == "psi2_0"
        assert text.endswith("\n")


class TestEnvironment:
    def test_tolerance_override(self, monkeypatch):
        monkeypatch.setenv("QCORR_TOL", "1e-8")
        assert run_classify(builtin="psi1_0").provenance["solver_tol"] == 1e-8

    def test_bad_tolerance(self, monkeypatch, capsys):
        monkeypatch.setenv("QCORR_TOL", "abc")
        code, _, err = run(["tripartite"], capsys)
        assert code == EXIT_INPUT
        assert "QCORR_TOL" in err

    def test_numerical_failure_exit_code(self, monkeypatch, capsys):
        def broken():
            raise cli.SolverFailure("diverged")

        monkeypatch.setattr(cli, "cmd_table1", broken)
        code, _, err = run(["table1"], capsys)
        assert code == EXIT_NUMERIC
        assert "numerical failure" in err


def test_module_entry_point():
    result = subprocess.run([sys.executable, "-m", "qcorr", "table1"], capture_output=True, text=True, check=False)
    assert result.returncode == 0
    assert result.stdout == (GOLDEN / "table1.csv").read_text()
