import json
import subprocess
import sys

import numpy as np
import pytest

from clusterlsh.cli import main, run
from clusterlsh.simcore import read_matrix_csv, theorem2_matrix, write_matrix_csv


@pytest.fixture
def t2(tmp_path):
    path = tmp_path / "t2.csv"
    write_matrix_csv(theorem2_matrix(4), path)
    return str(path)


def invoke(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out


def report(capsys, *argv):
    code, out = invoke(capsys, *argv)
    return code, json.loads(out.out)


class TestReports:
    def test_maxnorm(self, capsys, t2):
        code, rep = report(capsys, "maxnorm", "--input", t2, "--restarts", "2")
        assert code == 0
        assert rep["schema"] == 1 and rep["status"] == "ok" and rep["command"] == "maxnorm"
        assert rep["results"]["t"] == pytest.approx(2.0, abs=1e-6)
        assert "fit" in rep["results"]["tolerances"]
        assert {"params", "seed", "wall_time_ms"} <= set(rep)

    def test_sorted_keys(self, capsys, t2):
        _, out = invoke(capsys, "ratio", "--input", t2)
        keys = list(json.loads(out.out))
        assert keys == sorted(keys)

    def test_centered(self, capsys, t2):
        code, rep = report(capsys, "centered-maxnorm", "--input", t2, "--restarts", "2")
        assert code == 0 and rep["results"]["value"] == pytest.approx(1.5, abs=1e-6)

    @pytest.mark.parametrize("k", ["2", "3", "inf"])
    def test_ratio(self, capsys, t2, k):
        code, rep = report(capsys, "ratio", "--input", t2, "--k", k, "--centralized")
        assert code == 0
        assert rep["results"]["replay_residual"] <= rep["results"]["tolerances"]["replay"]

    def test_zero_matrix_ratio(self, capsys, tmp_path):
        path = tmp_path / "zero3x3.csv"
        write_matrix_csv(np.zeros((3, 3)), path)
        code, rep = report(capsys, "ratio", "--input", str(path), "--k", "2")
        assert code == 0 and rep["results"]["value"] == 0

    def test_replay(self, capsys, t2):
        _, a = report(capsys, "ratio", "--input", t2, "--k", "3", "--centralized")
        argv = ["ratio", "--input", a["params"]["input"], "--k", str(a["params"]["k"]),
                "--seed", str(a["seed"])] + (["--centralized"] if a["params"]["centralized"] else [])
        _, b = report(capsys, *argv)
        assert a["results"] == b["results"]

    def test_check_infeasible_is_exit_zero(self, capsys, t2):
        code, rep = report(capsys, "check", "--input", t2)
        assert code == 0 and rep["status"] == "infeasible"
        assert rep["results"]["violating_triple"] == [0, 1, 2]

    @pytest.mark.parametrize("action", ["build", "sample", "verify", "embed"])
    def test_alsh(self, capsys, tmp_path, action):
        path = tmp_path / "s.csv"
        write_matrix_csv(np.array([[1.0, 0.5], [0.5, 1.0]]), path)
        code, rep = report(capsys, "alsh", action, "--input", str(path), "--samples", "20000",
                           "--d", "32", "--count", "3", "--restarts", "2",
                           "--codes", str(tmp_path / "codes"))
        assert code == 0
        res = rep["results"]
        assert res["alpha"] == pytest.approx(1.78221397819137 * res["t"])
        if action == "sample":
            assert len(res["draws"]) == 3
        if action == "verify":
            assert res["passed"]
        if action == "embed":
            assert read_matrix_csv(tmp_path / "codes_rows.csv").shape == (2, 32)

    def test_randexp(self, capsys, tmp_path):
        csv_path = tmp_path / "trials.csv"
        code, rep = report(capsys, "randexp", "metric", "--n", "5", "--d", "2",
                           "--trials-csv", str(csv_path))
        assert code == 0
        assert rep["results"]["fraction"] == 0.0 and rep["results"]["trials"] == 500
        assert csv_path.exists()

    @pytest.mark.parametrize("kind", ["eigen", "lsh-pre"])
    def test_randexp_other(self, capsys, kind):
        code, rep = report(capsys, "randexp", kind, "--n", "4", "--d", "64", "--trials", "10")
        assert code == 0 and 0 <= rep["results"]["fraction"] <= 1


class TestGen:
    def test_theorem2_csv(self, capsys):
        code, out = invoke(capsys, "gen", "theorem2", "--n", "4")
        assert code == 0
        rows = [list(map(float, line.split(","))) for line in out.out.strip().splitlines()]
        np.testing.assert_array_equal(rows, [[1, -1, 1, 1], [-1, 1, 1, 1], [1, 1, 1, -1], [1, 1, -1, 1]])

    def test_gram_to_file(self, capsys, tmp_path):
        path = tmp_path / "g.csv"
        code, rep = report(capsys, "gen", "gram", "--n", "3", "--d", "2", "--output", str(path))
        assert code == 0 and rep["results"]["shape"] == [3, 3]
        assert read_matrix_csv(path).has_unit_diagonal

    def test_seed_from_environment(self, capsys, monkeypatch):
        monkeypatch.setenv("CLUSTERLSH_SEED", "5")
        _, a = invoke(capsys, "gen", "gram", "--n", "3")
        _, b = invoke(capsys, "gen", "gram", "--n", "3", "--seed", "5")
        monkeypatch.delenv("CLUSTERLSH_SEED")
        _, c = invoke(capsys, "gen", "gram", "--n", "3")
        assert a.out == b.out != c.out


class TestErrors:
    def test_malformed_csv(self, capsys, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1,2\n3,oops\n")
        code, out = invoke(capsys, "maxnorm", "--input", str(path))
        assert code == 2
        assert "line 2, column 2" in out.err and out.out == ""

    def test_missing_file(self, capsys):
        code, _ = invoke(capsys, "ratio", "--input", "/nonexistent.csv")
        assert code == 2

    def test_too_large(self, capsys, t2):
        code, rep = report(capsys, "ratio", "--input", t2, "--k", "8", "--cap", "50")
        assert code == 3 and rep["status"] == "too-large"

    def test_solver_failure(self, capsys, tmp_path):
        path = tmp_path / "i.csv"
        write_matrix_csv(np.eye(3), path)
        code, rep = report(capsys, "maxnorm", "--input", str(path), "--rank", "1", "--restarts", "1")
        assert code == 4 and rep["status"] == "solver-failure"
        assert rep["results"]["best_residual"] > 0

    def test_odd_theorem2(self, capsys):
        code, _ = invoke(capsys, "gen", "theorem2", "--n", "3")
        assert code == 2

    def test_bad_env_seed(self, capsys, monkeypatch):
        monkeypatch.setenv("CLUSTERLSH_SEED", "abc")
        code, out = invoke(capsys, "gen", "theorem2", "--n", "4")
        assert code == 2 and "CLUSTERLSH_SEED" in out.err

    def test_argparse_usage(self):
        with pytest.raises(SystemExit) as err:
            run(["ratio"])
        assert err.value.code == 2


@pytest.mark.slow
def test_verify_theorem1_random_corpus(capsys):
    code, rep = report(capsys, "verify-theorem1", "--corpus", "random", "--count", "20",
                       "--size", "3", "--seed", "1")
    assert code == 0 and rep["status"] == "ok"
    assert all(row["sandwich_ok"] for row in rep["results"]["matrices"])
    assert all(all(row["checks"].values()) for row in rep["results"]["matrices"])


def test_module_entry_point(t2):
    proc = subprocess.run([sys.executable, "-m", "clusterlsh", "check", "--input", t2],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["status"] == "infeasible"
