import io
import json
import subprocess
import sys

import numpy as np
import pytest

from stiefeldr import cli
from stiefeldr.exceptions import DataValidationError, NonFiniteObjectiveError, ParseError
from stiefeldr.io import emit_results, fmt, ingest_csv, read_matrix, read_table
from stiefeldr.solver import FitResult


def run(argv):
    buf = io.StringIO()
    code = cli.main([str(a) for a in argv], out=buf)
    return code, buf.getvalue()


def write(path, text):
    path.write_text(text)
    return path


@pytest.fixture
def surv_csv(tmp_path):
    path = tmp_path / "surv.csv"
    assert run(["simulate", "--design", "surv", "--n", 80, "--seed", 1, "--out", path])[0] == 0
    return path


@pytest.fixture
def reg_csv(tmp_path):
    path = tmp_path / "reg.csv"
    assert run(["simulate", "--design", "reg", "--n", 60, "--seed", 2, "--out", path])[0] == 0
    return path


class TestReadTable:
    def test_round_trip(self, tmp_path):
        names, data = read_table(write(tmp_path / "a.csv", "a,b\n1,2\n3.5,-4e-3\n"))
        assert names == ["a", "b"]
        np.testing.assert_array_equal(data, [[1, 2], [3.5, -4e-3]])

    def test_bad_cell_located(self, tmp_path):
        with pytest.raises(ParseError) as info:
            read_table(write(tmp_path / "a.csv", "a,b\n1,2\n3,oops\n"))
        assert info.value.line == 3 and info.value.column == "b"
        assert "line 3" in str(info.value)

    @pytest.mark.parametrize("text", ["", "a,b\n", "a,a\n1,2\n", "a,b\n1\n", "a\nnan\n", "a\ninf\n"])
    def test_rejects(self, tmp_path, text):
        with pytest.raises(ParseError):
            read_table(write(tmp_path / "a.csv", text))

    def test_ingest(self, tmp_path):
        path = write(tmp_path / "a.csv", "t,x1,c,x2\n1,2,1,3\n2,4,0,5\n")
        data = ingest_csv(path, "t", censor="c")
        assert data.feature_names == ["x1", "x2"]
        np.testing.assert_array_equal(data.X, [[2, 3], [4, 5]])
        np.testing.assert_array_equal(data.censor, [1, 0])
        with pytest.raises(DataValidationError):
            ingest_csv(path, "time")
        with pytest.raises(DataValidationError):
            ingest_csv(write(tmp_path / "b.csv", "t\n1\n"), "t")

    def test_read_matrix_variants(self, tmp_path):
        plain, labels = read_matrix(write(tmp_path / "a.csv", "1,0\n0,1\n"))
        assert labels is None and plain.shape == (2, 2)
        headed, labels = read_matrix(write(tmp_path / "b.csv", "feature,dir1\nx1,0.6\nx2,0.8\n"))
        assert labels == ["x1", "x2"]
        np.testing.assert_array_equal(headed, [[0.6], [0.8]])


class TestEmit:
    def result(self):
        B = np.array([[1 / 3, 0.0], [2 / 3, 0.6], [2 / 3, -0.8]])
        return FitResult(B, 0.123456789012345678, 4, True, "gtol", [1.0, 0.5, 1 / 7], 0.25, 12)

    def test_json_round_trip(self, tmp_path):
        res = self.result()
        emit_results(tmp_path, res, metadata={"bw": np.float64(np.pi), "flag": np.bool_(True)})
        doc = json.loads((tmp_path / "result.json").read_text())
        np.testing.assert_allclose(doc["B"], res.B, rtol=1e-15)
        assert doc["fval"] == pytest.approx(res.fval, rel=1e-15)
        assert doc["bw"] == float(fmt(np.pi)) and doc["flag"] is True
        assert "elapsed" not in doc and "time" not in doc

    def test_text_and_projection(self, tmp_path):
        res = self.result()
        proj = np.arange(10.0).reshape(5, 2)
        written = emit_results(tmp_path, res, ["a", "b", "c"], proj, {"y": np.ones(5)})
        assert [p.split("/")[-1] for p in written] == ["B.csv", "trace.csv", "projection.csv", "result.json", "B.txt"]
        lines = (tmp_path / "B.txt").read_text().splitlines()
        assert [ln.split()[0] for ln in lines[1:4]] == ["a", "b", "c"]
        rows = (tmp_path / "projection.csv").read_text().splitlines()
        assert rows[0] == "dir1,dir2,y" and len(rows) == 6
        assert all(len(r.split(",")) == 3 for r in rows)

    def test_fifteen_digits(self):
        assert fmt(1 / 3) == "0.333333333333333"
        assert fmt(2.0) == "2"


class TestExitCodes:
    def test_missing_required_flag(self):
        assert run(["fit-surv", "--data", "x.csv"])[0] == cli.EXIT_PARSE

    def test_unknown_command(self):
        assert run(["fly"])[0] == cli.EXIT_PARSE

    def test_help(self):
        assert run(["--help"])[0] == 0

    def test_bad_cell(self, tmp_path):
        path = write(tmp_path / "a.csv", "time,censor,x1\n1,1,2\n2,0,zz\n")
        assert run(["fit-surv", "--data", path, "--time", "time", "--censor", "censor", "--out", tmp_path / "o"])[0] == 2

    def test_missing_column(self, surv_csv, tmp_path):
        code, _ = run(["fit-surv", "--data", surv_csv, "--time", "T", "--censor", "censor", "--out", tmp_path / "o"])
        assert code == cli.EXIT_VALIDATION

    def test_ndr_too_large(self, reg_csv, tmp_path):
        assert run(["fit-reg", "--data", reg_csv, "--outcome", "y", "--ndr", 9, "--out", tmp_path / "o"])[0] == 3

    def test_canonical_needs_design(self, tmp_path):
        b = write(tmp_path / "b.csv", "1\n0\n")
        assert run(["distance", "--b1", b, "--b2", b, "--method", "canonical"])[0] == 3

    def test_missing_file(self, tmp_path):
        code, _ = run(["distance", "--b1", tmp_path / "nope.csv", "--b2", tmp_path / "nope.csv"])
        assert code == cli.EXIT_IO

    def test_solver_failure(self, reg_csv, tmp_path, monkeypatch):
        def boom(self, X, y):
            raise NonFiniteObjectiveError("objective is nan")

        monkeypatch.setattr(cli.RegressionDR, "fit", boom)
        assert run(["fit-reg", "--data", reg_csv, "--outcome", "y", "--out", tmp_path / "o"])[0] == cli.EXIT_SOLVER

    def test_bad_config(self, reg_csv, tmp_path):
        cfg = write(tmp_path / "c.cfg", "colour = blue\n")
        code, _ = run(["fit-reg", "--data", reg_csv, "--outcome", "y", "--config", cfg, "--out", tmp_path / "o"])
        assert code == cli.EXIT_PARSE
        cfg = write(tmp_path / "d.cfg", "maxitr = many\n")
        code, _ = run(["fit-reg", "--data", reg_csv, "--outcome", "y", "--config", cfg, "--out", tmp_path / "o"])
        assert code == cli.EXIT_PARSE

    def test_bad_thread_env(self, reg_csv, tmp_path, monkeypatch):
        monkeypatch.setenv(cli.THREADS_ENV, "four")
        assert run(["fit-reg", "--data", reg_csv, "--outcome", "y", "--out", tmp_path / "o"])[0] == 2


class TestSettings:
    def fit(self, reg_csv, out, *extra):
        code, _ = run(["fit-reg", "--data", reg_csv, "--outcome", "y", "--ndr", 1, "--out", out, *extra])
        assert code == 0
        return json.loads((out / "result.json").read_text())

    def test_config_then_flag(self, reg_csv, tmp_path):
        cfg = write(tmp_path / "c.cfg", "# settings\nmaxitr = 1\nmethod = phd\n")
        doc = self.fit(reg_csv, tmp_path / "a", "--config", cfg)
        assert doc["iterations"] <= 1 and doc["method"] == "phd"
        doc = self.fit(reg_csv, tmp_path / "b", "--config", cfg, "--maxitr", 2, "--method", "sir")
        assert 1 <= doc["iterations"] <= 2 and doc["method"] == "sir"

    def test_thread_env_and_flag(self, reg_csv, tmp_path, monkeypatch):
        monkeypatch.setenv(cli.THREADS_ENV, "3")
        assert self.fit(reg_csv, tmp_path / "a")["n_threads"] == 3
        assert self.fit(reg_csv, tmp_path / "b", "--threads", 2)["n_threads"] == 2
        cfg = write(tmp_path / "c.cfg", "threads = 4\n")
        assert self.fit(reg_csv, tmp_path / "c", "--config", cfg)["n_threads"] == 4

    def test_defaults(self, reg_csv, tmp_path, monkeypatch):
        monkeypatch.delenv(cli.THREADS_ENV, raising=False)
        doc = self.fit(reg_csv, tmp_path / "a")
        assert doc["n_threads"] == 1 and doc["method"] == "sir"


class TestCommands:
    def test_distance_output(self, tmp_path):
        b1 = write(tmp_path / "b1.csv", "feature,dir1\nx1,1\nx2,0\n")
        b2 = write(tmp_path / "b2.csv", "0\n1\n")
        code, text = run(["distance", "--b1", b1, "--b2", b2])
        assert code == 0 and text == "1.4142135623731\n"
        code, text = run(["distance", "--b1", b1, "--b2", b1, "--method", "trace"])
        assert text == "1\n"

    def test_fit_surv_files(self, surv_csv, tmp_path):
        out = tmp_path / "fit"
        code, text = run(["fit-surv", "--data", surv_csv, "--time", "time", "--censor", "censor",
                          "--maxitr", 5, "--out", out])
        assert code == 0 and text.startswith("fval ")
        B = read_matrix(out / "B.csv")[0]
        assert B.shape == (6, 2)
        np.testing.assert_allclose(B.T @ B, np.eye(2), atol=1e-12)
        rows = (out / "projection.csv").read_text().splitlines()
        assert rows[0] == "dir1,dir2,time,censor" and len(rows) == 81
        assert len((out / "B.txt").read_text().splitlines()) == 6 + 2

    def test_simulate_truth(self, tmp_path):
        code, _ = run(["simulate", "--design", "surv", "--n", 30, "--seed", 0,
                       "--out", tmp_path / "d.csv", "--truth", tmp_path / "t.csv"])
        assert code == 0
        truth = read_matrix(tmp_path / "t.csv")[0]
        assert truth.shape == (6, 2)

    def test_simulate_too_few_covariates(self, tmp_path):
        assert run(["simulate", "--design", "surv", "--p", 4, "--out", tmp_path / "d.csv"])[0] == 3

    def test_benchmark_files(self, tmp_path):
        code, _ = run(["benchmark", "--n", 20, "--p", 2, "--iters", 10, "--repeats", 2, "--out", tmp_path])
        assert code == 0
        assert len((tmp_path / "trace.csv").read_text().splitlines()) == 1 + 2 * 11
        assert len((tmp_path / "summary.csv").read_text().splitlines()) == 3
        assert (tmp_path / "timing.csv").exists()

    def test_optim_demo(self, tmp_path):
        code, text = run(["optim-demo", "--n", 60, "--p", 10, "--out", tmp_path])
        assert code == 0
        assert float(text.split("distance_to_svd")[1]) < 1e-3

    def test_module_entry_point(self, tmp_path):
        proc = subprocess.run([sys.executable, "-m", "stiefeldr", "distance", "--b1", "missing"],
                              capture_output=True, text=True)
        assert proc.returncode == cli.EXIT_PARSE


def snapshot(directory):
    return {p.relative_to(directory).as_posix(): p.read_bytes()
            for p in sorted(directory.rglob("*")) if p.is_file()}


def test_outputs_byte_identical(tmp_path):
    for run_dir in ("one", "two"):
        base = tmp_path / run_dir
        base.mkdir()
        assert run(["simulate", "--design", "reg", "--n", 50, "--seed", 4, "--out", base / "reg.csv"])[0] == 0
        assert run(["fit-reg", "--data", base / "reg.csv", "--outcome", "y", "--ndr", 1,
                    "--threads", 2, "--out", base / "fit"])[0] == 0
        assert run(["benchmark", "--n", 15, "--p", 2, "--iters", 20, "--out", base / "bench"])[0] == 0
        (base / "bench" / "timing.csv").unlink()
    assert snapshot(tmp_path / "one") == snapshot(tmp_path / "two")
