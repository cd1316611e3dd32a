import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from lbmreg import cli, contam, core, harness, lbm

SMALL = "n = 256, 1024\nreplicates = 2\nestimators = lbm, t_kernel\nrisk_grid_points = 100\n"


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text(SMALL)
    return path


@pytest.fixture
def data(tmp_path):
    f = core.polynomial([0.0, 1.0])
    model = contam.ContaminationModel(0.1, contam.point_mass(50.0))
    obs = contam.sample_observations(f, core.make_grid(1000, 1), model, seed=1)
    path = tmp_path / "obs.csv"
    contam.write_observations_csv(obs, path)
    return path


@pytest.fixture
def query(tmp_path):
    path = tmp_path / "q.csv"
    path.write_text("x_1\n0.25\n0.5\n0.75\n")
    return path


class TestPrintConfig:
    def test_prints_defaults(self, capsys):
        assert cli.main(["--print-config"]) == 0
        out = capsys.readouterr().out
        assert out == harness.DEFAULT_CONFIG
        harness.parse_config(out)


class TestSimulate:
    def test_writes_report(self, tmp_path, config, capsys):
        out = tmp_path / "out"
        assert cli.main(["simulate", "--config", str(config), "--out", str(out)]) == 0
        for name in ("risks.csv", "summary.csv", "rates.csv", "settings.csv", "risk_vs_n.svg", "fits.svg"):
            assert (out / name).exists()
        assert len((out / "risks.csv").read_text().splitlines()) == 1 + 2 * 2 * 2

    def test_repeat_is_byte_identical(self, tmp_path, config):
        for name in ("a", "b"):
            cli.main(["simulate", "--config", str(config), "--out", str(tmp_path / name)])
        for name in ("risks.csv", "risk_vs_n.svg", "fits.svg", "summary.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_config_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("estimators = nothing\n")
        assert cli.main(["simulate", "--config", str(bad), "--out", str(tmp_path / "o")]) == 1
        assert "unknown estimator" in capsys.readouterr().err

    def test_missing_config(self, tmp_path):
        assert cli.main(["simulate", "--config", str(tmp_path / "none"), "--out", str(tmp_path)]) == 1

    def test_io_error(self, tmp_path, config):
        blocker = tmp_path / "blocker"
        blocker.write_text("")
        assert cli.main(["simulate", "--config", str(config), "--out", str(blocker / "x")]) == 3

    def test_estimator_failures(self, tmp_path, capsys):
        cfg = tmp_path / "fail.cfg"
        cfg.write_text("function = peak2d\nd = 2\nn = 256\nreplicates = 1\nestimators = lbm, kernel\n"
                       "risk_grid_points = 10\n")
        out = tmp_path / "out"
        assert cli.main(["simulate", "--config", str(cfg), "--out", str(out)]) == 2
        assert (out / "failures.csv").exists() and (out / "risks.csv").exists()


class TestRate:
    def test_prints_slopes(self, tmp_path, capsys):
        cfg = tmp_path / "rate.cfg"
        cfg.write_text("epsilon = 0\nn = 256, 1024, 4096\nreplicates = 2\nestimators = lbm\n"
                       "risk_grid_points = 200\nplot_fits = false\n")
        assert cli.main(["rate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
        assert "lbm: slope -" in capsys.readouterr().out

    def test_needs_three_sizes(self, tmp_path, config):
        assert cli.main(["rate", "--config", str(config), "--out", str(tmp_path / "o")]) == 1


class TestEstimate:
    def _run(self, tmp_path, data, query, *extra):
        out = tmp_path / "est.csv"
        code = cli.main(["estimate", "--data", str(data), "--query", str(query), "--out", str(out), *extra])
        return code, out

    def test_lbm(self, tmp_path, data, query):
        code, out = self._run(tmp_path, data, query, "--estimator", "lbm", "--m", "20")
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "x_1,estimate"
        vals = [float(r.split(",")[1]) for r in lines[1:]]
        obs = contam.read_observations_csv(data)
        fit = lbm.lbm_fit(obs.grid, obs.y, 20)
        assert vals == [lbm.lbm_predict(fit, x) for x in (0.25, 0.5, 0.75)]

    @pytest.mark.parametrize("key", harness.ESTIMATORS)
    def test_every_estimator(self, tmp_path, data, query, key):
        code, out = self._run(tmp_path, data, query, "--estimator", key, "--beta", "1.5", "--L", "1")
        assert code == 0 and len(out.read_text().splitlines()) == 4

    def test_headerless_query(self, tmp_path, data):
        q = tmp_path / "plain.csv"
        q.write_text("0.3\n0.6\n")
        code, out = self._run(tmp_path, data, q, "--estimator", "lbm_lpr", "--ell", "1", "--h", "0.1")
        assert code == 0 and len(out.read_text().splitlines()) == 3

    def test_matches_library(self, tmp_path, data, query):
        code, out = self._run(tmp_path, data, query, "--estimator", "t_kernel", "--h", "0.05",
                              "--trunc-L", "1", "--trunc-c", "2", "--kernel", "box")
        assert code == 0
        obs = contam.read_observations_csv(data)
        settings = harness.EstimatorSettings("t_kernel", h=0.05, kernel="box", trunc_L=1, trunc_c=2)
        pred = harness.build_predictor(settings, obs.grid, obs.y, 1.0, 1.0)
        expected = pred(np.array([[0.25], [0.5], [0.75]]))
        got = [float(r.split(",")[1]) for r in out.read_text().splitlines()[1:]]
        assert got == expected.tolist()

    def test_boundary_query_fails(self, tmp_path, data):
        q = tmp_path / "edge.csv"
        q.write_text("x_1\n0.01\n")
        code, _ = self._run(tmp_path, data, q, "--estimator", "kernel", "--h", "0.1")
        assert code == 2

    def test_bad_kernel(self, tmp_path, data, query):
        code, _ = self._run(tmp_path, data, query, "--estimator", "kernel", "--kernel", "cosine")
        assert code == 1

    def test_missing_data(self, tmp_path, query):
        code, _ = self._run(tmp_path, tmp_path / "none.csv", query, "--estimator", "lbm")
        assert code == 3

    def test_unwritable_output(self, tmp_path, data, query):
        code = cli.main(["estimate", "--data", str(data), "--query", str(query), "--estimator", "lbm",
                         "--out", str(tmp_path / "no" / "such" / "dir.csv")])
        assert code == 3


class TestSelftest:
    def test_passes(self, capsys):
        assert cli.main(["selftest"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 5 and all(line.startswith("PASS") for line in lines)


class TestEntryPoint:
    def test_module_invocation(self):
        res = subprocess.run([sys.executable, "-m", "lbmreg", "--print-config"],
                             capture_output=True, text=True, check=False)
        assert res.returncode == 0 and res.stdout.startswith("# lbmreg experiment configuration")

    def test_no_command(self, capsys):
        assert cli.main([]) == 1


class TestShippedConfigs:
    @pytest.mark.parametrize("name", ["rate_linear.cfg", "contamination_floor.cfg", "higher_smoothness.cfg"])
    def test_parses(self, name):
        cfg = harness.load_config(Path(__file__).resolve().parents[1] / "configs" / name)
        assert cfg.replicates == 20
