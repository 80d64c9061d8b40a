import csv
import json
import logging
import subprocess
import sys

import numpy as np
import pytest

from v2v_sf.cli import EXIT_CONFIG, EXIT_OK, EXIT_USAGE, main
from v2v_sf.config import ExperimentConfig, build_config, load_config, parse_config_text
from v2v_sf.errors import ConfigError, ParameterError
from v2v_sf.experiments import ResultTable, approximation_probe, named_config, run_named, run_sweep

FAST = {"trials": 300, "sigma_points": 25}


def read_csv(path):
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], np.array(rows[1:], dtype=float)


class TestConfig:
    def test_defaults(self):
        cfg = ExperimentConfig()
        assert cfg.lambda_p == 0.1 and cfg.d_s == 145.0 and cfg.alpha == 4.0
        assert cfg.radio.rho == pytest.approx(4.386e-8, rel=1e-3)
        assert cfg.lane.d == 150.0

    def test_speed_rule(self):
        cfg = build_config(parse_config_text("v_s = 30\n"))
        assert cfg.d_s == 60.0

    def test_missing_lambda_p_logged(self, caplog):
        with caplog.at_level(logging.INFO, logger="v2v_sf.config"):
            cfg = build_config(parse_config_text("alpha = 3\n"))
        assert cfg.lambda_p == 0.1
        assert "lambda_p not set" in caplog.text

    @pytest.mark.parametrize(
        "text,line",
        [
            ("alpha = 3\nfoo = 1\n", 2),
            ("alpha = 3\n\n# note\nalpha = 4\n", 4),
            ("lambda_p 0.1\n", 1),
            ("case = c1\nalpha = three\n", 2),
        ],
    )
    def test_errors_carry_line(self, tmp_path, text, line):
        p = tmp_path / "bad.cfg"
        p.write_text(text)
        with pytest.raises(ConfigError) as err:
            load_config(p)
        assert err.value.line == line
        assert f"line {line}:" in str(err.value)

    def test_invalid_values(self):
        with pytest.raises(ParameterError):
            build_config({"case": "c9"})
        with pytest.raises(ParameterError):
            build_config({"curves": "analytic,histogram"})

    def test_digest_tracks_values(self):
        a = ExperimentConfig()
        assert a.digest() == ExperimentConfig().digest()
        assert a.digest() != a.with_value("alpha", "3").digest()

    def test_with_value_d_s_clears_speed(self):
        cfg = build_config({"v_s": "20"}).with_value("d_s", "80")
        assert cfg.d_s == 80.0 and cfg.v_s is None


class TestNamed:
    def test_presets(self):
        assert named_config("fig1").d_s == 145.0
        f2 = named_config("fig2")
        assert (f2.lambda_p, f2.d_s) == (0.2, 45.0)
        assert named_config("fig3", {"seed": "4"}).seed == 4
        with pytest.raises(ParameterError):
            run_named("fig9")

    def test_fig1_columns(self, tmp_path):
        tables = run_named("fig1", FAST, tmp_path)
        assert [t.name for t in tables] == ["fig1_alpha3", "fig1_alpha4"]
        header, rows = read_csv(tmp_path / "fig1_alpha4.csv")
        assert header == ["sigma", "analytic_c1", "analytic_c2", "mc_c1", "mc_c2", "baseline_c1", "baseline_c2"]
        assert rows.shape == (25, 7)
        assert np.all((rows[:, 0] >= 0) & (rows[:, 0] < 1))
        assert np.all((rows[:, 1:] >= 0) & (rows[:, 1:] <= 1))
        text = (tmp_path / "fig1_alpha4.csv").read_text()
        assert "# sigma: SF threshold (1)" in text
        assert "# config_hash: " in text
        meta = json.loads((tmp_path / "fig1_alpha4.json").read_text())
        assert meta["mc_c1"]["seed"] == 0 and meta["mc_c1"]["trials"] == 300
        assert (tmp_path / "fig1_alpha4.gp").exists()

    def test_fig1_reproducible(self, tmp_path):
        run_named("fig1", FAST, tmp_path / "a")
        run_named("fig1", FAST, tmp_path / "b")
        for name in ("fig1_alpha3.csv", "fig1_alpha4.csv", "fig1_alpha4.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_fig2_probe(self, tmp_path):
        run_named("fig2", {"sigma_points": 41}, tmp_path)
        header, rows = read_csv(tmp_path / "fig2_probe.csv")
        probe = dict(zip(header, rows[0]))
        assert probe["target"] == 0.99
        assert probe["relative_error_pct"] == pytest.approx(-0.24, abs=0.15)
        header, rows = read_csv(tmp_path / "fig2.csv")
        assert header == ["sigma", "mh", "exact", "approx_F1", "approx_F2"]
        assert np.all(rows[:, 1] >= 0)
        assert np.all(rows[:, 3] <= rows[:, 2] + 1e-12)
        assert np.all(rows[:, 4] <= rows[:, 2] + 1e-12)

    def test_probe_values(self):
        probe = approximation_probe(named_config("fig2"))
        assert probe["F1"]["exact"] == pytest.approx(0.99, abs=1e-9)
        assert abs(probe["F2"]["relative_error_pct"]) < 5

    def test_fig3_below_limit(self, tmp_path):
        run_named("fig3", {}, tmp_path)
        header, rows = read_csv(tmp_path / "fig3.csv")
        assert header == ["pt_w", "sf_c1", "sf_c2", "limit_c1", "limit_c2"]
        assert rows[0, 0] == pytest.approx(0.01) and rows[-1, 0] == pytest.approx(10.0)
        assert np.all(rows[:, 1] <= rows[:, 3]) and np.all(rows[:, 2] <= rows[:, 4])
        assert np.all(np.diff(rows[:, 1]) >= 0) and np.all(np.diff(rows[:, 2]) >= 0)


class TestSweep:
    def test_alpha_sweep(self, tmp_path):
        cfg = tmp_path / "s.cfg"
        cfg.write_text(
            "# path-loss sweep\n"
            "sweep_key = alpha\n"
            "sweep_values = 3, 4, 5\n"
            "curves = analytic, baseline-ppp, approx-F1, monte-carlo\n"
            "trials = 200\n"
            "sigma_points = 15\n"
        )
        tables = run_sweep(cfg, tmp_path / "out")
        csvs = sorted(p.name for p in (tmp_path / "out").glob("*.csv"))
        assert csvs == ["sweep_00_alpha_3.csv", "sweep_01_alpha_4.csv", "sweep_02_alpha_5.csv", "sweep_summary.csv"]
        assert len(list((tmp_path / "out").glob("*.gp"))) == 3
        header, rows = read_csv(tmp_path / "out" / "sweep_01_alpha_4.csv")
        assert header == ["sigma", "analytic", "baseline", "approx_F1", "mc"]
        _, summary = read_csv(tmp_path / "out" / "sweep_summary.csv")
        np.testing.assert_array_equal(summary[:, 2], [3, 4, 5])
        assert tables[-1].name == "sweep_summary"

    def test_speed_sweep(self, tmp_path):
        cfg = tmp_path / "s.cfg"
        cfg.write_text("sweep_key = v_s\nsweep_values = 30, 50\ncurves = analytic\nsigma_points = 5\n")
        run_sweep(cfg, tmp_path)
        _, summary = read_csv(tmp_path / "sweep_summary.csv")
        np.testing.assert_array_equal(summary[:, 1], [60.0, 100.0])


def test_result_table_shape():
    with pytest.raises(ParameterError):
        ResultTable("x", ["a", "b"], [[1.0, 2.0, 3.0]])


class TestCli:
    def test_named_run(self, tmp_path, capsys):
        code = main(["fig3", "--out", str(tmp_path), "--seed", "2"])
        assert code == EXIT_OK
        assert (tmp_path / "fig3.csv").exists()
        assert "fig3" in capsys.readouterr().out

    def test_seed_from_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv("V2V_SF_SEED", "11")
        assert main(["fig1", "--out", str(tmp_path), "--trials", "100", "--set", "sigma_points=5"]) == EXIT_OK
        meta = json.loads((tmp_path / "fig1_alpha4.json").read_text())
        assert meta["config"]["seed"] == 11

    def test_usage_errors(self, capsys):
        with pytest.raises(SystemExit) as e:
            main(["fig9"])
        assert e.value.code == EXIT_USAGE
        with pytest.raises(SystemExit) as e:
            main(["sweep"])
        assert e.value.code == EXIT_USAGE

    def test_config_errors(self, tmp_path, capsys):
        assert main(["fig2", "--out", str(tmp_path), "--set", "foo=1"]) == EXIT_CONFIG
        bad = tmp_path / "bad.cfg"
        bad.write_text("alpha = 4\nbogus = 1\n")
        assert main(["sweep", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_CONFIG
        assert "line 2" in capsys.readouterr().err
        assert main(["fig3", "--out", str(tmp_path), "--set", "lambda_p=-1"]) == EXIT_CONFIG

    def test_missing_config_file(self, tmp_path):
        assert main(["sweep", "--config", str(tmp_path / "nope.cfg"), "--out", str(tmp_path)]) == EXIT_USAGE

    def test_entry_point(self, tmp_path):
        res = subprocess.run(
            [sys.executable, "-m", "v2v_sf.cli", "fig3", "--out", str(tmp_path)], capture_output=True, text=True
        )
        assert res.returncode == 0, res.stderr
