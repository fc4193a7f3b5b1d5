"""Sweep orchestration, determinism, CSV persistence, CLI surfaces."""

import json
import math
import subprocess
import sys

import numpy as np
import pytest

from bitlogit.harness import (
    CSV_COLUMNS,
    ConfigError,
    ExperimentConfig,
    ThetaSource,
    load_config,
    read_results,
    run_sweep,
    simulate_once,
    write_results,
)
from bitlogit.estimator import SGDConfig, sample_class_conditional
from bitlogit.quantize import decode_group, encode_group, make_group_partition, Message
from bitlogit.rng import derive_rng
from bitlogit.estimator import sgd_logistic


def small_config(**over):
    base = dict(
        n_grid=(60,), k_grid=(3,), d_grid=(4,), trials=2, seed=11,
        theta=ThetaSource(kind="random-ball", radius=1.0),
    )
    base.update(over)
    return ExperimentConfig(**base)


class TestConfig:
    def test_grid_validation(self):
        with pytest.raises(ConfigError, match="nonempty"):
            small_config(n_grid=())
        with pytest.raises(ConfigError, match="k must be >= 2"):
            small_config(k_grid=(1,))
        with pytest.raises(ConfigError, match="trials"):
            small_config(trials=0)
        with pytest.raises(ConfigError, match="uniform-hypercube"):
            small_config(dist_kind="spherical-gaussian")

    def test_theta_sources(self):
        explicit = ThetaSource(kind="explicit", vector=(1.0, -1.0))
        np.testing.assert_array_equal(explicit.draw(2, 0), [1.0, -1.0])
        with pytest.raises(ConfigError, match="dimension"):
            explicit.draw(3, 0)
        ball = ThetaSource(kind="random-ball", radius=0.5)
        draw = ball.draw(6, 3)
        assert np.linalg.norm(draw) <= 0.5
        np.testing.assert_array_equal(draw, ball.draw(6, 3))

    def test_toml_and_json_mirror(self, tmp_path):
        toml_text = """
[grid]
n = [100]
k = [3]
d = [4]
trials = 2

[theta]
source = "random-ball"
radius = 1.5

[sgd]
step_scale = 1.0
epochs = 1

[run]
seed = 42
out = "results.csv"
"""
        toml_path = tmp_path / "sweep.toml"
        toml_path.write_text(toml_text)
        config = load_config(toml_path)
        assert config.n_grid == (100,)
        assert config.seed == 42
        assert config.out_path == "results.csv"

        json_path = tmp_path / "sweep.json"
        json_path.write_text(json.dumps({
            "grid": {"n": [100], "k": [3], "d": [4], "trials": 2},
            "theta": {"source": "random-ball", "radius": 1.5},
            "sgd": {"step_scale": 1.0, "epochs": 1},
            "run": {"seed": 42, "out": "results.csv"},
        }))
        mirrored = load_config(json_path)
        assert mirrored == config

    def test_bad_config_file(self, tmp_path):
        p = tmp_path / "broken.toml"
        p.write_text("[grid\nn = [")
        with pytest.raises(ConfigError, match="parse"):
            load_config(p)
        with pytest.raises(ConfigError, match="read"):
            load_config(tmp_path / "missing.toml")


class TestSweep:
    def test_byte_identical_reruns(self, tmp_path):
        config = small_config()
        paths = []
        for i in range(2):
            result = run_sweep(config)
            path = tmp_path / f"run{i}.csv"
            write_results(result.records, path, result.summaries, config.seed)
            paths.append(path.read_bytes())
        assert paths[0] == paths[1]

    def test_parallel_matches_serial(self):
        serial = run_sweep(small_config(workers=1))
        parallel = run_sweep(small_config(workers=2))
        assert serial.records == parallel.records

    def test_env_override_keeps_results(self, monkeypatch):
        serial = run_sweep(small_config())
        monkeypatch.setenv("BITLOGIT_WORKERS", "2")
        overridden = run_sweep(small_config())
        assert serial.records == overridden.records

    def test_doubling_n_halves_excess(self):
        config = small_config(n_grid=(500, 1000), trials=20, seed=5)
        result = run_sweep(config)
        by_n = {s.n: s.excess_mean for s in result.summaries}
        ratio = by_n[1000] / by_n[500]
        assert 0.35 <= ratio <= 0.7

    def test_single_group_cell_matches_direct_run(self):
        # k = d + 1 puts every coordinate in one group
        config = small_config(k_grid=(5,), d_grid=(4,), n_grid=(300,), trials=1)
        result = run_sweep(config)
        theta = config.theta.draw(4, config.seed)
        assignment = make_group_partition(d=4, k=5, n=300)
        x, y = sample_class_conditional(theta, 300,
                                        derive_rng(config.seed, "data", 300, 5, 4, 0))
        messages = [encode_group((x[i], int(y[i])), assignment, i)
                    for i in range(300)]
        samples = [decode_group(Message(m, 5), assignment, 0)
                   for m in sorted(msg.m for msg in messages)]
        direct = sgd_logistic(samples, config.sgd,
                              derive_rng(config.seed, "sgd", 300, 5, 4, 0).spawn(1)[0])
        l2 = float(np.sum((direct - theta) ** 2))
        assert result.records[0].l2_error == pytest.approx(l2, rel=1e-12)

    def test_invalid_cells_skipped_with_reason(self):
        config = small_config(
            theta=ThetaSource(kind="explicit", vector=(0.5, -0.5)),
            d_grid=(2, 3),
        )
        result = run_sweep(config)
        assert len(result.skipped) == 1
        (cell, reason), = result.skipped
        assert cell == (60, 3, 3)
        assert "dimension" in reason
        # the valid cell still ran
        assert {r.d for r in result.records} == {2}

    def test_trace_recording(self):
        config = small_config(record_trace=True, n_grid=(40,), trials=1)
        result = run_sweep(config)
        assert result.records[0].trace_msg is not None
        assert result.records[0].trace_msg >= 0
        assert result.summaries[0].trace_msg == result.records[0].trace_msg

    def test_timing_opt_in(self):
        off = run_sweep(small_config(n_grid=(40,), trials=1))
        assert off.records[0].wall_ms == 0.0
        on = run_sweep(small_config(n_grid=(40,), trials=1, record_timing=True))
        assert on.records[0].wall_ms > 0.0

    def test_summary_carries_bound_scalings(self):
        result = run_sweep(small_config(n_grid=(40,), trials=1))
        s = result.summaries[0]
        assert s.sigma2 > 0 and s.i0 > 0
        assert s.thm1 == max(s.d / (s.n * s.sigma2),
                             s.d**2 / (s.k * s.n * s.sigma2))
        assert s.van_trees == pytest.approx(
            s.d**2 / (s.n * 4.0 * s.sigma2 * s.k))


class TestCsv:
    def test_empty_records_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="empty"):
            write_results([], tmp_path / "never.csv")
        assert not (tmp_path / "never.csv").exists()

    def test_round_trip_exact(self, tmp_path):
        config = small_config(record_timing=True)
        result = run_sweep(config)
        path = tmp_path / "out.csv"
        write_results(result.records, path, result.summaries, config.seed)
        rows = read_results(path)
        records = [r for r in rows if r["kind"] == "record"]
        summaries = [r for r in rows if r["kind"] == "summary"]
        assert len(records) == len(result.records)
        assert len(summaries) == len(result.summaries)
        for row, rec in zip(records, result.records):
            assert row["l2_error"] == rec.l2_error
            assert row["excess_risk"] == rec.excess_risk
            assert row["wall_ms"] == rec.wall_ms
        for row, s in zip(summaries, result.summaries):
            assert row["trial"] == -1
            assert row["l2_error"] == s.l2_mean
            assert row["l2_error_stderr"] == s.l2_stderr

    def test_lf_line_endings_and_header(self, tmp_path):
        result = run_sweep(small_config(n_grid=(40,), trials=1))
        path = tmp_path / "out.csv"
        write_results(result.records, path, result.summaries, 11)
        raw = path.read_bytes()
        assert b"\r" not in raw
        assert raw.decode("utf-8").splitlines()[0] == ",".join(CSV_COLUMNS)


class TestSimulateOnce:
    def test_reports_effort_and_errors(self):
        record = simulate_once(d=3, k=2, n=200, theta=np.array([0.5, 0.0, -0.5]),
                               seed=3)
        assert record["l2_error"] >= 0
        assert record["excess_risk"] >= -1e-12
        assert record["wall_ms"] > 0
        assert len(record["theta_hat"]) == 3

    def test_dimension_checked(self):
        with pytest.raises(ConfigError, match="dimension"):
            simulate_once(d=3, k=2, n=10, theta=np.zeros(2), seed=0)


class TestCli:
    def run_cli(self, *args):
        return subprocess.run([sys.executable, "-m", "bitlogit.cli", *args],
                              capture_output=True, text=True)

    def test_sweep_cli_round_trip(self, tmp_path):
        config = tmp_path / "cfg.toml"
        config.write_text("""
[grid]
n = [50]
k = [3]
d = [4]
trials = 2

[theta]
source = "random-ball"
radius = 1.0

[run]
seed = 9
""")
        out = tmp_path / "res.csv"
        proc = self.run_cli("sweep", "--config", str(config), "--out", str(out))
        assert proc.returncode == 0, proc.stderr
        payload = json.loads(proc.stdout)
        assert payload["cells"] == 1
        rows = read_results(out)
        assert sum(r["kind"] == "summary" for r in rows) == 1

    def test_config_error_exit_code(self, tmp_path):
        config = tmp_path / "bad.toml"
        config.write_text("[grid]\nn = [50]\nk = [1]\nd = [4]\n\n[theta]\nsource = 'random-ball'\nradius = 1.0\n")
        proc = self.run_cli("sweep", "--config", str(config), "--out",
                            str(tmp_path / "x.csv"))
        assert proc.returncode == 2
        assert "config error" in proc.stderr

    def test_bounds_cli(self):
        proc = self.run_cli("bounds", "--n", "100", "--k", "2", "--d", "4",
                            "--sigma2", "1.0", "--I0", "1.0")
        assert proc.returncode == 0
        payload = json.loads(proc.stdout)
        assert payload["thm1"] == max(4 / 100, 16 / (2 * 100))

    def test_fisher_cli(self):
        proc = self.run_cli("fisher", "--dist", "hypercube:2", "--theta",
                            "0.3,-0.1", "--quantizer", "uniform", "--k", "2")
        assert proc.returncode == 0
        payload = json.loads(proc.stdout)
        assert payload["trace_msg"] == pytest.approx(0.0, abs=1e-15)

    def test_verify_cli_quick(self):
        proc = self.run_cli("verify", "--level", "quick")
        assert proc.returncode == 0, proc.stdout + proc.stderr
        assert "invariants hold" in proc.stdout
