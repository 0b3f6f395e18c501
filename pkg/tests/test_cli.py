"""Exit codes, output files, and determinism of the command-line front end."""

import json
import subprocess
import sys

import numpy as np
import pytest

from annealfem.cli import main
from annealfem.fem import LinearSystem, direct_solve, system_from_arrays
from annealfem.ising import build_frame, spd_to_ising, to_standard


def run_cli(*args):
    return main(list(args))


class TestGenSystem:
    def test_writes_loadable_system(self, tmp_path):
        out = tmp_path / "system.json"
        mm = tmp_path / "system.mtx"
        code = run_cli(
            "gen-system", "--problem", "poisson1d", "--nodes", "9",
            "--out", str(out), "--matrix-market", str(mm),
        )
        assert code == 0
        sys_loaded = LinearSystem.load_json(out)
        assert sys_loaded.n == 9
        assert mm.exists()

    def test_rejects_wave(self, tmp_path):
        code = run_cli("gen-system", "--problem", "wave1d", "--out", str(tmp_path / "x.json"))
        assert code == 2


class TestSolve:
    def test_poisson_exhaustive_end_to_end(self, tmp_path):
        out = tmp_path / "run"
        code = run_cli(
            "solve", "--problem", "poisson1d", "--nodes", "9",
            "--sampler", "exhaustive", "--tolerance", "1e-6",
            "--max-iterations", "400", "--seed", "3", "--out", str(out),
        )
        assert code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["success"]
        assert manifest["normalized_residual"] <= 1e-6
        assert set(manifest["outputs"]) == {"trace.csv", "solution.json", "replay.json"}
        solution = json.loads((out / "solution.json").read_text())
        from annealfem.problems import poisson_1d_system

        sys_ref = poisson_1d_system(9)
        u_direct = direct_solve(sys_ref)
        np.testing.assert_allclose(solution["u"], u_direct, atol=1e-4)

    def test_deterministic_traces(self, tmp_path):
        args = (
            "solve", "--problem", "poisson1d", "--nodes", "9",
            "--sampler", "sa", "--sweeps", "40", "--tolerance", "1e-3",
            "--max-iterations", "200", "--seed", "7",
        )
        assert run_cli(*args, "--out", str(tmp_path / "a")) == 0
        assert run_cli(*args, "--out", str(tmp_path / "b")) == 0
        trace_a = (tmp_path / "a" / "trace.csv").read_bytes()
        trace_b = (tmp_path / "b" / "trace.csv").read_bytes()
        assert trace_a == trace_b

    def test_wave_snapshot_count(self, tmp_path):
        out = tmp_path / "wave"
        code = run_cli(
            "solve", "--problem", "wave1d", "--case", "1", "--nodes", "11",
            "--dt", "0.5", "--timesteps", "4", "--sampler", "exhaustive",
            "--max-iterations", "400", "--out", str(out),
        )
        assert code == 0
        solution = json.loads((out / "solution.json").read_text())
        assert len(solution["snapshots"]) == 5
        assert len(solution["times"]) == 5
        traces = [p.name for p in out.iterdir() if p.name.startswith("trace_step_")]
        assert len(traces) == 4

    def test_malformed_config_exits_2_without_outputs(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        out = tmp_path / "nothing"
        code = run_cli("solve", "--config", str(bad), "--out", str(out))
        assert code == 2
        assert not out.exists()

    def test_unknown_config_key_exits_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"probleem": "poisson1d"}))
        assert run_cli("solve", "--config", str(bad)) == 2

    def test_config_file_with_flag_override(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(
            json.dumps(
                {
                    "problem": "poisson1d",
                    "nodes": 9,
                    "sampler": "exhaustive",
                    "tolerance": 1e-4,
                    "max_iterations": 300,
                }
            )
        )
        out = tmp_path / "run"
        code = run_cli("solve", "--config", str(cfg), "--seed", "1", "--out", str(out))
        assert code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["seed"] == 1
        assert manifest["config"]["nodes"] == 9

    def test_tolerance_not_reached_exits_4_with_manifest(self, tmp_path):
        out = tmp_path / "run"
        code = run_cli(
            "solve", "--problem", "poisson1d", "--nodes", "9",
            "--sampler", "exhaustive", "--tolerance", "1e-9",
            "--max-iterations", "2", "--out", str(out),
        )
        assert code == 4
        manifest = json.loads((out / "manifest.json").read_text())
        assert not manifest["success"]
        assert manifest["reason"] == "max_iterations"

    def test_external_system_file(self, tmp_path):
        system = system_from_arrays([[2.0, -1.0], [-1.0, 2.0]], [1.0, 1.0])
        path = tmp_path / "system.json"
        system.save_json(path)
        out = tmp_path / "run"
        code = run_cli(
            "solve", "--problem", "system", "--system-file", str(path),
            "--sampler", "exhaustive", "--tolerance", "1e-8",
            "--max-iterations", "100", "--out", str(out),
        )
        assert code == 0
        solution = json.loads((out / "solution.json").read_text())
        np.testing.assert_allclose(solution["u"], [1.0, 1.0], atol=1e-6)


class TestCosine:
    def test_d2_three(self, tmp_path, capsys):
        out = tmp_path / "report.json"
        code = run_cli("cosine", "--kind", "d2", "--n", "3", "--restarts", "60", "--out", str(out))
        assert code == 0
        report = json.loads(out.read_text())
        assert report["estimate"] == pytest.approx(1.0 / np.sqrt(3.0), abs=1e-3)
        assert "estimate=0.577" in capsys.readouterr().out

    def test_d3_two(self, capsys):
        assert run_cli("cosine", "--kind", "d3", "--n", "2", "--restarts", "60") == 0
        assert "estimate=0.9238" in capsys.readouterr().out

    def test_d4_size_overflow(self):
        assert run_cli("cosine", "--kind", "d4", "--n", "12") == 2


class TestTTT:
    def make_model_file(self, tmp_path):
        system = system_from_arrays([[2.0, -1.0], [-1.0, 2.0]], [1.0, 1.0])
        model = to_standard(spd_to_ising(system, build_frame(system, np.zeros(2), 1.0)))
        path = tmp_path / "model.json"
        path.write_text(json.dumps(model.to_json_dict()))
        return path

    def test_input_smoke(self, tmp_path):
        path = self.make_model_file(tmp_path)
        out = tmp_path / "ttt"
        code = run_cli(
            "ttt", "--input", str(path), "--sweep-grid", "10,20",
            "--reads", "50", "--out", str(out), "--ref-sweeps", "20",
        )
        assert code == 0
        assert (out / "ttt.csv").exists()
        report = json.loads((out / "ttt.json").read_text())
        assert len(report["points"]) == 2

    def test_replay(self, tmp_path):
        run_dir = tmp_path / "run"
        assert run_cli(
            "solve", "--problem", "poisson1d", "--nodes", "9",
            "--sampler", "exhaustive", "--tolerance", "1e-2",
            "--max-iterations", "100", "--out", str(run_dir),
        ) == 0
        out = tmp_path / "ttt"
        code = run_cli(
            "ttt", "--replay", str(run_dir / "replay.json"),
            "--sweep-grid", "10", "--reads", "30", "--iterations", "2",
            "--out", str(out),
        )
        assert code == 0
        report = json.loads((out / "ttt.json").read_text())
        assert report["items"]

    def test_empty_sweep_grid_rejected(self, tmp_path):
        path = self.make_model_file(tmp_path)
        assert run_cli("ttt", "--input", str(path), "--sweep-grid", ",") == 2

    def test_requires_exactly_one_source(self):
        assert run_cli("ttt") == 2


def test_module_entry_point(tmp_path):
    result = subprocess.run(
        [sys.executable, "-m", "annealfem", "cosine", "--kind", "d2", "--n", "2", "--restarts", "20"],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0
    assert "estimate" in result.stdout
