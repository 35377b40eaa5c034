"""End-to-end tests of the command-line entry point and its exit codes."""

import json
import logging
from pathlib import Path

import numpy as np
import pytest

import cli
from config import config
from mechanics.decomposition import PlateSampleGrid, SampledField3D, write_sampled_field
from services.logger import resolve_level, setup_root_logger

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

SMALL_RUN = {
    "mesh": {"plate_resolution": 4, "rod_elements": 4},
    "material": {"lambda": 1.0, "mu": 1.0},
    "forces": {"f_p": ["0", "0", "0.5"], "f_r": ["0.5", "0", "0.05"]},
    "sweep": {"deltas": [0.2, 0.1], "n": 4, "order": 4},
}


@pytest.fixture(autouse=True)
def no_archive(monkeypatch):
    monkeypatch.setattr(config, "DATABASE_URL", "")
    monkeypatch.setattr(config, "SOLVER_MAX_ITERATIONS", 0)


def write_run(tmp_path: Path, raw: dict, name: str = "run.json") -> Path:
    path = tmp_path / name
    path.write_text(json.dumps(raw))
    return path


def read_result(out: Path) -> dict:
    return json.loads((out / "result.json").read_text())


class TestSolve:

    def test_zero_forces(self, tmp_path):
        out = tmp_path / "zero"
        code = cli.main(["solve", "--config", str(CONFIGS / "zero.json"), "--out", str(out)])
        result = read_result(out)
        assert code == cli.EXIT_OK
        assert result["summary"]["energy"] == 0.0
        assert result["summary"]["status"] == "converged"
        assert result["summary"]["w3_junction_residual"] == 0.0
        assert (out / "state.npz").is_file()
        assert (out / "timings.json").is_file()

    def test_result_is_byte_identical_across_runs(self, tmp_path):
        run = write_run(tmp_path, SMALL_RUN)
        for name in ("a", "b"):
            assert cli.main(["solve", "--config", str(run), "--out", str(tmp_path / name)]) == cli.EXIT_OK
        assert (tmp_path / "a" / "result.json").read_bytes() == (tmp_path / "b" / "result.json").read_bytes()

    def test_constraint_residual_small(self, tmp_path):
        run = write_run(tmp_path, SMALL_RUN)
        cli.main(["solve", "--config", str(run), "--out", str(tmp_path / "out")])
        summary = read_result(tmp_path / "out")["summary"]
        assert summary["w3_ode_residual"] < 1e-12
        assert summary["verdict"] == "certified minimal"

    def test_not_converged_exit_code(self, tmp_path, monkeypatch):
        monkeypatch.setattr(config, "SOLVER_MAX_ITERATIONS", 1)
        run = write_run(tmp_path, SMALL_RUN)
        code = cli.main(["solve", "--config", str(run), "--out", str(tmp_path / "out")])
        assert code == cli.EXIT_NOT_CONVERGED
        assert read_result(tmp_path / "out")["summary"]["status"] == "max-iter"

    def test_continuation_records_every_scale(self, tmp_path):
        run = write_run(tmp_path, SMALL_RUN | {"solver": {"continuation": [0.5, 1.0]}})
        assert cli.main(["solve", "--config", str(run), "--out", str(tmp_path / "out")]) == cli.EXIT_OK
        solves = read_result(tmp_path / "out")["solves"]
        assert [s["load_scale"] for s in solves] == [0.5, 1.0]


class TestSweep:

    def test_sweep_from_saved_state(self, tmp_path):
        run = write_run(tmp_path, SMALL_RUN)
        assert cli.main(["solve", "--config", str(run), "--out", str(tmp_path / "solve")]) == cli.EXIT_OK
        sweep_run = write_run(tmp_path, SMALL_RUN | {"sweep": SMALL_RUN["sweep"] | {"state": "solve/state.npz"}},
                              "sweep.json")
        code = cli.main(["sweep", "--config", str(sweep_run), "--out", str(tmp_path / "sweep")])
        result = read_result(tmp_path / "sweep")
        assert code == cli.EXIT_OK
        assert [row["delta"] for row in result["sweep"]] == [0.2, 0.1]
        assert "solves" not in result
        assert (tmp_path / "sweep" / "sweep.csv").is_file()
        assert result["summary"]["smoothing_energy_change"] >= 0.0

    def test_zero_sweep(self, tmp_path):
        out = tmp_path / "zero"
        assert cli.main(["sweep", "--config", str(CONFIGS / "zero.json"), "--out", str(out)]) == cli.EXIT_OK
        rows = read_result(out)["sweep"]
        assert all(row["status"] == "ok" and row["total"] == 0.0 for row in rows)


class TestOtherCommands:

    def test_check_forces(self, tmp_path, capsys):
        out = tmp_path / "forces"
        assert cli.main(["check-forces", "--config", str(CONFIGS / "demo.json"), "--out", str(out)]) == cli.EXIT_OK
        assert read_result(out)["admissibility"]["verdict"] == "admissible"
        assert "verdict" in capsys.readouterr().out

    def test_decompose_plate_file(self, tmp_path):
        grid = PlateSampleGrid.uniform(2.0, 2.0, 0.1, 5, 5)
        points = grid.points
        values = np.column_stack([0.3 * points[:, 2], 0 * points[:, 2], 0.01 + 0 * points[:, 2]])
        write_sampled_field(SampledField3D(grid, values), tmp_path / "plate.csv")
        out = tmp_path / "decomposed"
        code = cli.main(["decompose", "--field", str(tmp_path / "plate.csv"), "--kind", "plate", "--out", str(out)])
        assert code == cli.EXIT_OK
        assert read_result(out)["residuals"]["reconstruction_error"] < 1e-14
        assert (out / "decomposition_plate.csv").is_file()


class TestInputErrors:

    def test_missing_material(self, tmp_path):
        run = write_run(tmp_path, {"geometry": {"a1": 2.0}})
        assert cli.main(["solve", "--config", str(run), "--out", str(tmp_path / "out")]) == cli.EXIT_CONFIG
        assert not (tmp_path / "out").exists()

    def test_missing_run_file(self, tmp_path):
        assert cli.main(["solve", "--config", str(tmp_path / "absent.json")]) == cli.EXIT_CONFIG

    def test_truncated_field_file(self, tmp_path):
        (tmp_path / "rod.csv").write_text("# kind=rod delta=0.1 shape=3,2,4 field=deformation\nx1,x2,x3,u1,u2,u3\n")
        assert cli.main(["decompose", "--field", str(tmp_path / "rod.csv"), "--out", str(tmp_path / "o")]) \
            == cli.EXIT_CONFIG

    def test_bad_environment(self, tmp_path, monkeypatch):
        monkeypatch.setattr(config, "THREADS", 0)
        assert cli.main(["solve", "--config", str(CONFIGS / "zero.json"), "--out", str(tmp_path)]) \
            == cli.EXIT_CONFIG


def test_log_level_override(tmp_path):
    try:
        code = cli.main(["--log-level", "warning", "check-forces", "--config", str(CONFIGS / "zero.json"),
                         "--out", str(tmp_path)])
        assert code == cli.EXIT_OK
        assert logging.getLogger().level == logging.WARNING
    finally:
        setup_root_logger()
    assert resolve_level("verbose") == logging.INFO
