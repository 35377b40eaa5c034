"""Tests for run-file parsing, validation and the normalized echo."""

import json
from pathlib import Path

import pytest

from run_config import ConfigError, RunConfig, load_run_config, parse_run_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

MINIMAL = {"material": {"lambda": 1.0, "mu": 1.0}}


def with_block(name: str, block) -> dict:
    return MINIMAL | {name: block}


class TestDefaults:

    def test_minimal_file(self):
        rc = RunConfig.from_dict(MINIMAL)
        assert rc.geometry.a1 == rc.geometry.a2 == 2.0
        assert rc.geometry.clamped == ("left", "right", "bottom", "top")
        assert (rc.mesh.plate_nx, rc.mesh.rod_elements, rc.mesh.plate_order, rc.mesh.rod_order) == (8, 8, 4, 3)
        assert rc.sweep.deltas == (0.2, 0.1, 0.05)
        assert rc.recovery.junction_frame == "rate"
        assert rc.build_forces().is_zero

    def test_engineering_constants(self):
        rc = RunConfig.from_dict({"material": {"young": 2.6, "poisson": 0.3}})
        assert rc.material.lam == pytest.approx(1.5)
        assert rc.material.mu == pytest.approx(1.0)

    def test_bundled_configs_load(self):
        demo = load_run_config(CONFIGS / "demo.json")
        assert demo.build_thresholds().threshold_p == 5.0
        assert demo.build_coefficients().name == "consistent"
        assert load_run_config(CONFIGS / "zero.json").sweep.deltas == (0.2, 0.1)


class TestValidation:

    def test_missing_material(self):
        with pytest.raises(ConfigError) as info:
            RunConfig.from_dict({"geometry": {"a1": 2.0}})
        assert info.value.path == "material"

    def test_both_material_forms(self):
        with pytest.raises(ConfigError, match="either"):
            RunConfig.from_dict({"material": {"lambda": 1.0, "mu": 1.0, "young": 2.5}})

    def test_invalid_material(self):
        with pytest.raises(ConfigError) as info:
            RunConfig.from_dict({"material": {"young": 1.0, "poisson": 0.5}})
        assert info.value.path == "material"

    @pytest.mark.parametrize("name, block, path", [
        ("geometry", {"a3": 1.0}, "geometry"),
        ("geometry", {"clamped": ["front"]}, "geometry.clamped[0]"),
        ("mesh", {"plate_resolution": 7}, "mesh"),
        ("mesh", {"rod_elements": 2.5}, "mesh.rod_elements"),
        ("material", {"lambda": 1.0, "mu": 1.0, "coefficients": "rounded"}, "material.coefficients"),
        ("forces", {"f_p": ["0", "0"]}, "forces"),
        ("forces", {"f_r": {"table": "missing.csv"}}, "forces.f_r.table"),
        ("solver", {"armijo": 0.9}, "solver"),
        ("solver", {"continuation": [1.0, 0.5]}, "solver.continuation"),
        ("sweep", {"deltas": [0.1, 0.2]}, "sweep.deltas"),
        ("sweep", {"deltas": [0.3, 0.1], "n": 4}, "sweep.deltas"),
        ("sweep", {"n": 1}, "sweep.n"),
        ("recovery", {"junction_frame": "body"}, "recovery.junction_frame"),
        ("output", {"formats": ["xml"]}, "output.formats"),
        ("extra", {}, "run"),
    ])
    def test_field_path_reported(self, name, block, path):
        raw = MINIMAL | {name: block} if name != "material" else {"material": block}
        with pytest.raises(ConfigError) as info:
            RunConfig.from_dict(raw)
        assert info.value.path == path

    def test_transition_must_fit_rod(self):
        with pytest.raises(ConfigError) as info:
            RunConfig.from_dict(MINIMAL | {"geometry": {"rod_length": 0.4}, "sweep": {"n": 4, "deltas": [0.1]}})
        assert info.value.path == "sweep.n"

    def test_json_syntax_error_has_line(self):
        text = '{\n  "material": {"lambda": 1.0, "mu": 1.0},\n  "mesh": {"rod_elements": 4,}\n}\n'
        with pytest.raises(ConfigError) as info:
            parse_run_config(text)
        assert info.value.line == 3
        assert "line 3" in str(info.value)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_run_config(tmp_path / "absent.json")


class TestEcho:

    def test_deterministic_and_complete(self):
        rc = load_run_config(CONFIGS / "demo.json")
        assert rc.echo() == load_run_config(CONFIGS / "demo.json").echo()
        echoed = json.loads(rc.echo())
        assert echoed["forces"]["admissibility"] == {"threshold_p": 5.0, "threshold_r": 1.0}
        assert echoed["solver"]["gradient_tolerance"] == 1e-10

    def test_echo_parses_back_to_same_config(self):
        rc = RunConfig.from_dict(with_block("mesh", {"plate_resolution": [4, 6], "rod_elements": 4}))
        again = parse_run_config(rc.echo())
        assert again == rc
        assert again.echo() == rc.echo()

    def test_tables_resolve_against_run_file(self, tmp_path):
        (tmp_path / "fr.csv").write_text("x3,c1,c2,c3\n0,0,0,1\n1,0,0,1\n")
        (tmp_path / "run.json").write_text(json.dumps(with_block("forces", {"f_r": {"table": "fr.csv"}})))
        rc = load_run_config(tmp_path / "run.json")
        assert not rc.build_forces().is_zero
