"""Tests for result serialization, state files and bundle layout."""

import json

import numpy as np
import pandas as pd
import pytest

from mechanics.errors import DofMapError
from results import ResultBundle, dumps, load_state, save_state


def test_dumps_is_sorted_and_null_safe():
    text = dumps({"b": np.float64(np.inf), "a": [np.int64(2), np.nan, np.bool_(True)], "c": (1.5,)})
    assert text == dumps({"c": [1.5], "a": [2, None, True], "b": None})
    assert json.loads(text) == {"a": [2, None, True], "b": None, "c": [1.5]}
    assert list(json.loads(text)) == ["a", "b", "c"]


def test_state_round_trip(tmp_path, small_state, dofmap):
    save_state(tmp_path / "state.npz", small_state)
    back = load_state(tmp_path / "state.npz", dofmap)
    np.testing.assert_array_equal(back.values, small_state.values)


def test_state_mesh_mismatch(tmp_path, small_state, fine_dofmap):
    save_state(tmp_path / "state.npz", small_state)
    with pytest.raises(DofMapError, match="4x4"):
        load_state(tmp_path / "state.npz", fine_dofmap)


def test_bundle_layout(tmp_path, small_state):
    sweep = pd.DataFrame({"delta": [0.2, 0.1], "total": [1.0, np.inf], "status": ["ok", "nonphysical"]})
    bundle = ResultBundle(command="sweep", config_echo={"n": 4}, summary={"status": "nonphysical"},
                          state=small_state, sweep=sweep, timings={"sweep": 0.5})
    out = bundle.write(tmp_path / "bundle", ("json",))

    result = json.loads((out / "result.json").read_text())
    assert result["sweep"][1]["total"] is None
    assert result["state"]["n_dofs"] == small_state.dofmap.n_dofs
    assert "timings" not in result
    assert json.loads((out / "timings.json").read_text()) == {"sweep": 0.5}
    assert (out / "sweep.json").is_file()
    assert not (out / "sweep.csv").exists()
    assert (out / "state.npz").is_file()
