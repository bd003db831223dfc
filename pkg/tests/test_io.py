import json
import math

import numpy as np
import pytest

import nodalab as nl
from nodalab import io as nio
from nodalab.cli import main
from nodalab.condensers import concentric_sphere_condenser
from nodalab.heat import heat_flow_psi


def test_mode_round_trip(tmp_path):
    mode = nl.random_mode(nl.torus(2), 5, 42)
    nio.save_mode(mode, tmp_path / "mode.json")
    again = nio.load_mode(tmp_path / "mode.json")
    assert again == mode


def test_grid_round_trip(tmp_path):
    grid = nl.sample_field(nl.random_mode(nl.torus(2), 5, 1), 48)
    nio.save_grid(grid, tmp_path / "grid")
    again = nio.load_grid(tmp_path / "grid")
    assert np.array_equal(again.values, grid.values)
    assert again.geometry == grid.geometry
    assert again.resolution == grid.resolution


def test_raw_grid_is_little_endian_float64(tmp_path):
    grid = nl.sample_field(nl.box_mode(nl.box(2), (1, 1)), 16)
    raw, header = nio.save_grid(grid, tmp_path / "grid")
    data = np.fromfile(raw, dtype="<f8")
    assert data.size == 16 * 16
    meta = json.loads(header.read_text())
    assert meta["N"] == 16 and meta["d"] == 2


def test_flow_state_checkpoint(tmp_path):
    cond = concentric_sphere_condenser(48, 2, 0.1, 0.3)
    state = heat_flow_psi(cond, 0.01, 1e-3)[-1]
    raw, meta_path = nio.save_flow_state(state, tmp_path / "state")
    meta = json.loads(meta_path.read_text())
    assert meta["t"] == pytest.approx(0.01)
    assert meta["residual"] <= 1e-9
    data = np.fromfile(raw, dtype="<f8").reshape(meta["shape"])
    assert np.array_equal(data, state.temperature)


def test_condenser_round_trip(tmp_path):
    cond = concentric_sphere_condenser(32, 3, 0.12, 0.3)
    nio.save_condenser(cond, tmp_path / "cond")
    again = nio.load_condenser(tmp_path / "cond")
    assert np.array_equal(again.k_mask, cond.k_mask)
    assert np.array_equal(again.u_mask, cond.u_mask)
    assert again.spacing == cond.spacing


def test_long_format_sweep_and_fit_command(tmp_path, capsys):
    rows = [{"lambda": float(x), "n": i, "seed": 0, "y": x**-0.5}
            for i, x in enumerate((50.0, 200.0, 800.0, 3200.0, 12800.0))]
    long_rows = nio.sweep_long_rows(rows, ["y"])
    path = nio.write_csv(tmp_path / "sweep.csv", long_rows,
                         columns=["lambda", "n", "seed", "quantity", "value"])
    assert main(["fit", "--table", str(path), "--y-column", "y"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["slope"] == pytest.approx(-0.5, abs=1e-12)
