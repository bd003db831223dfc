import json
import math

import numpy as np
import pytest

import nodalab as nl
from nodalab import io as nio
from nodalab.cli import (
    ConfigError,
    ExperimentConfig,
    fit_scaling,
    load_config,
    main,
    run_experiment,
)


def write_config(tmp_path, **overrides):
    cfg = {
        "kind": "nodal",
        "geometry_kind": "dirichlet_box",
        "dimension": 2,
        "modes": [[1, 1], [2, 2]],
        "output": str(tmp_path / "out"),
    }
    cfg.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


class TestConfig:
    def test_round_trip(self):
        cfg = ExperimentConfig(kind="scaling", levels=[4, 9], seeds=[1, 2])
        again = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
        assert again == cfg

    def test_rejects_unknown_fields(self):
        with pytest.raises(ValueError, match="unknown config fields"):
            ExperimentConfig.from_dict({"kind": "nodal", "bogus": 1})

    def test_collects_every_violation(self, tmp_path):
        path = write_config(tmp_path, kind="chain", modes=[[0, 1], [1]],
                            deltas=[-1.0], chain_sizes=[6], seeds=[])
        with pytest.raises(ConfigError) as err:
            load_config(path)
        messages = err.value.errors
        assert len(messages) >= 4

    def test_empty_levels_is_success(self, tmp_path):
        path = write_config(tmp_path, kind="nodal", geometry_kind="flat_torus",
                            modes=[], levels=[])
        cfg = load_config(path)
        manifest_path = run_experiment(cfg)
        manifest = json.loads(manifest_path.read_text())
        assert manifest["failures"] == []


class TestRunner:
    def test_nodal_rows_counted(self, tmp_path):
        path = write_config(tmp_path)
        assert main(["nodal", "--config", str(path)]) == 0
        csv_path = tmp_path / "out" / "nodal_domains.csv"
        lines = csv_path.read_text().splitlines()
        assert len(lines) == 1 + 1 + 4  # header + (1,1) + four (2,2) domains

    def test_deterministic_reruns_byte_identical(self, tmp_path):
        path = write_config(tmp_path, kind="scaling", geometry_kind="flat_torus",
                            modes=[], levels=[4, 9], seeds=[1, 2],
                            balls_per_field=20)
        assert main(["scaling", "--config", str(path)]) == 0
        first = (tmp_path / "out" / "scaling.csv").read_bytes()
        assert main(["scaling", "--config", str(path), "--out",
                     str(tmp_path / "out2")]) == 0
        second = (tmp_path / "out2" / "scaling.csv").read_bytes()
        assert first == second

    def test_manifest_hashes_verify(self, tmp_path):
        path = write_config(tmp_path)
        main(["nodal", "--config", str(path)])
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        for artifact in manifest["artifacts"]:
            recorded = artifact["sha256"]
            actual = nio.sha256_file(tmp_path / "out" / artifact["path"])
            assert recorded == actual

    def test_invalid_config_exits_2(self, tmp_path):
        path = write_config(tmp_path, modes=[[0, 1]])
        assert main(["nodal", "--config", str(path)]) == 2

    def test_spectrum_writes_mode_files(self, tmp_path):
        path = write_config(tmp_path, kind="nodal", geometry_kind="flat_torus",
                            modes=[], levels=[5], seeds=[42])
        assert main(["spectrum", "--config", str(path)]) == 0
        mode = nio.load_mode(tmp_path / "out" / "mode_n5_s42.json")
        assert mode.eigenvalue == pytest.approx(20 * math.pi**2)

    def test_chain_reports_written(self, tmp_path):
        path = write_config(tmp_path, kind="chain", geometry_kind="flat_torus",
                            modes=[], levels=[9], seeds=[1], deltas=[0.4],
                            chain_sizes=[5])
        assert main(["chain", "--config", str(path)]) == 0
        reports = list((tmp_path / "out").glob("chain_*.json"))
        assert len(reports) == 1
        data = json.loads(reports[0].read_text())
        assert data["A"] == 5

    def test_seed_override(self, tmp_path):
        path = write_config(tmp_path, kind="scaling", geometry_kind="flat_torus",
                            modes=[], levels=[4], seeds=[1, 2, 3],
                            balls_per_field=5)
        assert main(["scaling", "--config", str(path),
                     "--seed-override", "9"]) == 0
        import csv

        with open(tmp_path / "out" / "scaling.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert {r["seed"] for r in rows} == {"9"}
        assert {r["quantity"] for r in rows} >= {"min_centered_inradius"}

    def test_per_instance_failures_recorded(self, tmp_path):
        path = write_config(tmp_path, kind="capacity",
                            condensers=[{"shape": "sphere", "a": 0.15,
                                         "resolution": 24, "dimension": 3},
                                        {"shape": "nonsense"}],
                            times=[])
        assert main(["capacity", "--config", str(path)]) == 0
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert len(manifest["failures"]) == 1
        assert "nonsense" in manifest["failures"][0]["instance"]


class TestScalingFit:
    def test_exact_power_law(self):
        lam = np.linspace(50, 5000, 12)
        rows = [{"lambda": x, "y": x**-0.5} for x in lam]
        fit = fit_scaling(rows, "y")
        assert fit.slope == pytest.approx(-0.5, abs=1e-12)
        assert fit.r2 == pytest.approx(1.0, abs=1e-12)

    def test_log_corrected_curve_flattens_pure_fit(self):
        lam = np.linspace(50, 5000, 24)
        rows = [{"lambda": x, "y": 3 * x**-0.5 * math.log(x) ** -0.5} for x in lam]
        fit = fit_scaling(rows, "y")
        assert -0.65 < fit.slope < -0.5

    def test_corrected_model_recovers_unit_slope(self):
        lam = np.linspace(50, 5000, 24)
        rows = [{"lambda": x, "y": 3 * x**-0.5 * math.log(x) ** -0.5} for x in lam]
        fit = fit_scaling(rows, "y", "power_with_log_correction", dimension=3)
        assert fit.slope == pytest.approx(-1.0, abs=1e-9)
        assert fit.r2 == pytest.approx(1.0, abs=1e-9)

    def test_rejects_degenerate_design(self):
        rows = [{"lambda": 10.0, "y": 1.0}] * 5
        with pytest.raises(ValueError, match="degenerate"):
            fit_scaling(rows, "y")

    def test_rejects_too_few_points(self):
        rows = [{"lambda": float(x), "y": 1.0} for x in (1, 2, 3)]
        with pytest.raises(ValueError, match="4 points"):
            fit_scaling(rows, "y")

    def test_box_mode_inradius_slope(self):
        rows = []
        for m in range(1, 8):
            mode = nl.box_mode(nl.box(2), (m, m))
            rows.append({"lambda": mode.eigenvalue, "y": 1.0 / (2 * m)})
        fit = fit_scaling(rows, "y")
        assert -0.55 <= fit.slope <= -0.45
        assert fit.r2 >= 0.98
