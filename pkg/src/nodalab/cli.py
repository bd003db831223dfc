"""Configuration-driven experiment runner and scaling-law regression.

A single JSON config describes one experiment sweep.  Runs are deterministic
given the config (all randomness flows from the listed seeds), artifacts are
CSV or JSON files, and a manifest records every artifact with a content hash.
Exit codes: 0 success, 2 config validation failure, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import traceback
from dataclasses import dataclass, field, asdict
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import io as nio
from .capacity import capacity_heat_bound_check, variational_capacity
from .condensers import (
    box_mask,
    concentric_sphere_condenser,
    l_shape_mask,
    min_level,
    radial_level,
    sphere_mask,
    two_sphere_mask,
    unit_box_condenser,
)
from .doubling import df_sweep, main_theorem_sweep, run_chain
from .heat import kernel_bound_report
from .nodal import classical_bounds_report, inradius_report, label_nodal_domains, nodal_csv_rows
from .spectra import (
    Geometry,
    box_mode,
    min_resolution,
    random_mode,
    sample_field,
)

EXPERIMENT_KINDS = ("nodal", "chain", "capacity", "heat_bounds", "scaling")


@dataclass
class ExperimentConfig:
    kind: str
    geometry_kind: str = "flat_torus"
    dimension: int = 2
    side_lengths: list[float] = field(default_factory=list)
    levels: list[int] = field(default_factory=list)
    modes: list[list[int]] = field(default_factory=list)
    seeds: list[int] = field(default_factory=list)
    samples_per_wavelength: int = 16
    resolution_factor: float = 1.0
    deltas: list[float] = field(default_factory=list)
    chain_sizes: list[int] = field(default_factory=list)
    condensers: list[dict] = field(default_factory=list)
    times: list[float] = field(default_factory=list)
    balls_per_field: int = 100
    output: str = "out"

    def geometry(self) -> Geometry:
        return Geometry(self.geometry_kind, self.dimension,
                        tuple(self.side_lengths) if self.side_lengths else ())

    def validate(self) -> list[str]:
        errors = []
        if self.kind not in EXPERIMENT_KINDS:
            errors.append(f"kind must be one of {EXPERIMENT_KINDS}, got {self.kind!r}")
        try:
            geom = self.geometry()
        except ValueError as e:
            errors.append(f"geometry: {e}")
            geom = None
        if self.kind in ("nodal", "scaling", "chain"):
            if geom is not None and geom.is_torus and not self.levels and self.kind != "nodal":
                errors.append("torus sweeps need a nonempty levels list")
            if geom is not None and not geom.is_torus and not self.modes and not self.levels:
                errors.append("box sweeps need a modes list")
        if self.kind in ("scaling", "chain") and not self.seeds:
            errors.append(f"{self.kind} sweeps need a seeds list")
        for lv in self.levels:
            if lv < 0:
                errors.append(f"levels must be >= 0, got {lv}")
        for m in self.modes:
            if geom is not None and len(m) != geom.dimension:
                errors.append(f"mode index {m} has wrong dimension")
            if any(v < 1 for v in m):
                errors.append(f"mode indices must be >= 1, got {m}")
        for dlt in self.deltas:
            if dlt <= 0:
                errors.append(f"deltas must be positive, got {dlt}")
        for a in self.chain_sizes:
            if a % 4 != 1 or a < 5:
                errors.append(f"chain sizes must be 4*A'+1 >= 5, got {a}")
        for t in self.times:
            if t <= 0:
                errors.append(f"times must be positive, got {t}")
        if self.samples_per_wavelength < 4:
            errors.append("samples_per_wavelength must be at least 4")
        if self.kind == "capacity" and not self.condensers:
            errors.append("capacity experiments need a condensers list")
        for spec in self.condensers:
            if "shape" not in spec:
                errors.append(f"condenser entry missing 'shape': {spec}")
        return errors

    @staticmethod
    def from_dict(data: dict) -> "ExperimentConfig":
        known = {f for f in ExperimentConfig.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return ExperimentConfig(**data)

    def to_dict(self) -> dict:
        return asdict(self)


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


def load_config(path) -> ExperimentConfig:
    cfg = ExperimentConfig.from_dict(json.loads(Path(path).read_text()))
    errors = cfg.validate()
    if errors:
        raise ConfigError(errors)
    return cfg


@dataclass
class Manifest:
    config: dict
    created: str
    artifacts: list[dict] = field(default_factory=list)
    failures: list[dict] = field(default_factory=list)

    def add(self, path: Path, kind: str):
        self.artifacts.append({
            "path": path.name, "kind": kind, "sha256": nio.sha256_file(path),
        })

    def fail(self, instance: str, err: Exception):
        self.failures.append({"instance": instance, "error": f"{type(err).__name__}: {err}"})

    def write(self, outdir: Path) -> Path:
        path = outdir / "manifest.json"
        path.write_text(json.dumps(asdict(self), indent=1))
        return path


def _field_instances(cfg: ExperimentConfig):
    """Yield (name, grid) pairs for the configured fields."""
    geom = cfg.geometry()
    if geom.is_torus:
        for n in cfg.levels:
            for seed in (cfg.seeds or [0]):
                mode = random_mode(geom, n, seed)
                if mode is None:
                    continue
                res = int(math.ceil(min_resolution(geom, mode.eigenvalue,
                                                   cfg.samples_per_wavelength)
                                    * cfg.resolution_factor))
                yield f"torus_n{n}_s{seed}", sample_field(mode, res)
    else:
        for m in cfg.modes:
            mode = box_mode(geom, m)
            res = int(math.ceil(min_resolution(geom, mode.eigenvalue,
                                               cfg.samples_per_wavelength)
                                * cfg.resolution_factor))
            yield "box_m" + "x".join(map(str, m)), sample_field(mode, res)


def _nodal_instance(item):
    name, grid = item
    lam = grid.eigenvalue
    labeling = label_nodal_domains(grid)
    report = inradius_report(labeling, grid)
    bounds = classical_bounds_report(labeling, grid, lam)
    return [{"instance": name, **row}
            for row in nodal_csv_rows(labeling, grid, lam, report, bounds)]


def run_nodal(cfg: ExperimentConfig, outdir: Path, manifest: Manifest,
              threads: int = 1):
    rows = []
    instances = list(_field_instances(cfg))
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {pool.submit(_nodal_instance, item): item[0]
                       for item in instances}
            for fut, name in futures.items():
                try:
                    rows.extend(fut.result())
                except Exception as e:
                    manifest.fail(name, e)
    else:
        for item in instances:
            try:
                rows.extend(_nodal_instance(item))
            except Exception as e:  # per-instance isolation
                manifest.fail(item[0], e)
    rows.sort(key=lambda r: (r["instance"], r["domain_id"]))
    path = nio.write_csv(outdir / "nodal_domains.csv", rows)
    manifest.add(path, "nodal-domains")


def run_chain_experiment(cfg: ExperimentConfig, outdir: Path, manifest: Manifest):
    for name, grid in _field_instances(cfg):
        labeling = label_nodal_domains(grid)
        did = int(np.argmax(labeling.max_abs[1:]) + 1)
        for delta in (cfg.deltas or [0.4]):
            for a_size in (cfg.chain_sizes or [5, 9, 13, 17]):
                inst = f"{name}_delta{delta}_A{a_size}"
                try:
                    report = run_chain(grid, labeling, did, delta, a_size)
                    path = outdir / f"chain_{inst}.json"
                    path.write_text(report.to_json())
                    manifest.add(path, "chain-report")
                except Exception as e:
                    manifest.fail(inst, e)


def build_condenser(spec: dict, resolution: int | None = None, dimension: int = 3):
    """Condenser from a config entry: shape + parameters."""
    shape = spec["shape"]
    res = resolution or spec.get("resolution", 64)
    dim = spec.get("dimension", dimension)
    a = spec.get("a", 0.15)
    b = spec.get("b", 0.3)
    center = tuple(spec.get("center", (0.5,) * dim))
    if shape == "concentric_sphere":
        return concentric_sphere_condenser(res, dim, a, b)
    if shape == "sphere":
        return unit_box_condenser(
            res, dim, lambda s, h, o: sphere_mask(s, h, o, center, a),
            label=f"sphere(a={a})",
            k_level_builder=lambda s, h, o: radial_level(s, h, o, center, a))
    if shape == "cube":
        lo = tuple(c - a for c in center)
        hi = tuple(c + a for c in center)
        return unit_box_condenser(
            res, dim, lambda s, h, o: box_mask(s, h, o, lo, hi),
            label=f"cube(half={a})")
    if shape == "slab":
        lo = [0.25] * dim
        hi = [0.75] * dim
        lo[-1] = center[-1] - a
        hi[-1] = center[-1] + a
        return unit_box_condenser(
            res, dim, lambda s, h, o: box_mask(s, h, o, lo, hi),
            label=f"slab(half={a})")
    if shape == "l_shape":
        lo = tuple(c - a for c in center)
        hi = tuple(c + a for c in center)
        return unit_box_condenser(
            res, dim, lambda s, h, o: l_shape_mask(s, h, o, lo, hi),
            label=f"lshape(half={a})")
    if shape == "two_sphere":
        off = spec.get("offset", 0.15)
        centers = [tuple(c - (off if ax == 0 else 0) for ax, c in enumerate(center)),
                   tuple(c + (off if ax == 0 else 0) for ax, c in enumerate(center))]

        def two_level(s, h, o):
            return min_level([radial_level(s, h, o, c, a) for c in centers])

        return unit_box_condenser(
            res, dim, lambda s, h, o: two_sphere_mask(s, h, o, centers, a),
            label=f"twosphere(a={a})", k_level_builder=two_level)
    raise ValueError(f"unknown condenser shape {shape!r}")


def run_capacity(cfg: ExperimentConfig, outdir: Path, manifest: Manifest):
    rows = []
    for spec in cfg.condensers:
        inst = spec.get("shape", "?")
        try:
            cond = build_condenser(spec)
            cap = variational_capacity(cond)
            row = {"shape": inst, "a": spec.get("a", ""), "b": spec.get("b", ""),
                   "N": cond.shape[0], "cap": cap.value,
                   "flux": cap.flux_value, "relative_gap": cap.relative_gap}
            if spec.get("analytic"):
                row["analytic"] = spec["analytic"]
                row["rel_err"] = abs(cap.value - spec["analytic"]) / spec["analytic"]
            if spec.get("probe") and cfg.times:
                chk = capacity_heat_bound_check(cond, tuple(spec["probe"]),
                                                cfg.times[0])
                row["margin1"] = chk.margin1
                row["proposition_ratio"] = chk.proposition_ratio
            rows.append(row)
        except Exception as e:
            manifest.fail(inst, e)
    path = nio.write_csv(outdir / "capacity.csv", rows)
    manifest.add(path, "capacity")


def run_heat_bounds(cfg: ExperimentConfig, outdir: Path, manifest: Manifest):
    geom = cfg.geometry()
    t_grid = cfg.times or [1e-3, 1e-2, 1e-1]
    rng = np.random.default_rng(12345)
    pairs = []
    center = tuple(0.5 * L for L in geom.side_lengths)
    pairs.append((center, center))
    for _ in range(6):
        x = tuple(rng.uniform(0.3, 0.7) * L for L in geom.side_lengths)
        y = tuple(rng.uniform(0.3, 0.7) * L for L in geom.side_lengths)
        pairs.append((x, y))
    report = kernel_bound_report(geom, t_grid, pairs)
    path = nio.write_csv(outdir / "heat_bounds.csv", report.rows,
                         columns=["t", "dist", "value", "bound", "margin"])
    manifest.add(path, "heat-bounds")
    summary = outdir / "heat_bounds_fit.json"
    summary.write_text(json.dumps({
        "c1_fit": report.c1_fit, "c2_fixed": report.c2_fixed,
        "c3_fit": report.c3_fit, "norris_epsilon": report.norris_epsilon,
    }, indent=1))
    manifest.add(summary, "heat-bounds-fit")


def run_scaling(cfg: ExperimentConfig, outdir: Path, manifest: Manifest):
    geom = cfg.geometry()
    rows = main_theorem_sweep(geom, cfg.levels, cfg.seeds,
                              resolution_factor=cfg.resolution_factor)
    quantities = ["min_centered_inradius", "lam_inv_sqrt", "corrected_scale",
                  "fk_min", "n_domains"]
    path = nio.write_csv(outdir / "scaling.csv",
                         nio.sweep_long_rows(rows, quantities),
                         columns=["lambda", "n", "seed", "quantity", "value"])
    manifest.add(path, "scaling")
    if len(rows) >= 4:
        fit = fit_scaling(rows, "min_centered_inradius", "pure_power")
        fit_path = outdir / "scaling_fit.json"
        fit_path.write_text(json.dumps({
            "slope": fit.slope, "intercept": fit.intercept, "r2": fit.r2,
            "model": fit.model, "points": len(fit.pairs),
        }, indent=1))
        manifest.add(fit_path, "scaling-fit")
    dfrows = df_sweep(geom, cfg.levels, cfg.seeds, cfg.balls_per_field)
    dfpath = nio.write_csv(outdir / "doubling_sweep.csv",
                           nio.sweep_long_rows(dfrows, ["N_max"]),
                           columns=["lambda", "n", "seed", "quantity", "value"])
    manifest.add(dfpath, "doubling-sweep")


RUNNERS = {
    "nodal": run_nodal,
    "chain": run_chain_experiment,
    "capacity": run_capacity,
    "heat_bounds": run_heat_bounds,
    "scaling": run_scaling,
}


def run_experiment(cfg: ExperimentConfig, outdir=None, threads: int = 1) -> Path:
    """Run one configured experiment; returns the manifest path."""
    errors = cfg.validate()
    if errors:
        raise ConfigError(errors)
    outdir = Path(outdir or cfg.output)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = Manifest(config=cfg.to_dict(),
                        created=datetime.now(timezone.utc).isoformat())
    if cfg.kind == "nodal":
        run_nodal(cfg, outdir, manifest, threads=threads)
    else:
        RUNNERS[cfg.kind](cfg, outdir, manifest)
    return manifest.write(outdir)


@dataclass
class ScalingFit:
    pairs: list[tuple[float, float]]
    slope: float
    intercept: float
    r2: float
    model: str


def fit_scaling(table, y_column: str, model: str = "pure_power",
                dimension: int | None = None) -> ScalingFit:
    """Least squares of log y against log lambda (or the log-corrected scale).

    ``pure_power`` regresses on log(lambda); ``power_with_log_correction``
    regresses on log(lambda^{1/2} (log lambda)^{(d-2)/2}) instead.
    """
    if model not in ("pure_power", "power_with_log_correction"):
        raise ValueError(f"unknown model {model!r}")
    lam = np.array([float(row["lambda"]) for row in table])
    y = np.array([float(row[y_column]) for row in table])
    if lam.size < 4:
        raise ValueError("need at least 4 points")
    if np.any(y <= 0):
        raise ValueError("y values must be positive for a log fit")
    if np.ptp(lam) <= 0:
        raise ValueError("degenerate design: all lambda equal")
    if model == "pure_power":
        x = np.log(lam)
    else:
        if dimension is None:
            raise ValueError("log-corrected model needs the dimension")
        x = np.log(np.sqrt(lam) * np.log(lam) ** ((dimension - 2) / 2.0))
    ylog = np.log(y)
    slope, intercept = np.polyfit(x, ylog, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((ylog - pred) ** 2))
    ss_tot = float(np.sum((ylog - ylog.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return ScalingFit(
        pairs=[(float(a), float(b)) for a, b in zip(x, ylog)],
        slope=float(slope), intercept=float(intercept), r2=float(r2), model=model,
    )


def _spectrum_command(args) -> int:
    cfg = load_config(args.config)
    geom = cfg.geometry()
    outdir = Path(args.out or cfg.output)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = Manifest(config=cfg.to_dict(),
                        created=datetime.now(timezone.utc).isoformat())
    if geom.is_torus:
        for n in cfg.levels:
            for seed in (cfg.seeds or [0]):
                mode = random_mode(geom, n, seed)
                if mode is None:
                    continue
                path = nio.save_mode(mode, outdir / f"mode_n{n}_s{seed}.json")
                manifest.add(path, "mode")
    else:
        for m in cfg.modes:
            path = nio.save_mode(box_mode(geom, m),
                                 outdir / ("mode_m" + "x".join(map(str, m)) + ".json"))
            manifest.add(path, "mode")
    manifest.write(outdir)
    return 0


def _fit_command(args) -> int:
    import csv as _csv

    with open(args.table) as fh:
        reader = _csv.DictReader(fh)
        columns = reader.fieldnames or []
        rows = list(reader)
    if "quantity" in columns:  # long-format sweep table
        rows = nio.rows_from_long_csv(args.table, args.y_column)
    fit = fit_scaling(rows, args.y_column, args.model, dimension=args.dimension)
    print(json.dumps({"slope": fit.slope, "intercept": fit.intercept,
                      "r2": fit.r2, "model": fit.model}))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nodalab",
        description="Experiment runner for nodal-domain geometry on flat boxes and tori")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON experiment config")
    common.add_argument("--out", default=None, help="output directory override")
    common.add_argument("--threads", type=int, default=1,
                        help="worker threads for independent instances")
    common.add_argument("--seed-override", type=int, default=None,
                        help="replace the config seed list with one seed")

    for name in ("nodal", "chain", "capacity", "heat-bounds", "scaling", "spectrum"):
        sub.add_parser(name, parents=[common])

    fitp = sub.add_parser("fit")
    fitp.add_argument("--table", required=True, help="CSV with lambda and y columns")
    fitp.add_argument("--y-column", default="min_centered_inradius")
    fitp.add_argument("--model", default="pure_power",
                      choices=["pure_power", "power_with_log_correction"])
    fitp.add_argument("--dimension", type=int, default=None)

    args = parser.parse_args(argv)

    if args.command == "fit":
        return _fit_command(args)

    try:
        cfg = load_config(args.config)
    except ConfigError as e:
        for msg in e.errors:
            print(f"config error: {msg}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2

    if args.seed_override is not None:
        cfg.seeds = [args.seed_override]
    if args.command == "spectrum":
        return _spectrum_command(args)

    cfg.kind = args.command.replace("-", "_")
    errors = cfg.validate()
    if errors:
        for msg in errors:
            print(f"config error: {msg}", file=sys.stderr)
        return 2
    try:
        manifest_path = run_experiment(cfg, args.out, threads=args.threads)
    except Exception:
        traceback.print_exc()
        return 3
    manifest = json.loads(manifest_path.read_text())
    print(f"wrote {len(manifest['artifacts'])} artifacts to {manifest_path.parent}")
    if manifest["failures"]:
        print(f"{len(manifest['failures'])} instance failures recorded in the manifest",
              file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
