"""On-disk formats: mode files (JSON), grids (raw float64 + JSON sidecar),
CSV tables and hashed run manifests."""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .spectra import EigenMode, Geometry, ModeTerm, ScalarGrid


def mode_to_dict(mode: EigenMode) -> dict:
    return {
        "kind": mode.geometry.kind,
        "d": mode.geometry.dimension,
        "sides": list(mode.geometry.side_lengths),
        "lambda": mode.eigenvalue,
        "terms": [{"k": list(t.k), "phase": t.phase, "coeff": t.coeff}
                  for t in mode.terms],
    }


def mode_from_dict(data: dict) -> EigenMode:
    geom = Geometry(data["kind"], data["d"], tuple(data["sides"]))
    terms = tuple(ModeTerm(tuple(t["k"]), t["phase"], float(t["coeff"]))
                  for t in data["terms"])
    return EigenMode(geom, float(data["lambda"]), terms)


def save_mode(mode: EigenMode, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(mode_to_dict(mode), indent=1))
    return path


def load_mode(path) -> EigenMode:
    return mode_from_dict(json.loads(Path(path).read_text()))


def save_grid(grid: ScalarGrid, path_base) -> tuple[Path, Path]:
    """Write values as raw little-endian float64 plus a JSON sidecar header."""
    base = Path(path_base)
    raw = base.with_suffix(".f64")
    header = base.with_suffix(".json")
    grid.values.astype("<f8").tofile(raw)
    header.write_text(json.dumps({
        "d": grid.geometry.dimension,
        "N": grid.resolution,
        "geometry": {
            "kind": grid.geometry.kind,
            "sides": list(grid.geometry.side_lengths),
        },
        "source": grid.source,
    }, indent=1))
    return raw, header


def load_grid(path_base) -> ScalarGrid:
    base = Path(path_base)
    meta = json.loads(base.with_suffix(".json").read_text())
    geom = Geometry(meta["geometry"]["kind"], meta["d"],
                    tuple(meta["geometry"]["sides"]))
    n = meta["N"]
    values = np.fromfile(base.with_suffix(".f64"), dtype="<f8").reshape(
        (n,) * meta["d"])
    return ScalarGrid(geom, n, values, source=meta.get("source", ""))


def format_float(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_csv(path, rows: list[dict], columns: list[str] | None = None) -> Path:
    path = Path(path)
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_float(row.get(c, "")) for c in columns])
    return path


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def sweep_long_rows(rows: list[dict], quantities: list[str]) -> list[dict]:
    """Wide sweep rows -> long rows {lambda, n, seed, quantity, value}."""
    out = []
    for row in rows:
        for q in quantities:
            if q in row:
                out.append({
                    "lambda": row["lambda"], "n": row.get("n", ""),
                    "seed": row.get("seed", ""), "quantity": q,
                    "value": row[q],
                })
    return out


def rows_from_long_csv(path, quantity: str) -> list[dict]:
    """Back out (lambda, y) rows for one quantity from a long-format CSV."""
    out = []
    with Path(path).open() as fh:
        for row in csv.DictReader(fh):
            if row.get("quantity") == quantity:
                out.append({"lambda": float(row["lambda"]),
                            quantity: float(row["value"])})
    return out


def save_flow_state(state, path_base) -> tuple[Path, Path]:
    """Persist a heat-flow checkpoint: raw temperature grid plus metadata."""
    base = Path(path_base)
    raw = base.with_suffix(".f64")
    state.temperature.astype("<f8").tofile(raw)
    meta = base.with_suffix(".json")
    meta.write_text(json.dumps({
        "t": state.time, "step": state.step_size,
        "residual": state.solver_residual,
        "shape": list(state.temperature.shape),
        "spacing": list(state.condenser.spacing),
        "label": state.condenser.label,
    }, indent=1))
    return raw, meta


def save_condenser(cond, path_base) -> tuple[Path, Path]:
    """Persist condenser masks in the raw-grid format (K=2, U=1, outside=0)."""
    base = Path(path_base)
    raw = base.with_suffix(".f64")
    coded = np.zeros(cond.shape)
    coded[cond.u_mask] = 1.0
    coded[cond.k_mask] = 2.0
    coded.astype("<f8").tofile(raw)
    meta = base.with_suffix(".json")
    meta.write_text(json.dumps({
        "shape": list(cond.shape), "spacing": list(cond.spacing),
        "origin": list(cond.origin), "label": cond.label,
        "u_box": cond.u_box,
    }, indent=1))
    return raw, meta


def load_condenser(path_base):
    from .condensers import CondenserSpec

    base = Path(path_base)
    meta = json.loads(base.with_suffix(".json").read_text())
    coded = np.fromfile(base.with_suffix(".f64"), dtype="<f8").reshape(meta["shape"])
    return CondenserSpec(
        shape=tuple(meta["shape"]), spacing=tuple(meta["spacing"]),
        origin=tuple(meta["origin"]), u_mask=coded >= 1.0, k_mask=coded >= 2.0,
        label=meta.get("label", ""),
        u_box=tuple(tuple(b) for b in meta["u_box"]) if meta.get("u_box") else None,
    )
