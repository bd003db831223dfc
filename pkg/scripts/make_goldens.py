#!/usr/bin/env python3
"""Regenerate the pinned golden values under tests/golden/.

Each value is computed once by the library and frozen; tests compare later
runs against these files at stated tolerances.  Rerun only when an
intentional change invalidates them, and commit the diff.
"""

import json
import math
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

import nodalab as nl
from nodalab.condensers import concentric_sphere_condenser
from nodalab.heat import (
    heat_flow_psi,
    deficit_identity_check,
    intersection_check,
    kernel_bound_report,
)
from nodalab.regions import Ball

GOLDEN_DIR = Path(__file__).resolve().parent.parent / "tests" / "golden"


def write(name: str, payload: dict):
    GOLDEN_DIR.mkdir(parents=True, exist_ok=True)
    path = GOLDEN_DIR / f"{name}.json"
    path.write_text(json.dumps(payload, indent=1, sort_keys=True))
    print(f"wrote {path}")


def golden_coefficients():
    g = nl.torus(2)
    mode = nl.random_mode(g, 5, 42)
    write("random_combination_d2_n5_seed42", {
        "coefficients": [t.coeff for t in mode.terms],
        "k": [list(t.k) for t in mode.terms],
        "phase": [t.phase for t in mode.terms],
    })


def golden_chain():
    g = nl.torus(3)
    mode = nl.random_mode(g, 25, 7)
    grid = nl.sample_field(mode, nl.min_resolution(g, mode.eigenvalue))
    lab = nl.label_nodal_domains(grid)
    ci = nl.centered_inradius(lab)
    did = int(np.argmin(ci) + 1)
    out = {}
    for delta in (0.4, 3.0):
        rep = nl.run_chain(grid, lab, did, delta, 9)
        out[str(delta)] = {
            "domain_id": did,
            "A": rep.A,
            "N_sequence": rep.N_sequence,
            "max_volume_fraction": rep.max_volume_fraction,
            "partition_premise_ok": rep.partition_premise_ok,
            "sup_ratio": rep.witnesses["sup_ratio"],
            "df_ratio": rep.witnesses["df_ratio"],
            "q0": list(rep.q0),
            "truncated": rep.truncated,
            "eps_grid": rep.eps_grid,
            "worst_telescoping": min(rep.telescoping_margins, default=0.0),
        }
    write("chain_d3_n25_seed7", out)


def golden_remez():
    g = nl.torus(2)
    mode = nl.random_mode(g, 25, 3)
    grid = nl.sample_field(mode, 2 * nl.min_resolution(g, mode.eigenvalue))
    axes = grid.axes()
    mesh = np.meshgrid(*axes, indexing="ij")
    dist2 = sum((m - 0.5) ** 2 for m in mesh)
    bmask = dist2 <= 0.1**2
    med = float(np.median(np.abs(grid.values[bmask])))
    emask = bmask & (np.abs(grid.values) <= med)
    w = nl.remez_witness(grid, Ball((0.5, 0.5), 0.1), emask)
    write("remez_d2_n25_seed3", {
        "sup_B": w.sup_B, "sup_E": w.sup_E, "vol_ratio": w.vol_ratio,
        "N": w.N, "implied_constant": w.implied_constant,
        "in_scale": w.in_scale, "resolution": grid.resolution,
    })


def golden_heat_probe():
    # resolutions chosen so the probe (0.7, 0.5, 0.5) is a grid node in both:
    # the gap then measures discretization alone, not probe snapping
    values = {}
    for n in (51, 101):
        cond = concentric_sphere_condenser(n, 3, 0.1, 0.3)
        st = heat_flow_psi(cond, 0.04, 0.04 / 100)[-1]
        values[str(n)] = st.at((0.7, 0.5, 0.5))
    gap = abs(values["51"] - values["101"])
    write("heat_probe_concentric_d3", {
        "t": 0.04, "probe": [0.7, 0.5, 0.5], "values": values,
        "resolution_gap": gap,
    })


def golden_deficit():
    cond = concentric_sphere_condenser(128, 2, 0.1, 0.3)
    disc = deficit_identity_check(cond, 0.02, 1e-4)
    write("deficit_identity_d2", {"t": 0.02, "step": 1e-4, "discrepancy": disc})


def golden_intersection():
    w1 = ((0.0, 1.0), (0.0, 1.0))
    w2 = ((0.3, 0.7), (0.0, 1.0))
    r = intersection_check(w1, w2, (0.5, 0.5), 0.01)
    write("intersection_margin", {"t": 0.01, **r})


def golden_norris():
    g = nl.torus(2)
    center = (0.5, 0.5)
    rep = kernel_bound_report(g, [1e-2], [(center, center)])
    write("norris_center", {"t": 1e-2, "epsilon": rep.norris_epsilon})


def golden_nodal_capacity():
    g = nl.torus(3)
    mode = nl.random_mode(g, 25, 7)
    grid = nl.sample_field(mode, nl.min_resolution(g, mode.eigenvalue))
    lab = nl.label_nodal_domains(grid)
    ci = nl.centered_inradius(lab)
    did = int(np.argmin(ci) + 1)
    out = {}
    for delta in (0.5, 3.0):
        rep = nl.nodal_capacity_experiment(grid, lab, did, delta)
        out[str(delta)] = {
            "vacuous": rep.vacuous, "k_cells": rep.k_cells,
            "capacity": rep.capacity, "psi_value": rep.psi_value,
            "normalized_cap": rep.normalized_cap,
            "normalized_temp": rep.normalized_temp,
            "mass_value": rep.mass_value,
            "majorization_margin": rep.majorization_margin,
            "bare_margin": rep.bare_margin,
        }
    write("nodal_capacity_d3_n25_seed7", out)


def golden_scaling_floor():
    g = nl.torus(3)
    levels = [n for n in range(9, 65)]
    t0 = time.time()
    rows = nl.main_theorem_sweep(g, levels, [1, 2, 3])
    elapsed = time.time() - t0
    ratios = []
    for r in rows:
        lam = r["lambda"]
        shape = lam ** -0.5 * math.log(lam) ** -0.5
        ratios.append(r["min_centered_inradius"] / shape)
    c = 0.9 * min(ratios)
    write("scaling_floor_d3", {
        "levels": [r["n"] for r in rows], "seeds": [1, 2, 3],
        "min_ratio": min(ratios), "frozen_c": c, "sweep_seconds": elapsed,
        "n_fields": len(rows),
    })


ALL = [
    golden_coefficients,
    golden_chain,
    golden_remez,
    golden_heat_probe,
    golden_deficit,
    golden_intersection,
    golden_norris,
    golden_nodal_capacity,
    golden_scaling_floor,
]

if __name__ == "__main__":
    only = sys.argv[1:]
    for fn in ALL:
        if only and not any(o in fn.__name__ for o in only):
            continue
        t0 = time.time()
        fn()
        print(f"  {fn.__name__}: {time.time() - t0:.1f}s")
