import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import pytest

import nodalab as nl

GOLDEN_DIR = Path(__file__).parent / "golden"

# delta grids for the almost-inscribed-ball measurements: the stated range
# plus an extended range covering the empirical onset of the deficiency
DEFICIENCY_DELTAS = (0.15, 0.2, 0.25, 0.3, 0.35, 0.425, 0.5, 0.6)
DEFICIENCY_DELTAS_EXTENDED = (1.5, 2.0, 2.4, 2.8, 3.2, 3.6)

D2_LEVELS = (4, 9, 16, 25, 36, 49)
D2_SEEDS = (1, 2, 3, 4, 5)
D3_LEVELS = tuple(range(9, 65))
D3_SEEDS = (1, 2, 3)


def load_golden(name: str) -> dict:
    return json.loads((GOLDEN_DIR / f"{name}.json").read_text())


@pytest.fixture(scope="session")
def golden():
    return load_golden


@pytest.fixture(scope="session")
def d2_scaling_rows():
    g = nl.torus(2)
    return nl.main_theorem_sweep(g, D2_LEVELS, D2_SEEDS, resolution_factor=2.0)


@pytest.fixture(scope="session")
def d2_df_rows():
    g = nl.torus(2)
    return nl.df_sweep(g, D2_LEVELS, D2_SEEDS, balls_per_field=200,
                       resolution_factor=2.0)


def _d3_field_pass():
    """One pass over the d=3 torus sweep collecting everything the
    acceptance criteria need, without keeping the fields in memory."""
    g = nl.torus(3)
    rows = []
    deficiency = []           # per (field, domain): {delta: ratio}
    t0 = time.time()
    for n in D3_LEVELS:
        mode_probe = nl.random_mode(g, n, D3_SEEDS[0])
        if mode_probe is None:
            continue
        for seed in D3_SEEDS:
            mode = nl.random_mode(g, n, seed)
            grid = nl.sample_field(mode, nl.min_resolution(g, mode.eigenvalue))
            lab = nl.label_nodal_domains(grid)
            ci = nl.centered_inradius(lab)
            lam = mode.eigenvalue
            rows.append({
                "n": n, "seed": seed, "lambda": lam,
                "min_centered_inradius": float(np.min(ci)),
                "lam_inv_sqrt": lam ** -0.5,
                "corrected_scale": lam ** -0.5 * math.log(lam) ** -0.5,
                "n_domains": lab.n_domains,
                "fk_min": float(np.min(lab.volumes[1:]) * lam ** 1.5),
                "centered_all": [float(v) for v in ci],
            })
            for did in lab.domain_ids():
                curve = {}
                for delta in DEFICIENCY_DELTAS + DEFICIENCY_DELTAS_EXTENDED:
                    if delta / math.sqrt(lam) >= g.r0:
                        continue
                    curve[delta] = nl.deficiency_ratio(lab, grid, did, delta)
                deficiency.append({"n": n, "seed": seed, "domain": int(did),
                                   "curve": curve})
    return {"rows": rows, "deficiency": deficiency, "elapsed": time.time() - t0}


@pytest.fixture(scope="session")
def d3_sweep():
    return _d3_field_pass()


def _box_inradius_case(args):
    geom, m, resolution = args
    mode = nl.box_mode(geom, m)
    grid = nl.sample_field(mode, resolution)
    lab = nl.label_nodal_domains(grid)
    rep = nl.inradius_report(lab, grid)
    h = max(grid.spacing)
    d = geom.dimension
    return {
        "m": m, "lambda": mode.eigenvalue, "h": h,
        "n_domains": lab.n_domains,
        "inradius": [float(v) for v in rep.inradius],
        "centered": [float(v) for v in rep.centered_inradius],
        "fk_min": float(np.min(lab.volumes[1:]) * mode.eigenvalue ** (d / 2.0)),
        "volumes": [float(v) for v in lab.volumes],
    }


def _box_sweep(dimension: int, max_m: int, resolution: int):
    geom = nl.box(dimension)
    cases = []
    import itertools

    for m in itertools.product(range(1, max_m + 1), repeat=dimension):
        cases.append((geom, m, resolution))
    t0 = time.time()
    with ThreadPoolExecutor(max_workers=2) as pool:
        results = list(pool.map(_box_inradius_case, cases))
    return {"results": results, "elapsed": time.time() - t0}


@pytest.fixture(scope="session")
def d2_box_inradius():
    return _box_sweep(2, 6, 256)


@pytest.fixture(scope="session")
def d3_box_inradius():
    return _box_sweep(3, 4, 96)


def _standard_chains():
    reports = []
    g2 = nl.torus(2)
    for n in (9, 25, 49):
        for seed in (1, 2):
            mode = nl.random_mode(g2, n, seed)
            grid = nl.sample_field(mode, nl.min_resolution(g2, mode.eigenvalue))
            lab = nl.label_nodal_domains(grid)
            ci = nl.centered_inradius(lab)
            did = int(np.argmin(ci) + 1)
            for delta in (0.4, 2.0):
                for a_size in (5, 9, 13, 17):
                    reports.append(nl.run_chain(grid, lab, did, delta, a_size))
    g3 = nl.torus(3)
    mode = nl.random_mode(g3, 25, 7)
    grid = nl.sample_field(mode, nl.min_resolution(g3, mode.eigenvalue))
    lab = nl.label_nodal_domains(grid)
    ci = nl.centered_inradius(lab)
    did = int(np.argmin(ci) + 1)
    for delta in (0.4, 3.0):
        for a_size in (5, 9):
            reports.append(nl.run_chain(grid, lab, did, delta, a_size))
    return reports


@pytest.fixture(scope="session")
def standard_chains():
    return _standard_chains()
