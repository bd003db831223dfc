"""Doubling indices, growth chains through subcube partitions, and the
witness sweeps for growth, propagation-of-smallness and gradient bounds.

The chain runner partitions a cube centered at a domain's max point into
A^d congruent subcubes, follows the argmax of each doubled subcube into the
next one, and records the doubling-index sequence together with everything
needed to audit the telescoping and growth inequalities afterwards.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict, field

import numpy as np

from .nodal import DomainLabeling, centered_inradius, label_nodal_domains
from .regions import Ball, Cube, Region, SupResult, region_fits, region_sup
from .spectra import (
    Geometry,
    ScalarGrid,
    min_resolution,
    random_mode,
    sample_field,
    SplitMix64,
)


def doubling_index(grid: ScalarGrid, region: Region, oversample: int | None = None) -> float:
    """log2 of the sup ratio between the doubled region and the region."""
    value, _ = doubling_index_detailed(grid, region, oversample)
    return value


def doubling_index_detailed(grid: ScalarGrid, region: Region,
                            oversample: int | None = None) -> tuple[float, dict]:
    if not region_fits(grid, region, factor=2.0):
        raise ValueError("doubled region does not fit in the geometry")
    inner = region_sup(grid, region, oversample)
    outer = region_sup(grid, region.scaled(2.0), oversample)
    if inner.value <= 0.0:
        raise ValueError("vanishing on inner region")
    n = math.log2(outer.value / inner.value)
    return n, {"sup_inner": inner, "sup_outer": outer}


@dataclass
class ChainReport:
    """Record of one chain run: partition data, the subcube chain, doubling
    indices, and the witness constants derived from them."""

    delta: float
    A: int
    A_prime: int
    eigenvalue: float
    domain_id: int
    subcube_side: float
    center: tuple[float, ...]
    q0: tuple[int, ...]
    chain: list[tuple[int, ...]]
    N_sequence: list[float]
    volume_fractions: np.ndarray = field(repr=False)
    max_volume_fraction: float = 0.0
    partition_premise_ok: bool = True
    telescoping_margins: list[float] = field(default_factory=list)
    eps_grid: float = 0.0
    truncated: bool = False
    witnesses: dict = field(default_factory=dict)

    def to_json(self) -> str:
        d = asdict(self)
        d["volume_fractions"] = np.asarray(self.volume_fractions).ravel().tolist()
        return json.dumps(d, indent=1)


def _nearest_cell_index(points: np.ndarray, grid: ScalarGrid) -> np.ndarray:
    h = np.asarray(grid.spacing)
    shape = grid.values.shape
    idx = np.rint(points / h[None, :]).astype(np.int64)
    for a in range(points.shape[1]):
        if grid.geometry.is_torus:
            idx[:, a] %= shape[a]
        else:
            idx[:, a] = np.clip(idx[:, a], 0, shape[a] - 1)
    return idx


def run_chain(grid: ScalarGrid, labeling: DomainLabeling, domain_id: int,
              delta: float, A: int, points_per_subcube: int = 6) -> ChainReport:
    """Run the subcube chain inside the cube inscribed at the domain's max.

    The cube has side 2*delta*lambda^{-1/2}/sqrt(d) (inscribed in the ball
    of radius delta*lambda^{-1/2}) and is split into A^d congruent subcubes,
    A = 4A'+1.  All sups are taken over one shared fine lattice, which makes
    the recorded telescoping inequality exact up to float rounding; eps_grid
    certifies the gap between lattice sups and true sups.
    """
    if A % 4 != 1 or A < 5:
        raise ValueError("A must be of the form 4*A'+1 with A' >= 1")
    a_prime = (A - 1) // 4
    lam = grid.eigenvalue
    if lam is None or lam <= 0:
        raise ValueError("chain runs need a field with a positive eigenvalue")
    if grid.analytic is None:
        raise ValueError("chain runs need an analytic field source")
    d = grid.geometry.dimension
    x_max = labeling.argmax_point(domain_id)
    side_q = 2.0 * delta / math.sqrt(lam) / math.sqrt(d)
    big_cube = Cube(tuple(x_max), 0.5 * side_q)
    if not region_fits(grid, big_cube):
        raise ValueError("partition cube does not fit in the geometry")
    s = side_q / A

    # shared lattice: points_per_subcube^d cell-centered points per subcube
    osub = points_per_subcube
    n1 = A * osub
    step = side_q / n1
    ax = (np.arange(n1) + 0.5) * step - 0.5 * side_q
    mesh = np.meshgrid(*([ax] * d), indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1) + x_max[None, :]
    vals = np.abs(grid.analytic.evaluate(pts))
    grads = np.linalg.norm(grid.analytic.evaluate_gradient(pts), axis=1)
    cell_idx = _nearest_cell_index(pts, grid)
    in_domain = labeling.labels[tuple(cell_idx.T)] == domain_id

    # block views: axis order (block_0, sub_0, block_1, sub_1, ...)
    full_shape = (A, osub) * d
    perm = tuple(range(0, 2 * d, 2)) + tuple(range(1, 2 * d, 2))
    vals_blocks = vals.reshape(full_shape).transpose(perm).reshape((A,) * d + (-1,))
    dom_blocks = in_domain.reshape(full_shape).transpose(perm).reshape((A,) * d + (-1,))
    sup_per_subcube = vals_blocks.max(axis=-1)
    volume_fractions = 1.0 - dom_blocks.mean(axis=-1)

    rel = pts - x_max[None, :]
    vals_flat = vals
    grads_flat = grads

    sup_track: list[tuple[float, float]] = []  # (sup, log2-error bound)

    def cube_sup(center_idx: np.ndarray, half_side: float) -> tuple[float, np.ndarray]:
        center = (np.asarray(center_idx) + 0.5) * s - 0.5 * side_q
        mask = np.all(np.abs(rel - center[None, :]) <= half_side + 1e-15, axis=1)
        v = vals_flat[mask]
        i = int(np.argmax(v))
        sup = float(v[i])
        gmax = float(np.max(grads_flat[mask]))
        eps_abs = gmax * step * math.sqrt(d)
        eps_log = eps_abs / (max(sup, 1e-300) * math.log(2.0))
        sup_track.append((sup, eps_log))
        where = np.flatnonzero(mask)[i]
        return sup, rel[where]

    def subcube_of(rel_point: np.ndarray) -> tuple[int, ...]:
        j = np.floor((rel_point + 0.5 * side_q) / s).astype(int)
        return tuple(int(min(max(v, 0), A - 1)) for v in j)

    center_idx = (A // 2,) * d

    # sup over the concentric (2A'+1)-subcube block and the domain sup witness
    central_half = (2 * a_prime + 1) * s / 2.0
    sup_central, _ = cube_sup(np.asarray(center_idx), central_half)
    lattice_domain_sup = float(vals_flat[in_domain].max()) if np.any(in_domain) else 0.0
    sup_domain = max(float(labeling.max_abs[domain_id]), lattice_domain_sup)

    # q0: maximal-sup subcube within the central block
    lo = A // 2 - a_prime
    hi = A // 2 + a_prime + 1
    central = sup_per_subcube[(slice(lo, hi),) * d]
    q0_local = np.unravel_index(int(np.argmax(central)), central.shape)
    q0 = tuple(int(v + lo) for v in q0_local)

    def doubled_fits(q: tuple[int, ...]) -> bool:
        return all(1 <= v <= A - 2 for v in q)

    chain: list[tuple[int, ...]] = []
    n_seq: list[float] = []
    sup_q0, _ = cube_sup(np.asarray(q0), s / 2.0)
    truncated = False
    q = q0
    sup_q = sup_q0
    telescoping: list[float] = []
    for k in range(a_prime):
        if not doubled_fits(q):
            truncated = True
            break
        sup_2q, argmax_rel = cube_sup(np.asarray(q), s)
        n_seq.append(math.log2(sup_2q / sup_q) if sup_q > 0 else math.inf)
        q_next = subcube_of(argmax_rel)
        chain.append(q_next)
        sup_q, _ = cube_sup(np.asarray(q_next), s / 2.0)
        telescoping.append(math.log2(sup_q / sup_q0) - float(np.sum(n_seq)))
        q = q_next
    # the doubling index of the final subcube, when its double still fits
    if not truncated and doubled_fits(q):
        sup_2q, _ = cube_sup(np.asarray(q), s)
        n_seq.append(math.log2(sup_2q / sup_q) if sup_q > 0 else math.inf)

    eps_grid = 2.0 * max((e for _, e in sup_track), default=0.0)

    # growth-shape fit: N_k against the running sum of earlier indices
    c2_fit = c3_fit = None
    if len(n_seq) >= 3:
        sums = np.cumsum([0.0] + n_seq[:-1])
        ks = np.arange(1, len(n_seq))
        xs, ys = sums[1:], np.asarray(n_seq)[1:]
        if np.ptp(xs) > 1e-12:
            slope, intercept = np.polyfit(xs, ys, 1)
            c2_fit = float(slope)
            c3_fit = float(max(0.0, np.max(slope * xs - ys)))

    witnesses = {
        "c2_fit": c2_fit,
        "c3_fit": c3_fit,
        "growth_verified": bool(sup_q0 >= sup_domain * (1.0 - 1e-12)),
        "df_ratio": float(max(n_seq) / math.sqrt(lam)) if n_seq else 0.0,
        "sup_ratio": float(sup_central / sup_domain),
        "sup_q0": sup_q0,
        "sup_domain": sup_domain,
    }

    return ChainReport(
        delta=delta,
        A=A,
        A_prime=a_prime,
        eigenvalue=lam,
        domain_id=int(domain_id),
        subcube_side=s,
        center=tuple(x_max),
        q0=q0,
        chain=chain,
        N_sequence=[float(v) for v in n_seq],
        volume_fractions=volume_fractions,
        max_volume_fraction=float(volume_fractions.max()),
        partition_premise_ok=bool(volume_fractions.max() <= 0.5),
        telescoping_margins=telescoping,
        eps_grid=float(eps_grid),
        truncated=truncated,
        witnesses=witnesses,
    )


@dataclass(frozen=True)
class RemezWitness:
    sup_B: float
    sup_E: float
    vol_ratio: float
    N: float
    implied_constant: float
    in_scale: bool


def remez_witness(grid: ScalarGrid, ball: Ball, e_mask: np.ndarray) -> RemezWitness:
    """Smallest C >= 1 with sup_B <= C * sup_E * (C * vol_B/vol_E)^(C*N).

    E is a cell mask over the grid; sups and volumes are cell-counted so both
    sides of the inequality are measured the same way.  ``in_scale`` records
    whether the ball radius satisfies r < lambda^{-1/2}.
    """
    geom = grid.geometry
    d = geom.dimension
    axes = grid.axes()
    sides = np.asarray(geom.side_lengths)
    center = np.asarray(ball.center)
    deltas = []
    for a in range(d):
        diff = axes[a] - center[a]
        if geom.is_torus:
            diff = (diff + 0.5 * sides[a]) % sides[a] - 0.5 * sides[a]
        deltas.append(diff)
    mesh = np.meshgrid(*deltas, indexing="ij")
    dist2 = sum(m * m for m in mesh)
    b_mask = dist2 <= ball.radius**2
    e_mask = np.asarray(e_mask, dtype=bool)
    if e_mask.shape != grid.values.shape:
        raise ValueError("E mask shape mismatch")
    if not np.all(b_mask[e_mask]):
        raise ValueError("E must be a subset of B")
    n_b = int(np.count_nonzero(b_mask))
    n_e = int(np.count_nonzero(e_mask))
    if n_e == 0:
        raise ValueError("E has no cells")
    sup_b = float(np.max(np.abs(grid.values[b_mask])))
    sup_e = float(np.max(np.abs(grid.values[e_mask])))
    if sup_e == 0.0:
        raise ValueError("field vanishes on E")
    vol_ratio = n_b / n_e
    n_index = doubling_index(grid, ball)
    lam = grid.eigenvalue
    in_scale = bool(lam is not None and lam > 0 and ball.radius < 1.0 / math.sqrt(lam))

    def rhs(c: float) -> float:
        return c * sup_e * (c * vol_ratio) ** (c * max(n_index, 0.0))

    if rhs(1.0) >= sup_b:
        c_star = 1.0
    else:
        lo, hi = 1.0, 2.0
        while rhs(hi) < sup_b and hi < 1e9:
            hi *= 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if rhs(mid) >= sup_b:
                hi = mid
            else:
                lo = mid
        c_star = hi
    return RemezWitness(sup_b, sup_e, vol_ratio, float(n_index), float(c_star), in_scale)


def gradient_check(grid: ScalarGrid, center, r: float,
                   oversample: int | None = None) -> float:
    """Witness ratio r * sup_{B(x,r/2)} |grad u| / sup_{B(x,r)} |u|."""
    ball = Ball(tuple(center), r)
    if not region_fits(grid, ball):
        raise ValueError("ball does not fit in the geometry")
    sup_u = region_sup(grid, ball, oversample)
    if sup_u.value <= 0:
        raise ValueError("field vanishes on the ball")
    half = Ball(tuple(center), 0.5 * r)
    sup_grad = _gradient_sup(grid, half, oversample)
    return float(r * sup_grad / sup_u.value)


def _gradient_sup(grid: ScalarGrid, region: Region, oversample: int | None) -> float:
    analytic = grid.analytic
    if analytic is not None:
        # same lattice policy as region_sup, but measuring |grad| not |u|
        from .regions import _lattice_offsets, _region_mask, DEFAULT_OVERSAMPLE, _MAX_POINTS_PER_AXIS

        d = grid.geometry.dimension
        h = min(grid.spacing)
        step = h / (oversample or DEFAULT_OVERSAMPLE)
        cap = _MAX_POINTS_PER_AXIS[d]
        if region.extent / step > cap:
            step = region.extent / cap
        offs = [_lattice_offsets(region.extent, step) for _ in range(d)]
        mesh = np.meshgrid(*offs, indexing="ij")
        rel = np.stack([m.ravel() for m in mesh], axis=-1)
        rel = rel[_region_mask(region, rel)]
        pts = rel + np.asarray(region.center)[None, :]
        if not grid.geometry.is_torus:
            pts = np.clip(pts, 0.0, np.asarray(grid.geometry.side_lengths)[None, :])
        g = analytic.evaluate_gradient(pts)
        return float(np.max(np.linalg.norm(g, axis=1)))
    if grid.gradient is None:
        raise ValueError("no gradient available on this grid")
    gnorm = np.sqrt(sum(g**2 for g in grid.gradient))
    tmp = ScalarGrid(grid.geometry, grid.resolution, gnorm)
    return region_sup(tmp, region).value


def _ball_stream(seed: int, level: int) -> SplitMix64:
    return SplitMix64((seed * 0x9E3779B97F4A7C15 + level * 0xC2B2AE3D27D4EB4F + 1) & ((1 << 64) - 1))


def df_sweep(geometry: Geometry, levels, seeds, balls_per_field: int = 100,
             radii_range: tuple[float, float] = (0.05, 0.5),
             resolution_factor: float = 1.0) -> list[dict]:
    """Max doubling index over random balls, per (level, seed) field.

    Ball sups run at the field's own resolution; radii are drawn as fractions
    of r0 within the given range, keeping each doubled ball measurable.
    """
    rows = []
    r0 = geometry.r0
    for n in levels:
        mode = random_mode(geometry, n, seeds[0]) if seeds else None
        if mode is None:
            continue
        res = max(min_resolution(geometry, mode.eigenvalue), 8)
        res = int(math.ceil(res * resolution_factor))
        for seed in seeds:
            mode = random_mode(geometry, n, seed)
            grid = sample_field(mode, res)
            rng = _ball_stream(seed, n)
            n_max = 0.0
            placed = 0
            attempts = 0
            while placed < balls_per_field and attempts < 50 * balls_per_field:
                attempts += 1
                frac = radii_range[0] + (radii_range[1] - radii_range[0]) * rng.uniform()
                r = frac * r0
                if geometry.is_torus:
                    center = tuple(rng.uniform() * L for L in geometry.side_lengths)
                else:
                    if any(L <= 4 * r for L in geometry.side_lengths):
                        continue
                    center = tuple(2 * r + (L - 4 * r) * rng.uniform()
                                   for L in geometry.side_lengths)
                ball = Ball(center, r)
                if not region_fits(geometry, ball, factor=2.0):
                    continue
                placed += 1
                try:
                    n_val = doubling_index(grid, ball)
                except ValueError:
                    continue
                n_max = max(n_max, n_val)
            rows.append({
                "n": int(n),
                "seed": int(seed),
                "lambda": mode.eigenvalue,
                "N_max": float(n_max),
            })
    rows.sort(key=lambda r: (r["lambda"], r["seed"]))
    return rows


def main_theorem_sweep(geometry: Geometry, levels, seeds,
                       resolution_factor: float = 1.0,
                       keep_labelings: bool = False) -> list[dict]:
    """Minimum centered inradius per random field, with the scaling columns
    lambda^{-1/2} and lambda^{-1/2} (log lambda)^{-(d-2)/2} for regression."""
    rows = []
    d = geometry.dimension
    for n in levels:
        basis_probe = random_mode(geometry, n, seeds[0] if seeds else 0)
        if basis_probe is None:
            continue
        lam = basis_probe.eigenvalue
        if lam <= math.e:
            raise ValueError("levels must give lambda > e")
        res = int(math.ceil(min_resolution(geometry, lam) * resolution_factor))
        for seed in seeds:
            mode = random_mode(geometry, n, seed)
            grid = sample_field(mode, res)
            labeling = label_nodal_domains(grid)
            ci = centered_inradius(labeling)
            corrected = lam ** -0.5 * math.log(lam) ** (-(d - 2) / 2.0)
            row = {
                "n": int(n),
                "seed": int(seed),
                "lambda": lam,
                "min_centered_inradius": float(np.min(ci)),
                "lam_inv_sqrt": lam ** -0.5,
                "corrected_scale": corrected,
                "n_domains": labeling.n_domains,
                "fk_min": float(np.min(labeling.volumes[1:]) * lam ** (d / 2.0)),
            }
            if keep_labelings:
                row["_labeling"] = labeling
                row["_grid"] = grid
                row["_centered"] = ci
            rows.append(row)
    rows.sort(key=lambda r: (r["lambda"], r["seed"]))
    return rows
