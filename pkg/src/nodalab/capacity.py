"""Discrete condenser capacity and the heat-flow bounds built on it.

Capacity is the Dirichlet energy of the discrete equilibrium potential on
nearest-neighbor edges with conductance h^{d-2} (anisotropic grids use
cellvolume/h_a^2).  The boundary flux through K equals the energy by the
exact discrete Green identity, so the energy/flux gap certifies the solve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .condensers import CondenserSpec
from .heat import (
    build_system,
    equilibrium_potential,
    heat_flow_psi,
    interior_mass,
)
from .nodal import DomainLabeling
from .spectra import ScalarGrid


@dataclass
class CapacityResult:
    energy_value: float
    flux_value: float
    relative_gap: float
    residual: float = 0.0

    @property
    def value(self) -> float:
        return self.energy_value


def _energy_and_flux(system, free_values: np.ndarray, cellvol: float):
    """Dirichlet energy over all edges and the flux through the K faces.

    Energy sums conductance*(v_i - v_j)^2 over free-free edges plus the cut
    edges to the pinned values (1 on K, 0 outside U); flux sums the cut-edge
    currents out of K.  The two agree exactly when v solves the pinned
    system, so their gap certifies the solve.
    """
    ff_i, ff_j, ff_w = system.ff_edges
    v = free_values
    energy = float(np.sum(ff_w * (v[ff_i] - v[ff_j]) ** 2))
    ck_i, ck_w = system.cut_k
    energy += float(np.sum(ck_w * (1.0 - v[ck_i]) ** 2))
    co_i, co_w = system.cut_out
    energy += float(np.sum(co_w * v[co_i] ** 2))
    flux = float(np.sum(ck_w * (1.0 - v[ck_i])))
    return cellvol * energy, cellvol * flux


def variational_capacity(cond: CondenserSpec, rtol: float = 1e-12) -> CapacityResult:
    """Capacity by Dirichlet-energy minimization, cross-checked by boundary flux."""
    if not np.any(cond.k_mask):
        return CapacityResult(0.0, 0.0, 0.0, 0.0)
    system = build_system(cond)
    grid, res = equilibrium_potential(cond, rtol=rtol, system=system)
    energy, flux = _energy_and_flux(system, grid[cond.free_mask], cond.cell_volume)
    gap = abs(energy - flux) / max(energy, 1e-300)
    return CapacityResult(energy, flux, gap, res)


@dataclass
class HeatBoundCheck:
    capacity: CapacityResult
    psi_t: float
    time_integral: float
    margin1: float
    proposition_ratio: float
    probe: tuple[float, ...]
    t: float
    enclosing_radius: float
    quadrature_tail_warning: bool


def capacity_heat_bound_check(cond: CondenserSpec, probe, t: float,
                              enclosing_radius: float | None = None,
                              n_quad: int = 240, step_size: float | None = None,
                              ) -> HeatBoundCheck:
    """Check cap(K,U) * int_0^t inf_{y in dK} p_U(s,x,y) ds <= psi(t,x).

    U must be an axis-aligned box so the Dirichlet kernel is available in
    closed form; the time integral uses log-spaced trapezoid quadrature with
    a recorded small-s tail fraction.
    """
    if cond.u_box is None:
        raise ValueError("heat-bound check needs a box U (exact kernel)")
    probe = np.asarray(probe, dtype=float)
    probe_idx = cond.nearest_node(probe)
    if not cond.free_mask[probe_idx]:
        raise ValueError("probe must lie in U \\ K")
    probe_snap = np.array([cond.origin[a] + probe_idx[a] * cond.spacing[a]
                           for a in range(cond.dimension)])

    faces = cond.k_boundary_faces()
    if faces.shape[0] == 0:
        raise ValueError("K has no boundary faces")
    if enclosing_radius is None:
        enclosing_radius = float(np.max(np.linalg.norm(
            faces - probe_snap[None, :], axis=1))) + 2 * max(cond.spacing)

    cap = variational_capacity(cond)
    integral, tail_warning = _inf_kernel_integral(cond, probe_snap, faces, t, n_quad)

    if step_size is None:
        step_size = t / 200.0
    psi = heat_flow_psi(cond, t, step_size)[-1]
    psi_t = float(psi.temperature[probe_idx])

    margin1 = psi_t - cap.value * integral

    r = enclosing_radius
    psi_r2 = heat_flow_psi(cond, r * r, r * r / 200.0)[-1]
    d = cond.dimension
    denom = float(psi_r2.temperature[probe_idx]) * r ** (d - 2)
    ratio = cap.value / denom if denom > 0 else math.inf

    return HeatBoundCheck(
        capacity=cap, psi_t=psi_t, time_integral=integral, margin1=margin1,
        proposition_ratio=float(ratio), probe=tuple(probe_snap), t=t,
        enclosing_radius=r, quadrature_tail_warning=tail_warning,
    )


def _inf_kernel_integral(cond: CondenserSpec, probe_snap: np.ndarray, faces: np.ndarray,
                         t: float, n_quad: int) -> tuple[float, bool]:
    from .heat import box_kernel_1d

    def inf_kernel(s: float) -> float:
        vals = np.ones(faces.shape[0])
        for a, (lo, hi) in enumerate(cond.u_box):
            vals *= box_kernel_1d(s, np.full(faces.shape[0], probe_snap[a] - lo),
                                  faces[:, a] - lo, hi - lo)
        return float(np.min(vals))

    u_grid = np.linspace(math.log(t * 1e-8), math.log(t), n_quad)
    s_vals = np.exp(u_grid)
    f_vals = np.array([inf_kernel(s) * s for s in s_vals])
    integral = float(np.trapezoid(f_vals, u_grid))
    head = float(np.trapezoid(f_vals[: n_quad // 4], u_grid[: n_quad // 4]))
    return integral, bool(integral > 0 and head > 0.01 * integral)


def heat_bound_sweep(cond: CondenserSpec, probes, times, n_quad: int = 240,
                     steps_per_time: int = 100) -> dict:
    """All probe/time margins for one condenser with a single psi flow.

    Returns {"capacity", "margins": [per probe x time records],
    "proposition_ratio"} where the ratio uses the first probe and its
    enclosing radius.
    """
    if cond.u_box is None:
        raise ValueError("heat-bound sweep needs a box U (exact kernel)")
    times = sorted(times)
    t_max = times[-1]
    cap = variational_capacity(cond)
    faces = cond.k_boundary_faces()
    states = heat_flow_psi(cond, t_max, t_max / (steps_per_time * len(times)),
                           checkpoints=times)
    by_time = {round(st.time, 12): st for st in states}

    margins = []
    for probe in probes:
        probe_idx = cond.nearest_node(probe)
        if not cond.free_mask[probe_idx]:
            raise ValueError(f"probe {probe} is not in U \\ K")
        probe_snap = np.array([cond.origin[a] + probe_idx[a] * cond.spacing[a]
                               for a in range(cond.dimension)])
        for t in times:
            st = min(by_time.values(), key=lambda s: abs(s.time - t))
            integral, warn = _inf_kernel_integral(cond, probe_snap, faces, st.time, n_quad)
            psi_t = float(st.temperature[probe_idx])
            margins.append({
                "probe": tuple(probe_snap), "t": st.time, "psi": psi_t,
                "integral": integral, "margin1": psi_t - cap.value * integral,
                "tail_warning": warn,
            })

    probe_idx = cond.nearest_node(probes[0])
    probe_snap = np.array([cond.origin[a] + probe_idx[a] * cond.spacing[a]
                           for a in range(cond.dimension)])
    r = float(np.max(np.linalg.norm(faces - probe_snap[None, :], axis=1))) \
        + 2 * max(cond.spacing)
    psi_r2 = heat_flow_psi(cond, r * r, r * r / 100.0)[-1]
    denom = float(psi_r2.temperature[probe_idx]) * r ** (cond.dimension - 2)
    ratio = cap.value / denom if denom > 0 else math.inf
    return {"capacity": cap, "margins": margins, "proposition_ratio": float(ratio),
            "enclosing_radius": r}


@dataclass
class NodalCapacityReport:
    vacuous: bool
    delta: float
    eigenvalue: float
    ball_radius: float
    capacity: float
    psi_value: float
    normalized_cap: float
    normalized_temp: float
    mass_value: float
    tail_bound: float
    majorization_margin: float
    bare_margin: float
    k_cells: int


def _roll_to_center(arr: np.ndarray, center_idx, shape) -> np.ndarray:
    shifts = tuple(s // 2 - int(c) for s, c in zip(shape, center_idx))
    return np.roll(arr, shifts, axis=tuple(range(len(shape))))


def nodal_capacity_experiment(grid: ScalarGrid, labeling: DomainLabeling,
                              domain_id: int, delta: float,
                              liyau_c1: float = 1.0, liyau_c2: float = 0.2,
                              norris_eps: float = 0.05,
                              step_size: float | None = None) -> NodalCapacityReport:
    """Condenser made of the ball-minus-domain cells around a domain's max.

    K is the set of cells of B(x_max, delta lambda^{-1/2}) outside the domain,
    eroded by one cell; U is the concentric box of half-width r0.  Reports the
    capacity and temperature witnesses, normalized by their expected scales,
    plus the mass-majorization margin with Gaussian tail allowances.
    """
    lam = grid.eigenvalue
    if lam is None or lam <= 0:
        raise ValueError("needs a field with a positive eigenvalue")
    geom = grid.geometry
    d = geom.dimension
    r = delta / math.sqrt(lam)
    r0 = geom.r0
    if r >= 0.5 * r0:
        raise ValueError("ball radius must stay below r0/2 so U contains it")
    if not geom.is_torus:
        raise ValueError("the nodal condenser experiment runs on torus fields")

    n = grid.resolution
    shape = labeling.labels.shape
    h = np.asarray(labeling.spacing)
    center_idx = labeling.argmax[domain_id]

    labels_c = _roll_to_center(labeling.labels, center_idx, shape)
    center_node = np.array([shape[a] // 2 * h[a] for a in range(d)])

    axes = [np.arange(shape[a]) * h[a] - center_node[a] for a in range(d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    dist2 = sum(m * m for m in mesh)
    ball = dist2 <= r * r
    k_raw = ball & (labels_c != domain_id)
    k_mask = ndimage.binary_erosion(
        k_raw, structure=ndimage.generate_binary_structure(d, 1))

    half = r0 - 2 * float(np.max(h))
    u_mask = np.ones(shape, dtype=bool)
    for a in range(d):
        u_mask &= np.abs(mesh[a]) < half
    u_box = tuple((float(center_node[a] - half), float(center_node[a] + half))
                  for a in range(d))

    t = delta**2 / lam
    if step_size is None:
        step_size = t / 20.0

    cond = CondenserSpec(shape=shape, spacing=tuple(h), origin=(0.0,) * d,
                         u_mask=u_mask, k_mask=k_mask,
                         label=f"nodal(delta={delta})", u_box=u_box)
    k_cells = int(np.count_nonzero(k_mask))
    vacuous = k_cells == 0

    if vacuous:
        cap_value = 0.0
        psi_value = 0.0
    else:
        cap = variational_capacity(cond)
        cap_value = cap.value
        psi = heat_flow_psi(cond, t, step_size)[-1]
        psi_value = float(psi.temperature[tuple(shape[a] // 2 for a in range(d))])

    mass_state = interior_mass(cond, t, step_size)
    mass_value = float(mass_state.temperature[tuple(shape[a] // 2 for a in range(d))])

    # Gaussian allowances for heat not accounted by the box condenser
    vol = geom.volume
    tail = (liyau_c1 * vol * t ** (-d / 2.0) * math.exp(-liyau_c2 * (r0 / 2.0) ** 2 / t)
            + math.exp(-norris_eps / t)
            + liyau_c1 * vol * t ** (-d / 2.0) * math.exp(-liyau_c2 * r0**2 / t))
    majorization_margin = mass_value + tail - math.exp(-lam * t)

    return NodalCapacityReport(
        vacuous=vacuous, delta=delta, eigenvalue=lam, ball_radius=r,
        capacity=cap_value, psi_value=psi_value,
        normalized_cap=cap_value / (delta**2 * r ** (d - 2)),
        normalized_temp=psi_value / delta**2,
        mass_value=mass_value, tail_bound=tail,
        majorization_margin=float(majorization_margin),
        bare_margin=float(mass_value - math.exp(-lam * t)),
        k_cells=k_cells,
    )


def mazya_check(cond: CondenserSpec) -> dict:
    """Volume-capacity ratio Vol(K) / cap^{d/(d-2)} (d = 3 only)."""
    if cond.dimension != 3:
        raise ValueError("the volume-capacity exponent d/(d-2) is for d = 3")
    vol_k = cond.k_volume()
    cap = variational_capacity(cond)
    if cap.value <= 0:
        if vol_k > 0:
            raise ValueError("capacity vanished for a nonempty K; refine the grid")
        return {"volume": 0.0, "capacity": 0.0, "ratio": 0.0}
    ratio = vol_k / cap.value ** 3
    return {"volume": vol_k, "capacity": cap.value, "ratio": ratio,
            "relative_gap": cap.relative_gap}
