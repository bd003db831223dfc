"""Exact heat kernels on flat tori and Dirichlet boxes, and discrete heat
flow on condensers.

Kernels are built from 1D factors: a lattice image sum on the torus and an
alternating reflected image sum on an interval.  Image sums are truncated by
an explicit Gaussian tail bound (relative 1e-14), so kernel values are exact
for all practical purposes.  The condenser flow uses implicit Euler with
pinned Dirichlet rows and conjugate-gradient solves, which preserves the
discrete maximum principle and pointwise monotonicity in time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import cg
from scipy.special import erf

from .spectra import Geometry
from .condensers import CondenserSpec, _shift_bool

TAIL_RELATIVE = 1e-14

FREE_SPACE = "free_space"
TORUS_IMAGES = "torus_images"
BOX_DIRICHLET_IMAGES = "box_dirichlet_images"
BOX_DIRICHLET_SPECTRAL = "box_dirichlet_spectral"


class SolverConvergenceError(RuntimeError):
    def __init__(self, residual: float, iterations: int):
        super().__init__(f"conjugate gradient stalled at residual {residual:.3e} "
                         f"after {iterations} iterations")
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class KernelSpec:
    geometry: Geometry
    variant: str
    truncation: int | None = None  # None: per-call Gaussian tail rule

    def __post_init__(self):
        if self.variant not in (FREE_SPACE, TORUS_IMAGES,
                                BOX_DIRICHLET_IMAGES, BOX_DIRICHLET_SPECTRAL):
            raise ValueError(f"unknown kernel variant {self.variant!r}")


def _image_count(t: float, span: float, L: float, override: int | None) -> int:
    if override is not None:
        return override
    reach = math.sqrt(4.0 * t * math.log(1.0 / TAIL_RELATIVE)) + span
    return max(1, int(math.ceil(reach / L)) + 1)


def _gauss1d(z: np.ndarray, t: float) -> np.ndarray:
    return np.exp(-np.square(z) / (4.0 * t)) / math.sqrt(4.0 * math.pi * t)


def kernel_free(t: float, x, y, dimension: int | None = None) -> float | np.ndarray:
    if t <= 0:
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    diff = np.atleast_2d(x) - np.atleast_2d(y)
    d = diff.shape[1]
    val = (4.0 * math.pi * t) ** (-d / 2.0) * np.exp(
        -np.einsum("ij,ij->i", diff, diff) / (4.0 * t))
    return float(val[0]) if val.size == 1 else val


def torus_kernel_1d(t: float, z, L: float, truncation: int | None = None) -> np.ndarray:
    """Periodic Gaussian factor; z canonicalized to |z| <= L/2 so the sum is
    bitwise symmetric in the sign of z (round-based wrap, not modulo, since
    IEEE negation is exact but modulo is not)."""
    if t <= 0:
        raise ValueError("t must be positive")
    z = np.asarray(z, dtype=float)
    z = np.abs(z - L * np.round(z / L))
    m = _image_count(t, 0.5 * L, L, truncation)
    shifts = np.arange(-m, m + 1) * L
    return _gauss1d(z[..., None] + shifts, t).sum(axis=-1)


def box_kernel_1d(t: float, x, y, L: float, truncation: int | None = None) -> np.ndarray:
    """Dirichlet factor on (0, L) by alternating reflections.

    Written in terms of u = |x - y| and v = x + y so that exchanging x and y
    reproduces the identical floating-point sum.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    u = np.abs(x - y)
    v = x + y
    m = _image_count(t, float(np.max(u) if u.size else 0.0) + 2 * L, 2 * L, truncation)
    shifts = np.arange(-m, m + 1) * (2.0 * L)
    pos = _gauss1d(u[..., None] + shifts, t).sum(axis=-1)
    neg = _gauss1d(v[..., None] + shifts, t).sum(axis=-1)
    return pos - neg


def box_kernel_1d_spectral(t: float, x, y, L: float, terms: int | None = None) -> np.ndarray:
    """Sine-series representation of the same Dirichlet factor (cross-check)."""
    if t <= 0:
        raise ValueError("t must be positive")
    if terms is None:
        # e^{-(k pi / L)^2 t} below the tail tolerance
        terms = max(4, int(math.ceil(L / math.pi * math.sqrt(
            math.log(1.0 / TAIL_RELATIVE) / t))) + 2)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    k = np.arange(1, terms + 1)
    decay = np.exp(-((k * math.pi / L) ** 2) * t)
    sx = np.sin(np.multiply.outer(x, k) * math.pi / L)
    sy = np.sin(np.multiply.outer(y, k) * math.pi / L)
    return (2.0 / L) * np.einsum("...k,...k,k->...", sx, sy, decay)


def _mass_gauss_interval(t: float, z0: float, a: float, b: float) -> float:
    """Integral over y in [a, b] of the unit Gaussian centered at z0."""
    s = math.sqrt(4.0 * t)
    return 0.5 * (erf((b - z0) / s) - erf((a - z0) / s))


def torus_mass_1d(t: float, x: float, a: float, b: float, L: float) -> float:
    """Integral of the periodic factor over y in [a, b] (expressed in the
    covering line, b - a <= L), by exact Gaussian antiderivatives."""
    m = _image_count(t, abs(b - a) + abs(x - a) + L, L, None)
    total = 0.0
    for j in range(-m, m + 1):
        total += _mass_gauss_interval(t, x + j * L, a, b)
    return total


def box_mass_1d(t: float, x: float, a: float, b: float, L: float) -> float:
    """Integral of the Dirichlet factor on (0, L) over y in [a, b], exact."""
    m = _image_count(t, 3 * L, 2 * L, None)
    total = 0.0
    for j in range(-m, m + 1):
        total += _mass_gauss_interval(t, x + 2 * j * L, a, b)
        total -= _mass_gauss_interval(t, -x + 2 * j * L, a, b)
    return total


def _wrap_delta(diff: np.ndarray, L: float) -> np.ndarray:
    return (diff + 0.5 * L) % L - 0.5 * L


def torus_distance(geometry: Geometry, x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d2 = 0.0
    for a, L in enumerate(geometry.side_lengths):
        d2 += float(_wrap_delta(x[a] - y[a], L)) ** 2
    return math.sqrt(d2)


def kernel_eval(spec: KernelSpec, t: float, x, y) -> float:
    """Heat kernel value p(t, x, y) for the requested representation."""
    if t <= 0:
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    geom = spec.geometry
    if spec.variant == FREE_SPACE:
        return float(kernel_free(t, x, y))
    val = 1.0
    for a, L in enumerate(geom.side_lengths):
        if spec.variant == TORUS_IMAGES:
            val *= float(torus_kernel_1d(t, x[a] - y[a], L, spec.truncation))
        elif spec.variant == BOX_DIRICHLET_IMAGES:
            val *= float(box_kernel_1d(t, x[a], y[a], L, spec.truncation))
        else:
            val *= float(box_kernel_1d_spectral(t, x[a], y[a], L, spec.truncation))
    return val


def kernel_eval_many(spec: KernelSpec, t: float, x, ys: np.ndarray) -> np.ndarray:
    """Vectorized p(t, x, y_j) over an array of target points (m, d)."""
    if t <= 0:
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=float)
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    geom = spec.geometry
    if spec.variant == FREE_SPACE:
        return np.asarray(kernel_free(t, np.broadcast_to(x, ys.shape), ys))
    out = np.ones(ys.shape[0])
    for a, L in enumerate(geom.side_lengths):
        if spec.variant == TORUS_IMAGES:
            out *= torus_kernel_1d(t, x[a] - ys[:, a], L, spec.truncation)
        elif spec.variant == BOX_DIRICHLET_IMAGES:
            out *= box_kernel_1d(t, np.full(ys.shape[0], x[a]), ys[:, a], L, spec.truncation)
        else:
            out *= box_kernel_1d_spectral(t, np.full(ys.shape[0], x[a]), ys[:, a], L,
                                          spec.truncation)
    return out


def box_kernel_mass(t: float, x, box_bounds, integrate_bounds=None) -> float:
    """Integral over a sub-box of the Dirichlet kernel of ``box_bounds``.

    Both the kernel domain and the integration region are axis-aligned boxes,
    so the integral factors into exact 1D Gaussian antiderivatives.
    """
    if integrate_bounds is None:
        integrate_bounds = box_bounds
    x = np.asarray(x, dtype=float)
    val = 1.0
    for a, ((lo, hi), (ia, ib)) in enumerate(zip(box_bounds, integrate_bounds)):
        L = hi - lo
        val *= box_mass_1d(t, float(x[a] - lo), ia - lo, ib - lo, L)
    return val


def torus_kernel_mass(geometry: Geometry, t: float, x, integrate_bounds) -> float:
    x = np.asarray(x, dtype=float)
    val = 1.0
    for a, (ia, ib) in enumerate(integrate_bounds):
        L = geometry.side_lengths[a]
        val *= torus_mass_1d(t, float(x[a]), ia, ib, L)
    return val


# ---------------------------------------------------------------------------
# discrete condenser flow


@dataclass
class HeatFlowState:
    condenser: CondenserSpec
    time: float
    temperature: np.ndarray = field(repr=False)
    step_size: float
    solver_residual: float

    def at(self, point) -> float:
        return float(self.temperature[self.condenser.nearest_node(point)])


_THETA_MIN = 1e-2


@dataclass
class CondenserSystem:
    """Assembled weighted-graph operator for one condenser.

    ``A`` is the SPD PDE operator on free nodes (entries scale like 1/h^2);
    ``b_k`` and ``b_out`` are its couplings to unit values on K and on the
    complement of U.  Edge lists carry the same conductances for energy and
    flux evaluation (multiplied by the cell volume to become physical).
    """

    A: sparse.csr_matrix
    b_k: np.ndarray
    b_out: np.ndarray
    index: np.ndarray
    ff_edges: tuple[np.ndarray, np.ndarray, np.ndarray]     # (i, j, w)
    cut_k: tuple[np.ndarray, np.ndarray]                    # (i, w_eff)
    cut_out: tuple[np.ndarray, np.ndarray]

    @property
    def n(self) -> int:
        return self.A.shape[0]


def _cut_theta(phi: np.ndarray | None, pinned_face: np.ndarray, side: int, axis: int):
    """Sub-cell crossing fraction along cut edges, from the level function.

    theta = phi_free / (phi_free - phi_pinned), linearly interpolated; 1.0
    when no level is available (boundary exactly on the pinned nodes).
    """
    if phi is None:
        return np.ones(int(np.count_nonzero(pinned_face)))
    phi_nbr = _shift_values_float(phi, side, axis)
    pf = phi[pinned_face]
    pn = phi_nbr[pinned_face]
    denom = pf - pn
    theta = np.where(np.abs(denom) > 1e-300, pf / denom, 1.0)
    return np.clip(theta, _THETA_MIN, 1.0)


def _shift_values_float(grid: np.ndarray, side: int, axis: int) -> np.ndarray:
    out = np.zeros_like(grid)
    src = [slice(None)] * grid.ndim
    dst = [slice(None)] * grid.ndim
    if side == 1:
        src[axis] = slice(1, None)
        dst[axis] = slice(0, -1)
    else:
        src[axis] = slice(0, -1)
        dst[axis] = slice(1, None)
    out[tuple(dst)] = grid[tuple(src)]
    return out


def build_system(cond: CondenserSpec) -> CondenserSystem:
    free = cond.free_mask
    n = int(np.count_nonzero(free))
    index = -np.ones(cond.shape, dtype=np.int64)
    index[free] = np.arange(n)
    d = cond.dimension
    diag = np.zeros(n)
    rows, cols, vals = [], [], []
    b_k = np.zeros(n)
    b_out = np.zeros(n)
    ff_i, ff_j, ff_w = [], [], []
    cutk_i, cutk_w = [], []
    cuto_i, cuto_w = [], []
    outside = ~cond.u_mask
    for a in range(d):
        w = 1.0 / cond.spacing[a] ** 2
        for side in (-1, 1):
            nbr_free = _shift_bool(free, side, a)
            nbr_k = _shift_bool(cond.k_mask, side, a)
            nbr_out = _shift_bool(outside, side, a)
            # faces past the array edge are outside U
            edge = np.zeros(cond.shape, dtype=bool)
            sl = [slice(None)] * d
            sl[a] = 0 if side == -1 else -1
            edge[tuple(sl)] = True
            nbr_out = nbr_out | edge

            pair = free & nbr_free
            src = index[pair]
            dst = _shift_index(index, side, a)[pair]
            rows.append(src)
            cols.append(dst)
            vals.append(np.full(src.shape, -w))
            np.add.at(diag, src, w)
            if side == 1:  # record each free-free edge once
                ff_i.append(src)
                ff_j.append(dst)
                ff_w.append(np.full(src.shape, w))

            kface = free & nbr_k
            theta = _cut_theta(cond.k_phi, kface, side, a)
            w_eff = w / theta
            ki = index[kface]
            np.add.at(diag, ki, w_eff)
            np.add.at(b_k, ki, w_eff)
            cutk_i.append(ki)
            cutk_w.append(w_eff)

            oface = free & nbr_out
            theta = _cut_theta(cond.u_phi, oface, side, a)
            w_eff = w / theta
            oi = index[oface]
            np.add.at(diag, oi, w_eff)
            np.add.at(b_out, oi, w_eff)
            cuto_i.append(oi)
            cuto_w.append(w_eff)

    rows = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
    cols = np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)
    vals = np.concatenate(vals) if vals else np.zeros(0)
    A = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n)) + sparse.diags(diag)
    return CondenserSystem(
        A=A.tocsr(), b_k=b_k, b_out=b_out, index=index,
        ff_edges=(np.concatenate(ff_i) if ff_i else np.zeros(0, dtype=np.int64),
                  np.concatenate(ff_j) if ff_j else np.zeros(0, dtype=np.int64),
                  np.concatenate(ff_w) if ff_w else np.zeros(0)),
        cut_k=(np.concatenate(cutk_i) if cutk_i else np.zeros(0, dtype=np.int64),
               np.concatenate(cutk_w) if cutk_w else np.zeros(0)),
        cut_out=(np.concatenate(cuto_i) if cuto_i else np.zeros(0, dtype=np.int64),
                 np.concatenate(cuto_w) if cuto_w else np.zeros(0)),
    )


def _shift_index(index: np.ndarray, side: int, axis: int) -> np.ndarray:
    out = -np.ones_like(index)
    src = [slice(None)] * index.ndim
    dst = [slice(None)] * index.ndim
    if side == 1:
        src[axis] = slice(1, None)
        dst[axis] = slice(0, -1)
    else:
        src[axis] = slice(0, -1)
        dst[axis] = slice(1, None)
    out[tuple(dst)] = index[tuple(src)]
    return out


def _solve_spd(A, b, x0=None, rtol=1e-12, use_amg=True):
    """CG solve, preconditioned by algebraic multigrid on large systems."""
    n = A.shape[0]
    if n == 0:
        return np.zeros(0), 0.0
    M = None
    if use_amg and n > 20000:
        try:
            import pyamg

            M = pyamg.smoothed_aggregation_solver(A.tocsr()).aspreconditioner()
        except Exception:
            M = None
    maxiter = int(10 * math.sqrt(n)) + 50
    x, info = cg(A, b, x0=x0, rtol=rtol, atol=0.0, maxiter=maxiter, M=M)
    bnorm = float(np.linalg.norm(b))
    res = float(np.linalg.norm(b - A @ x)) / max(bnorm, 1e-300)
    if info != 0 and res > rtol * 10:
        raise SolverConvergenceError(res, maxiter)
    return x, res


def _fill_grid(cond: CondenserSpec, free_values: np.ndarray,
               k_value: float = 1.0) -> np.ndarray:
    out = np.zeros(cond.shape)
    out[cond.free_mask] = free_values
    out[cond.k_mask] = k_value
    return out


def equilibrium_potential(cond: CondenserSpec, rtol: float = 1e-12,
                          system: CondenserSystem | None = None):
    """Discrete harmonic potential: 1 on K, 0 on and outside the boundary of U.

    Returns (grid_array, residual).
    """
    sys_ = system or build_system(cond)
    if not np.any(cond.k_mask):
        return _fill_grid(cond, np.zeros(sys_.n), 0.0), 0.0
    x, res = _solve_spd(sys_.A, sys_.b_k, rtol=rtol)
    return _fill_grid(cond, x), res


def heat_flow_psi(cond: CondenserSpec, t_end: float, step_size: float,
                  checkpoints=None, rtol: float = 1e-10,
                  k_value: float = 1.0, outer_value: float = 0.0,
                  initial: np.ndarray | None = None) -> list[HeatFlowState]:
    """Implicit-Euler heat flow with boundary values pinned to ``k_value`` on
    K and ``outer_value`` outside U, starting from zero (or ``initial``).

    Returns states at each checkpoint time (default: only t_end), checkpoint
    times being rounded to whole steps.
    """
    if step_size > t_end / 10 + 1e-15:
        raise ValueError("step_size must be at most t_end / 10")
    sys_ = build_system(cond)
    n = sys_.n
    steps = max(1, int(round(t_end / step_size)))
    dt = t_end / steps
    M = (sparse.identity(n, format="csr") + dt * sys_.A).tocsr()
    b = dt * (k_value * sys_.b_k + outer_value * sys_.b_out)
    if initial is None:
        u = np.zeros(n)
    else:
        initial = np.asarray(initial, dtype=float)
        u = initial[cond.free_mask] if initial.shape == cond.shape else initial.copy()
    if checkpoints is None:
        check_steps = {steps}
    else:
        check_steps = {min(steps, max(1, int(round(c / dt)))) for c in checkpoints}
        check_steps.add(steps)
    out = []
    worst_res = 0.0
    maxiter = int(10 * math.sqrt(max(n, 1))) + 50
    for k in range(1, steps + 1):
        rhs = u + b
        x, info = cg(M, rhs, x0=u, rtol=rtol, atol=0.0, maxiter=maxiter)
        res = float(np.linalg.norm(rhs - M @ x)) / max(float(np.linalg.norm(rhs)), 1e-300)
        if info != 0 and res > rtol * 10:
            raise SolverConvergenceError(res, maxiter)
        worst_res = max(worst_res, res)
        u = x
        if k in check_steps:
            out.append(HeatFlowState(
                condenser=cond, time=k * dt,
                temperature=_fill_grid(cond, u, k_value),
                step_size=dt, solver_residual=worst_res))
    return out


def interior_mass(cond: CondenserSpec, t_end: float, step_size: float,
                  rtol: float = 1e-10) -> HeatFlowState:
    """Survival mass flow: all-ones initial data, zero on both boundaries.

    The value at x equals the integral over U\\K of the Dirichlet kernel of
    U\\K from x, by self-adjointness of the discrete propagator.
    """
    n = int(np.count_nonzero(cond.free_mask))
    states = heat_flow_psi(cond, t_end, step_size, rtol=rtol,
                           k_value=0.0, outer_value=0.0,
                           initial=np.ones(n))
    st = states[-1]
    st.temperature[cond.k_mask] = 0.0
    return st


def deficit_identity_check(cond: CondenserSpec, t: float, step_size: float,
                           rtol: float = 1e-12) -> float:
    """Sup-norm gap between (psi_eq - psi(t)) and the zero-boundary evolution
    of psi_eq under the same discrete propagator.  Exact up to solver
    residual when both sides share the step sequence."""
    eq, _ = equilibrium_potential(cond, rtol=min(rtol, 1e-12))
    psi = heat_flow_psi(cond, t, step_size, rtol=rtol)[-1]
    evolved = heat_flow_psi(cond, t, step_size, rtol=rtol,
                            k_value=0.0, outer_value=0.0,
                            initial=eq[cond.free_mask])[-1]
    free = cond.free_mask
    lhs = eq[free] - psi.temperature[free]
    rhs = evolved.temperature[free]
    return float(np.max(np.abs(lhs - rhs)))


def intersection_check(w1_bounds, w2_bounds, x, t: float,
                       ) -> dict:
    """Margin of the two-domain mass comparison for axis-aligned boxes.

    lhs = integral over W1 ^ W2 of (p_W1 - p_{W1 ^ W2}); rhs = 1 - mass of
    p_W2 over W2.  Returns both sides and rhs - lhs (nonnegative in exact
    arithmetic).
    """
    x = np.asarray(x, dtype=float)
    inter = tuple((max(a1, a2), min(b1, b2))
                  for (a1, b1), (a2, b2) in zip(w1_bounds, w2_bounds))
    for (lo, hi), xa in zip(inter, x):
        if not (lo < xa < hi):
            raise ValueError("x must lie in the interior of the intersection")
    mass_w1_on_inter = box_kernel_mass(t, x, w1_bounds, inter)
    mass_inter = box_kernel_mass(t, x, inter, inter)
    mass_w2 = box_kernel_mass(t, x, w2_bounds, w2_bounds)
    lhs = mass_w1_on_inter - mass_inter
    rhs = 1.0 - mass_w2
    return {"lhs": lhs, "rhs": rhs, "margin": rhs - lhs}


# ---------------------------------------------------------------------------
# kernel bound reports


@dataclass
class KernelBoundReport:
    c2_fixed: float
    c1_fit: float
    c3_fit: float
    norris_epsilon: float
    norris_t0: float
    rows: list[dict]


def kernel_bound_report(geometry: Geometry, t_grid, point_pairs,
                        c2: float = 0.2, box_center=None,
                        box_halfwidth: float | None = None) -> KernelBoundReport:
    """Fitted witness constants for the Gaussian two-sided bounds and the
    boundary-insensitivity ratio on a concentric box.

    Upper: smallest C1 with p <= C1 t^{-d/2} e^{-c2 dist^2 / t} over the
    sweep.  Lower: largest C3 with p >= C3 t^{-d/2} e^{-dist^2 / 4t}.
    Ratio: largest eps with p_box / p_torus >= 1 - e^{-eps/t} for pairs
    inside the concentric three-quarter box.
    """
    if not geometry.is_torus:
        raise ValueError("bound report runs on a torus geometry")
    d = geometry.dimension
    spec = KernelSpec(geometry, TORUS_IMAGES)
    r0 = geometry.r0
    if box_halfwidth is None:
        box_halfwidth = r0
    if box_center is None:
        box_center = tuple(0.5 * L for L in geometry.side_lengths)
    box_bounds = tuple((c - box_halfwidth, c + box_halfwidth) for c in box_center)

    rows = []
    c1 = 0.0
    c3 = math.inf
    eps = math.inf
    for t in t_grid:
        for (x, y) in point_pairs:
            xv = np.asarray(x, dtype=float)
            yv = np.asarray(y, dtype=float)
            p = kernel_eval(spec, t, xv, yv)
            dist = torus_distance(geometry, xv, yv)
            up_envelope = t ** (-d / 2.0) * math.exp(-c2 * dist**2 / t)
            low_envelope = t ** (-d / 2.0) * math.exp(-(dist**2) / (4.0 * t))
            c1 = max(c1, p / up_envelope)
            c3 = min(c3, p / low_envelope)
            row = {"t": float(t), "dist": dist, "value": p,
                   "upper_envelope": up_envelope, "lower_envelope": low_envelope}
            inside = all(abs(v - c) <= 0.75 * box_halfwidth
                         for v, c in zip(xv, box_center)) and \
                all(abs(v - c) <= 0.75 * box_halfwidth for v, c in zip(yv, box_center))
            if inside:
                pb = 1.0
                for a, (lo, hi) in enumerate(box_bounds):
                    pb *= float(box_kernel_1d(t, xv[a] - lo, yv[a] - lo, hi - lo))
                ratio = pb / p
                gap = max(1.0 - ratio, 1e-300)
                eps = min(eps, -t * math.log(gap))
                row["norris_ratio"] = ratio
            rows.append(row)
    for row in rows:
        row["bound"] = c1 * row["t"] ** (-d / 2.0) * math.exp(
            -c2 * row["dist"] ** 2 / row["t"])
        row["margin"] = row["bound"] - row["value"]
    return KernelBoundReport(
        c2_fixed=c2, c1_fit=float(c1), c3_fit=float(c3),
        norris_epsilon=float(eps), norris_t0=float(max(t_grid)),
        rows=rows,
    )
