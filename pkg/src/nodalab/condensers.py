"""Condenser geometry: a compact cell mask K inside an open region U.

Masks live on a regular node grid (nodes at origin + i*h).  U is usually an
axis-aligned box; spherical U masks are accepted for the analytic capacity
oracles.  The builders keep two guard cells between K and the complement of
U so the discrete boundary rows never collide.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage


@dataclass
class CondenserSpec:
    shape: tuple[int, ...]
    spacing: tuple[float, ...]
    origin: tuple[float, ...]
    u_mask: np.ndarray = field(repr=False)
    k_mask: np.ndarray = field(repr=False)
    label: str = ""
    u_box: tuple[tuple[float, float], ...] | None = None  # set when U is a box
    # level functions at nodes (positive on the free side, <= 0 on the pinned
    # set); when present, boundary edges get sub-cell cut conductances
    k_phi: np.ndarray | None = field(default=None, repr=False)
    u_phi: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.u_mask.shape != self.shape or self.k_mask.shape != self.shape:
            raise ValueError("mask shapes disagree with the grid shape")
        if np.any(self.k_mask & ~self.u_mask):
            raise ValueError("K must be contained in U")
        edge = np.zeros(self.shape, dtype=bool)
        for a in range(len(self.shape)):
            sl = [slice(None)] * len(self.shape)
            sl[a] = 0
            edge[tuple(sl)] = True
            sl[a] = -1
            edge[tuple(sl)] = True
        if np.any(self.u_mask & edge):
            raise ValueError("U must not touch the grid edge (Dirichlet frame)")
        if np.any(self.k_mask):
            grown = ndimage.binary_dilation(
                self.k_mask, structure=ndimage.generate_binary_structure(len(self.shape), 1),
                iterations=2)
            if np.any(grown & ~self.u_mask):
                raise ValueError("K must keep two guard cells away from the boundary of U")

    @property
    def dimension(self) -> int:
        return len(self.shape)

    @property
    def free_mask(self) -> np.ndarray:
        return self.u_mask & ~self.k_mask

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def node_coords(self) -> list[np.ndarray]:
        return [self.origin[a] + np.arange(self.shape[a]) * self.spacing[a]
                for a in range(self.dimension)]

    def nearest_node(self, point) -> tuple[int, ...]:
        idx = []
        for a in range(self.dimension):
            i = int(round((point[a] - self.origin[a]) / self.spacing[a]))
            idx.append(min(max(i, 0), self.shape[a] - 1))
        return tuple(idx)

    def k_volume(self) -> float:
        return float(np.count_nonzero(self.k_mask)) * self.cell_volume

    def k_boundary_faces(self) -> np.ndarray:
        """Physical midpoints of faces between K cells and non-K cells."""
        mids = []
        coords = self.node_coords()
        for a in range(self.dimension):
            for side in (-1, 1):
                nbr_not_k = ~_shift_bool(self.k_mask, side, a)
                faces = self.k_mask & nbr_not_k
                ii = np.nonzero(faces)
                pts = np.stack([coords[b][ii[b]].astype(float) for b in range(self.dimension)],
                               axis=-1)
                pts[:, a] += 0.5 * side * self.spacing[a]
                mids.append(pts)
        return np.concatenate(mids, axis=0) if mids else np.zeros((0, self.dimension))


def _shift_bool(mask: np.ndarray, side: int, axis: int) -> np.ndarray:
    """Neighbor lookup: out[i] = mask[i + side] along axis, False past the edge."""
    out = np.zeros_like(mask)
    if side == 1:
        src = [slice(None)] * mask.ndim
        dst = [slice(None)] * mask.ndim
        src[axis] = slice(1, None)
        dst[axis] = slice(0, -1)
    else:
        src = [slice(None)] * mask.ndim
        dst = [slice(None)] * mask.ndim
        src[axis] = slice(0, -1)
        dst[axis] = slice(1, None)
    out[tuple(dst)] = mask[tuple(src)]
    return out


def _coords(shape, spacing, origin):
    axes = [origin[a] + np.arange(shape[a]) * spacing[a] for a in range(len(shape))]
    return np.meshgrid(*axes, indexing="ij")


def sphere_mask(shape, spacing, origin, center, radius) -> np.ndarray:
    mesh = _coords(shape, spacing, origin)
    dist2 = sum((m - c) ** 2 for m, c in zip(mesh, center))
    return dist2 <= radius**2


def box_mask(shape, spacing, origin, lo, hi, strict: bool = False) -> np.ndarray:
    mesh = _coords(shape, spacing, origin)
    out = np.ones(shape, dtype=bool)
    for a, m in enumerate(mesh):
        if strict:
            out &= (m > lo[a]) & (m < hi[a])
        else:
            out &= (m >= lo[a] - 1e-12) & (m <= hi[a] + 1e-12)
    return out


def two_sphere_mask(shape, spacing, origin, centers, radius) -> np.ndarray:
    out = np.zeros(shape, dtype=bool)
    for c in centers:
        out |= sphere_mask(shape, spacing, origin, c, radius)
    return out


def l_shape_mask(shape, spacing, origin, lo, hi, notch_fraction: float = 0.5) -> np.ndarray:
    """Axis-aligned box minus its upper corner box (an L in every dimension)."""
    full = box_mask(shape, spacing, origin, lo, hi)
    cut_lo = [lo[a] + (1 - notch_fraction) * (hi[a] - lo[a]) for a in range(len(lo))]
    notch = box_mask(shape, spacing, origin, cut_lo, hi)
    return full & ~notch


def unit_box_condenser(resolution: int, dimension: int, k_builder, label: str = "",
                       side: float = 1.0, k_level_builder=None) -> CondenserSpec:
    """Condenser with U the open unit box (0, side)^d on an N-node grid.

    ``k_builder(shape, spacing, origin) -> bool mask`` positions K; an
    optional level builder with the same signature supplies the sub-cell
    boundary placement for curved K shapes.
    """
    shape = (resolution,) * dimension
    h = side / (resolution - 1)
    spacing = (h,) * dimension
    origin = (0.0,) * dimension
    interior = np.zeros(shape, dtype=bool)
    interior[(slice(1, -1),) * dimension] = True
    k = k_builder(shape, spacing, origin)
    k_phi = k_level_builder(shape, spacing, origin) if k_level_builder else None
    return CondenserSpec(
        shape=shape, spacing=spacing, origin=origin,
        u_mask=interior, k_mask=k & interior, label=label,
        u_box=tuple((0.0, side) for _ in range(dimension)),
        k_phi=k_phi,
    )


def radial_level(shape, spacing, origin, center, radius) -> np.ndarray:
    """Signed level |x - center| - radius at the nodes (negative inside)."""
    mesh = _coords(shape, spacing, origin)
    dist = np.sqrt(sum((m - c) ** 2 for m, c in zip(mesh, center)))
    return dist - radius


def min_level(levels) -> np.ndarray:
    out = levels[0]
    for lv in levels[1:]:
        out = np.minimum(out, lv)
    return out


def concentric_sphere_condenser(resolution: int, dimension: int, a: float, b: float,
                                side: float = 1.0) -> CondenserSpec:
    """K a ball of radius a, U a ball of radius b, both centered in the box.

    Node masks follow the sign of the exact radial levels, which also drive
    the sub-cell boundary conductances in the solvers.
    """
    shape = (resolution,) * dimension
    h = side / (resolution - 1)
    spacing = (h,) * dimension
    origin = (0.0,) * dimension
    center = (0.5 * side,) * dimension
    lk = radial_level(shape, spacing, origin, center, a)
    lu = radial_level(shape, spacing, origin, center, b)
    u = lu < 0
    # keep U off the frame
    edge = np.zeros(shape, dtype=bool)
    for ax in range(dimension):
        sl = [slice(None)] * dimension
        sl[ax] = 0
        edge[tuple(sl)] = True
        sl[ax] = -1
        edge[tuple(sl)] = True
    u &= ~edge
    k = lk <= 0
    return CondenserSpec(shape=shape, spacing=spacing, origin=origin,
                         u_mask=u, k_mask=k, label=f"concentric(a={a},b={b})",
                         k_phi=lk, u_phi=-lu)
