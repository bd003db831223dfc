"""Nodal domains of sampled fields and their geometric measurements.

A nodal domain is a face-connected component of cells sharing a strict sign;
cells within the zero tolerance belong to no domain.  Distances to the nodal
set are measured with the exact Euclidean distance transform of the cells not
sharing a domain's sign, with periodic replication on tori.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .spectra import Geometry, ScalarGrid

ZERO_TOLERANCE = 1e-9


@dataclass
class DomainLabeling:
    """Per-cell labels (0 = zero cell) and per-domain summary statistics.

    Arrays indexed by domain id run from 0 to n_domains inclusive; index 0
    holds the zero-cell bookkeeping (sign 0, volume of the zero cells).
    """

    geometry: Geometry
    resolution: int
    labels: np.ndarray
    signs: np.ndarray          # (n+1,) int8
    volumes: np.ndarray        # (n+1,) float, index 0 = zero-cell volume
    max_abs: np.ndarray        # (n+1,) float
    argmax: np.ndarray         # (n+1, d) int, row 0 unused
    spacing: tuple[float, ...]

    @property
    def n_domains(self) -> int:
        return len(self.signs) - 1

    def domain_ids(self) -> range:
        return range(1, self.n_domains + 1)

    def argmax_point(self, domain_id: int) -> np.ndarray:
        h = np.asarray(self.spacing)
        return self.argmax[domain_id] * h


def _face_structure(d: int) -> np.ndarray:
    return ndimage.generate_binary_structure(d, 1)


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        p = self.parent
        while p[x] != x:
            p[x] = p[p[x]]
            x = p[x]
        return x

    def union(self, a: int, b: int):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _label_periodic(mask: np.ndarray, structure: np.ndarray):
    """Face-adjacency components of a boolean mask with wraparound seams."""
    labels, n = ndimage.label(mask, structure=structure)
    if n == 0:
        return labels, 0
    uf = _UnionFind(n + 1)
    d = mask.ndim
    for axis in range(d):
        first = np.take(labels, 0, axis=axis)
        last = np.take(labels, -1, axis=axis)
        both = (first > 0) & (last > 0)
        if np.any(both):
            pairs = np.stack([first[both], last[both]], axis=-1).reshape(-1, 2)
            for a, b in np.unique(pairs, axis=0):
                uf.union(int(a), int(b))
    remap = np.zeros(n + 1, dtype=labels.dtype)
    nxt = 0
    for i in range(1, n + 1):
        r = uf.find(i)
        if remap[r] == 0:
            nxt += 1
            remap[r] = nxt
        remap[i] = remap[r]
    return remap[labels], nxt


def label_nodal_domains(grid: ScalarGrid, zero_tolerance: float = ZERO_TOLERANCE) -> DomainLabeling:
    """Label sign-respecting face-connected components of the sampled field."""
    values = grid.values
    vmax = float(np.max(np.abs(values)))
    if vmax == 0.0:
        raise ValueError("degenerate field: all samples are zero")
    thr = zero_tolerance * vmax
    pos = values > thr
    neg = values < -thr

    structure = _face_structure(values.ndim)
    if grid.geometry.is_torus:
        lab_pos, n_pos = _label_periodic(pos, structure)
        lab_neg, n_neg = _label_periodic(neg, structure)
    else:
        lab_pos, n_pos = ndimage.label(pos, structure=structure)
        lab_neg, n_neg = ndimage.label(neg, structure=structure)

    labels = lab_pos.astype(np.int32)
    labels[neg] = lab_neg[neg] + n_pos
    n = n_pos + n_neg

    weights = grid.cell_weights()
    volumes = np.bincount(labels.ravel(), weights=weights.ravel(), minlength=n + 1)

    signs = np.zeros(n + 1, dtype=np.int8)
    signs[1:n_pos + 1] = 1
    signs[n_pos + 1:] = -1

    max_abs = np.zeros(n + 1)
    argmax = np.zeros((n + 1, values.ndim), dtype=np.int64)
    if n > 0:
        ids = list(range(1, n + 1))
        max_abs[1:] = ndimage.maximum(np.abs(values), labels, index=ids)
        pos_list = ndimage.maximum_position(np.abs(values), labels, index=ids)
        argmax[1:] = np.asarray(pos_list, dtype=np.int64)

    return DomainLabeling(
        geometry=grid.geometry,
        resolution=grid.resolution,
        labels=labels,
        signs=signs,
        volumes=volumes,
        max_abs=max_abs,
        argmax=argmax,
        spacing=grid.spacing,
    )


def _distance_to_complement(mask: np.ndarray, spacing, periodic: bool,
                            pad_cells: int | None = None) -> np.ndarray:
    """Exact Euclidean distance from cells of ``mask`` to the nearest cell
    outside it.  Periodic axes are replicated wide enough that every returned
    distance below pad_cells*h is a true torus distance."""
    if not periodic:
        return ndimage.distance_transform_edt(mask, sampling=spacing)
    n = mask.shape[0]
    if pad_cells is None:
        pad_cells = n // 2 + 1
    pad_cells = min(pad_cells, n)
    padded = np.pad(mask, pad_cells, mode="wrap")
    dist = ndimage.distance_transform_edt(padded, sampling=spacing)
    sl = tuple(slice(pad_cells, pad_cells + s) for s in mask.shape)
    return dist[sl]


def signed_distance_fields(labeling: DomainLabeling, pad_cells: int | None = None):
    """Distance of every signed cell to the nearest cell not sharing its sign.

    For a cell inside a domain this is the discrete distance to the nodal set
    (zero cells and opposite-sign cells both terminate the domain).
    """
    pos = np.zeros_like(labeling.labels, dtype=bool)
    neg = np.zeros_like(labeling.labels, dtype=bool)
    sign_of_cell = labeling.signs[labeling.labels]
    pos[sign_of_cell == 1] = True
    neg[sign_of_cell == -1] = True
    periodic = labeling.geometry.is_torus
    d_pos = _distance_to_complement(pos, labeling.spacing, periodic, pad_cells)
    d_neg = _distance_to_complement(neg, labeling.spacing, periodic, pad_cells)
    # the transforms are zero off their own masks, so the fields just add up
    return d_pos + d_neg


@dataclass
class InradiusReport:
    domain_ids: np.ndarray
    inradius: np.ndarray
    centered_inradius: np.ndarray
    incenter: np.ndarray   # (n, d) physical coordinates

    def for_domain(self, domain_id: int) -> dict:
        i = int(domain_id) - 1
        return {
            "inradius": float(self.inradius[i]),
            "centered_inradius": float(self.centered_inradius[i]),
            "incenter": tuple(self.incenter[i]),
        }


def inradius_report(labeling: DomainLabeling, grid: ScalarGrid,
                    pad_cells: int | None = None) -> InradiusReport:
    """Inradius, incenter and the distance from each domain's max point to
    the nodal set, via exact distance transforms (one per sign)."""
    dist = signed_distance_fields(labeling, pad_cells)
    n = labeling.n_domains
    ids = list(range(1, n + 1))
    inr = np.asarray(ndimage.maximum(dist, labeling.labels, index=ids), dtype=float)
    pos_list = ndimage.maximum_position(dist, labeling.labels, index=ids)
    h = np.asarray(labeling.spacing)
    incenter = np.asarray(pos_list, dtype=float) * h[None, :]
    centered = dist[tuple(labeling.argmax[1:].T)]
    return InradiusReport(
        domain_ids=np.arange(1, n + 1),
        inradius=inr,
        centered_inradius=np.asarray(centered, dtype=float),
        incenter=incenter,
    )


def centered_inradius(labeling: DomainLabeling, domain_ids=None,
                      window_cells: int = 12) -> np.ndarray:
    """Distance from each domain's argmax to the nearest cell outside the
    domain's sign, by direct search in a growing local window.

    Equivalent to reading the distance transform at the argmax but much
    cheaper when only those point values are needed (scaling sweeps).
    """
    if domain_ids is None:
        domain_ids = list(labeling.domain_ids())
    h = np.asarray(labeling.spacing)
    shape = labeling.labels.shape
    d = len(shape)
    periodic = labeling.geometry.is_torus
    sign_of_cell = labeling.signs[labeling.labels]
    out = np.empty(len(domain_ids))
    for j, did in enumerate(domain_ids):
        center = labeling.argmax[did]
        sign = labeling.signs[did]
        w = window_cells
        while True:
            w_eff = min(w, min(shape) // 2)
            idx_axes = []
            for a in range(d):
                offs = np.arange(-w_eff, w_eff + 1) + center[a]
                idx_axes.append(offs % shape[a] if periodic else
                                offs[(offs >= 0) & (offs < shape[a])])
            block = sign_of_cell[np.ix_(*idx_axes)]
            feature = block != sign
            val = math.inf
            if np.any(feature):
                coords = np.nonzero(feature)
                dist2 = np.zeros(coords[0].shape)
                for a in range(d):
                    offs = idx_axes[a][coords[a]] - center[a]
                    if periodic:
                        na = shape[a]
                        offs = (offs + na // 2) % na - na // 2
                    dist2 += (offs * h[a]) ** 2
                val = math.sqrt(float(np.min(dist2)))
            # a feature near the window corner may hide a closer one outside;
            # accept only distances certified by the window half-width
            if val <= w_eff * float(np.min(h)) or w_eff >= min(shape) // 2:
                out[j] = val
                break
            w *= 2
    return out


def deficiency_ratio(labeling: DomainLabeling, grid: ScalarGrid, domain_id: int,
                     delta: float, oversample: int = 4) -> float:
    """Volume fraction of the ball B(x_max, delta/sqrt(lambda)) not labeled
    with the domain (zero cells count as deficiency).

    On a box the ball may overhang the boundary; the overhang counts toward
    the deficiency since the domain cannot extend there.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    lam = grid.eigenvalue
    if lam is None or lam <= 0:
        raise ValueError("deficiency_ratio needs a field with a positive eigenvalue")
    r = delta / math.sqrt(lam)
    geom = grid.geometry
    if geom.is_torus and r >= geom.r0:
        raise ValueError("ball radius must stay below r0 on a torus")
    center = labeling.argmax_point(domain_id)
    h = np.asarray(labeling.spacing)
    d = geom.dimension
    step = h / oversample
    offs = [np.arange(-math.ceil(r / step[a]), math.ceil(r / step[a]) + 1) * step[a]
            for a in range(d)]
    mesh = np.meshgrid(*offs, indexing="ij")
    rel = np.stack([m.ravel() for m in mesh], axis=-1)
    inside = np.einsum("ij,ij->i", rel, rel) <= r * r
    rel = rel[inside]
    if rel.shape[0] == 0:
        raise ValueError("ball resolves no sample points; increase oversample")
    pts = rel + center[None, :]
    shape = labeling.labels.shape
    in_geometry = np.ones(pts.shape[0], dtype=bool)
    idx = np.empty((pts.shape[0], d), dtype=np.int64)
    for a in range(d):
        ia = np.rint(pts[:, a] / h[a]).astype(np.int64)
        if geom.is_torus:
            ia %= shape[a]
        else:
            ok = (pts[:, a] >= -1e-12) & (pts[:, a] <= geom.side_lengths[a] + 1e-12)
            in_geometry &= ok
            ia = np.clip(ia, 0, shape[a] - 1)
        idx[:, a] = ia
    lab = labeling.labels[tuple(idx.T)]
    in_domain = in_geometry & (lab == domain_id)
    return float(1.0 - np.count_nonzero(in_domain) / rel.shape[0])


@dataclass
class ClassicalBounds:
    faber_krahn_min: float
    zero_hitting_radius: float
    per_domain_faber_krahn: np.ndarray


def classical_bounds_report(labeling: DomainLabeling, grid: ScalarGrid, lam: float,
                            pad_cells: int | None = None) -> ClassicalBounds:
    """Volume lower-bound witness and the radius at which every ball sees a
    sign change or a zero cell."""
    d = labeling.geometry.dimension
    fk = labeling.volumes[1:] * lam ** (d / 2.0)
    dist = signed_distance_fields(labeling, pad_cells)
    zero_hitting = float(np.max(dist))
    return ClassicalBounds(
        faber_krahn_min=float(np.min(fk)) if fk.size else math.inf,
        zero_hitting_radius=zero_hitting,
        per_domain_faber_krahn=fk,
    )


def nodal_csv_rows(labeling: DomainLabeling, grid: ScalarGrid, lam: float,
                   report: InradiusReport, bounds: ClassicalBounds) -> list[dict]:
    rows = []
    h = np.asarray(labeling.spacing)
    for i, did in enumerate(labeling.domain_ids()):
        row = {
            "lambda": lam,
            "domain_id": int(did),
            "sign": int(labeling.signs[did]),
            "volume": float(labeling.volumes[did]),
            "inradius": float(report.inradius[i]),
            "centered_inradius": float(report.centered_inradius[i]),
            "faber_krahn": float(bounds.per_domain_faber_krahn[i]),
        }
        for a in range(labeling.geometry.dimension):
            row[f"argmax_{'xyz'[a]}"] = float(labeling.argmax[did][a] * h[a])
        rows.append(row)
    return rows
