"""Exact Laplace eigenfunctions on flat geometries, sampled onto regular grids.

Two geometries are supported: axis-aligned boxes with Dirichlet boundary
(product-of-sines modes) and flat tori (lattice Fourier modes).  Eigenvalues
and gradients are analytic, so sampled fields carry no solver error; the grid
is only a measurement device.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

DIRICHLET_BOX = "dirichlet_box"
FLAT_TORUS = "flat_torus"

PHASE_SIN_PRODUCT = "sin_product"
PHASE_COS = "cos"
PHASE_SIN = "sin"

# Sampling floor: at least this many grid points per wavelength 2*pi/sqrt(lambda).
SAMPLES_PER_WAVELENGTH = 16

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """Seedable 64-bit generator (splitmix64) with Box-Muller normals.

    The algorithm is fixed so that coefficient streams are reproducible from
    the seed alone; golden coefficient files in the test suite pin its output.
    """

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        # 53-bit mantissa in [0, 1)
        return (self.next_u64() >> 11) * 2.0**-53

    def normals(self, n: int) -> np.ndarray:
        out = np.empty(n)
        i = 0
        while i < n:
            u1 = self.uniform()
            u2 = self.uniform()
            while u1 <= 0.0:
                u1 = self.uniform()
            r = math.sqrt(-2.0 * math.log(u1))
            out[i] = r * math.cos(2.0 * math.pi * u2)
            i += 1
            if i < n:
                out[i] = r * math.sin(2.0 * math.pi * u2)
                i += 1
        return out


@dataclass(frozen=True)
class Geometry:
    """A flat model geometry: Dirichlet box or flat torus."""

    kind: str
    dimension: int
    side_lengths: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in (DIRICHLET_BOX, FLAT_TORUS):
            raise ValueError(f"unknown geometry kind {self.kind!r}")
        if self.dimension not in (2, 3):
            raise ValueError("dimension must be 2 or 3")
        sides = self.side_lengths or (1.0,) * self.dimension
        sides = tuple(float(s) for s in sides)
        if len(sides) != self.dimension:
            raise ValueError("side_lengths must have one entry per dimension")
        if any(s <= 0 for s in sides):
            raise ValueError("side lengths must be positive")
        object.__setattr__(self, "side_lengths", sides)

    @property
    def is_torus(self) -> bool:
        return self.kind == FLAT_TORUS

    @property
    def r0(self) -> float:
        """Safe-ball radius: half the smallest side."""
        return 0.5 * min(self.side_lengths)

    @property
    def volume(self) -> float:
        return float(np.prod(self.side_lengths))


def box(dimension: int, side_lengths: Sequence[float] | None = None) -> Geometry:
    return Geometry(DIRICHLET_BOX, dimension, tuple(side_lengths or ()))


def torus(dimension: int, side_lengths: Sequence[float] | None = None) -> Geometry:
    return Geometry(FLAT_TORUS, dimension, tuple(side_lengths or ()))


@dataclass(frozen=True)
class ModeTerm:
    k: tuple[int, ...]
    phase: str
    coeff: float

    def __post_init__(self):
        if self.phase not in (PHASE_SIN_PRODUCT, PHASE_COS, PHASE_SIN):
            raise ValueError(f"unknown phase {self.phase!r}")


def _term_eigenvalue(geometry: Geometry, term: ModeTerm) -> float:
    sides = geometry.side_lengths
    if term.phase == PHASE_SIN_PRODUCT:
        return math.pi**2 * sum((m / L) ** 2 for m, L in zip(term.k, sides))
    return 4.0 * math.pi**2 * sum((k / L) ** 2 for k, L in zip(term.k, sides))


@dataclass(frozen=True)
class EigenMode:
    """An exact eigenfunction: eigenvalue plus coefficients over analytic terms."""

    geometry: Geometry
    eigenvalue: float
    terms: tuple[ModeTerm, ...]

    def __post_init__(self):
        if not self.terms:
            raise ValueError("mode needs at least one term")
        for t in self.terms:
            if len(t.k) != self.geometry.dimension:
                raise ValueError("term frequency dimension mismatch")
            lam_t = _term_eigenvalue(self.geometry, t)
            if abs(lam_t - self.eigenvalue) > 1e-9 * max(1.0, self.eigenvalue):
                raise ValueError(
                    f"term {t.k} has eigenvalue {lam_t}, mode claims {self.eigenvalue}"
                )

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Analytic values at arbitrary points, shape (m, d) -> (m,)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        sides = np.asarray(self.geometry.side_lengths)
        out = np.zeros(pts.shape[0])
        for t in self.terms:
            k = np.asarray(t.k, dtype=float)
            if t.phase == PHASE_SIN_PRODUCT:
                term = np.ones(pts.shape[0])
                for a in range(pts.shape[1]):
                    term *= np.sin(math.pi * k[a] * pts[:, a] / sides[a])
                out += t.coeff * term
            else:
                phase = 2.0 * math.pi * (pts @ (k / sides))
                out += t.coeff * (np.cos(phase) if t.phase == PHASE_COS else np.sin(phase))
        return out

    def evaluate_gradient(self, points: np.ndarray) -> np.ndarray:
        """Analytic gradient at arbitrary points, shape (m, d) -> (m, d)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        m, d = pts.shape
        sides = np.asarray(self.geometry.side_lengths)
        out = np.zeros((m, d))
        for t in self.terms:
            k = np.asarray(t.k, dtype=float)
            if t.phase == PHASE_SIN_PRODUCT:
                sin_f = [np.sin(math.pi * k[a] * pts[:, a] / sides[a]) for a in range(d)]
                cos_f = [np.cos(math.pi * k[a] * pts[:, a] / sides[a]) for a in range(d)]
                for a in range(d):
                    g = t.coeff * math.pi * k[a] / sides[a] * cos_f[a]
                    for b in range(d):
                        if b != a:
                            g = g * sin_f[b]
                    out[:, a] += g
            else:
                freq = k / sides
                phase = 2.0 * math.pi * (pts @ freq)
                if t.phase == PHASE_COS:
                    base = -np.sin(phase)
                else:
                    base = np.cos(phase)
                out += t.coeff * 2.0 * math.pi * base[:, None] * freq[None, :]
        return out

    def gradient_sup_bound(self) -> float:
        """Crude global bound on |grad u| from coefficients (triangle inequality)."""
        total = 0.0
        sides = np.asarray(self.geometry.side_lengths)
        for t in self.terms:
            k = np.asarray(t.k, dtype=float)
            if t.phase == PHASE_SIN_PRODUCT:
                total += abs(t.coeff) * math.pi * float(np.linalg.norm(k / sides))
            else:
                total += abs(t.coeff) * 2.0 * math.pi * float(np.linalg.norm(k / sides))
        return total


@dataclass(frozen=True)
class AnalyticField:
    """A non-eigenfunction analytic field usable wherever a mode is expected."""

    fn: Callable[[np.ndarray], np.ndarray]
    grad_fn: Callable[[np.ndarray], np.ndarray] | None = None
    eigenvalue: float | None = None

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(self.fn(np.atleast_2d(np.asarray(points, dtype=float))))

    def evaluate_gradient(self, points: np.ndarray) -> np.ndarray:
        if self.grad_fn is None:
            raise ValueError("field has no gradient callable")
        return np.asarray(self.grad_fn(np.atleast_2d(np.asarray(points, dtype=float))))


@dataclass
class ScalarGrid:
    """A scalar field sampled on a regular grid with geometry metadata.

    Box grids include both boundary planes (spacing L/(N-1)); torus grids use
    periodic indexing (spacing L/N, the point at L is identified with 0).
    When the field came from an analytic source, ``analytic`` allows callers
    to re-evaluate it off-lattice (local oversampling for sup measurements).
    """

    geometry: Geometry
    resolution: int
    values: np.ndarray
    gradient: tuple[np.ndarray, ...] | None = None
    source: str = ""
    analytic: EigenMode | AnalyticField | None = field(default=None, repr=False)

    @property
    def spacing(self) -> tuple[float, ...]:
        n = self.resolution
        if self.geometry.is_torus:
            return tuple(L / n for L in self.geometry.side_lengths)
        return tuple(L / (n - 1) for L in self.geometry.side_lengths)

    def axes(self) -> list[np.ndarray]:
        n = self.resolution
        if self.geometry.is_torus:
            return [np.arange(n) * (L / n) for L in self.geometry.side_lengths]
        return [np.linspace(0.0, L, n) for L in self.geometry.side_lengths]

    def cell_weights_1d(self) -> list[np.ndarray]:
        """Per-axis quadrature weights whose tensor product tiles the volume."""
        n = self.resolution
        out = []
        for L in self.geometry.side_lengths:
            if self.geometry.is_torus:
                out.append(np.full(n, L / n))
            else:
                h = L / (n - 1)
                w = np.full(n, h)
                w[0] = w[-1] = 0.5 * h
                out.append(w)
        return out

    def cell_weights(self) -> np.ndarray:
        ws = self.cell_weights_1d()
        grid = ws[0]
        for w in ws[1:]:
            grid = np.multiply.outer(grid, w)
        return grid

    def point(self, index: Sequence[int]) -> np.ndarray:
        h = self.spacing
        return np.array([i * hi for i, hi in zip(index, h)])

    @property
    def eigenvalue(self) -> float | None:
        lam = getattr(self.analytic, "eigenvalue", None)
        return lam


def min_resolution(geometry: Geometry, eigenvalue: float,
                   samples_per_wavelength: int = SAMPLES_PER_WAVELENGTH) -> int:
    """Smallest admissible grid resolution for a given eigenvalue."""
    if eigenvalue <= 0:
        return 4
    need = max(
        samples_per_wavelength * L * math.sqrt(eigenvalue) / (2.0 * math.pi)
        for L in geometry.side_lengths
    )
    return max(4, math.ceil(need - 1e-9))


def box_mode(geometry: Geometry, index_vector: Sequence[int]) -> EigenMode:
    """Product sine mode on a Dirichlet box, exact eigenvalue pi^2 sum (m_i/L_i)^2."""
    if geometry.kind != DIRICHLET_BOX:
        raise ValueError("box_mode requires a dirichlet_box geometry")
    m = tuple(int(v) for v in index_vector)
    if len(m) != geometry.dimension:
        raise ValueError("index vector dimension mismatch")
    if any(v < 1 for v in m):
        raise ValueError("box mode indices must be >= 1")
    lam = math.pi**2 * sum((mi / L) ** 2 for mi, L in zip(m, geometry.side_lengths))
    return EigenMode(geometry, lam, (ModeTerm(m, PHASE_SIN_PRODUCT, 1.0),))


def lattice_representations(dimension: int, level: int) -> list[tuple[int, ...]]:
    """Lexicographically positive integer vectors k with |k|^2 == level."""
    if level < 0:
        raise ValueError("level must be >= 0")
    if level == 0:
        return [(0,) * dimension]
    kmax = int(math.isqrt(level))
    reps = []
    ranges = [range(-kmax, kmax + 1)] * dimension
    import itertools

    for k in itertools.product(*ranges):
        if sum(v * v for v in k) != level:
            continue
        # keep one of each antipodal pair: first nonzero entry positive
        lead = next(v for v in k if v != 0)
        if lead > 0:
            reps.append(k)
    reps.sort()
    return reps


def torus_eigenspace(geometry: Geometry, level: int) -> list[EigenMode]:
    """Real basis of the eigenspace lambda = 4 pi^2 n on the unit torus.

    Each positive lattice vector contributes a cosine and a sine wave; level 0
    gives the single constant function.  Levels with no lattice representation
    return an empty list.
    """
    if geometry.kind != FLAT_TORUS:
        raise ValueError("torus_eigenspace requires a flat_torus geometry")
    if any(abs(L - 1.0) > 1e-12 for L in geometry.side_lengths):
        raise ValueError("torus_eigenspace assumes unit side lengths")
    if level < 0:
        raise ValueError("level must be >= 0")
    lam = 4.0 * math.pi**2 * level
    basis = []
    for k in lattice_representations(geometry.dimension, level):
        if level == 0:
            basis.append(EigenMode(geometry, 0.0, (ModeTerm(k, PHASE_COS, 1.0),)))
            continue
        basis.append(EigenMode(geometry, lam, (ModeTerm(k, PHASE_COS, 1.0),)))
        basis.append(EigenMode(geometry, lam, (ModeTerm(k, PHASE_SIN, 1.0),)))
    return basis


def random_combination(basis: Sequence[EigenMode], seed: int) -> EigenMode:
    """Unit-norm random element of an eigenspace, deterministic in the seed."""
    if not basis:
        raise ValueError("empty basis")
    lam = basis[0].eigenvalue
    geom = basis[0].geometry
    for b in basis[1:]:
        if abs(b.eigenvalue - lam) > 1e-9 * max(1.0, lam) or b.geometry != geom:
            raise ValueError("mixed eigenvalues or geometries in basis")
    coeffs = SplitMix64(seed).normals(len(basis))
    norm = float(np.linalg.norm(coeffs))
    if norm == 0.0:  # astronomically unlikely, but keep the contract total
        coeffs = np.ones(len(basis))
        norm = math.sqrt(len(basis))
    coeffs = coeffs / norm
    terms = []
    for c, b in zip(coeffs, basis):
        for t in b.terms:
            terms.append(ModeTerm(t.k, t.phase, float(c * t.coeff)))
    return EigenMode(geom, lam, tuple(terms))


def _sample_box(mode: EigenMode, n: int, with_gradient: bool):
    geom = mode.geometry
    d = geom.dimension
    axes = [np.linspace(0.0, L, n) for L in geom.side_lengths]
    values = np.zeros((n,) * d)
    grads = [np.zeros((n,) * d) for _ in range(d)] if with_gradient else None
    for t in mode.terms:
        sin_f = [np.sin(math.pi * t.k[a] * axes[a] / geom.side_lengths[a]) for a in range(d)]
        prod = t.coeff * sin_f[0]
        for a in range(1, d):
            prod = np.multiply.outer(prod, sin_f[a])
        values += prod
        if with_gradient:
            cos_f = [np.cos(math.pi * t.k[a] * axes[a] / geom.side_lengths[a]) for a in range(d)]
            for a in range(d):
                factors = [cos_f[b] if b == a else sin_f[b] for b in range(d)]
                g = (t.coeff * math.pi * t.k[a] / geom.side_lengths[a]) * factors[0]
                for b in range(1, d):
                    g = np.multiply.outer(g, factors[b])
                grads[a] += g
    return values, grads


def _sample_torus(mode: EigenMode, n: int, with_gradient: bool):
    # Sparse spectrum + inverse FFT: exact at lattice points, O(N^d log N).
    geom = mode.geometry
    d = geom.dimension
    spec = np.zeros((n,) * d, dtype=complex)
    for t in mode.terms:
        kpos = tuple(ki % n for ki in t.k)
        kneg = tuple((-ki) % n for ki in t.k)
        if t.phase == PHASE_COS:
            spec[kpos] += 0.5 * t.coeff
            spec[kneg] += 0.5 * t.coeff
        else:
            spec[kpos] += -0.5j * t.coeff
            spec[kneg] += 0.5j * t.coeff
    scale = float(n) ** d
    values = np.fft.ifftn(spec).real * scale
    grads = None
    if with_gradient:
        grads = []
        freqs = np.fft.fftfreq(n, d=1.0 / n)  # integer frequencies
        for a in range(d):
            shape = [1] * d
            shape[a] = n
            ka = freqs.reshape(shape) / geom.side_lengths[a]
            gspec = spec * (2.0j * math.pi * ka)
            grads.append(np.fft.ifftn(gspec).real * scale)
    return values, grads


def sample_field(mode: EigenMode, resolution: int, with_gradient: bool = False,
                 source: str = "") -> ScalarGrid:
    """Sample a mode onto its geometry's grid, refusing aliased resolutions."""
    floor = min_resolution(mode.geometry, mode.eigenvalue)
    if resolution < floor:
        raise ValueError(
            f"resolution {resolution} is below the sampling floor {floor} "
            f"({SAMPLES_PER_WAVELENGTH} samples per wavelength at eigenvalue "
            f"{mode.eigenvalue:.6g}); aliased nodal sets would be silently wrong"
        )
    if mode.geometry.is_torus:
        values, grads = _sample_torus(mode, resolution, with_gradient)
    else:
        values, grads = _sample_box(mode, resolution, with_gradient)
    return ScalarGrid(
        geometry=mode.geometry,
        resolution=resolution,
        values=values,
        gradient=tuple(grads) if grads else None,
        source=source or f"mode(lambda={mode.eigenvalue:.6g})",
        analytic=mode,
    )


def sample_function(geometry: Geometry, resolution: int,
                    fn: Callable[[np.ndarray], np.ndarray],
                    grad_fn: Callable[[np.ndarray], np.ndarray] | None = None,
                    source: str = "callable") -> ScalarGrid:
    """Sample an arbitrary callable as a plain grid (no eigenvalue attached)."""
    af = AnalyticField(fn, grad_fn)
    n = resolution
    axes = (ScalarGrid(geometry, n, np.zeros((n,) * geometry.dimension))).axes()
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    values = af.evaluate(pts).reshape((n,) * geometry.dimension)
    gradient = None
    if grad_fn is not None:
        g = af.evaluate_gradient(pts)
        gradient = tuple(
            g[:, a].reshape((n,) * geometry.dimension) for a in range(geometry.dimension)
        )
    return ScalarGrid(geometry, n, values, gradient, source, af)


def random_mode(geometry: Geometry, level: int, seed: int) -> EigenMode | None:
    """Convenience: random unit combination of a torus eigenspace, or None."""
    basis = torus_eigenspace(geometry, level)
    if not basis:
        return None
    return random_combination(basis, seed)
