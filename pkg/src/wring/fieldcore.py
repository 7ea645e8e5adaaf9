"""Periodic-grid fields and exact-to-roundoff spectral calculus.

The domain is the flat 3-torus: a rectangular box with periodic boundary
conditions in all three directions. All derivatives, inverses and integrals
are computed through real FFTs, so they are exact for band-limited data and
spectrally accurate for smooth periodic data.

Conventions fixed here and relied on elsewhere:

* scalar data is a float64 array of shape ``(nx, ny, nz)``, row-major over
  the (x, y, z) indices; vector data is ``(3, nx, ny, nz)``;
* first-derivative operators zero the Nyquist mode of each axis so that
  results stay real-symmetric;
* the inverse-curl fixes the gauge by returning the unique divergence-free
  field with zero mean (harmonic part set to zero).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from . import config
from .errors import (
    DegenerateField,
    InvalidGrid,
    NonFiniteData,
    NonZeroMeanVorticity,
    NotDivergenceFree,
)

_MIN_N = config.DEFAULTS["grid"]["min_points_per_axis"]


@dataclass(frozen=True)
class Grid3:
    """Periodic rectangular lattice with physical box lengths.

    Parameters
    ----------
    n : (int, int, int)
        Points per axis. Each must be even and at least 8.
    box : (float, float, float)
        Physical side lengths (Lx, Ly, Lz), all positive.
    """

    n: tuple[int, int, int]
    box: tuple[float, float, float]

    def __post_init__(self):
        n = tuple(int(v) for v in self.n)
        box = tuple(float(v) for v in self.box)
        if len(n) != 3 or len(box) != 3:
            raise InvalidGrid("grid needs three point counts and three box lengths")
        for v in n:
            if v < _MIN_N or v % 2 != 0:
                raise InvalidGrid(f"points per axis must be even and >= {_MIN_N}, got {v}")
        for length in box:
            if not np.isfinite(length) or length <= 0.0:
                raise InvalidGrid(f"box lengths must be finite and positive, got {length}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "box", box)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.n

    @cached_property
    def spacing(self) -> tuple[float, float, float]:
        return tuple(L / m for L, m in zip(self.box, self.n))

    @property
    def volume(self) -> float:
        return self.box[0] * self.box[1] * self.box[2]

    @property
    def cell_volume(self) -> float:
        return self.spacing[0] * self.spacing[1] * self.spacing[2]

    @cached_property
    def axes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Coordinate values along each axis (cell corners, endpoint excluded)."""
        return tuple(
            np.arange(m) * h for m, h in zip(self.n, self.spacing)
        )

    def mesh(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable coordinate arrays (sparse meshgrid, ij indexing)."""
        x, y, z = self.axes
        return x[:, None, None], y[None, :, None], z[None, None, :]

    # -- spectral machinery -------------------------------------------------

    @cached_property
    def _k1d(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        nx, ny, nz = self.n
        hx, hy, hz = self.spacing
        kx = 2.0 * np.pi * sfft.fftfreq(nx, d=hx)
        ky = 2.0 * np.pi * sfft.fftfreq(ny, d=hy)
        kz = 2.0 * np.pi * sfft.rfftfreq(nz, d=hz)
        return kx, ky, kz

    @cached_property
    def ik(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Derivative multipliers i*k per axis, Nyquist modes zeroed."""
        kx, ky, kz = (k.copy() for k in self._k1d)
        kx[self.n[0] // 2] = 0.0
        ky[self.n[1] // 2] = 0.0
        kz[-1] = 0.0
        return (
            (1j * kx)[:, None, None],
            (1j * ky)[None, :, None],
            (1j * kz)[None, None, :],
        )

    @cached_property
    def k2(self) -> np.ndarray:
        """|k|^2 in the same Nyquist-zeroed convention as the ik multipliers.

        First derivatives annihilate the Nyquist planes, so inverse
        operators must treat those modes as degenerate too; mixing the two
        conventions would leave spurious divergence after projections.
        """
        ikx, iky, ikz = self.ik
        return -(ikx**2 + iky**2 + ikz**2).real

    @cached_property
    def inv_k2(self) -> np.ndarray:
        """1/|k|^2 with degenerate (mean and pure-Nyquist) modes mapped to zero."""
        k2 = self.k2
        out = np.zeros_like(k2)
        np.divide(1.0, k2, out=out, where=k2 > 0.0)
        return out

    @cached_property
    def non_nyquist_mask(self) -> np.ndarray:
        """True on modes untouched by the first-derivative Nyquist zeroing."""
        masks = []
        for axis, m in enumerate(self.n):
            if axis < 2:
                idx = np.abs(sfft.fftfreq(m) * m)
            else:
                idx = sfft.rfftfreq(m) * m
            masks.append(idx < m // 2)
        return (
            masks[0][:, None, None] & masks[1][None, :, None] & masks[2][None, None, :]
        )

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """Two-thirds-rule mask in the rfft layout (True = keep)."""
        masks = []
        for axis, m in enumerate(self.n):
            if axis < 2:
                idx = np.abs(sfft.fftfreq(m) * m)
            else:
                idx = sfft.rfftfreq(m) * m
            masks.append(idx <= m // 3)
        return (
            masks[0][:, None, None] & masks[1][None, :, None] & masks[2][None, None, :]
        )

    def rfft(self, data: np.ndarray) -> np.ndarray:
        return sfft.rfftn(data, workers=config.fft_workers())

    def irfft(self, spec: np.ndarray) -> np.ndarray:
        return sfft.irfftn(spec, s=self.n, workers=config.fft_workers())


def _check_finite(data: np.ndarray, what: str):
    if not np.all(np.isfinite(data)):
        raise NonFiniteData(f"{what} contains non-finite entries")


@dataclass(eq=False)
class ScalarField:
    """Real scalar samples on a Grid3."""

    grid: Grid3
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.shape != self.grid.shape:
            raise InvalidGrid(
                f"scalar data shape {self.data.shape} does not match grid {self.grid.shape}"
            )
        _check_finite(self.data, "scalar field")

    @classmethod
    def sample(cls, grid: Grid3, fn) -> "ScalarField":
        """Evaluate fn(x, y, z) on the mesh (fn may broadcast)."""
        x, y, z = grid.mesh()
        values = np.broadcast_to(np.asarray(fn(x, y, z), dtype=np.float64), grid.shape)
        return cls(grid, np.ascontiguousarray(values))

    @classmethod
    def zeros(cls, grid: Grid3) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.data.copy())

    def maxabs(self) -> float:
        return float(np.max(np.abs(self.data)))


@dataclass(eq=False)
class VectorField:
    """Real vector samples on a Grid3, components stacked along axis 0."""

    grid: Grid3
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.shape != (3,) + self.grid.shape:
            raise InvalidGrid(
                f"vector data shape {self.data.shape} does not match grid {self.grid.shape}"
            )
        _check_finite(self.data, "vector field")

    @classmethod
    def from_components(cls, grid: Grid3, cx, cy, cz) -> "VectorField":
        out = np.empty((3,) + grid.shape)
        for i, comp in enumerate((cx, cy, cz)):
            out[i] = np.broadcast_to(np.asarray(comp, dtype=np.float64), grid.shape)
        return cls(grid, out)

    @classmethod
    def zeros(cls, grid: Grid3) -> "VectorField":
        return cls(grid, np.zeros((3,) + grid.shape))

    @property
    def x(self) -> np.ndarray:
        return self.data[0]

    @property
    def y(self) -> np.ndarray:
        return self.data[1]

    @property
    def z(self) -> np.ndarray:
        return self.data[2]

    def copy(self) -> "VectorField":
        return VectorField(self.grid, self.data.copy())

    def maxnorm(self) -> float:
        """Maximum pointwise Euclidean magnitude."""
        return float(np.sqrt(np.max(np.sum(self.data**2, axis=0))))

    def maxabs(self) -> float:
        return float(np.max(np.abs(self.data)))

    def component_means(self) -> tuple[float, float, float]:
        return tuple(float(np.mean(c)) for c in self.data)


# -- pointwise algebra -------------------------------------------------------


def dot(a: VectorField, b: VectorField) -> ScalarField:
    return ScalarField(a.grid, np.einsum("i...,i...->...", a.data, b.data))


def cross(a: VectorField, b: VectorField) -> VectorField:
    ax, ay, az = a.data
    bx, by, bz = b.data
    return VectorField(
        a.grid,
        np.stack(
            (ay * bz - az * by, az * bx - ax * bz, ax * by - ay * bx)
        ),
    )


def magnitude2(a: VectorField) -> ScalarField:
    return ScalarField(a.grid, np.sum(a.data**2, axis=0))


# -- spectral calculus -------------------------------------------------------


def grad(s: ScalarField) -> VectorField:
    """Spectral gradient; exact for band-limited fields."""
    g = s.grid
    spec = g.rfft(s.data)
    comps = np.stack([g.irfft(ik * spec) for ik in g.ik])
    return VectorField(g, comps)


def div(v: VectorField) -> ScalarField:
    """Spectral divergence."""
    g = v.grid
    acc = None
    for ik, comp in zip(g.ik, v.data):
        term = ik * g.rfft(comp)
        acc = term if acc is None else acc + term
    return ScalarField(g, g.irfft(acc))


def curl(v: VectorField) -> VectorField:
    """Spectral curl; div(curl v) vanishes to roundoff."""
    g = v.grid
    sx, sy, sz = (g.rfft(c) for c in v.data)
    ikx, iky, ikz = g.ik
    return VectorField(
        g,
        np.stack(
            (
                g.irfft(iky * sz - ikz * sy),
                g.irfft(ikz * sx - ikx * sz),
                g.irfft(ikx * sy - iky * sx),
            )
        ),
    )


def laplacian(s: ScalarField) -> ScalarField:
    g = s.grid
    return ScalarField(g, g.irfft(-g.k2 * g.rfft(s.data)))


def solve_poisson_zero_mean(s: ScalarField) -> ScalarField:
    """Solve lap(u) = s on the torus, returning the zero-mean solution.

    The mean of s is projected out (a periodic Poisson problem is solvable
    only for zero-mean right-hand sides; callers pass compatible data).
    """
    g = s.grid
    spec = g.rfft(s.data)
    return ScalarField(g, g.irfft(-g.inv_k2 * spec))


def inverse_curl(
    w: VectorField,
    *,
    mean_tol: float | None = None,
    div_tol: float | None = None,
) -> VectorField:
    """Vector potential inverse: the unique U with curl U = w, div U = 0, zero mean.

    The harmonic (constant) part is set to zero, which fixes the gauge
    deterministically and makes helicity values reproducible.

    Raises
    ------
    NonZeroMeanVorticity
        if any component mean exceeds ``mean_tol * max|w|`` (such a field
        carries net flux through a fundamental torus and has no periodic
        potential).
    NotDivergenceFree
        if ``max|div w| * min(h) / max|w|`` exceeds ``div_tol``.
    """
    g = w.grid
    if mean_tol is None:
        mean_tol = config.TOL["zero_mean_rel"]
    if div_tol is None:
        div_tol = config.TOL["div_free_rel"]
    scale = w.maxabs()
    if scale == 0.0:
        return VectorField.zeros(g)
    means = w.component_means()
    worst = max(abs(m) for m in means)
    if worst > mean_tol * scale:
        raise NonZeroMeanVorticity(
            f"component means {means} exceed {mean_tol:g} * max|w| = {mean_tol * scale:g}"
        )
    div_res = div(w).maxabs() * min(g.spacing) / scale
    if div_res > div_tol:
        raise NotDivergenceFree(
            f"relative divergence residual {div_res:g} exceeds {div_tol:g}"
        )
    sx, sy, sz = (g.rfft(c) for c in w.data)
    ikx, iky, ikz = g.ik
    inv = g.inv_k2
    return VectorField(
        g,
        np.stack(
            (
                g.irfft((iky * sz - ikz * sy) * inv),
                g.irfft((ikz * sx - ikx * sz) * inv),
                g.irfft((ikx * sy - iky * sx) * inv),
            )
        ),
    )


def integrate(s: ScalarField) -> float:
    """Volume integral: sum of samples times cell volume.

    On a periodic grid this trapezoidal sum is spectrally accurate.
    """
    return float(np.sum(s.data)) * s.grid.cell_volume


def dealias(obj):
    """Apply the 2/3-rule spectral truncation (used around nonlinear products)."""
    g = obj.grid
    mask = g.dealias_mask
    if isinstance(obj, ScalarField):
        return ScalarField(g, g.irfft(mask * g.rfft(obj.data)))
    return VectorField(g, np.stack([g.irfft(mask * g.rfft(c)) for c in obj.data]))


def spectral_tail_fraction(v: VectorField) -> float:
    """Fraction of spectral energy in the top 10 percent of wavenumbers.

    A cheap periodicity diagnostic: sampled non-periodic data (ramps,
    sawtooths) puts O(1) energy near the Nyquist shell.
    """
    g = v.grid
    kx, ky, kz = g._k1d
    frac_x = np.abs(kx)[:, None, None] / (np.pi * g.n[0] / g.box[0])
    frac_y = np.abs(ky)[None, :, None] / (np.pi * g.n[1] / g.box[1])
    frac_z = np.abs(kz)[None, None, :] / (np.pi * g.n[2] / g.box[2])
    # band chosen below the Nyquist planes, which first derivatives zero out
    high = np.maximum(np.maximum(frac_x, frac_y), frac_z) >= 0.75
    total = 0.0
    tail = 0.0
    nz = g.n[2]
    # rfft stores half the z-modes; weight interior planes twice for Parseval
    weights = np.full(nz // 2 + 1, 2.0)
    weights[0] = 1.0
    weights[-1] = 1.0
    for comp in v.data:
        p = np.abs(g.rfft(comp)) ** 2 * weights[None, None, :]
        total += float(p.sum())
        tail += float(p[high].sum())
    if total == 0.0:
        return 0.0
    return tail / total


def random_band_limited_scalar(
    grid: Grid3, kmax: int, seed: int, *, zero_mean: bool = True
) -> ScalarField:
    """Deterministic smooth test scalar with modes confined to |k_i| <= kmax.

    Used by gauge-invariance checks and property tests; the seed pins the
    field exactly.
    """
    rng = np.random.default_rng(seed)
    data = rng.standard_normal(grid.shape)
    spec = grid.rfft(data)
    keep = []
    for axis, m in enumerate(grid.n):
        if axis < 2:
            idx = np.abs(sfft.fftfreq(m) * m)
        else:
            idx = sfft.rfftfreq(m) * m
        keep.append(idx <= kmax)
    mask = keep[0][:, None, None] & keep[1][None, :, None] & keep[2][None, None, :]
    spec = np.where(mask, spec, 0.0)
    if zero_mean:
        spec[0, 0, 0] = 0.0
    out = grid.irfft(spec)
    peak = np.max(np.abs(out))
    if peak > 0:
        out = out / peak
    return ScalarField(grid, out)


def random_band_limited_vector(
    grid: Grid3, kmax: int, seed: int, *, div_free: bool = False
) -> VectorField:
    """Deterministic band-limited vector field, optionally solenoidal."""
    comps = [
        random_band_limited_scalar(grid, kmax, seed + 7 * i).data for i in range(3)
    ]
    v = VectorField(grid, np.stack(comps))
    if not div_free:
        return v
    g = grid
    specs = [g.rfft(c) for c in v.data]
    kdotv = sum(iki * s for iki, s in zip(g.ik, specs))
    comps = []
    for iki, s in zip(g.ik, specs):
        # remove the gradient part: v <- v - k (k.v)/|k|^2
        comps.append(g.irfft(s + iki * kdotv * g.inv_k2))
    proj = VectorField(g, np.stack(comps))
    for i, m in enumerate(proj.component_means()):
        proj.data[i] -= m
    return proj


def field_scale_or_raise(v: VectorField, what: str) -> float:
    scale = v.maxabs()
    if scale < config.TOL["underflow"]:
        raise DegenerateField(f"{what} magnitude below underflow threshold")
    return scale
