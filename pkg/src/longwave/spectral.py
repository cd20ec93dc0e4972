"""Fourier calculus on periodic tensor grids.

All transforms are real-to-complex (``scipy.fft.rfftn``) over every grid
axis, so the last axis carries the half spectrum.  Odd-order derivatives and
divisions by ``ik`` drop the Nyquist mode, which has no real antisymmetric
partner.  Nonlinear products use the fixed 2/3 rule.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft


class SpectralError(ValueError):
    """Invalid input to a spectral operation."""


class CompatibilityError(SpectralError):
    """Antiderivative requested for a field whose mean along an axis is nonzero."""

    def __init__(self, axis: int, mean: float, tol: float):
        self.axis = axis
        self.mean = mean
        self.tol = tol
        super().__init__(
            f"mean along axis {axis} is {mean:.3e}, exceeds tolerance {tol:.3e}; "
            "antiderivative is undefined on the torus"
        )


MEAN_TOL = 1e-10


@dataclass(frozen=True)
class TorusGrid:
    """Uniform periodic grid; ``dims`` holds ``(n_points, length)`` per axis."""

    dims: tuple[tuple[int, float], ...]

    def __post_init__(self):
        dims = tuple((int(n), float(length)) for n, length in self.dims)
        if not dims:
            raise SpectralError("grid needs at least one axis")
        for axis, (n, length) in enumerate(dims):
            if n < 8 or n % 2:
                raise SpectralError(f"axis {axis}: n_points must be even and >= 8, got {n}")
            if not (length > 0 and np.isfinite(length)):
                raise SpectralError(f"axis {axis}: length must be positive, got {length}")
        object.__setattr__(self, "dims", dims)

    @classmethod
    def uniform(cls, n: int | tuple[int, ...], length: float = 2 * np.pi) -> "TorusGrid":
        ns = (n,) if np.isscalar(n) else tuple(n)
        return cls(tuple((m, length) for m in ns))

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(n for n, _ in self.dims)

    @property
    def lengths(self) -> tuple[float, ...]:
        return tuple(length for _, length in self.dims)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(length / n for n, length in self.dims)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def coords(self, axis: int) -> np.ndarray:
        n, length = self.dims[axis]
        return np.arange(n) * (length / n)

    def mesh(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*(self.coords(a) for a in range(self.ndim)), indexing="ij"))

    @property
    def spectral_shape(self) -> tuple[int, ...]:
        return self.shape[:-1] + (self.shape[-1] // 2 + 1,)

    def wavenumbers(self, axis: int) -> np.ndarray:
        """Angular wavenumbers along ``axis``, broadcastable to the rfftn layout."""
        return _wavenumbers(self, axis)

    def nyquist_mask(self, axis: int) -> np.ndarray:
        """Boolean array (broadcastable) marking the Nyquist plane of ``axis``."""
        return _nyquist_mask(self, axis)

    def dealias_mask(self) -> np.ndarray:
        return _dealias_mask(self)


# Per-grid caches.  lru_cache holds an internal lock, so lookups are thread safe.
@functools.lru_cache(maxsize=64)
def _wavenumbers(grid: TorusGrid, axis: int) -> np.ndarray:
    n, length = grid.dims[axis]
    d = length / n
    if axis == grid.ndim - 1:
        k = sfft.rfftfreq(n, d) * 2 * np.pi
    else:
        k = sfft.fftfreq(n, d) * 2 * np.pi
    shape = [1] * grid.ndim
    shape[axis] = k.size
    k = k.reshape(shape)
    k.flags.writeable = False
    return k


@functools.lru_cache(maxsize=64)
def _nyquist_mask(grid: TorusGrid, axis: int) -> np.ndarray:
    n = grid.shape[axis]
    size = n // 2 + 1 if axis == grid.ndim - 1 else n
    idx = np.zeros(size, dtype=bool)
    idx[n // 2] = True
    shape = [1] * grid.ndim
    shape[axis] = size
    mask = idx.reshape(shape)
    mask.flags.writeable = False
    return mask


@functools.lru_cache(maxsize=64)
def _dealias_mask(grid: TorusGrid) -> np.ndarray:
    # Keep integer mode numbers |m| <= K with 3K < N on every axis.
    mask = np.ones(grid.spectral_shape, dtype=bool)
    for axis, n in enumerate(grid.shape):
        size = n // 2 + 1 if axis == grid.ndim - 1 else n
        m = np.arange(size) if axis == grid.ndim - 1 else np.fft.fftfreq(n, 1.0 / n)
        keep = np.abs(m) <= dealias_cutoff(n)
        shape = [1] * grid.ndim
        shape[axis] = size
        mask = mask & keep.reshape(shape)
    mask.flags.writeable = False
    return mask


def dealias_cutoff(n: int) -> int:
    """Largest retained integer mode number under the 2/3 rule for ``n`` points."""
    return (n - 1) // 3


def forward(grid: TorusGrid, values: np.ndarray) -> np.ndarray:
    return sfft.rfftn(values, s=grid.shape, axes=tuple(range(grid.ndim)))


def inverse(grid: TorusGrid, coeffs: np.ndarray) -> np.ndarray:
    return sfft.irfftn(coeffs, s=grid.shape, axes=tuple(range(grid.ndim)))


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Real periodic field sampled on a ``TorusGrid``."""

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise SpectralError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, grid: TorusGrid) -> "SpectralField":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def from_function(cls, grid: TorusGrid, func) -> "SpectralField":
        return cls(grid, np.broadcast_to(func(*grid.mesh()), grid.shape).astype(float))

    @classmethod
    def from_coeffs(cls, grid: TorusGrid, coeffs: np.ndarray) -> "SpectralField":
        return cls(grid, inverse(grid, coeffs))

    def coeffs(self) -> np.ndarray:
        return forward(self.grid, self.values)

    def mean(self) -> float:
        return float(np.mean(self.values))

    def integral(self) -> float:
        return float(np.sum(self.values) * self.grid.cell_volume)

    def inner(self, other: "SpectralField") -> float:
        _check_same_grid(self, other)
        return float(np.sum(self.values * other.values) * self.grid.cell_volume)

    def norm_l2(self) -> float:
        return float(np.sqrt(self.inner(self)))

    def norm_inf(self) -> float:
        return float(np.max(np.abs(self.values)))

    def _binary(self, other, op):
        if isinstance(other, SpectralField):
            _check_same_grid(self, other)
            other = other.values
        return SpectralField(self.grid, op(self.values, other))

    def __add__(self, other):
        return self._binary(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __rsub__(self, other):
        return self._binary(other, lambda a, b: b - a)

    def __mul__(self, other):
        return self._binary(other, np.multiply)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._binary(other, np.divide)

    def __neg__(self):
        return SpectralField(self.grid, -self.values)


def _check_same_grid(f: SpectralField, g: SpectralField) -> None:
    if f.grid != g.grid:
        raise SpectralError(f"grid mismatch: {f.grid.dims} vs {g.grid.dims}")


def _check_finite(f: SpectralField) -> None:
    if not np.all(np.isfinite(f.values)):
        raise SpectralError("field contains non-finite values")


def _check_axis(grid: TorusGrid, axis: int) -> int:
    if not -grid.ndim <= axis < grid.ndim:
        raise SpectralError(f"axis {axis} out of range for {grid.ndim}-axis grid")
    return axis % grid.ndim


def deriv_symbol(grid: TorusGrid, axis: int, order: int) -> np.ndarray:
    """Multiplier ``(ik)^order`` with the Nyquist plane zeroed for odd orders."""
    k = grid.wavenumbers(axis)
    sym = (1j * k) ** order
    if order % 2:
        sym = np.where(grid.nyquist_mask(axis), 0.0, sym)
    return sym


def deriv(f: SpectralField, axis: int = 0, order: int = 1) -> SpectralField:
    """Exact spectral derivative of order 1..3 along ``axis``."""
    axis = _check_axis(f.grid, axis)
    if not 1 <= order <= 3:
        raise SpectralError(f"derivative order must be 1, 2 or 3, got {order}")
    _check_finite(f)
    return SpectralField.from_coeffs(f.grid, f.coeffs() * deriv_symbol(f.grid, axis, order))


def axis_mean_defect(f: SpectralField, axis: int) -> float:
    """Largest absolute mean of ``f`` along ``axis`` over all other coordinates."""
    return float(np.max(np.abs(np.mean(f.values, axis=axis))))


def antideriv(f: SpectralField, axis: int = 0) -> SpectralField:
    """Zero-mean antiderivative along ``axis``; requires zero mean along that axis."""
    axis = _check_axis(f.grid, axis)
    _check_finite(f)
    scale = f.norm_inf()
    tol = MEAN_TOL * scale
    defect = axis_mean_defect(f, axis)
    if defect > tol:
        raise CompatibilityError(axis, defect, tol)
    k = f.grid.wavenumbers(axis)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where((k == 0) | f.grid.nyquist_mask(axis), 0.0, 1.0 / (1j * np.where(k == 0, 1.0, k)))
    return SpectralField.from_coeffs(f.grid, f.coeffs() * inv)


def dealias(f: SpectralField) -> SpectralField:
    """Project onto the 2/3-rule band."""
    return SpectralField.from_coeffs(f.grid, f.coeffs() * f.grid.dealias_mask())


def product_dealiased(f: SpectralField, g: SpectralField) -> SpectralField:
    """Pointwise product of the band-limited parts, projected back on the band."""
    _check_same_grid(f, g)
    _check_finite(f)
    _check_finite(g)
    mask = f.grid.dealias_mask()
    fv = inverse(f.grid, f.coeffs() * mask)
    gv = inverse(g.grid, g.coeffs() * mask)
    return SpectralField.from_coeffs(f.grid, forward(f.grid, fv * gv) * mask)


def shift_symbol(grid: TorusGrid, axis: int, shift) -> np.ndarray:
    """Phase factor translating by ``shift`` along ``axis``.

    ``shift`` may be an array broadcastable against the spectral layout so
    that different rows move by different amounts.  The Nyquist mode gets the
    real factor ``cos(k_N s)`` which keeps the result real.
    """
    k = grid.wavenumbers(axis)
    phase = np.exp(-1j * k * shift)
    return np.where(grid.nyquist_mask(axis), np.cos(k * shift), phase)


def interp_periodic(f: SpectralField, shifts) -> SpectralField:
    """Translate ``f`` so that the result at ``x`` equals ``f(x - shift)``."""
    shifts = np.broadcast_to(np.asarray(shifts, dtype=float), (f.grid.ndim,))
    if not np.all(np.isfinite(shifts)):
        raise SpectralError("shifts must be finite")
    _check_finite(f)
    c = f.coeffs()
    for axis, s in enumerate(shifts):
        if s != 0.0:
            c = c * shift_symbol(f.grid, axis, s)
    return SpectralField.from_coeffs(f.grid, c)


def translate_batch(values: np.ndarray, axis: int, n: int, length: float, shifts: np.ndarray) -> np.ndarray:
    """Translate every 1D signal of ``values`` along ``axis`` by its own shift.

    ``shifts`` must broadcast against ``values`` with ``axis`` collapsed to
    size 1.  Uses a 1D real transform so the Nyquist handling matches
    :func:`shift_symbol`.
    """
    c = sfft.rfft(values, axis=axis)
    k = sfft.rfftfreq(n, length / n) * 2 * np.pi
    shape = [1] * values.ndim
    shape[axis] = k.size
    k = k.reshape(shape)
    phase = np.exp(-1j * k * shifts)
    nyq = [slice(None)] * values.ndim
    nyq[axis] = slice(n // 2, n // 2 + 1)
    phase[tuple(nyq)] = np.cos(k[tuple(nyq)] * shifts)
    return sfft.irfft(c * phase, n=n, axis=axis)
