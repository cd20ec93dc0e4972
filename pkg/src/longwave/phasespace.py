"""Phase-space grids, distribution functions, velocity moments and prepared data.

Arrays are laid out as ``space axes + velocity axes``, e.g. ``(Nx, Nv)`` in
one dimension and ``(Nx1, Nx2, Nv1, Nv2)`` in two.  Velocity integrals use
the midpoint rule on cell-centred nodes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .poisson import apply_law, kp_anisotropy
from .snapshots import read_snapshot, write_snapshot
from .spectral import SpectralField, TorusGrid

# Thermal widths kept on each side of the bulk-velocity range.
VELOCITY_MARGIN = 8.0
TRUNCATION_TOL = 1e-12


class PhaseSpaceError(ValueError):
    pass


class TruncationError(PhaseSpaceError):
    """The velocity box is too small for the distribution it carries."""


class PreparationError(PhaseSpaceError):
    def __init__(self, message: str, min_density: float):
        super().__init__(message)
        self.min_density = min_density


@dataclass(frozen=True)
class VelocityAxis:
    n: int
    v_min: float
    v_max: float

    def __post_init__(self):
        if self.n < 4:
            raise PhaseSpaceError(f"velocity axis needs at least 4 points, got {self.n}")
        if not self.v_min < self.v_max:
            raise PhaseSpaceError(f"need v_min < v_max, got [{self.v_min}, {self.v_max}]")

    @property
    def dv(self) -> float:
        return (self.v_max - self.v_min) / self.n

    @property
    def nodes(self) -> np.ndarray:
        return self.v_min + (np.arange(self.n) + 0.5) * self.dv


@dataclass(frozen=True)
class PhaseGrid:
    space: TorusGrid
    velocity: tuple[VelocityAxis, ...]

    def __post_init__(self):
        vel = tuple(v if isinstance(v, VelocityAxis) else VelocityAxis(*v) for v in self.velocity)
        object.__setattr__(self, "velocity", vel)
        if len(vel) != self.space.ndim:
            raise PhaseSpaceError(f"{self.space.ndim} space axes need as many velocity axes, got {len(vel)}")

    @classmethod
    def around(cls, space: TorusGrid, n_v, u_ranges, sigma_max: float, margin: float = VELOCITY_MARGIN) -> "PhaseGrid":
        """Velocity box covering each ``(u_lo, u_hi)`` plus ``margin`` widths ``sigma_max``."""
        ns = [n_v] * space.ndim if np.isscalar(n_v) else list(n_v)
        axes = tuple(VelocityAxis(n, lo - margin * sigma_max, hi + margin * sigma_max) for n, (lo, hi) in zip(ns, u_ranges))
        return cls(space, axes)

    @property
    def dim(self) -> int:
        return self.space.ndim

    @property
    def shape(self) -> tuple[int, ...]:
        return self.space.shape + tuple(v.n for v in self.velocity)

    @property
    def dv_volume(self) -> float:
        return float(np.prod([v.dv for v in self.velocity]))

    @property
    def cell_volume(self) -> float:
        return self.space.cell_volume * self.dv_volume

    @property
    def velocity_axes(self) -> tuple[int, ...]:
        return tuple(range(self.dim, 2 * self.dim))

    def v(self, j: int) -> np.ndarray:
        """Nodes of velocity axis ``j`` shaped to broadcast against f."""
        shape = [1] * (2 * self.dim)
        shape[self.dim + j] = self.velocity[j].n
        return self.velocity[j].nodes.reshape(shape)

    def expand_space(self, a: np.ndarray) -> np.ndarray:
        """Append singleton velocity axes to a spatial array."""
        return a.reshape(a.shape + (1,) * self.dim)

    def bounds(self) -> list[list[float]]:
        return [[0.0, length] for length in self.space.lengths] + [[v.v_min, v.v_max] for v in self.velocity]


@dataclass(frozen=True, eq=False)
class DistributionField:
    grid: PhaseGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise PhaseSpaceError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise PhaseSpaceError("distribution contains non-finite values")
        if np.min(v) < 0:
            raise PhaseSpaceError(f"distribution must be non-negative, min = {np.min(v):.3e}")
        object.__setattr__(self, "values", v)
        if self.mass() <= 0:
            raise PhaseSpaceError("distribution has zero mass")

    def mass(self) -> float:
        return float(np.sum(self.values) * self.grid.cell_volume)

    def boundary_ratio(self) -> float:
        """Largest value on the velocity-box faces relative to max(f)."""
        peak = float(np.max(self.values))
        worst = 0.0
        d = self.grid.dim
        for j in range(d):
            face = np.take(self.values, [0, -1], axis=d + j)
            worst = max(worst, float(np.max(face)))
        return worst / peak

    def check_truncation(self, tol: float = TRUNCATION_TOL) -> None:
        ratio = self.boundary_ratio()
        if ratio >= tol:
            raise TruncationError(f"velocity-boundary values reach {ratio:.3e} of max(f) (tolerance {tol:.0e})")


@dataclass(frozen=True, eq=False)
class MomentSet:
    rho: SpectralField
    J: tuple[SpectralField, ...]
    S: tuple[SpectralField, ...]

    def write_csv(self, path, t: float | None = None) -> Path:
        path = Path(path)
        grid = self.rho.grid
        coords = [c.ravel() for c in grid.mesh()]
        d = grid.ndim
        header = [f"x{a + 1}" for a in range(d)] + ["rho"] + [f"J{j + 1}" for j in range(d)] + [f"S{j + 1}{j + 1}" for j in range(d)]
        cols = coords + [self.rho.values.ravel()] + [q.values.ravel() for q in self.J] + [q.values.ravel() for q in self.S]
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            if t is not None:
                w.writerow([f"# t={t!r}"])
            w.writerow(header)
            for row in zip(*cols):
                w.writerow([repr(float(v)) for v in row])
        return path


def moments(f: DistributionField) -> MomentSet:
    g = f.grid
    axes = g.velocity_axes
    dvv = g.dv_volume
    rho = np.sum(f.values, axis=axes) * dvv
    J, S = [], []
    for j in range(g.dim):
        vj = g.v(j)
        J.append(SpectralField(g.space, np.sum(f.values * vj, axis=axes) * dvv))
        S.append(SpectralField(g.space, np.sum(f.values * vj * vj, axis=axes) * dvv))
    return MomentSet(SpectralField(g.space, rho), tuple(J), tuple(S))


def maxwellian(grid: PhaseGrid, density, mean, variance: float) -> np.ndarray:
    """``density(x)`` times a product of Gaussians, each normalized discretely per x.

    ``density`` and each entry of ``mean`` are spatial arrays (or scalars).
    The discrete normalization makes the zeroth moment equal ``density``
    to roundoff regardless of the velocity resolution.
    """
    d = grid.dim
    density = np.broadcast_to(np.asarray(density, dtype=float), grid.space.shape)
    f = grid.expand_space(density)
    for j in range(d):
        u = grid.expand_space(np.broadcast_to(np.asarray(mean[j], dtype=float), grid.space.shape))
        g = np.exp(-((grid.v(j) - u) ** 2) / (2 * variance))
        g = g / (np.sum(g, axis=d + j, keepdims=True) * grid.velocity[j].dv)
        f = f * g
    return np.ascontiguousarray(f)


def potential_anisotropy(kind: str, eps: float):
    return kp_anisotropy(eps) if kind == "kpii" else None


def build_prepared_data(grid: PhaseGrid, eps: float, correctors, theta0: float = 1.0, law: str = "linearized", t: float = 0.0) -> DistributionField:
    """Near-monokinetic data whose field part of the relative entropy vanishes.

    Density: the potential law applied to the target potential, so that the
    law is solved exactly by the target.  Velocity: Gaussian of variance
    ``theta0 * sqrt(eps)`` about the modulated bulk velocity on each axis.
    """
    if not 0 < eps < 1:
        raise PhaseSpaceError(f"eps must lie in (0, 1), got {eps}")
    if theta0 <= 0:
        raise PhaseSpaceError("theta0 must be positive")
    if correctors.grid != grid.space:
        raise PhaseSpaceError("corrector grid differs from the spatial grid")
    phi_t = SpectralField(grid.space, correctors.target_potential(t, eps))
    rho0 = apply_law(phi_t, eps, law, potential_anisotropy(correctors.kind, eps)).values
    lo = float(np.min(rho0))
    if lo <= 0:
        raise PreparationError(f"prepared density is non-positive (min {lo:.3e}); reduce the amplitude or eps", lo)
    u = correctors.modulated_velocity(t, eps)
    if len(u) != grid.dim:
        raise PhaseSpaceError(f"{correctors.kind} correctors give {len(u)} velocity components for a {grid.dim}D grid")
    f = DistributionField(grid, maxwellian(grid, rho0, u, theta0 * np.sqrt(eps)))
    f.check_truncation()
    return f


def write_distribution(path, f: DistributionField, eps: float, t: float, **extra) -> Path:
    header = {"bounds": f.grid.bounds(), "eps": float(eps), "t": float(t), "space_dims": f.grid.dim}
    header.update(extra)
    return write_snapshot(path, f.values, header)


def read_distribution(path) -> tuple[DistributionField, dict]:
    values, meta = read_snapshot(path)
    d = meta["space_dims"]
    bounds = meta["bounds"]
    shape = values.shape
    space = TorusGrid(tuple((shape[a], bounds[a][1] - bounds[a][0]) for a in range(d)))
    vel = tuple(VelocityAxis(shape[d + j], *bounds[d + j]) for j in range(d))
    return DistributionField(PhaseGrid(space, vel), values), meta
