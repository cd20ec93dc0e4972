"""Strang-split semi-Lagrangian solver for the rescaled Vlasov-Poisson system.

After division by eps the one-dimensional system reads::

    d_t f + (v - 1/eps) d_x f + (E/eps) d_v f = 0,   E = -d_x phi

and the two-dimensional anisotropic one::

    d_t f + (v1 - 1/eps) d_1 f + sqrt(eps) v2 d_2 f
          - (d_1 phi / eps) d_v1 f - (d_2 phi / sqrt(eps)) d_v2 f = 0

with the potential from the linearized or Boltzmann law (diffusion
coefficients ``eps**2`` and ``(eps**2, eps**3)`` respectively).

One step: half x-advection (exact Fourier shift per velocity row), potential
solve, full v-advection (natural cubic spline, feet clamped to the box),
half x-advection, potential solve.
"""

from __future__ import annotations

import csv
import functools
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import solve_banded

from .phasespace import DistributionField, PhaseGrid, TruncationError, moments
from .poisson import PoissonProblem, apply_law, kp_anisotropy, solve_boltzmann, solve_linearized
from .spectral import SpectralField, deriv, translate_batch

log = logging.getLogger(__name__)

DEFAULT_CFL = 0.1


class StepError(ValueError):
    pass


def anisotropy_for(dim: int, eps: float):
    return None if dim == 1 else kp_anisotropy(eps)


def gradient_weights(dim: int, eps: float) -> tuple[float, ...]:
    """Weights of ``1/2 int |d_j phi|^2`` in the energy."""
    return (eps,) if dim == 1 else (eps, eps**2)


def transport_velocities(grid: PhaseGrid, eps: float) -> list[np.ndarray]:
    if grid.dim == 1:
        return [grid.v(0) - 1.0 / eps]
    if grid.dim == 2:
        return [grid.v(0) - 1.0 / eps, np.sqrt(eps) * grid.v(1)]
    raise StepError("kinetic transport is implemented for 1D1V and 2D2V only")


def accelerations(phi: SpectralField, eps: float) -> list[np.ndarray]:
    if phi.grid.ndim == 1:
        return [-deriv(phi, 0).values / eps]
    return [-deriv(phi, 0).values / eps, -deriv(phi, 1).values / np.sqrt(eps)]


def solve_potential(rho: SpectralField, eps: float, law: str) -> SpectralField:
    p = PoissonProblem(law, eps, rho, anisotropy_for(rho.grid.ndim, eps))
    return solve_linearized(p) if law == "linearized" else solve_boltzmann(p)


@dataclass(frozen=True, eq=False)
class KineticState:
    t: float
    f: DistributionField
    phi: SpectralField
    eps: float
    law: str
    mass0: float
    clipped_mass: float = 0.0

    @classmethod
    def initial(cls, f: DistributionField, eps: float, law: str = "linearized", t: float = 0.0) -> "KineticState":
        phi = solve_potential(moments(f).rho, eps, law)
        return cls(t, f, phi, eps, law, f.mass())

    @property
    def grid(self) -> PhaseGrid:
        return self.f.grid

    def poisson_residual(self) -> float:
        rho = moments(self.f).rho
        r = apply_law(self.phi, self.eps, self.law, anisotropy_for(self.grid.dim, self.eps)).values - rho.values
        return float(np.max(np.abs(r)))


@functools.lru_cache(maxsize=16)
def _natural_spline_matrix(n: int) -> np.ndarray:
    ab = np.zeros((3, n))
    ab[0, 2:] = 1.0
    ab[1, :] = 4.0
    ab[2, :-2] = 1.0
    ab[1, 0] = ab[1, -1] = 1.0  # M_0 = M_{n-1} = 0
    ab.flags.writeable = False
    return ab


def spline_translate(values: np.ndarray, axis: int, dv: float, shift: np.ndarray) -> np.ndarray:
    """Evaluate the natural cubic spline of each line along ``axis`` at ``v - shift``.

    ``shift`` broadcasts against ``values`` with ``axis`` of size 1.  Feet
    outside the box are clamped to its end nodes.
    """
    f = np.moveaxis(values, axis, -1)
    n = f.shape[-1]
    s = np.moveaxis(np.broadcast_to(shift, values.shape[:axis] + (1,) + values.shape[axis + 1 :]), axis, -1)
    flat = f.reshape(-1, n)
    rhs = np.zeros_like(flat)
    rhs[:, 1:-1] = 6.0 * (flat[:, 2:] - 2.0 * flat[:, 1:-1] + flat[:, :-2]) / dv**2
    M = solve_banded((1, 1), _natural_spline_matrix(n), rhs.T, check_finite=False).T
    foot = np.arange(n) - np.broadcast_to(s, f.shape).reshape(-1, n) / dv
    foot = np.clip(foot, 0.0, n - 1 - 1e-12)
    i = np.floor(foot).astype(np.intp)
    w = foot - i
    f0 = np.take_along_axis(flat, i, axis=1)
    f1 = np.take_along_axis(flat, i + 1, axis=1)
    m0 = np.take_along_axis(M, i, axis=1)
    m1 = np.take_along_axis(M, i + 1, axis=1)
    a = 1.0 - w
    out = a * f0 + w * f1 + (dv**2 / 6.0) * ((a**3 - a) * m0 + (w**3 - w) * m1)
    return np.moveaxis(out.reshape(f.shape), -1, axis)


def _x_advect(values: np.ndarray, grid: PhaseGrid, eps: float, tau: float) -> np.ndarray:
    for axis, c in enumerate(transport_velocities(grid, eps)):
        n, length = grid.space.dims[axis]
        values = translate_batch(values, axis, n, length, c * tau)
    return values


def _v_advect(values: np.ndarray, grid: PhaseGrid, phi: SpectralField, eps: float, dt: float) -> np.ndarray:
    for j, a in enumerate(accelerations(phi, eps)):
        ax = grid.velocity[j]
        shift = a * dt
        # feet of the end nodes are the extreme ones
        low = ax.nodes[0] - float(np.max(shift))
        high = ax.nodes[-1] - float(np.min(shift))
        outside = max(ax.v_min - low, high - ax.v_max)
        if outside > ax.dv:
            raise TruncationError(
                f"velocity feet leave the v{j + 1} box by {outside / ax.dv:.2f} cells; reduce dt or widen the box"
            )
        values = spline_translate(values, grid.dim + j, ax.dv, grid.expand_space(shift))
    return values


def max_dt(eps: float, c_cfl: float = DEFAULT_CFL) -> float:
    return c_cfl * eps


def step(state: KineticState, dt: float, c_cfl: float = DEFAULT_CFL) -> KineticState:
    """One Strang step of length ``dt`` (at most ``c_cfl * eps``)."""
    eps, grid = state.eps, state.grid
    if not dt > 0:
        raise StepError("dt must be positive")
    if dt > max_dt(eps, c_cfl) * (1 + 1e-12):
        raise StepError(f"dt={dt:.4g} exceeds the cap {c_cfl}*eps = {max_dt(eps, c_cfl):.4g}")
    f = _x_advect(state.f.values, grid, eps, 0.5 * dt)
    rho = SpectralField(grid.space, np.sum(f, axis=grid.velocity_axes) * grid.dv_volume)
    phi = solve_potential(rho, eps, state.law)
    f = _v_advect(f, grid, phi, eps, dt)
    f = _x_advect(f, grid, eps, 0.5 * dt)
    negative = f < 0
    clipped = 0.0
    if negative.any():
        clipped = -float(np.sum(f[negative])) * grid.cell_volume
        f[negative] = 0.0
        log.debug("t=%.6g: clipped %.3e of mass", state.t + dt, clipped)
    new_f = DistributionField(grid, f)
    phi = solve_potential(moments(new_f).rho, eps, state.law)
    return replace(state, t=state.t + dt, f=new_f, phi=phi, clipped_mass=state.clipped_mass + clipped)


Observer = Callable[[float, KineticState], object]


@dataclass
class RunResult:
    state: KineticState
    outputs: list[list]
    steps: int


def run(state0: KineticState, t_end: float, dt: float, observers: Sequence[Observer] = (), stride: int = 1, c_cfl: float = DEFAULT_CFL) -> RunResult:
    """Fixed-step loop; observers see the initial state, every ``stride``-th state and the final one."""
    if t_end < 0:
        raise StepError("t_end must be non-negative")
    n_steps = int(round(t_end / dt)) if t_end > 0 else 0
    if abs(n_steps * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise StepError(f"t_end={t_end} is not a multiple of dt={dt}")
    outputs: list[list] = [[] for _ in observers]

    def notify(s):
        for k, obs in enumerate(observers):
            outputs[k].append(obs(s.t, s))

    state = state0
    notify(state)
    for n in range(1, n_steps + 1):
        state = step(state, dt, c_cfl)
        if n % stride == 0 or n == n_steps:
            notify(state)
    return RunResult(state, outputs, n_steps)


def energy_parts(state: KineticState) -> dict[str, float]:
    g, eps, phi = state.grid, state.eps, state.phi
    v2 = sum(g.v(j) ** 2 for j in range(g.dim))
    kinetic = 0.5 * float(np.sum(state.f.values * v2)) * g.cell_volume
    grad = sum(0.5 * w * (deriv(phi, a) * deriv(phi, a)).integral() for a, w in enumerate(gradient_weights(g.dim, eps)))
    if state.law == "linearized":
        field = 0.5 * (phi * phi).integral()
    else:
        x = eps * phi.values
        field = float(np.sum(np.exp(x) * (x - 1.0) + 1.0)) * g.space.cell_volume / eps**2
    return {"kinetic": kinetic, "grad": float(grad), "field": float(field)}


def energy(state: KineticState) -> float:
    return sum(energy_parts(state).values())


@dataclass(frozen=True)
class ConservationReport:
    t: float
    mass_drift: float
    energy: float
    lc1_residual: float
    momentum_flux_balance: float


def default_tests(grid) -> list[SpectralField]:
    """cos and sin of the first mode along x1."""
    x1 = grid.mesh()[0]
    kx = 2 * np.pi / grid.lengths[0]
    return [SpectralField(grid, np.cos(kx * x1)), SpectralField(grid, np.sin(kx * x1))]


def _momentum_flux(state: KineticState) -> SpectralField:
    """Potential flux P with rho d_1 phi / eps = d_1 P + (transverse terms)."""
    phi, eps = state.phi, state.eps
    g1 = deriv(phi, 0)
    if state.law == "linearized":
        p = 0.5 * (phi + 1.0 / eps) * (phi + 1.0 / eps) - 0.5 * eps * g1 * g1
    else:
        p = SpectralField(phi.grid, np.exp(eps * phi.values) / eps**2) - 0.5 * eps * g1 * g1
    if phi.grid.ndim == 2:
        g2 = deriv(phi, 1)
        p = p + 0.5 * eps**2 * g2 * g2
    return p


def conservation_report(prev: KineticState, next: KineticState, tests: Sequence[SpectralField] | None = None) -> ConservationReport:
    """Weak-form residuals of charge and momentum balance between two states.

    Charge::   d_t rho + d_1(J1 - rho/eps) [+ sqrt(eps) d_2 J2] = 0
    Momentum:: d_t J1 + d_1(S11 - J1/eps + P) [+ transverse] = 0

    ``P`` is the potential flux of :func:`_momentum_flux`.  Paired with test
    functions of x1 only, the transverse divergences vanish identically
    (the x2 part of ``rho d_1 phi`` is ``d_1`` of ``eps^2 |d_2 phi|^2 / 2``
    plus a d_2-divergence).  Time derivatives are forward differences, the
    rest is averaged over the two states.
    """
    dt = next.t - prev.t
    space = next.grid.space
    tests = default_tests(space) if tests is None else tests
    mp, mn = moments(prev.f), moments(next.f)
    eps = next.eps
    fp, fn = _momentum_flux(prev), _momentum_flux(next)
    lc1 = lc2 = 0.0
    for psi in tests:
        dpsi = deriv(psi, 0)
        if dt > 0:
            drho = (mn.rho.inner(psi) - mp.rho.inner(psi)) / dt
            dJ = (mn.J[0].inner(psi) - mp.J[0].inner(psi)) / dt
            flux_c = 0.5 * sum((m.J[0] - m.rho / eps).inner(dpsi) for m in (mp, mn))
            flux_m = 0.5 * sum((m.S[0] - m.J[0] / eps + p).inner(dpsi) for m, p in ((mp, fp), (mn, fn)))
            lc1 = max(lc1, abs(drho - flux_c))
            lc2 = max(lc2, abs(dJ - flux_m))
    drift = abs(next.f.mass() - next.mass0) / next.mass0
    return ConservationReport(next.t, drift, energy(next), lc1, lc2)


class CsvObserver:
    """Writes t, mass, energy and conservation residuals as the run advances."""

    columns = ("t", "mass", "mass_drift", "energy", "lc1_residual", "momentum_flux_balance", "clipped_mass")

    def __init__(self, path):
        self.path = Path(path)
        self._fh = self.path.open("w", newline="")
        self._w = csv.writer(self._fh)
        self._w.writerow(self.columns)
        self._prev: KineticState | None = None

    def __call__(self, t: float, state: KineticState):
        if self._prev is None:
            rep = ConservationReport(t, abs(state.f.mass() - state.mass0) / state.mass0, energy(state), 0.0, 0.0)
        else:
            rep = conservation_report(self._prev, state)
        self._prev = state
        row = (t, state.f.mass(), rep.mass_drift, rep.energy, rep.lc1_residual, rep.momentum_flux_balance, state.clipped_mass)
        self._w.writerow([repr(float(v)) for v in row])
        self._fh.flush()
        return rep

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
