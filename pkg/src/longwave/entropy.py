"""Relative-entropy (modulated energy) functionals and companion diagnostics.

For a state (f, phi) and correctors giving a bulk velocity ``u_mod`` and a
target potential ``phi_t``::

    H = 1/2 int f |v - u_mod|^2 + sum_j w_j/2 int |d_j (phi - phi_t)|^2 + field term

with ``w = (eps,)`` in 1D, ``(eps, eps**2)`` for the anisotropic 2D case and
``eps`` on every axis otherwise.  The field term is ``1/2 int (phi - phi_t)^2``
under the linearized law and the L log L term

    (1/eps^2) int x log(x/y) - x + y,   x = exp(eps phi), y = exp(eps phi_t)

under the Boltzmann law.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .correctors import CorrectorError, CorrectorSet
from .phasespace import DistributionField, moments
from .spectral import SpectralField, deriv

EXP_GUARD = 30.0


class EntropyError(ValueError):
    pass


@dataclass(frozen=True)
class EntropyReport:
    t: float
    h_kinetic: float
    h_grad: float
    h_field: float
    h_total: float
    temperature: float


def _grad_weights(kind: str, ndim: int, eps: float) -> tuple[float, ...]:
    if kind == "kpii":
        return (eps, eps**2)
    return (eps,) * ndim


def cold_ions_temperature(f: DistributionField, u_mod: Sequence) -> float:
    """``int f |v - u_mod|^2 dv dx`` summed over velocity axes."""
    g = f.grid
    if len(u_mod) != g.dim:
        raise EntropyError(f"need {g.dim} velocity components, got {len(u_mod)}")
    total = 0.0
    for j, u in enumerate(u_mod):
        u = u.values if isinstance(u, SpectralField) else np.asarray(u, dtype=float)
        dv = g.v(j) - g.expand_space(np.broadcast_to(u, g.space.shape))
        total += float(np.sum(f.values * dv * dv))
    return total * g.cell_volume


def _check_exponent(a: np.ndarray, what: str) -> None:
    worst = float(np.max(np.abs(a)))
    if worst > EXP_GUARD:
        raise EntropyError(f"|eps * {what}| reaches {worst:.3g} > {EXP_GUARD}; exponential term out of range")


def _bregman_exp(d: np.ndarray) -> np.ndarray:
    """``exp(d)(d - 1) + 1`` without cancellation for small ``d``."""
    out = np.empty_like(d)
    small = np.abs(d) < 1e-3
    ds = d[small]
    out[small] = ds * ds * (0.5 + ds * (1.0 / 3.0 + ds * (0.125 + ds / 30.0)))
    dl = d[~small]
    out[~small] = np.exp(dl) * (dl - 1.0) + 1.0
    return out


def llogl_term(phi_eps: SpectralField, phi_target: SpectralField, eps: float) -> float:
    if phi_eps.grid != phi_target.grid:
        raise EntropyError("fields live on different grids")
    x = eps * phi_eps.values
    y = eps * phi_target.values
    _check_exponent(x, "phi_eps")
    _check_exponent(y, "phi_target")
    integrand = np.exp(y) * _bregman_exp(x - y)
    return float(np.sum(integrand)) * phi_eps.grid.cell_volume / eps**2


def hellinger_term(phi_eps: SpectralField, phi_target: SpectralField, eps: float) -> float:
    """``(1/eps^2) int (sqrt(x) - sqrt(y))^2``, the lower bound of :func:`llogl_term`."""
    x = eps * phi_eps.values
    y = eps * phi_target.values
    _check_exponent(x, "phi_eps")
    _check_exponent(y, "phi_target")
    return float(np.sum((np.exp(0.5 * x) - np.exp(0.5 * y)) ** 2)) * phi_eps.grid.cell_volume / eps**2


def llogl_scalar(x, y):
    return x * np.log(x / y) - x + y


def hellinger_scalar(x, y):
    return (np.sqrt(x) - np.sqrt(y)) ** 2


def relative_entropy(state, cs: CorrectorSet, t: float | None = None) -> EntropyReport:
    """Relative entropy of a kinetic state against the correctors at time ``t`` (default ``state.t``)."""
    t = state.t if t is None else t
    eps = state.eps
    if cs.grid != state.grid.space:
        raise EntropyError("corrector grid differs from the state's spatial grid")
    try:
        u = cs.modulated_velocity(t, eps)
        target = SpectralField(cs.grid, cs.target_potential(t, eps))
    except KeyError as exc:
        raise CorrectorError(f"corrector set lacks component {exc}") from exc
    if len(u) != state.grid.dim:
        raise CorrectorError(f"{cs.kind} correctors give {len(u)} velocity components, state has {state.grid.dim}")
    temp = cold_ions_temperature(state.f, u)
    err = state.phi - target
    h_grad = 0.0
    for a, w in enumerate(_grad_weights(cs.kind, cs.grid.ndim, eps)):
        g = deriv(err, a)
        h_grad += 0.5 * w * (g * g).integral()
    if state.law == "linearized":
        h_field = 0.5 * (err * err).integral()
    else:
        h_field = llogl_term(state.phi, target, eps)
    h_kin = 0.5 * temp
    return EntropyReport(t, h_kin, h_grad, h_field, h_kin + h_grad + h_field, temp)


def lemma_tech_check(phi_eps: SpectralField, phi1: SpectralField, eps: float, energy_bound: float) -> tuple[float, float]:
    """Left side ``(1/eps)|int (exp(eps phi) - eps phi) Lap d1 phi1|`` and its bound.

    The bound follows the two-term split of the estimate::

        eps * |Lap d1 phi1|_inf * E  +  sqrt(2) * |grad d1 phi1|_inf * E * sqrt(eps)

    where ``E`` bounds the Boltzmann-law energy.  The first term uses
    ``(exp(a/2) - 1)^2 <= exp(a)(a - 1) + 1`` and the second the weighted
    Young inequality with weight ``eps**1.5 / sqrt(2)``.
    """
    grid = phi1.grid
    x = eps * phi_eps.values
    _check_exponent(x, "phi_eps")
    d1 = deriv(phi1, 0)
    lap_d1 = sum((deriv(d1, a, 2) for a in range(grid.ndim)), SpectralField.zeros(grid))
    lhs = abs(float(np.sum((np.exp(x) - x) * lap_d1.values)) * grid.cell_volume) / eps
    lip3 = lap_d1.norm_inf()
    lip2 = float(np.max(np.sqrt(sum(deriv(d1, a).values ** 2 for a in range(grid.ndim)))))
    bound = eps * lip3 * energy_bound + np.sqrt(2.0) * lip2 * energy_bound * np.sqrt(eps)
    return lhs, float(bound)


@dataclass(frozen=True)
class PairingTable:
    """``rho[i] = <rho - 1, psi_i>``, ``J[i, j] = <J_j - target_j, psi_i>`` (target ``phi1`` on axis 1, 0 otherwise)."""

    t: float
    rho: np.ndarray
    J: np.ndarray


def weak_moment_pairing(state, cs: CorrectorSet, tests: Sequence[SpectralField], t: float | None = None) -> PairingTable:
    t = state.t if t is None else t
    m = moments(state.f)
    phi1 = SpectralField(cs.grid, cs.array_at("phi1", t))
    rho = np.array([(m.rho - 1.0).inner(psi) for psi in tests])
    J = np.zeros((len(tests), state.grid.dim))
    for i, psi in enumerate(tests):
        for j, Jj in enumerate(m.J):
            target = phi1 if j == 0 else SpectralField.zeros(cs.grid)
            J[i, j] = (Jj - target).inner(psi)
    return PairingTable(t, rho, J)


def write_entropy_csv(reports: Sequence[EntropyReport], path) -> Path:
    path = Path(path)
    names = [f.name for f in fields(EntropyReport)]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for r in reports:
            w.writerow([repr(float(getattr(r, n))) for n in names])
    return path
