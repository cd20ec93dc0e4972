"""Pseudo-spectral integrators for the KdV, KP-II and ZK limit equations.

Normalizations (solved for the time derivative)::

    kdv   phi_t = -(3/2) phi phi_x - (1/2) phi_xxx
    kpii  phi_t = -(3/2) phi d1 phi - (1/2) d1^3 phi - (1/2) d1^{-1} d2^2 phi
    zk    phi_t = - phi d1 phi - (1/2) d1 (Delta + Delta_perp) phi

where ``Delta_perp`` is the Laplacian in the transverse axes.  The linear
part is handled exactly by an integrating factor and the quadratic part by
classical RK4 with 2/3-rule dealiasing.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .snapshots import write_snapshot
from .spectral import SpectralField, TorusGrid, deriv, deriv_symbol, forward, inverse

KINDS = ("kdv", "kpii", "zk")

# Coefficient a_nl of phi * d1 phi in the solved form phi_t = -a_nl phi d1 phi + ...
NONLINEAR_COEFF = {"kdv": 1.5, "kpii": 1.5, "zk": 1.0}

# Abort when max|phi1| exceeds this multiple of its initial value.
BLOWUP_FACTOR = 1e3


class DispersiveError(ValueError):
    pass


class ConstraintError(DispersiveError):
    """KP-II data with a nonzero mean along x1."""


class BlowUpError(RuntimeError):
    def __init__(self, message: str, t: float, max_abs: float):
        super().__init__(message)
        self.t = t
        self.max_abs = max_abs


def _check_kind(kind: str, grid: TorusGrid) -> None:
    if kind not in KINDS:
        raise DispersiveError(f"unknown kind {kind!r}; expected one of {KINDS}")
    allowed = {"kdv": (1,), "kpii": (2,), "zk": (2, 3)}[kind]
    if grid.ndim not in allowed:
        raise DispersiveError(f"{kind} needs a grid with {allowed} axes, got {grid.ndim}")


def _check_kp_constraint(phi: SpectralField) -> None:
    defect = float(np.max(np.abs(np.mean(phi.values, axis=0))))
    tol = 1e-10 * max(phi.norm_inf(), 1e-300)
    if defect > tol:
        raise ConstraintError(
            f"KP-II needs zero mean along x1 for every x2 (found {defect:.3e}); "
            "the inverse x1-derivative is undefined on such data"
        )


def linear_symbol(kind: str, grid: TorusGrid) -> np.ndarray:
    """Fourier multiplier of the linear part of the solved form."""
    _check_kind(kind, grid)
    d1 = deriv_symbol(grid, 0, 1)
    d1_3 = deriv_symbol(grid, 0, 3)
    if kind == "kdv":
        return -0.5 * d1_3
    if kind == "kpii":
        d2_2 = deriv_symbol(grid, 1, 2)
        with np.errstate(divide="ignore", invalid="ignore"):
            inv_d1 = np.where(d1 == 0, 0.0, 1.0 / np.where(d1 == 0, 1.0, d1))
        return -0.5 * d1_3 - 0.5 * inv_d1 * d2_2
    lap_perp = sum(deriv_symbol(grid, a, 2) for a in range(1, grid.ndim))
    lap = deriv_symbol(grid, 0, 2) + lap_perp
    return -0.5 * d1 * (lap + lap_perp)


def _nonlinear_hat(kind: str, grid: TorusGrid, coeffs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Dealiased ``-a_nl * d1(phi^2) / 2`` in spectral form, plus physical phi."""
    mask = grid.dealias_mask()
    phi = inverse(grid, coeffs * mask)
    sq = forward(grid, phi * phi) * mask
    return -0.5 * NONLINEAR_COEFF[kind] * deriv_symbol(grid, 0, 1) * sq, phi


def _bilinear_hat(kind: str, grid: TorusGrid, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Dealiased ``-a_nl * d1(a b)`` for physical ``a`` and ``b``, spectral result."""
    mask = grid.dealias_mask()
    pa = inverse(grid, forward(grid, a) * mask)
    pb = inverse(grid, forward(grid, b) * mask)
    return -NONLINEAR_COEFF[kind] * deriv_symbol(grid, 0, 1) * forward(grid, pa * pb) * mask


def rhs(kind: str, phi1: SpectralField) -> SpectralField:
    """Time derivative of ``phi1`` under the limit equation ``kind``."""
    grid = phi1.grid
    _check_kind(kind, grid)
    if kind == "kpii":
        _check_kp_constraint(phi1)
    c = phi1.coeffs()
    nl, _ = _nonlinear_hat(kind, grid, c)
    return SpectralField.from_coeffs(grid, linear_symbol(kind, grid) * c + nl)


def rhs_tangent(kind: str, phi1: SpectralField, dphi: SpectralField) -> SpectralField:
    """Derivative of :func:`rhs` at ``phi1`` in the direction ``dphi``.

    With ``dphi = rhs(phi1)`` this is the second time derivative of a
    trajectory, computed without finite differences.
    """
    grid = phi1.grid
    _check_kind(kind, grid)
    lin = linear_symbol(kind, grid) * dphi.coeffs()
    return SpectralField.from_coeffs(grid, lin + _bilinear_hat(kind, grid, phi1.values, dphi.values))


@dataclass(frozen=True, eq=False)
class DispersiveProblem:
    kind: str
    phi1_0: SpectralField

    def __post_init__(self):
        _check_kind(self.kind, self.phi1_0.grid)
        if not np.all(np.isfinite(self.phi1_0.values)):
            raise DispersiveError("initial data contains non-finite values")
        if self.kind == "kpii":
            _check_kp_constraint(self.phi1_0)

    @property
    def grid(self) -> TorusGrid:
        return self.phi1_0.grid

    @property
    def coefficients(self) -> tuple[float, float]:
        """``(a_t, a_nl)`` of ``a_t phi_t + a_nl phi d1 phi + ... = 0``."""
        return (2.0, 2.0 * NONLINEAR_COEFF[self.kind])

    def max_stable_dt(self) -> float:
        speed = NONLINEAR_COEFF[self.kind] * self.phi1_0.norm_inf()
        if speed == 0:
            return np.inf
        return 0.5 * self.grid.spacing[0] / speed


@dataclass(frozen=True, eq=False)
class DispersiveTrajectory:
    kind: str
    grid: TorusGrid
    times: np.ndarray
    phi1: np.ndarray
    dphi1_dt: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.times)

    def field(self, i: int) -> SpectralField:
        return SpectralField(self.grid, self.phi1[i])

    def time_derivative(self, i: int) -> SpectralField:
        return SpectralField(self.grid, self.dphi1_dt[i])

    def pde_residual(self, i: int) -> float:
        """RMS residual of the equation in its undivided form, plain products."""
        phi = self.field(i)
        dt = self.time_derivative(i)
        d1 = deriv(phi, 0, 1)
        if self.kind == "kdv":
            r = 2 * dt + 3 * phi * d1 + deriv(phi, 0, 3)
        elif self.kind == "kpii":
            r = deriv(2 * dt + 3 * phi * d1 + deriv(phi, 0, 3), 0, 1) + deriv(phi, 1, 2)
        else:
            lap_perp = sum((deriv(phi, a, 2) for a in range(1, self.grid.ndim)), SpectralField.zeros(self.grid))
            r = 2 * dt + 2 * phi * d1 + deriv(deriv(phi, 0, 2) + 2 * lap_perp, 0, 1)
        return float(np.sqrt(np.mean(r.values**2)))

    def export_csv(self, directory) -> list[Path]:
        """One CSV per sample: coordinates, phi1 and its time derivative."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        coords = [c.ravel() for c in self.grid.mesh()]
        names = [f"x{a + 1}" for a in range(self.grid.ndim)]
        paths = []
        for i, t in enumerate(self.times):
            path = directory / f"{self.kind}_sample_{i:05d}.csv"
            with path.open("w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow([f"# t={t!r}"])
                w.writerow(names + ["phi1", "dphi1_dt"])
                for row in zip(*coords, self.phi1[i].ravel(), self.dphi1_dt[i].ravel()):
                    w.writerow([repr(float(v)) for v in row])
            paths.append(path)
        return paths

    def export_binary(self, directory) -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        bounds = [[0.0, length] for length in self.grid.lengths]
        paths = []
        for i, t in enumerate(self.times):
            stacked = np.stack([self.phi1[i], self.dphi1_dt[i]])
            header = {"kind": self.kind, "t": float(t), "bounds": bounds, "fields": ["phi1", "dphi1_dt"]}
            paths.append(write_snapshot(directory / f"{self.kind}_sample_{i:05d}.lwd", stacked, header))
        return paths


def integrate(p: DispersiveProblem, t_end: float, dt: float, sample_stride: int = 1) -> DispersiveTrajectory:
    """Integrating-factor RK4 from 0 to ``t_end``; samples every ``sample_stride`` steps."""
    if t_end < 0 or dt <= 0:
        raise DispersiveError("need t_end >= 0 and dt > 0")
    n_steps = int(round(t_end / dt))
    if abs(n_steps * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise DispersiveError(f"t_end={t_end} is not a multiple of dt={dt}")
    if dt > p.max_stable_dt():
        raise DispersiveError(f"dt={dt} exceeds the stability limit {p.max_stable_dt():.4g}")
    if sample_stride < 1:
        raise DispersiveError("sample_stride must be >= 1")
    kind, grid = p.kind, p.grid
    lin = linear_symbol(kind, grid)
    e_half = np.exp(lin * dt / 2)
    e_full = e_half * e_half
    v = p.phi1_0.coeffs()
    limit = BLOWUP_FACTOR * max(p.phi1_0.norm_inf(), 1e-300)

    times, snaps, derivs = [], [], []

    def record(t, coeffs):
        nl, phi = _nonlinear_hat(kind, grid, coeffs)
        times.append(t)
        snaps.append(inverse(grid, coeffs))
        derivs.append(inverse(grid, lin * coeffs + nl))

    record(0.0, v)
    for n in range(1, n_steps + 1):
        a, phi = _nonlinear_hat(kind, grid, v)
        if not np.all(np.isfinite(phi)) or np.max(np.abs(phi)) > limit:
            raise BlowUpError(f"{kind}: |phi1| exceeded {limit:.3e} at t={(n - 1) * dt:.6g}", (n - 1) * dt, float(np.max(np.abs(phi))))
        b, _ = _nonlinear_hat(kind, grid, e_half * (v + 0.5 * dt * a))
        c, _ = _nonlinear_hat(kind, grid, e_half * v + 0.5 * dt * b)
        d, _ = _nonlinear_hat(kind, grid, e_full * v + dt * e_half * c)
        v = e_full * v + (dt / 6) * (e_full * a + 2 * e_half * (b + c) + d)
        if n % sample_stride == 0 or n == n_steps:
            record(n * dt, v)
    return DispersiveTrajectory(
        kind,
        grid,
        np.array(times),
        np.array(snaps),
        np.array(derivs),
        {"dt": dt, "sample_stride": sample_stride},
    )


def kdv_invariants(phi: SpectralField) -> dict[str, float]:
    """Mass, L2 mass and Hamiltonian of the KdV normalization used here."""
    px = deriv(phi, 0, 1)
    return {
        "mass": phi.integral(),
        "l2": (phi * phi).integral(),
        "hamiltonian": (0.25 * px * px - 0.25 * phi * phi * phi).integral(),
    }
