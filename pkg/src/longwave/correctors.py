"""Corrector fields built from limit-equation trajectories, and their identity checks.

One-dimensional (kdv)::

    u1 = phi1,   d_x(u2 - phi2) = d_t phi1 + phi1 d_x phi1,   phi2 = 0

Two-dimensional anisotropic (kpii)::

    u1_1 = phi1,   d_1 u1_2 = d_2 phi1,   d_1(u2_1 - phi2) = d_t phi1 + phi1 d_1 phi1,
    u2_2 = 0,      phi2 = 0

Three-dimensional (zk), fixed by the twelve cancellation identities::

    u1_1 = phi1,  u1_2 = -d_3 phi1,  u1_3 = d_2 phi1,  phi2 = d_11 phi1,
    u2_2 = d_12 phi1,  u2_3 = d_13 phi1,
    d_1 u2_1 = d_t phi1 + phi1 d_1 phi1 + d_111 phi1,
    d_1 phi3 = d_t phi2 + phi1 d_1 phi2 + u2 . grad phi1

Time derivatives come from the trajectory's stored right-hand side, never
from finite differences.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dispersive import DispersiveTrajectory, rhs_tangent
from .spectral import SpectralField, TorusGrid, antideriv, deriv

FIELD_NAMES = {
    "kdv": ("phi1", "dphi1_dt", "u1", "u2", "phi2", "u2_minus_phi2"),
    "kpii": ("phi1", "dphi1_dt", "u1_1", "u1_2", "u2_1", "u2_2", "phi2", "u2_1_minus_phi2"),
    "zk": (
        "phi1", "dphi1_dt", "u1_1", "u1_2", "u1_3", "u2_1", "u2_2", "u2_3",
        "phi2", "dphi2_dt", "phi3", "phi3_alt",
    ),
}

ZK_IDENTITIES = (
    "-d1 u1_1 + d1 phi1",
    "-u1_3 + d2 phi1",
    "u1_2 + d3 phi1",
    "-u2_3 - d1 u1_2",
    "u2_2 - d1 u1_3",
    "dt u1_1 + u1_1 d1 u1_1 - d1 u2_1 + d1 phi2",
    "-d1 u2_2 + d2 phi2",
    "-d1 u2_3 + d3 phi2",
    "d2 u1_2 + d3 u1_3",
    "dt phi1 + div u2 + phi1 d1 phi1 + Lap d1 phi1 - d1 phi2",
    "u1_2 d2 phi1 + u1_3 d3 phi1",
    "dt phi2 + phi1 d1 phi2 + u2 . grad phi1 - d1 phi3",
)


class CorrectorError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CorrectorSet:
    """Corrector profiles on a set of sample times; ``fields[name]`` has shape (n_times, *grid.shape)."""

    kind: str
    grid: TorusGrid
    times: np.ndarray
    fields: dict
    obstruction: np.ndarray | None = None  # zk: x1-mean removed from the phi3 source, per sample

    def __post_init__(self):
        missing = [n for n in FIELD_NAMES[self.kind] if n not in self.fields]
        if missing:
            raise CorrectorError(f"{self.kind} corrector set is missing {missing}")
        for name, arr in self.fields.items():
            if arr.shape != (len(self.times),) + self.grid.shape:
                raise CorrectorError(f"field {name} has shape {arr.shape}")

    @classmethod
    def zeros(cls, kind: str, grid: TorusGrid) -> "CorrectorSet":
        z = np.zeros((1,) + grid.shape)
        return cls(kind, grid, np.array([0.0]), {n: z for n in FIELD_NAMES[kind]})

    def __len__(self) -> int:
        return len(self.times)

    def sample(self, i: int) -> dict[str, SpectralField]:
        return {n: SpectralField(self.grid, a[i]) for n, a in self.fields.items()}

    def _weights(self, t: float) -> tuple[int, int, float]:
        times = self.times
        if len(times) == 1:
            return 0, 0, 0.0
        tol = 1e-9 * max(1.0, abs(times[-1]))
        if t < times[0] - tol or t > times[-1] + tol:
            raise CorrectorError(f"t={t} outside the sampled interval [{times[0]}, {times[-1]}]")
        j = int(np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(times) - 2))
        w = float(np.clip((t - times[j]) / (times[j + 1] - times[j]), 0.0, 1.0))
        return j, j + 1, w

    def array_at(self, name: str, t: float) -> np.ndarray:
        """Field ``name`` at time ``t``, linear in time between samples."""
        j0, j1, w = self._weights(t)
        a = self.fields[name]
        if w == 0.0:
            return a[j0]
        if w == 1.0:
            return a[j1]
        return (1 - w) * a[j0] + w * a[j1]

    def at(self, t: float) -> dict[str, SpectralField]:
        return {n: SpectralField(self.grid, self.array_at(n, t)) for n in self.fields}

    def modulated_velocity(self, t: float, eps: float) -> list[np.ndarray]:
        """Bulk velocity per velocity axis in the scaled kinetic variables."""
        a = lambda n: self.array_at(n, t)  # noqa: E731
        if self.kind == "kdv":
            return [a("u1") + eps * a("u2")]
        if self.kind == "kpii":
            return [a("u1_1") + eps * a("u2_1"), np.sqrt(eps) * a("u1_2") + eps**1.5 * a("u2_2")]
        return [
            a("u1_1") + eps * a("u2_1"),
            np.sqrt(eps) * a("u1_2") + eps * a("u2_2"),
            np.sqrt(eps) * a("u1_3") + eps * a("u2_3"),
        ]

    def target_potential(self, t: float, eps: float) -> np.ndarray:
        phi = self.array_at("phi1", t) + eps * self.array_at("phi2", t)
        if self.kind == "zk":
            phi = phi + eps**2 * self.array_at("phi3", t)
        return phi

    def replace(self, **fields) -> "CorrectorSet":
        """Copy with some fields swapped (used to inject corruptions)."""
        new = dict(self.fields)
        new.update(fields)
        return CorrectorSet(self.kind, self.grid, self.times, new, self.obstruction)


def _require(traj: DispersiveTrajectory, kind: str) -> None:
    if traj.kind != kind:
        raise CorrectorError(f"expected a {kind} trajectory, got {traj.kind}")


def _d(f: SpectralField, axis: int, order: int = 1) -> SpectralField:
    """Spectral derivative; axes beyond the grid are treated as invariant directions."""
    if axis >= f.grid.ndim:
        return SpectralField.zeros(f.grid)
    return deriv(f, axis, order)


def _antideriv_checked(f: SpectralField, axis: int, what: str) -> SpectralField:
    try:
        return antideriv(f, axis)
    except Exception as exc:
        raise CorrectorError(f"{what}: {exc}") from exc


def build_kdv(traj: DispersiveTrajectory) -> CorrectorSet:
    _require(traj, "kdv")
    out = {n: [] for n in FIELD_NAMES["kdv"]}
    for i in range(len(traj)):
        phi, phit = traj.field(i), traj.time_derivative(i)
        diff = _antideriv_checked(phit + phi * deriv(phi, 0, 1), 0, f"u2 - phi2 at t={traj.times[i]}")
        for n, v in (("phi1", phi), ("dphi1_dt", phit), ("u1", phi), ("u2", diff),
                     ("phi2", SpectralField.zeros(traj.grid)), ("u2_minus_phi2", diff)):
            out[n].append(v.values)
    return CorrectorSet("kdv", traj.grid, traj.times.copy(), {n: np.array(v) for n, v in out.items()})


def build_kpii(traj: DispersiveTrajectory) -> CorrectorSet:
    _require(traj, "kpii")
    out = {n: [] for n in FIELD_NAMES["kpii"]}
    zero = SpectralField.zeros(traj.grid)
    for i in range(len(traj)):
        phi, phit = traj.field(i), traj.time_derivative(i)
        u12 = _antideriv_checked(deriv(phi, 1, 1), 0, f"u1_2 at t={traj.times[i]}")
        diff = _antideriv_checked(phit + phi * deriv(phi, 0, 1), 0, f"u2_1 - phi2 at t={traj.times[i]}")
        for n, v in (("phi1", phi), ("dphi1_dt", phit), ("u1_1", phi), ("u1_2", u12), ("u2_1", diff),
                     ("u2_2", zero), ("phi2", zero), ("u2_1_minus_phi2", diff)):
            out[n].append(v.values)
    return CorrectorSet("kpii", traj.grid, traj.times.copy(), {n: np.array(v) for n, v in out.items()})


def _remove_x1_mean(f: SpectralField) -> tuple[SpectralField, float]:
    mean = np.mean(f.values, axis=0, keepdims=True)
    return SpectralField(f.grid, f.values - mean), float(np.max(np.abs(mean)))


def build_zk(traj: DispersiveTrajectory) -> CorrectorSet:
    """ZK correctors.  ``phi3`` solves identity 12 up to its x1-mean, which is
    recorded in ``obstruction`` (it vanishes only for special data)."""
    _require(traj, "zk")
    out = {n: [] for n in FIELD_NAMES["zk"]}
    obstruction = []
    for i in range(len(traj)):
        phi, phit = traj.field(i), traj.time_derivative(i)
        u12 = -_d(phi, 2)
        u13 = _d(phi, 1)
        phi2 = deriv(phi, 0, 2)
        phi2t = deriv(phit, 0, 2)
        u22 = deriv(_d(phi, 1), 0)
        u23 = deriv(_d(phi, 2), 0)
        u21 = _antideriv_checked(phit + phi * deriv(phi, 0) + deriv(phi, 0, 3), 0, f"u2_1 at t={traj.times[i]}")
        source = phi2t + phi * deriv(phi2, 0) + u21 * deriv(phi, 0) + u22 * _d(phi, 1) + u23 * _d(phi, 2)
        source, defect = _remove_x1_mean(source)
        phi3 = antideriv(source, 0)
        alt = -phi2t - deriv(u21 * phi, 0) - phi * deriv(phi2, 0) - u12 * _d(phi2, 1) + u13 * _d(phi2, 2)
        alt, _ = _remove_x1_mean(alt)
        phi3_alt = antideriv(alt, 0)
        obstruction.append(defect)
        for n, v in (("phi1", phi), ("dphi1_dt", phit), ("u1_1", phi), ("u1_2", u12), ("u1_3", u13),
                     ("u2_1", u21), ("u2_2", u22), ("u2_3", u23), ("phi2", phi2), ("dphi2_dt", phi2t),
                     ("phi3", phi3), ("phi3_alt", phi3_alt)):
            out[n].append(v.values)
    return CorrectorSet("zk", traj.grid, traj.times.copy(), {n: np.array(v) for n, v in out.items()}, np.array(obstruction))


def zk_identity_fields(cs: CorrectorSet, t_index: int, phi3_name: str = "phi3") -> list[SpectralField]:
    """Left-hand sides of the twelve cancellation identities at one sample."""
    if cs.kind != "zk":
        raise CorrectorError("zk identities need a zk corrector set")
    f = cs.sample(t_index)
    phi, phit = f["phi1"], f["dphi1_dt"]
    u11, u12, u13 = f["u1_1"], f["u1_2"], f["u1_3"]
    u21, u22, u23 = f["u2_1"], f["u2_2"], f["u2_3"]
    phi2, phi2t, phi3 = f["phi2"], f["dphi2_dt"], f[phi3_name]
    d = _d
    lap = deriv(phi, 0, 2) + d(phi, 1, 2) + d(phi, 2, 2)
    div_u2 = deriv(u21, 0) + d(u22, 1) + d(u23, 2)
    return [
        -deriv(u11, 0) + deriv(phi, 0),
        -u13 + d(phi, 1),
        u12 + d(phi, 2),
        -u23 - deriv(u12, 0),
        u22 - deriv(u13, 0),
        phit + u11 * deriv(u11, 0) - deriv(u21, 0) + deriv(phi2, 0),
        -deriv(u22, 0) + d(phi2, 1),
        -deriv(u23, 0) + d(phi2, 2),
        d(u12, 1) + d(u13, 2),
        phit + div_u2 + phi * deriv(phi, 0) + deriv(lap, 0) - deriv(phi2, 0),
        u12 * d(phi, 1) + u13 * d(phi, 2),
        phi2t + phi * deriv(phi2, 0) + u21 * deriv(phi, 0) + u22 * d(phi, 1) + u23 * d(phi, 2) - deriv(phi3, 0),
    ]


def verify_zk_cancellations(cs: CorrectorSet, t_index: int) -> list[float]:
    """Max-norm residual of each of the twelve identities."""
    return [r.norm_inf() for r in zk_identity_fields(cs, t_index)]


def zk_alternative_phi3_residual(cs: CorrectorSet, t_index: int) -> float:
    """Identity 12 evaluated with the phi3 of the alternative printed formula."""
    return zk_identity_fields(cs, t_index, "phi3_alt")[11].norm_inf()


def defining_residuals(cs: CorrectorSet) -> dict[str, float]:
    """Re-differentiate the built fields and compare with their defining equations."""
    worst: dict[str, float] = {}

    def put(name, field):
        worst[name] = max(worst.get(name, 0.0), field.norm_inf())

    for i in range(len(cs)):
        f = cs.sample(i)
        phi, phit = f["phi1"], f["dphi1_dt"]
        if cs.kind == "kdv":
            put("u1 = phi1", f["u1"] - phi)
            put("phi2 = 0", f["phi2"])
            put("dx(u2 - phi2) = dt phi1 + phi1 dx phi1", deriv(f["u2"] - f["phi2"], 0) - (phit + phi * deriv(phi, 0)))
        elif cs.kind == "kpii":
            put("u1_1 = phi1", f["u1_1"] - phi)
            put("d1 u1_2 = d2 phi1", deriv(f["u1_2"], 0) - deriv(phi, 1))
            put("d1(u2_1 - phi2) = dt phi1 + phi1 d1 phi1",
                deriv(f["u2_1"] - f["phi2"], 0) - (phit + phi * deriv(phi, 0)))
        else:
            # identity 10 is the limit equation itself and identity 12 defines phi3 up to its x1-mean
            for k, r in enumerate(zk_identity_fields(cs, i)):
                if k not in (9, 11):
                    put(f"identity {k + 1}", r)
            src = zk_identity_fields(cs, i)[11]
            put("d1 phi3 = phi3 source minus its x1-mean", src - np.mean(src.values, axis=0, keepdims=True))
            put("d1 u2_1 = dt phi1 + phi1 d1 phi1 + d111 phi1",
                deriv(f["u2_1"], 0) - (phit + phi * deriv(phi, 0) + deriv(phi, 0, 3)))
            put("phi2 = d11 phi1", f["phi2"] - deriv(phi, 0, 2))
    return worst


def euler_poisson_residual(cs: CorrectorSet, eps: float, include_rho2: bool = False) -> tuple[float, float, float]:
    """Residuals of the rescaled one-dimensional Euler-Poisson system on the expansion.

    System, with ``E = -d_x phi``::

        d_t rho - (1/eps) d_x rho + d_x(rho u) = 0
        d_t u - (1/eps) d_x u + u d_x u + (1/eps) d_x phi = 0
        -eps d_xx phi + phi - (rho - 1)/eps = 0

    Expansion ``rho = 1 + eps phi1 (+ eps^2 rho2)``, ``u = u1 + eps u2``,
    ``phi = phi1 + eps phi2``.  With ``include_rho2`` the second-order density
    ``rho2 = phi2 - d_xx phi1`` from the Poisson law is added.  Returns the
    max over samples of the max-norm residual of each equation.
    """
    if cs.kind != "kdv":
        raise CorrectorError("euler_poisson_residual needs a kdv corrector set")
    out = np.zeros(3)
    for i in range(len(cs)):
        f = cs.sample(i)
        phi1, phit = f["phi1"], f["dphi1_dt"]
        u1, u2, phi2 = f["u1"], f["u2"], f["phi2"]
        phitt = rhs_tangent("kdv", phi1, phit)
        # d_t(u2 - phi2) = d_x^{-1}(d_tt phi1 + d_x(phi1 d_t phi1)); phi2 = 0 so d_t phi2 = 0
        u2t = antideriv(phitt + deriv(phi1 * phit, 0), 0)
        rho = 1 + eps * phi1
        rhot = eps * phit
        if include_rho2:
            rho2 = phi2 - deriv(phi1, 0, 2)
            rho2t = -deriv(phit, 0, 2)
            rho = rho + eps**2 * rho2
            rhot = rhot + eps**2 * rho2t
        u = u1 + eps * u2
        ut = phit + eps * u2t
        phi = phi1 + eps * phi2
        charge = rhot - (1 / eps) * deriv(rho, 0) + deriv(rho * u, 0)
        momentum = ut - (1 / eps) * deriv(u, 0) + u * deriv(u, 0) + (1 / eps) * deriv(phi, 0)
        poisson = -eps * deriv(phi, 0, 2) + phi - (rho - 1) / eps
        out = np.maximum(out, [charge.norm_inf(), momentum.norm_inf(), poisson.norm_inf()])
    return tuple(float(v) for v in out)


def write_residual_csv(rows, path) -> Path:
    """``rows``: iterable of (t_index, t, identity, residual)."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_index", "t", "identity", "residual"])
        for row in rows:
            w.writerow(row)
    return path
