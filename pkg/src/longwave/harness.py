"""Experiment orchestration: configs, the eps-sweeps, residual studies, rate fits and reports.

Every experiment reads an :class:`ExperimentConfig` (INI file, one experiment
per file) and returns a result object that the ``evaluate_*`` functions turn
into pass/fail lines.  :func:`run_experiment` also writes CSV series, SVG
plots and a plain-text report when given an output directory.
"""

from __future__ import annotations

import configparser
import csv
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import stats

from . import vlasov
from .correctors import (
    CorrectorSet,
    build_kdv,
    build_kpii,
    build_zk,
    defining_residuals,
    euler_poisson_residual,
    verify_zk_cancellations,
    write_residual_csv,
    zk_alternative_phi3_residual,
)
from .dispersive import DispersiveProblem, integrate
from .entropy import EntropyReport, lemma_tech_check, relative_entropy, weak_moment_pairing, write_entropy_csv
from .phasespace import PhaseGrid, build_prepared_data, moments, potential_anisotropy
from .poisson import PoissonProblem, apply_law, boltzmann_newton
from .spectral import SpectralField, TorusGrid

log = logging.getLogger(__name__)

EXPERIMENTS = ("kdv_sweep", "kpii_sweep", "ep_residual", "zk_identities", "equilibrium_regression")
KINETIC = ("kdv_sweep", "kpii_sweep", "equilibrium_regression")

# Acceptance thresholds.
SLOPE_MIN = 0.45
PAIRING_SLOPE_MIN = 0.2
SQRT_WINDOW = 3.0
KPII_SQRT_WINDOW = 5.0
ENERGY_RISE_MAX = 1e-4
MASS_DRIFT_MAX = 1e-9
EP_SLOPE_MIN = 0.8
EP_SLOPE_TOL = 0.2
ZK_TOL = 1e-8
ROUND_TRIP_TOL = 1e-10
NEWTON_MAX_ITER = 10
NEWTON_TOL = 1e-12
EQUILIBRIUM_DRIFT_MAX = 1e-8


class ConfigError(ValueError):
    def __init__(self, message: str, key: str | None = None):
        super().__init__(message if key is None else f"{message} [{key}]")
        self.key = key


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.replace(";", ",").split(",") if t.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.replace(";", ",").split(",") if t.strip())


# section -> key -> (parser, default)
SCHEMA: dict[str, dict[str, tuple]] = {
    "experiment": {"name": (str, None)},
    "grid": {"nx": (_ints, "256"), "nv": (_ints, "256")},
    "sweep": {
        "eps_list": (_floats, "0.1"),
        "theta0": (float, "1.0"),
        "t_end": (float, "1.0"),
        "c_cfl": (float, "0.1"),
        "dt_scale": (float, "1.0"),
        "law": (str, "linearized"),
        "stride": (int, "1"),
        "dispersive_dt": (float, "0.002"),
    },
    "profile": {"family": (str, "cos"), "amplitude": (float, "0.5"), "wavenumbers": (_ints, "1")},
    "output": {"dir": (str, "out")},
    "run": {"seed": (int, "0"), "threads": (int, "1")},
}

PROFILE_FAMILIES = ("cos", "cos_modulated", "plane_wave")


@dataclass(frozen=True)
class ExperimentConfig:
    """Typed, validated view of an INI experiment file."""

    raw: dict

    @classmethod
    def from_text(cls, text: str, overrides: dict[str, str] | None = None) -> "ExperimentConfig":
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";",))
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"unreadable config: {exc}") from exc
        raw = {s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()}
        for section in parser.sections():
            if section not in SCHEMA:
                raise ConfigError("unknown section", section)
            for key, value in parser.items(section):
                if key not in SCHEMA[section]:
                    raise ConfigError("unknown key", f"{section}.{key}")
                raw[section][key] = value
        for dotted, value in (overrides or {}).items():
            section, _, key = dotted.partition(".")
            if section not in SCHEMA or key not in SCHEMA[section]:
                raise ConfigError("unknown override key", dotted)
            raw[section][key] = value
        cfg = cls(raw)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path, overrides: dict[str, str] | None = None) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}", str(path)) from exc
        return cls.from_text(text, overrides)

    @classmethod
    def default(cls, name: str, overrides: dict[str, str] | None = None) -> "ExperimentConfig":
        return cls.from_text(shipped_config_text(name), overrides)

    def get(self, section: str, key: str):
        parse, _ = SCHEMA[section][key]
        text = self.raw[section][key]
        if text is None:
            raise ConfigError("missing required key", f"{section}.{key}")
        try:
            return parse(text)
        except ValueError as exc:
            raise ConfigError(f"invalid value {text!r}", f"{section}.{key}") from exc

    @property
    def experiment(self) -> str:
        return self.get("experiment", "name")

    @property
    def eps_list(self) -> tuple[float, ...]:
        return self.get("sweep", "eps_list")

    @property
    def law(self) -> str:
        return self.get("sweep", "law")

    @property
    def kind(self) -> str:
        return {"kdv_sweep": "kdv", "kpii_sweep": "kpii", "ep_residual": "kdv",
                "zk_identities": "zk", "equilibrium_regression": "kdv"}[self.experiment]

    def threads(self) -> int:
        env = os.environ.get("LONGWAVE_THREADS")
        if env:
            try:
                return max(1, int(env))
            except ValueError as exc:
                raise ConfigError(f"invalid LONGWAVE_THREADS={env!r}", "LONGWAVE_THREADS") from exc
        return max(1, self.get("run", "threads"))

    def space_grid(self) -> TorusGrid:
        nx = self.get("grid", "nx")
        return TorusGrid.uniform(nx if len(nx) > 1 else nx[0])

    def initial_profile(self, grid: TorusGrid | None = None) -> np.ndarray:
        grid = grid or self.space_grid()
        family = self.get("profile", "family")
        a = self.get("profile", "amplitude")
        ks = self.get("profile", "wavenumbers")
        mesh = grid.mesh()
        k = list(ks) + [ks[-1]] * (grid.ndim - len(ks))
        if family == "cos":
            return a * np.cos(k[0] * mesh[0])
        if family == "cos_modulated":
            return a * np.cos(k[0] * mesh[0]) * (1 + 0.5 * np.cos(k[1] * mesh[1]))
        xi = sum(kj * m for kj, m in zip(k, mesh))
        return a * (np.cos(xi) + 0.5 * np.sin(2 * xi))

    def validate(self) -> None:
        name = self.experiment
        if name not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}", "experiment.name")
        for section, keys in SCHEMA.items():
            for key in keys:
                self.get(section, key)
        eps = self.eps_list
        if any(not 0 < e < 1 for e in eps):
            raise ConfigError("every eps must lie in (0, 1)", "sweep.eps_list")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ConfigError("eps list must be strictly decreasing", "sweep.eps_list")
        if name in ("kdv_sweep", "kpii_sweep") and len(eps) < 2:
            raise ConfigError("a sweep needs at least two eps values", "sweep.eps_list")
        if name == "ep_residual" and len(eps) < 4:
            raise ConfigError("slopes need at least 4 eps values", "sweep.eps_list")
        if self.law not in ("linearized", "boltzmann"):
            raise ConfigError("law must be linearized or boltzmann", "sweep.law")
        if self.get("profile", "family") not in PROFILE_FAMILIES:
            raise ConfigError(f"profile family must be one of {PROFILE_FAMILIES}", "profile.family")
        for key in ("theta0", "t_end", "c_cfl", "dt_scale", "dispersive_dt"):
            if self.get("sweep", key) <= 0:
                raise ConfigError("must be positive", f"sweep.{key}")
        if self.get("sweep", "stride") < 1:
            raise ConfigError("must be at least 1", "sweep.stride")
        nx = self.get("grid", "nx")
        want = {"kdv": 1, "kpii": 2, "zk": 3}[self.kind]
        if len(nx) != want:
            raise ConfigError(f"{name} needs {want} spatial sizes", "grid.nx")
        try:
            grid = self.space_grid()
        except ValueError as exc:
            raise ConfigError(str(exc), "grid.nx") from exc
        if name in KINETIC:
            nv = self.get("grid", "nv")
            if len(nv) not in (1, want):
                raise ConfigError(f"give 1 or {want} velocity sizes", "grid.nv")
            phi = SpectralField(grid, self.initial_profile(grid))
            for e in eps:
                rho = apply_law(phi, e, self.law, potential_anisotropy(self.kind, e))
                if rho.values.min() <= 0:
                    raise ConfigError(f"amplitude too large: prepared density reaches {rho.values.min():.3g} at eps={e}",
                                      "profile.amplitude")

    def plan(self) -> str:
        """Deterministic description of what a run would do."""
        name = self.experiment
        steps = {}
        if name in KINETIC:
            for e in self.eps_list:
                dt = kinetic_dt(self, e)
                steps[repr(e)] = {"dt": dt, "steps": int(round(self.get("sweep", "t_end") / dt))}
        body = {
            "experiment": name,
            "config": {s: {k: self.raw[s][k] for k in sorted(self.raw[s])} for s in sorted(self.raw)},
            "kinetic_steps": steps,
            "threads": self.threads(),
        }
        return json.dumps(body, indent=2, sort_keys=True)

    def to_text(self) -> str:
        lines = []
        for s in SCHEMA:
            lines.append(f"[{s}]")
            lines.extend(f"{k} = {self.raw[s][k]}" for k in SCHEMA[s])
            lines.append("")
        return "\n".join(lines)


def shipped_configs() -> dict[str, str]:
    """Experiment name -> file name of the bundled default configs."""
    root = resources.files("longwave") / "configs"
    return {p.name[:-4]: p.name for p in sorted(root.iterdir(), key=lambda p: p.name) if p.name.endswith(".ini")}


def shipped_config_text(name: str) -> str:
    files = shipped_configs()
    if name not in files:
        raise ConfigError(f"no shipped config {name!r}", name)
    return (resources.files("longwave") / "configs" / files[name]).read_text()


def kinetic_dt(cfg: ExperimentConfig, eps: float) -> float:
    return cfg.get("sweep", "c_cfl") * eps * cfg.get("sweep", "dt_scale")


# ----------------------------------------------------------------------------- rate fits


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    halfwidth: float
    residuals: tuple[float, ...]


def fit_rate(pairs) -> RateFit:
    """Least squares of log(value) against log(eps); halfwidth is twice the slope's standard error."""
    pairs = list(pairs)
    if len(pairs) < 3:
        raise ValueError(f"rate fit needs at least 3 points, got {len(pairs)}")
    e, v = np.array(pairs, dtype=float).T
    if np.any(e <= 0) or np.any(v <= 0):
        raise ValueError("rate fit needs strictly positive eps and values")
    x, y = np.log(e), np.log(v)
    r = stats.linregress(x, y)
    resid = y - (r.intercept + r.slope * x)
    return RateFit(float(r.slope), float(r.intercept), float(2 * r.stderr), tuple(float(q) for q in resid))


# ----------------------------------------------------------------------------- kinetic sweeps


@dataclass
class EpsResult:
    eps: float
    dt: float
    steps: int = 0
    times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    reports: list = field(default_factory=list)
    energies: np.ndarray = field(default_factory=lambda: np.zeros(0))
    conservation: list = field(default_factory=list)
    pairing_rho: np.ndarray = field(default_factory=lambda: np.zeros(0))
    pairing_J: np.ndarray = field(default_factory=lambda: np.zeros(0))
    lemma: tuple[float, float] = (np.nan, np.nan)
    clipped_mass: float = 0.0
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def h_total(self) -> np.ndarray:
        return np.array([r.h_total for r in self.reports])

    @property
    def max_h(self) -> float:
        return float(self.h_total.max())

    @property
    def final_temperature(self) -> float:
        return float(self.reports[-1].temperature)

    @property
    def energy_rise(self) -> float:
        """Largest increase of the energy over its initial value, relative."""
        e = self.energies
        return float((e.max() - e[0]) / abs(e[0]))

    @property
    def mass_drift(self) -> float:
        return max(c.mass_drift for c in self.conservation)

    @property
    def lc1_max(self) -> float:
        return max(c.lc1_residual for c in self.conservation)


@dataclass
class SweepResult:
    experiment: str
    config: ExperimentConfig
    results: list[EpsResult]

    @property
    def good(self) -> list[EpsResult]:
        return [r for r in self.results if r.ok]

    def fit(self) -> RateFit:
        return fit_rate([(r.eps, r.max_h) for r in self.good])

    def temperature_fit(self) -> RateFit:
        return fit_rate([(r.eps, r.final_temperature) for r in self.good])

    def pairing_fits(self) -> tuple[RateFit, RateFit]:
        rho = fit_rate([(r.eps, abs(r.pairing_rho[0])) for r in self.good])
        J = fit_rate([(r.eps, abs(r.pairing_J[0, 0])) for r in self.good])
        return rho, J

    def sqrt_window(self) -> float:
        q = [r.max_h / np.sqrt(r.eps) for r in self.good]
        return max(q) / min(q)

    def lemma_growth(self) -> float:
        """Largest lhs/sqrt(eps) over the sweep relative to its value at the largest eps."""
        q = [r.lemma[0] / np.sqrt(r.eps) for r in self.good]
        return max(q) / q[0]

    def lemma_spread(self) -> float:
        q = [r.lemma[0] / np.sqrt(r.eps) for r in self.good]
        return max(q) / min(q)


def build_correctors(kind: str, phi0: SpectralField, t_end: float, dt: float, stride: int) -> CorrectorSet:
    traj = integrate(DispersiveProblem(kind, phi0), t_end, dt, stride)
    return {"kdv": build_kdv, "kpii": build_kpii, "zk": build_zk}[kind](traj)


def _velocity_grid(cfg: ExperimentConfig, cs: CorrectorSet, eps: float) -> PhaseGrid:
    space = cs.grid
    ranges = []
    for j in range(space.ndim):
        u = np.array([cs.modulated_velocity(t, eps)[j] for t in cs.times])
        ranges.append((float(u.min()), float(u.max())))
    nv = cfg.get("grid", "nv")
    nv = nv * space.ndim if len(nv) == 1 else nv
    return PhaseGrid.around(space, nv, ranges, np.sqrt(cfg.get("sweep", "theta0")))


def run_eps(cfg: ExperimentConfig, eps: float, out_dir: Path | None = None) -> EpsResult:
    """One kinetic run at fixed eps against correctors of the configured kind."""
    dt = kinetic_dt(cfg, eps)
    res = EpsResult(eps, dt)
    try:
        t_end = cfg.get("sweep", "t_end")
        grid = cfg.space_grid()
        sub = max(1, int(np.ceil(dt / cfg.get("sweep", "dispersive_dt") - 1e-9)))
        phi0 = SpectralField(grid, cfg.initial_profile(grid))
        # one corrector sample per kinetic step, so interpolation in time is exact at observed states
        cs = build_correctors(cfg.kind, phi0, t_end, dt / sub, sub)
        pg = _velocity_grid(cfg, cs, eps)
        f0 = build_prepared_data(pg, eps, cs, cfg.get("sweep", "theta0"), cfg.law)
        state0 = vlasov.KineticState.initial(f0, eps, cfg.law)
        prev: list = [None]

        def observe(t, s):
            rep = relative_entropy(s, cs, t)
            cons = vlasov.conservation_report(prev[0], s) if prev[0] is not None else vlasov.ConservationReport(
                t, abs(s.f.mass() - s.mass0) / s.mass0, vlasov.energy(s), 0.0, 0.0)
            prev[0] = s
            return rep, cons

        run = vlasov.run(state0, t_end, dt, [observe], cfg.get("sweep", "stride"), cfg.get("sweep", "c_cfl"))
        out = run.outputs[0]
        res.steps = run.steps
        res.reports = [o[0] for o in out]
        res.conservation = [o[1] for o in out]
        res.times = np.array([r.t for r in res.reports])
        res.energies = np.array([c.energy for c in res.conservation])
        final = run.state
        res.clipped_mass = final.clipped_mass
        tab = weak_moment_pairing(final, cs, vlasov.default_tests(grid), t_end)
        res.pairing_rho, res.pairing_J = tab.rho, tab.J
        res.lemma = lemma_for_state(final, cs, t_end)
        if out_dir is not None:
            out_dir.mkdir(parents=True, exist_ok=True)
            write_entropy_csv(res.reports, out_dir / f"entropy_eps{eps:g}.csv")
            _write_rows(out_dir / f"conservation_eps{eps:g}.csv", ("t", "mass_drift", "energy", "lc1_residual", "momentum_flux_balance"),
                        [(c.t, c.mass_drift, c.energy, c.lc1_residual, c.momentum_flux_balance) for c in res.conservation])
    except Exception as exc:  # keep the partial result, flag the eps
        log.error("eps=%g failed: %s", eps, exc)
        res.error = f"{type(exc).__name__}: {exc}"
    return res


def lemma_for_state(state: vlasov.KineticState, cs: CorrectorSet, t: float) -> tuple[float, float]:
    """Lemma-tech diagnostic on the Boltzmann potential of the state's density."""
    eps = state.eps
    rho = moments(state.f).rho
    p = PoissonProblem("boltzmann", eps, rho, vlasov.anisotropy_for(rho.grid.ndim, eps))
    phi_b = boltzmann_newton(p).phi
    bstate = vlasov.KineticState(state.t, state.f, phi_b, eps, "boltzmann", state.mass0)
    phi1 = SpectralField(cs.grid, cs.array_at("phi1", t))
    return lemma_tech_check(phi_b, phi1, eps, vlasov.energy(bstate))


def _map_eps(cfg: ExperimentConfig, out_dir: Path | None) -> list[EpsResult]:
    eps = cfg.eps_list
    sub = (lambda e: None) if out_dir is None else (lambda e: out_dir)
    threads = min(cfg.threads(), len(eps))
    if threads == 1:
        return [run_eps(cfg, e, sub(e)) for e in eps]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda e: run_eps(cfg, e, sub(e)), eps))


def run_kdv_sweep(cfg: ExperimentConfig, out_dir: Path | None = None) -> SweepResult:
    if cfg.experiment != "kdv_sweep":
        raise ConfigError("expected a kdv_sweep config", "experiment.name")
    return SweepResult("kdv_sweep", cfg, _map_eps(cfg, out_dir))


def run_kpii_sweep(cfg: ExperimentConfig, out_dir: Path | None = None) -> SweepResult:
    if cfg.experiment != "kpii_sweep":
        raise ConfigError("expected a kpii_sweep config", "experiment.name")
    return SweepResult("kpii_sweep", cfg, _map_eps(cfg, out_dir))


# ----------------------------------------------------------------------------- other experiments


@dataclass
class EPResult:
    eps: tuple[float, ...]
    residuals: np.ndarray  # (n_eps, 3): charge, momentum, poisson
    residuals_rho2: np.ndarray
    round_trip: float

    def slopes(self) -> list[float]:
        return [fit_rate(zip(self.eps, self.residuals[:, j])).slope if np.all(self.residuals[:, j] > 0) else float("nan")
                for j in range(3)]


def run_ep_residual(cfg: ExperimentConfig) -> EPResult:
    grid = cfg.space_grid()
    cs = build_correctors("kdv", SpectralField(grid, cfg.initial_profile(grid)), cfg.get("sweep", "t_end"),
                          cfg.get("sweep", "dispersive_dt"), cfg.get("sweep", "stride"))
    res = np.array([euler_poisson_residual(cs, e) for e in cfg.eps_list])
    res2 = np.array([euler_poisson_residual(cs, e, include_rho2=True) for e in cfg.eps_list])
    return EPResult(cfg.eps_list, res, res2, max(defining_residuals(cs).values()))


@dataclass
class ZKResult:
    times: np.ndarray
    residuals: np.ndarray  # (n_times, 12)
    obstruction: np.ndarray
    round_trip: float
    alternative_phi3: float
    corruption_hits: dict

    @property
    def worst(self) -> float:
        return float(self.residuals.max())


def corruption_hits(cs: CorrectorSet, t_index: int, size: float = 1e-3) -> dict[str, list[int]]:
    """1-based identities whose residual moves under a single-field corruption."""
    mesh = cs.grid.mesh()
    base = np.array(verify_zk_cancellations(cs, t_index))
    out = {}
    for name, pert in (("phi3", size * np.cos(mesh[0])), ("u2_2", size * np.cos(mesh[1]))):
        bad = cs.replace(**{name: cs.fields[name] + pert})
        delta = np.abs(np.array(verify_zk_cancellations(bad, t_index)) - base)
        out[name] = [int(k) + 1 for k in np.flatnonzero(delta > 1e-3 * size)]
    return out


def run_zk_identities(cfg: ExperimentConfig) -> ZKResult:
    grid = cfg.space_grid()
    cs = build_correctors("zk", SpectralField(grid, cfg.initial_profile(grid)), cfg.get("sweep", "t_end"),
                          cfg.get("sweep", "dispersive_dt"), cfg.get("sweep", "stride"))
    res = np.array([verify_zk_cancellations(cs, i) for i in range(len(cs))])
    alt = max(zk_alternative_phi3_residual(cs, i) for i in range(len(cs)))
    hits = corruption_hits(cs, len(cs) - 1) if np.max(np.abs(cs.fields["phi1"])) > 0 else {}
    return ZKResult(cs.times, res, cs.obstruction, max(defining_residuals(cs).values()), alt, hits)


@dataclass
class EquilibriumResult:
    steps: int
    energy_drift: float
    max_change: float
    residuals: float
    mass_drift: float


def run_equilibrium_regression(cfg: ExperimentConfig) -> EquilibriumResult:
    grid = cfg.space_grid()
    eps = cfg.eps_list[0]
    cs = CorrectorSet.zeros("kdv", grid)
    pg = PhaseGrid.around(grid, cfg.get("grid", "nv")[0], [(0.0, 0.0)], np.sqrt(cfg.get("sweep", "theta0")))
    f0 = build_prepared_data(pg, eps, cs, cfg.get("sweep", "theta0"), cfg.law)
    s0 = vlasov.KineticState.initial(f0, eps, cfg.law)
    dt = kinetic_dt(cfg, eps)
    prev = [s0]
    worst = [0.0]

    def observe(t, s):
        if s is not prev[0]:
            r = vlasov.conservation_report(prev[0], s)
            worst[0] = max(worst[0], r.lc1_residual, r.momentum_flux_balance)
        prev[0] = s
        return vlasov.energy(s)

    run = vlasov.run(s0, cfg.get("sweep", "t_end"), dt, [observe], 1, cfg.get("sweep", "c_cfl"))
    e = np.array(run.outputs[0])
    return EquilibriumResult(
        run.steps,
        float(np.max(np.abs(e - e[0])) / e[0]),
        float(np.max(np.abs(run.state.f.values - f0.values))),
        worst[0],
        abs(run.state.f.mass() - s0.mass0) / s0.mass0,
    )


def newton_audit(cfg: ExperimentConfig) -> list[tuple[float, int, float]]:
    """Boltzmann Newton on the prepared density of every configured eps: (eps, iterations, residual)."""
    grid = cfg.space_grid()
    phi = SpectralField(grid, cfg.initial_profile(grid))
    out = []
    for e in cfg.eps_list:
        aniso = potential_anisotropy(cfg.kind, e)
        rho = apply_law(phi, e, "linearized", aniso)
        r = boltzmann_newton(PoissonProblem("boltzmann", e, rho, aniso), tol=NEWTON_TOL)
        out.append((e, r.iterations, r.residual / max(1.0, rho.norm_inf())))
    return out


# ----------------------------------------------------------------------------- evaluation


@dataclass(frozen=True)
class Criterion:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def evaluate_sweep(sweep: SweepResult, halved: SweepResult | None = None) -> list[Criterion]:
    out = []
    failed = [r for r in sweep.results if not r.ok]
    if failed:
        out.append(Criterion("all eps runs completed", False, "; ".join(f"eps={r.eps:g}: {r.error}" for r in failed)))
    if len(sweep.good) < (3 if sweep.experiment == "kdv_sweep" else 2):
        return out + [Criterion("enough eps runs", False, f"{len(sweep.good)} completed")]
    window = sweep.sqrt_window()
    if sweep.experiment == "kdv_sweep":
        fit = sweep.fit()
        out.append(Criterion(
            "sqrt(eps) entropy scaling", fit.slope >= SLOPE_MIN and window <= SQRT_WINDOW,
            f"p = {fit.slope:.3f} +/- {fit.halfwidth:.3f} (need >= {SLOPE_MIN}; the bias below 0.5 comes from "
            f"discretization and the preparation constant), max H/sqrt(eps) window {window:.2f} (need <= {SQRT_WINDOW})"))
        tf = sweep.temperature_fit()
        out.append(Criterion("cold-ions limit", tf.slope >= SLOPE_MIN, f"temperature slope {tf.slope:.3f} (need >= {SLOPE_MIN})"))
        pr, pj = sweep.pairing_fits()
        out.append(Criterion("weak convergence", min(pr.slope, pj.slope) >= PAIRING_SLOPE_MIN,
                             f"<rho-1,cos> slope {pr.slope:.3f}, <J-phi1,cos> slope {pj.slope:.3f} (need >= {PAIRING_SLOPE_MIN})"))
        growth = sweep.lemma_growth()
        below = all(r.lemma[0] <= r.lemma[1] for r in sweep.good)
        out.append(Criterion("lemma-tech bound", growth <= SQRT_WINDOW and below,
                             f"max lhs/sqrt(eps) is {growth:.2f}x its value at the largest eps (need <= {SQRT_WINDOW}; "
                             f"max/min spread {sweep.lemma_spread():.2f}), lhs <= bound on every state: {below}"))
    else:
        hs = [r.max_h for r in sweep.good]
        decreasing = all(b < a for a, b in zip(hs, hs[1:]))
        out.append(Criterion("KP-II entropy decreases with eps", decreasing and window <= KPII_SQRT_WINDOW,
                             f"max H {', '.join(f'{h:.4g}' for h in hs)}, H/sqrt(eps) window {window:.2f} (need <= {KPII_SQRT_WINDOW})"))
    rise = max(r.energy_rise for r in sweep.good)
    detail = f"max relative rise {rise:.3g} (need < {ENERGY_RISE_MAX:g})"
    ok = rise < ENERGY_RISE_MAX
    if halved is not None:
        pairs = [(a.energy_rise, b.energy_rise) for a, b in zip(sweep.good, halved.good)]
        halves = all(b <= 0.5 * a or b <= 1e-14 for a, b in pairs)
        ok = ok and halves and len(halved.good) == len(sweep.good)
        detail += f"; halved-dt rises {', '.join(f'{b:.3g}' for _, b in pairs)} (each at most half of {', '.join(f'{a:.3g}' for a, _ in pairs)})"
    out.append(Criterion("energy monotonicity", ok, detail))
    drift = max(r.mass_drift for r in sweep.good)
    out.append(Criterion("mass conservation", drift < MASS_DRIFT_MAX, f"max drift {drift:.3g} (need < {MASS_DRIFT_MAX:g})"))
    return out


def lc1_refinement(cfg: ExperimentConfig, eps: float | None = None, levels: int = 3) -> RateFit:
    """Order of the charge-balance residual over one step on the prepared data, dt halved ``levels - 1`` times."""
    eps = cfg.eps_list[0] if eps is None else eps
    grid = cfg.space_grid()
    dt0 = kinetic_dt(cfg, eps)
    cs = build_correctors(cfg.kind, SpectralField(grid, cfg.initial_profile(grid)), dt0, dt0 / 4, 1)
    pg = _velocity_grid(cfg, cs, eps)
    s0 = vlasov.KineticState.initial(build_prepared_data(pg, eps, cs, cfg.get("sweep", "theta0"), cfg.law), eps, cfg.law)
    dts = [dt0 / 2**k for k in range(levels)]
    return fit_rate([(dt, vlasov.conservation_report(s0, vlasov.step(s0, dt)).lc1_residual) for dt in dts])


def evaluate_ep(res: EPResult) -> list[Criterion]:
    slopes = res.slopes()
    ok = all(np.isfinite(s) and s >= EP_SLOPE_MIN and abs(s - 1) <= EP_SLOPE_TOL for s in slopes)
    return [Criterion("Euler-Poisson cascade", ok,
                      f"slopes charge {slopes[0]:.3f}, momentum {slopes[1]:.3f}, poisson {slopes[2]:.3f} (need 1.0 +/- {EP_SLOPE_TOL})")]


def evaluate_zk(res: ZKResult) -> list[Criterion]:
    out = [
        Criterion("ZK cancellation identities", res.worst < ZK_TOL, f"max residual {res.worst:.3g} (need < {ZK_TOL:g})"),
        Criterion("ZK corrector round trip", res.round_trip < ROUND_TRIP_TOL, f"max residual {res.round_trip:.3g} (need < {ROUND_TRIP_TOL:g})"),
    ]
    if res.corruption_hits:
        hit = res.corruption_hits
        ok = hit["phi3"] == [12] and hit["u2_2"] == [5, 10, 12]
        out.append(Criterion("corruption localizes", ok, f"phi3 -> identities {hit['phi3']}, u2_2 -> identities {hit['u2_2']}"))
    return out


def evaluate_equilibrium(res: EquilibriumResult) -> list[Criterion]:
    ok = res.energy_drift < EQUILIBRIUM_DRIFT_MAX and res.residuals < 1e-8 and res.mass_drift < MASS_DRIFT_MAX
    return [Criterion("equilibrium regression", ok,
                      f"{res.steps} steps, energy drift {res.energy_drift:.3g}, max |f - f0| {res.max_change:.3g}, "
                      f"conservation residuals {res.residuals:.3g}, mass drift {res.mass_drift:.3g}")]


def evaluate_newton(audit) -> Criterion:
    worst_it = max(a[1] for a in audit)
    worst_r = max(a[2] for a in audit)
    ok = worst_it <= NEWTON_MAX_ITER and worst_r <= NEWTON_TOL
    return Criterion("Boltzmann Newton", ok, f"max {worst_it} iterations, residual {worst_r:.3g}")


# ----------------------------------------------------------------------------- outputs


def _write_rows(path: Path, header, rows) -> Path:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def _plot_sweep(sweep: SweepResult, out: Path) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    paths = []
    good = sweep.good
    fig, ax = plt.subplots(figsize=(5, 4))
    e = np.array([r.eps for r in good])
    h = np.array([r.max_h for r in good])
    ax.loglog(e, h, "o", label="max_t H")
    if len(good) >= 3:
        fit = sweep.fit()
        ax.loglog(e, np.exp(fit.intercept) * e**fit.slope, "-", label=f"fit p = {fit.slope:.3f}")
    ax.loglog(e, h[0] * np.sqrt(e / e[0]), ":", label="sqrt(eps)")
    ax.set_xlabel("eps")
    ax.set_ylabel("max_t H")
    ax.legend()
    fig.tight_layout()
    paths.append(out / "rate.svg")
    fig.savefig(paths[-1], format="svg")
    plt.close(fig)
    fig, ax = plt.subplots(figsize=(5, 4))
    for r in good:
        ax.plot(r.times, r.h_total, label=f"eps = {r.eps:g}")
    ax.set_xlabel("t")
    ax.set_ylabel("H")
    ax.legend()
    fig.tight_layout()
    paths.append(out / "entropy_traces.svg")
    fig.savefig(paths[-1], format="svg")
    plt.close(fig)
    return paths


def run_experiment(cfg: ExperimentConfig, out_dir: Path | None = None) -> tuple[object, list[Criterion]]:
    """Run the configured experiment, write outputs when ``out_dir`` is given, return (result, criteria)."""
    name = cfg.experiment
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
    if name in ("kdv_sweep", "kpii_sweep"):
        result = (run_kdv_sweep if name == "kdv_sweep" else run_kpii_sweep)(cfg, out_dir)
        criteria = evaluate_sweep(result)
        criteria.append(evaluate_newton(newton_audit(cfg)))
        if out_dir is not None:
            _write_sweep_outputs(result, out_dir)
    elif name == "ep_residual":
        result = run_ep_residual(cfg)
        criteria = evaluate_ep(result)
        if out_dir is not None:
            _write_rows(out_dir / "ep_residual.csv", ("eps", "charge", "momentum", "poisson", "charge_rho2", "momentum_rho2", "poisson_rho2"),
                        [(e, *a, *b) for e, a, b in zip(result.eps, result.residuals, result.residuals_rho2)])
    elif name == "zk_identities":
        result = run_zk_identities(cfg)
        criteria = evaluate_zk(result)
        if out_dir is not None:
            rows = [(i, float(t), k + 1, float(r)) for i, t in enumerate(result.times) for k, r in enumerate(result.residuals[i])]
            write_residual_csv(rows, out_dir / "zk_identities.csv")
    else:
        result = run_equilibrium_regression(cfg)
        criteria = evaluate_equilibrium(result)
    if out_dir is not None:
        write_report(out_dir / "report.txt", cfg, criteria)
    return result, criteria


def _write_sweep_outputs(sweep: SweepResult, out: Path) -> None:
    rows = []
    for r in sweep.results:
        if r.ok:
            rows.append((r.eps, r.dt, r.steps, r.max_h, r.max_h / np.sqrt(r.eps), r.final_temperature,
                         r.pairing_rho[0], r.pairing_J[0, 0], r.energy_rise, r.mass_drift, r.lemma[0], r.lemma[1], "ok"))
        else:
            rows.append((r.eps, r.dt, r.steps) + (float("nan"),) * 9 + (r.error,))
    _write_rows(out / "sweep_summary.csv",
                ("eps", "dt", "steps", "max_h", "max_h_over_sqrt_eps", "final_temperature", "pairing_rho_cos",
                 "pairing_J_cos", "energy_rise", "mass_drift", "lemma_lhs", "lemma_bound", "status"), rows)
    if len(sweep.good) >= 1:
        _plot_sweep(sweep, out)


def write_report(path: Path, cfg: ExperimentConfig, criteria: list[Criterion]) -> Path:
    lines = [f"experiment: {cfg.experiment}", ""]
    lines += [c.line() for c in criteria]
    lines += ["", f"overall: {'PASS' if all(c.passed for c in criteria) else 'FAIL'}", ""]
    Path(path).write_text("\n".join(lines))
    return Path(path)
