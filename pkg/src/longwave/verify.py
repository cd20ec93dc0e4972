"""Quick property suites runnable from the command line (``longwave verify <suite>``).

Each suite is a list of named checks returning ``(passed, detail)``.  They are
fast spot checks of the invariants the test-suite covers in depth.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from . import vlasov
from .correctors import build_kdv, defining_residuals
from .dispersive import DispersiveProblem, integrate, kdv_invariants
from .entropy import hellinger_scalar, llogl_scalar
from .phasespace import DistributionField, PhaseGrid, maxwellian, moments
from .poisson import PoissonProblem, residual, solve_boltzmann, solve_linearized
from .spectral import SpectralField, TorusGrid, antideriv, deriv, forward, interp_periodic, inverse, product_dealiased

Check = Callable[[], tuple[bool, str]]

_G = TorusGrid.uniform(64)
_X = _G.coords(0)


def _smooth(seed: int) -> SpectralField:
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(2, 6))
    k = np.arange(1, 7)[:, None]
    return SpectralField(_G, (a[0][:, None] * np.cos(k * _X) + a[1][:, None] * np.sin(k * _X)).sum(0))


def _spectral() -> dict[str, Check]:
    def parseval():
        f = _smooth(1)
        c = forward(_G, f.values)
        err = np.max(np.abs(inverse(_G, c) - f.values)) / f.norm_inf()
        return err < 1e-12, f"round trip {err:.2e}"

    def round_trip():
        f = _smooth(2)
        err = (deriv(antideriv(deriv(f))) - deriv(f)).norm_inf()
        return err < 1e-10, f"deriv(antideriv) defect {err:.2e}"

    def symmetric_product():
        f, g = _smooth(3), _smooth(4)
        same = np.array_equal(product_dealiased(f, g).values, product_dealiased(g, f).values)
        return same, "bitwise symmetric" if same else "asymmetric"

    def isometry():
        f = _smooth(5)
        err = abs(interp_periodic(f, [0.37]).norm_l2() - f.norm_l2()) / f.norm_l2()
        return err < 1e-12, f"L2 change {err:.2e}"

    return {"parseval": parseval, "deriv-antideriv": round_trip, "product symmetry": symmetric_product, "shift isometry": isometry}


def _poisson() -> dict[str, Check]:
    def single_mode():
        eps = 0.1
        phi = solve_linearized(PoissonProblem("linearized", eps, SpectralField(_G, 1 + eps * np.cos(_X))))
        err = np.max(np.abs(phi.values - np.cos(_X) / 1.1))
        return err < 1e-12, f"amplitude error {err:.2e}"

    def boltzmann_residual():
        p = PoissonProblem("boltzmann", 0.05, SpectralField(_G, 1 + 0.2 * np.cos(_X)))
        r = residual(p, solve_boltzmann(p))
        return r < 1e-12 * 1.2, f"residual {r:.2e}"

    def monotone():
        rho = 1 + 0.1 * _smooth(6).values / _smooth(6).norm_inf()
        a = solve_boltzmann(PoissonProblem("boltzmann", 0.1, SpectralField(_G, rho)))
        b = solve_boltzmann(PoissonProblem("boltzmann", 0.1, SpectralField(_G, rho + 0.05)))
        return bool(np.all(b.values > a.values)), "phi increases with rho"

    return {"linearized single mode": single_mode, "boltzmann residual": boltzmann_residual, "monotonicity": monotone}


def _dispersive() -> dict[str, Check]:
    def invariants():
        tr = integrate(DispersiveProblem("kdv", SpectralField(_G, 0.5 * np.cos(_X))), 1.0, 0.005, 200)
        a, b = kdv_invariants(tr.field(0)), kdv_invariants(tr.field(len(tr) - 1))
        drift = abs(b["l2"] - a["l2"]) / a["l2"]
        return drift < 1e-8 and abs(b["mass"] - a["mass"]) < 1e-12, f"L2 drift {drift:.2e}"

    def residual_check():
        tr = integrate(DispersiveProblem("kdv", SpectralField(_G, 0.5 * np.cos(_X))), 0.5, 0.005, 50)
        r = max(tr.pde_residual(i) for i in range(len(tr)))
        return r < 1e-8, f"pde residual {r:.2e}"

    return {"kdv invariants": invariants, "kdv residual": residual_check}


def _correctors() -> dict[str, Check]:
    def round_trip():
        tr = integrate(DispersiveProblem("kdv", SpectralField(_G, 0.5 * np.cos(_X))), 0.5, 0.005, 25)
        r = max(defining_residuals(build_kdv(tr)).values())
        return r < 1e-10, f"max residual {r:.2e}"

    return {"kdv round trip": round_trip}


def _phasespace() -> dict[str, Check]:
    def maxwellian_moments():
        pg = PhaseGrid.around(_G, 128, [(0.0, 0.0)], 1.0)
        m = moments(DistributionField(pg, maxwellian(pg, 1.0, [0.0], 0.5)))
        err = max(np.max(np.abs(m.rho.values - 1)), np.max(np.abs(m.S[0].values - 0.5)))
        return err < 1e-10, f"moment error {err:.2e}"

    return {"maxwellian moments": maxwellian_moments}


def _vlasov() -> dict[str, Check]:
    def equilibrium():
        pg = PhaseGrid.around(TorusGrid.uniform(16), 64, [(0.0, 0.0)], 1.0)
        s = vlasov.KineticState.initial(DistributionField(pg, maxwellian(pg, 1.0, [0.0], 1.0)), 0.1)
        e0 = vlasov.energy(s)
        s = vlasov.run(s, 1.0, 0.01).state
        drift = abs(vlasov.energy(s) - e0) / e0
        return drift < 1e-8, f"energy drift {drift:.2e} over 100 steps"

    def mass():
        g = TorusGrid.uniform(32)
        x = g.coords(0)
        pg = PhaseGrid.around(g, 128, [(-0.5, 0.5)], 1.0)
        s = vlasov.KineticState.initial(DistributionField(pg, maxwellian(pg, 1 + 0.05 * np.cos(x), [0.5 * np.cos(x)], 0.3)), 0.1)
        s1 = vlasov.step(s, 0.01)
        drift = abs(s1.f.mass() - s.mass0) / s.mass0
        return drift < 1e-10, f"mass drift {drift:.2e}"

    return {"equilibrium": equilibrium, "mass per step": mass}


def _entropy() -> dict[str, Check]:
    def inequality():
        rng = np.random.default_rng(0)
        x, y = np.exp(rng.uniform(-5, 5, (2, 10_000)))
        ok = bool(np.all(hellinger_scalar(x, y) <= llogl_scalar(x, y) + 1e-12 * (x + y)))
        return ok, "squared form on 10^4 random pairs"

    return {"scalar inequality": inequality}


SUITES: dict[str, Callable[[], dict[str, Check]]] = {
    "spectral": _spectral,
    "poisson": _poisson,
    "dispersive": _dispersive,
    "correctors": _correctors,
    "phasespace": _phasespace,
    "vlasov": _vlasov,
    "entropy": _entropy,
}


def run_suite(name: str) -> list[tuple[str, bool, str]]:
    names = list(SUITES) if name == "all" else [name]
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise KeyError(f"unknown suite {unknown[0]!r}; choose from all, {', '.join(SUITES)}")
    out = []
    for n in names:
        for label, check in SUITES[n]().items():
            try:
                ok, detail = check()
            except Exception as exc:  # a crashing check is a failed check
                ok, detail = False, f"{type(exc).__name__}: {exc}"
            out.append((f"{n}: {label}", bool(ok), detail))
    return out
