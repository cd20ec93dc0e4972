"""Acceptance criteria, one test per criterion, each printing a single pass/fail line."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import record
from longwave import harness
from longwave.correctors import build_kdv, build_kpii, defining_residuals
from longwave.dispersive import DispersiveProblem, integrate, kdv_invariants
from longwave.entropy import hellinger_scalar, llogl_scalar, llogl_term
from longwave.harness import ExperimentConfig
from longwave.poisson import PoissonProblem, solve_boltzmann, solve_linearized
from longwave.spectral import SpectralField, TorusGrid


def kdv_problem(amp, n=64):
    g = TorusGrid.uniform(n)
    return DispersiveProblem("kdv", SpectralField(g, amp * np.cos(g.coords(0))))


def named(criteria, name):
    return next(c for c in criteria if c.name == name)


@pytest.fixture(scope="module")
def sweep_criteria(kdv_sweep, kdv_sweep_halved):
    return harness.evaluate_sweep(kdv_sweep, kdv_sweep_halved)


def test_c01_sqrt_eps_entropy_scaling(kdv_sweep, sweep_criteria):
    assert all(r.ok for r in kdv_sweep.results)
    c = named(sweep_criteria, "sqrt(eps) entropy scaling")
    record("C1 sqrt(eps) entropy scaling", c.passed, c.detail)


def test_c02_cold_ions_limit(sweep_criteria):
    c = named(sweep_criteria, "cold-ions limit")
    record("C2 cold-ions limit", c.passed, c.detail)


def test_c03_weak_convergence(sweep_criteria):
    c = named(sweep_criteria, "weak convergence")
    record("C3 weak convergence", c.passed, c.detail)


def test_c04_energy_monotonicity(sweep_criteria):
    c = named(sweep_criteria, "energy monotonicity")
    record("C4 energy monotonicity", c.passed, c.detail)


def test_c05_conservation_laws(kdv_sweep):
    drift = max(r.mass_drift for r in kdv_sweep.good)
    lc1 = harness.lc1_refinement(kdv_sweep.config)
    ok = drift < harness.MASS_DRIFT_MAX and lc1.slope >= 1.0
    record("C5 conservation laws", ok,
           f"max mass drift {drift:.3g} (need < {harness.MASS_DRIFT_MAX:g}), LC1 order {lc1.slope:.2f} over 3 dt levels (need >= 1)")


def test_c06_kdv_solver():
    tr = integrate(kdv_problem(1e-4), 10.0, 0.01, 100)
    phase = max(abs(np.angle(tr.field(i).coeffs()[1] * np.exp(-0.5j * t))) for i, t in enumerate(tr.times))
    tr = integrate(kdv_problem(0.5, 256), 10.0, 2e-3, 500)
    inv = [kdv_invariants(tr.field(i)) for i in range(len(tr))]
    mass = max(abs(q["mass"] - inv[0]["mass"]) for q in inv)
    l2 = max(abs(q["l2"] - inv[0]["l2"]) for q in inv) / inv[0]["l2"]
    p = kdv_problem(0.5)
    ref = integrate(p, 1.0, 1e-4, 10_000).phi1[-1]
    dts = [0.02, 0.01, 0.005, 0.0025]
    errs = [np.max(np.abs(integrate(p, 1.0, dt, 10_000).phi1[-1] - ref)) for dt in dts]
    order = harness.fit_rate(zip(dts, errs)).slope
    ok = phase < 1e-6 and mass < 1e-12 and l2 < 1e-8 and abs(order - 4) <= 0.2
    record("C6 KdV solver", ok,
           f"phase error {phase:.2g} (need < 1e-6), mass change {mass:.2g}, L2 drift {l2:.2g} over t=10 (need < 1e-8), "
           f"RK order {order:.3f} (need 4 +/- 0.2)")


def test_c07_corrector_identities():
    g1 = TorusGrid.uniform(64)
    x = g1.coords(0)
    kdv = max(defining_residuals(build_kdv(integrate(DispersiveProblem(
        "kdv", SpectralField(g1, 0.5 * np.cos(x) + 0.1 * np.sin(2 * x))), 1.0, 0.002, 50))).values())
    g2 = TorusGrid.uniform((64, 32))
    x1, x2 = g2.mesh()
    kpii = max(defining_residuals(build_kpii(integrate(DispersiveProblem(
        "kpii", SpectralField(g2, 0.3 * np.cos(x1) * (1 + 0.5 * np.cos(x2)))), 0.5, 0.005, 20))).values())
    zk_cfg = ExperimentConfig.default("zk_identities")
    zk = harness.evaluate_zk(harness.run_zk_identities(zk_cfg))
    ok = kdv < harness.ROUND_TRIP_TOL and kpii < harness.ROUND_TRIP_TOL and all(c.passed for c in zk)
    record("C7 corrector identities", ok,
           f"kdv round trip {kdv:.2g}, kpii round trip {kpii:.2g}; " + "; ".join(f"{c.name}: {c.detail}" for c in zk))


def test_c08_euler_poisson_cascade():
    c = harness.evaluate_ep(harness.run_ep_residual(ExperimentConfig.default("ep_residual")))[0]
    record("C8 Euler-Poisson cascade", c.passed, c.detail)


def test_c09_poisson_solvers():
    audits = {name: harness.newton_audit(ExperimentConfig.default(name)) for name in harness.shipped_configs()}
    worst_it = max(a[1] for audit in audits.values() for a in audit)
    worst_r = max(a[2] for audit in audits.values() for a in audit)
    g = TorusGrid.uniform(64)
    eps, a = 0.1, 1e-4
    rho = SpectralField(g, 1 + eps * a * np.cos(g.coords(0)))
    diff = np.max(np.abs(solve_boltzmann(PoissonProblem("boltzmann", eps, rho)).values
                         - solve_linearized(PoissonProblem("linearized", eps, rho)).values))
    ok = worst_it <= harness.NEWTON_MAX_ITER and worst_r <= harness.NEWTON_TOL and diff < 1e-7
    record("C9 Poisson solvers", ok,
           f"Newton on {len(audits)} shipped configs: max {worst_it} iterations, residual {worst_r:.2g}; "
           f"Boltzmann vs linearized at a=1e-4: {diff:.2g} (need < 1e-7)")


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 1.0))
def _llogl_nonnegative(seed, eps):
    g = TorusGrid.uniform(32)
    x = g.coords(0)
    a, b = np.random.default_rng(seed).normal(scale=2.0, size=(2, 3))
    phi = SpectralField(g, a[0] * np.cos(x) + a[1] * np.sin(2 * x) + a[2])
    tgt = SpectralField(g, b[0] * np.cos(3 * x) + b[1] * np.sin(x) + b[2])
    assert llogl_term(phi, tgt, eps) >= 0.0


def test_c10_inequality_and_lemma_tech(kdv_sweep):
    rng = np.random.default_rng(2024)
    x, y = np.exp(rng.uniform(-5, 5, (2, 10_000)))
    squared = bool(np.all(hellinger_scalar(x, y) <= llogl_scalar(x, y) + 1e-12 * (x + y)))
    _llogl_nonnegative()
    growth = kdv_sweep.lemma_growth()
    below = all(r.lemma[0] <= r.lemma[1] for r in kdv_sweep.good)
    ok = squared and growth <= harness.SQRT_WINDOW and below
    record("C10 inequality and lemma-tech", ok,
           f"squared form on 10^4 pairs: {squared}; llogl_term >= 0 on 200 random fields; "
           f"max lhs/sqrt(eps) is {growth:.2f}x its largest-eps value (need <= {harness.SQRT_WINDOW}; "
           f"max/min spread {kdv_sweep.lemma_spread():.2f}); lhs <= bound: {below}")


@pytest.mark.slow
def test_c11_kpii_stretch():
    cfg = ExperimentConfig.default("kpii_sweep")
    sweep = harness.run_kpii_sweep(cfg)
    c = named(harness.evaluate_sweep(sweep), "KP-II entropy decreases with eps")
    record("C11 KP-II stretch", c.passed and all(r.ok for r in sweep.results), c.detail)
