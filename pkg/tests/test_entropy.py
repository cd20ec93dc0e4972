import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from longwave.correctors import CorrectorError, CorrectorSet
from longwave.entropy import (
    EntropyError,
    EntropyReport,
    cold_ions_temperature,
    hellinger_scalar,
    hellinger_term,
    lemma_tech_check,
    llogl_scalar,
    llogl_term,
    relative_entropy,
    weak_moment_pairing,
    write_entropy_csv,
)
from longwave.phasespace import DistributionField, PhaseGrid, maxwellian
from longwave.poisson import PoissonProblem, solve_boltzmann
from longwave.spectral import SpectralField, TorusGrid
from longwave.vlasov import KineticState, default_tests, energy_parts, step

G = TorusGrid.uniform(64)
X = G.coords(0)


def field(values, grid=G):
    return SpectralField(grid, np.broadcast_to(values, grid.shape).copy())


def state(density=1.0, mean=0.0, theta=1.0, eps=0.1, law="linearized", n_v=256):
    pg = PhaseGrid.around(G, n_v, [(-0.5, 0.5)], 1.0)
    return KineticState.initial(DistributionField(pg, maxwellian(pg, density, [mean], theta)), eps, law)


class TestScalarInequality:
    def test_worked_values(self):
        assert hellinger_scalar(4.0, 1.0) == 1.0
        assert llogl_scalar(4.0, 1.0) == pytest.approx(4 * np.log(4) - 3)
        assert llogl_scalar(4.0, 1.0) == pytest.approx(2.545, abs=1e-3)

    def test_random_pairs(self):
        rng = np.random.default_rng(7)
        x, y = np.exp(rng.uniform(-5, 5, (2, 10_000)))
        assert np.all(hellinger_scalar(x, y) <= llogl_scalar(x, y) + 1e-12 * (x + y))
        assert np.all(llogl_scalar(x, y) >= -1e-12 * (x + y))


class TestLLogL:
    def test_identical_fields(self):
        phi = field(0.7 * np.cos(X))
        assert llogl_term(phi, phi, 0.1) == 0.0

    @pytest.mark.parametrize("eps", [0.1, 0.5])
    def test_constant_taylor(self, eps):
        c, d = 0.4, 1e-3
        val = llogl_term(field(c + d), field(c), eps)
        leading = 2 * np.pi * np.exp(eps * c) * d**2 / 2
        assert val == pytest.approx(leading, rel=2 * eps * d)

    def test_small_difference_no_cancellation(self):
        val = llogl_term(field(1e-9), field(0.0), 0.01)
        assert val == pytest.approx(2 * np.pi * 0.5e-18, rel=1e-6)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0.01, 1.0))
    def test_dominates_hellinger(self, seed, eps):
        rng = np.random.default_rng(seed)
        a, b = rng.normal(size=(2, 4))
        phi = field(a[0] * np.cos(X) + a[1] * np.sin(2 * X) + a[2])
        tgt = field(b[0] * np.cos(X) + b[1] * np.sin(3 * X) + b[3])
        ll = llogl_term(phi, tgt, eps)
        assert ll >= -1e-12
        assert hellinger_term(phi, tgt, eps) <= ll * (1 + 1e-12) + 1e-14

    def test_overflow_guard(self):
        with pytest.raises(EntropyError):
            llogl_term(field(400.0), field(0.0), 0.1)

    def test_grid_mismatch(self):
        with pytest.raises(EntropyError):
            llogl_term(field(0.0), SpectralField.zeros(TorusGrid.uniform(32)), 0.1)


class TestRelativeEntropy:
    @pytest.mark.parametrize("theta", [0.3, 1.0])
    def test_unmodulated(self, theta):
        s = state(theta=theta)
        rep = relative_entropy(s, CorrectorSet.zeros("kdv", G))
        assert rep.h_total == pytest.approx(0.5 * theta * s.f.mass(), rel=1e-10)
        assert rep.temperature == pytest.approx(theta * s.f.mass(), rel=1e-10)

    @pytest.mark.parametrize("law", ["linearized", "boltzmann"])
    def test_zero_correctors_match_energy(self, law):
        s = state(density=1 + 0.05 * np.cos(X), mean=0.3 * np.sin(X), theta=0.5, law=law)
        rep = relative_entropy(s, CorrectorSet.zeros("kdv", G))
        parts = energy_parts(s)
        assert rep.h_kinetic == pytest.approx(parts["kinetic"], rel=1e-12)
        assert rep.h_grad == pytest.approx(parts["grad"], rel=1e-10, abs=1e-14)
        assert rep.h_field == pytest.approx(parts["field"], rel=1e-8, abs=1e-14)

    def test_parts_nonnegative_and_sum(self):
        s = step(state(density=1 + 0.05 * np.cos(X), mean=0.3 * np.sin(X), theta=0.5), 0.01)
        fields = {n: np.zeros((1, 64)) for n in ("phi1", "dphi1_dt", "u1", "u2", "phi2", "u2_minus_phi2")}
        fields["phi1"] = fields["u1"] = (0.2 * np.cos(X))[None]
        cs = CorrectorSet("kdv", G, np.array([0.0]), fields)
        rep = relative_entropy(s, cs)
        assert min(rep.h_kinetic, rep.h_grad, rep.h_field) >= -1e-12
        assert rep.h_total == rep.h_kinetic + rep.h_grad + rep.h_field

    def test_velocity_component_mismatch(self):
        cs = CorrectorSet.zeros("kpii", G)
        with pytest.raises(CorrectorError):
            relative_entropy(state(), cs)

    def test_grid_mismatch(self):
        with pytest.raises(EntropyError):
            relative_entropy(state(), CorrectorSet.zeros("kdv", TorusGrid.uniform(32)))

    def test_csv(self, tmp_path):
        reps = [EntropyReport(0.0, 1, 2, 3, 6, 2), EntropyReport(0.1, 1, 2, 3, 6, 2)]
        rows = write_entropy_csv(reps, tmp_path / "h.csv").read_text().splitlines()
        assert rows[0] == "t,h_kinetic,h_grad,h_field,h_total,temperature"
        assert len(rows) == 3


class TestColdIons:
    def test_narrow_gaussian(self):
        sigma2 = 0.01
        u = 0.2 * np.cos(X)
        s = state(mean=u, theta=sigma2)
        assert cold_ions_temperature(s.f, [u]) == pytest.approx(sigma2 * s.f.mass(), rel=1e-8)

    def test_zero_mean_is_second_moment(self):
        s = state(theta=0.7)
        v = s.grid.v(0)
        full = float(np.sum(s.f.values * v * v)) * s.grid.cell_volume
        assert cold_ions_temperature(s.f, [np.zeros(64)]) == pytest.approx(full, rel=1e-14)

    def test_nonnegative_and_count(self):
        s = state()
        assert cold_ions_temperature(s.f, [np.full(64, 5.0)]) >= 0
        with pytest.raises(EntropyError):
            cold_ions_temperature(s.f, [np.zeros(64)] * 2)


class TestLemmaTech:
    def test_zero_potential(self):
        lhs, _ = lemma_tech_check(field(0.0), field(0.5 * np.cos(X) + 0.1 * np.sin(2 * X)), 0.1, 1.0)
        assert lhs < 1e-13

    def test_constant_phi1(self):
        lhs, bound = lemma_tech_check(field(0.4 * np.sin(X)), field(0.3), 0.1, 1.0)
        assert lhs == 0.0 and bound == 0.0

    @pytest.mark.parametrize("eps", [0.1, 0.05, 0.025])
    def test_bound_on_boltzmann_states(self, eps):
        rho = field(1 + eps * (0.5 * np.cos(X) + 0.2 * np.sin(2 * X)))
        phi = solve_boltzmann(PoissonProblem("boltzmann", eps, rho))
        phi1 = field(0.5 * np.cos(X) + 0.2 * np.sin(2 * X))
        pg = PhaseGrid.around(G, 64, [(0, 0)], 1.0)
        f = DistributionField(pg, maxwellian(pg, rho.values, [0.0], 1e-2))
        s = KineticState(0.0, f, phi, eps, "boltzmann", f.mass())
        energy_bound = sum(energy_parts(s).values())
        lhs, bound = lemma_tech_check(phi, phi1, eps, energy_bound)
        assert 0 < lhs <= bound


class TestPairing:
    def test_equilibrium(self):
        s = state()
        tab = weak_moment_pairing(s, CorrectorSet.zeros("kdv", G), default_tests(G))
        assert np.max(np.abs(tab.rho)) < 1e-13
        assert np.max(np.abs(tab.J)) < 1e-13

    def test_mass_identity(self):
        s = state(density=1.1 + 0.2 * np.cos(X))
        tab = weak_moment_pairing(s, CorrectorSet.zeros("kdv", G), [field(1.0)])
        assert tab.rho[0] == pytest.approx(s.f.mass() - 2 * np.pi, rel=1e-12)

    def test_current_against_phi1(self):
        phi1 = 0.3 * np.cos(X)
        s = state(mean=phi1, theta=0.01)
        fields = {n: np.zeros((1, 64)) for n in ("phi1", "dphi1_dt", "u1", "u2", "phi2", "u2_minus_phi2")}
        fields["phi1"] = phi1[None]
        tab = weak_moment_pairing(s, CorrectorSet("kdv", G, np.array([0.0]), fields), default_tests(G))
        assert np.max(np.abs(tab.J)) < 1e-12
