import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from longwave.spectral import (
    CompatibilityError,
    SpectralError,
    SpectralField,
    TorusGrid,
    antideriv,
    dealias_cutoff,
    deriv,
    forward,
    interp_periodic,
    inverse,
    product_dealiased,
    translate_batch,
)

G1 = TorusGrid.uniform(64)
G2 = TorusGrid(((32, 2 * np.pi), (16, 4 * np.pi)))


def smooth_random(grid, seed, kmax=6):
    """Random trigonometric polynomial well inside the dealiasing band."""
    rng = np.random.default_rng(seed)
    c = np.zeros(grid.spectral_shape, dtype=complex)
    idx = [slice(0, kmax)] * grid.ndim
    c[tuple(idx)] = rng.normal(size=c[tuple(idx)].shape) + 1j * rng.normal(size=c[tuple(idx)].shape)
    return SpectralField.from_coeffs(grid, c * grid.size / 10)


class TestTorusGrid:
    def test_spacing(self):
        g = TorusGrid(((8, 2.0), (10, 5.0)))
        assert g.spacing == (0.25, 0.5)
        assert g.shape == (8, 10)

    @pytest.mark.parametrize("n", [6, 9, 0])
    def test_rejects_bad_sizes(self, n):
        with pytest.raises(SpectralError):
            TorusGrid(((n, 1.0),))

    def test_rejects_bad_length(self):
        with pytest.raises(SpectralError):
            TorusGrid(((8, -1.0),))

    def test_hashable_for_caches(self):
        assert hash(TorusGrid.uniform(8)) == hash(TorusGrid.uniform(8))


class TestSpectralField:
    def test_round_trip(self):
        f = smooth_random(G2, 0)
        back = inverse(G2, forward(G2, f.values))
        assert np.max(np.abs(back - f.values)) <= 1e-12 * f.norm_inf()

    def test_mean_is_zeroth_coefficient(self):
        f = smooth_random(G2, 1) + 0.3
        assert f.mean() == pytest.approx(f.coeffs()[0, 0].real / G2.size, abs=1e-14)

    def test_shape_checked(self):
        with pytest.raises(SpectralError):
            SpectralField(G1, np.zeros(10))


class TestDeriv:
    def test_sin_to_cos(self):
        f = SpectralField.from_function(G1, np.sin)
        assert np.allclose(deriv(f, 0, 1).values, np.cos(G1.coords(0)), atol=1e-12)

    @pytest.mark.parametrize("order", [1, 2, 3])
    def test_constant(self, order):
        f = SpectralField(G1, np.full(G1.shape, 2.5))
        assert np.max(np.abs(deriv(f, 0, order).values)) < 1e-13

    def test_third_derivative_sign(self):
        # d^3/dx^3 cos(3x) = 27 sin(3x)
        f = SpectralField.from_function(G1, lambda x: np.cos(3 * x))
        assert np.allclose(deriv(f, 0, 3).values, 27 * np.sin(3 * G1.coords(0)), atol=27e-12)

    def test_second_axis_with_length(self):
        x, y = G2.mesh()
        f = SpectralField(G2, np.sin(y / 2))
        assert np.allclose(deriv(f, 1, 1).values, 0.5 * np.cos(y / 2), atol=1e-12)

    def test_nyquist_zeroed_for_odd_order(self):
        f = SpectralField(G1, (-1.0) ** np.arange(64))
        assert np.max(np.abs(deriv(f, 0, 1).values)) < 1e-12
        assert np.max(np.abs(deriv(f, 0, 2).values)) > 1.0

    def test_rejects_non_finite(self):
        v = np.zeros(G1.shape)
        v[3] = np.nan
        with pytest.raises(SpectralError, match="non-finite"):
            deriv(SpectralField(G1, v))

    def test_rejects_order(self):
        with pytest.raises(SpectralError):
            deriv(SpectralField.zeros(G1), 0, 4)


class TestAntideriv:
    def test_cos_to_sin(self):
        f = SpectralField.from_function(G1, np.cos)
        assert np.allclose(antideriv(f).values, np.sin(G1.coords(0)), atol=1e-12)

    def test_nonzero_mean_rejected(self):
        f = SpectralField.from_function(G1, lambda x: np.cos(x) + 0.1)
        with pytest.raises(CompatibilityError) as err:
            antideriv(f, 0)
        assert err.value.axis == 0

    def test_axis_named_in_2d(self):
        x, y = G2.mesh()
        f = SpectralField(G2, np.cos(x) * (1 + np.sin(y / 2)))  # zero mean along x only
        antideriv(f, 0)
        with pytest.raises(CompatibilityError, match="axis 1"):
            antideriv(f, 1)

    @pytest.mark.parametrize("seed", range(4))
    def test_inverts_derivative(self, seed):
        g = smooth_random(G2, seed)
        for axis in range(2):
            back = antideriv(deriv(g, axis, 1), axis)
            expected = g.values - np.mean(g.values, axis=axis, keepdims=True)
            assert np.max(np.abs(back.values - expected)) < 1e-10


class TestProduct:
    def test_identity(self):
        g = smooth_random(G1, 3, kmax=30)
        one = SpectralField(G1, np.ones(G1.shape))
        p = product_dealiased(one, g)
        c = g.coeffs() * G1.dealias_mask()
        assert np.allclose(p.values, inverse(G1, c), atol=1e-12)

    def test_trig_identity(self):
        f = SpectralField.from_function(G1, np.cos)
        p = product_dealiased(f, f)
        assert np.allclose(p.values, 0.5 + 0.5 * np.cos(2 * G1.coords(0)), atol=1e-13)

    def test_top_of_band(self):
        km = dealias_cutoff(64)
        f = SpectralField.from_function(G1, lambda x: np.cos(km * x))
        p = product_dealiased(f, f)
        assert np.allclose(p.values, 0.5, atol=1e-13)

    def test_symmetric_bitwise(self):
        f, g = smooth_random(G2, 4, 20), smooth_random(G2, 5, 20)
        assert np.array_equal(product_dealiased(f, g).values, product_dealiased(g, f).values)

    def test_grid_mismatch(self):
        with pytest.raises(SpectralError, match="mismatch"):
            product_dealiased(SpectralField.zeros(G1), SpectralField.zeros(TorusGrid.uniform(32)))


class TestInterp:
    def test_zero_shift(self):
        f = smooth_random(G1, 6)
        assert np.allclose(interp_periodic(f, [0.0]).values, f.values, atol=1e-14)

    def test_sin_quarter_period(self):
        # result(x) = sin(x + pi/2) = cos(x)
        f = SpectralField.from_function(G1, np.sin)
        out = interp_periodic(f, [-np.pi / 2])
        assert np.allclose(out.values, np.cos(G1.coords(0)), atol=1e-12)

    def test_full_period(self):
        f = smooth_random(G2, 7)
        out = interp_periodic(f, G2.lengths)
        assert np.max(np.abs(out.values - f.values)) < 1e-12 * f.norm_inf()

    def test_rejects_non_finite(self):
        with pytest.raises(SpectralError):
            interp_periodic(SpectralField.zeros(G1), [np.inf])

    def test_batch_matches_single(self):
        f = smooth_random(G1, 8)
        shifts = np.array([0.1, -0.7, 2.0])
        rows = np.repeat(f.values[:, None], 3, axis=1)
        out = translate_batch(rows, 0, 64, 2 * np.pi, shifts[None, :])
        for j, s in enumerate(shifts):
            assert np.allclose(out[:, j], interp_periodic(f, [s]).values, atol=1e-13)


class TestProperties:
    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1))
    def test_parseval(self, seed):
        f = smooth_random(G2, seed, kmax=8)
        c = f.coeffs()
        # Half-spectrum weights: interior columns of the last axis count twice.
        w = np.full(c.shape, 2.0)
        w[..., 0] = 1.0
        w[..., -1] = 1.0
        spec = np.sum(w * np.abs(c) ** 2) / G2.size
        assert spec == pytest.approx(np.sum(f.values**2), rel=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1), axis=st.sampled_from([0, 1]))
    def test_deriv_antideriv_identity(self, seed, axis):
        g = smooth_random(G2, seed)
        f = deriv(g, axis, 1)
        assert np.max(np.abs(deriv(antideriv(f, axis), axis, 1).values - f.values)) < 1e-10 * max(1.0, f.norm_inf())

    @settings(max_examples=30, deadline=None)
    @given(
        seed=st.integers(0, 2**31 - 1),
        s1=st.floats(-20, 20, allow_nan=False),
        s2=st.floats(-20, 20, allow_nan=False),
    )
    def test_shift_isometry_and_round_trip(self, seed, s1, s2):
        f = smooth_random(G2, seed)
        out = interp_periodic(f, [s1, s2])
        assert out.norm_l2() == pytest.approx(f.norm_l2(), rel=1e-12)
        back = interp_periodic(out, [-s1, -s2])
        assert np.max(np.abs(back.values - f.values)) < 1e-12 * max(1.0, f.norm_inf())
