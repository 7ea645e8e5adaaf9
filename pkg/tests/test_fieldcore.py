"""Spectral calculus: analytic examples and operator identities."""

import numpy as np
import pytest

from wring.errors import InvalidGrid, NonFiniteData, NonZeroMeanVorticity, NotDivergenceFree
from wring.fieldcore import (
    Grid3,
    ScalarField,
    VectorField,
    cross,
    curl,
    div,
    dot,
    grad,
    integrate,
    inverse_curl,
    laplacian,
    magnitude2,
    random_band_limited_scalar,
    random_band_limited_vector,
    solve_poisson_zero_mean,
)

TWO_PI = 2.0 * np.pi


def cube(n, L=TWO_PI):
    return Grid3((n, n, n), (L, L, L))


def abc_velocity(grid, a=1.0, b=1.0, c=1.0):
    kappa = TWO_PI / grid.box[0]
    x, y, z = grid.mesh()
    return VectorField.from_components(
        grid,
        a * np.sin(kappa * z) + c * np.cos(kappa * y),
        b * np.sin(kappa * x) + a * np.cos(kappa * z),
        c * np.sin(kappa * y) + b * np.cos(kappa * x),
    )


class TestGrid3:
    def test_invariants(self):
        g = Grid3((16, 32, 8), (1.0, 2.0, 0.5))
        assert all(h > 0 for h in g.spacing)
        assert g.volume == pytest.approx(1.0 * 2.0 * 0.5)
        assert g.cell_volume * g.n[0] * g.n[1] * g.n[2] == pytest.approx(g.volume)

    @pytest.mark.parametrize("n", [(7, 8, 8), (8, 8, 6), (8, 9, 8)])
    def test_rejects_bad_counts(self, n):
        with pytest.raises(InvalidGrid):
            Grid3(n, (1.0, 1.0, 1.0))

    def test_rejects_bad_box(self):
        with pytest.raises(InvalidGrid):
            Grid3((8, 8, 8), (1.0, -2.0, 1.0))

    def test_non_finite_rejected(self):
        g = cube(8)
        data = np.zeros(g.shape)
        data[0, 0, 0] = np.nan
        with pytest.raises(NonFiniteData):
            ScalarField(g, data)


class TestGrad:
    def test_constant(self):
        g = cube(16)
        out = grad(ScalarField.sample(g, lambda x, y, z: 3.0 + 0 * x))
        assert out.maxabs() == pytest.approx(0.0, abs=1e-14)

    def test_single_mode_noncubic_box(self):
        g = Grid3((32, 32, 32), (3.0, TWO_PI, 1.0))
        kx = TWO_PI / 3.0
        s = ScalarField.sample(g, lambda x, y, z: np.sin(kx * x) + 0 * y + 0 * z)
        out = grad(s)
        x, _, _ = g.mesh()
        exact = kx * np.cos(kx * x)
        assert np.max(np.abs(out.x - exact)) < 1e-12
        assert np.max(np.abs(out.data[1:])) < 1e-12

    def test_two_mode(self):
        g = cube(32)
        s = ScalarField.sample(g, lambda x, y, z: np.sin(x) + np.cos(y) + 0 * z)
        out = grad(s)
        x, y, _ = g.mesh()
        assert np.max(np.abs(out.x - np.cos(x))) < 1e-12
        assert np.max(np.abs(out.y - (-np.sin(y)))) < 1e-12
        assert np.max(np.abs(out.z)) < 1e-13


class TestCurlDiv:
    def test_curl_of_gradient_vanishes(self):
        g = cube(32)
        s = random_band_limited_scalar(g, 6, seed=1)
        assert curl(grad(s)).maxabs() < 1e-11

    def test_abc_is_curl_eigenfield(self):
        g = cube(32)
        v = abc_velocity(g)
        w = curl(v)
        assert np.max(np.abs(w.data - v.data)) < 1e-11

    def test_kupka_tube_curl_matches_analytic(self):
        from wring.fieldzoo import default_kupka_profile

        g = cube(64)
        r0 = np.pi / 2
        chi, dchi = default_kupka_profile(r0, 16)
        x, y, _ = g.mesh()
        dx, dy = x - np.pi, y - np.pi
        r = np.sqrt(dx**2 + dy**2)
        v = VectorField.from_components(g, -dy * chi(r), dx * chi(r), 0.0)
        w = curl(v)
        exact = 2.0 * chi(r) + r * dchi(r)
        num = integrate(magnitude2(VectorField.from_components(g, w.x, w.y, w.z - exact)))
        den = integrate(ScalarField(g, np.broadcast_to(exact, g.shape) ** 2))
        assert np.sqrt(num / den) < 1e-6

    def test_div_of_curl_vanishes(self):
        g = cube(32)
        v = random_band_limited_vector(g, 6, seed=2)
        assert div(curl(v)).maxabs() < 1e-11

    def test_div_analytic(self):
        g = cube(32)
        x, y, z = g.mesh()
        vf = VectorField.from_components(g, np.sin(x) + 0 * y + 0 * z, np.sin(y), np.sin(z))
        out = div(vf)
        exact = np.cos(x) + np.cos(y) + np.cos(z)
        assert np.max(np.abs(out.data - exact)) < 1e-12

    def test_non_periodic_data_is_caller_error(self):
        # a sawtooth is not representable; the operator returns finite
        # nonsense rather than raising (periodicity is the caller's contract)
        g = cube(16)
        x, _, _ = g.mesh()
        vf = VectorField.from_components(g, np.broadcast_to(x, g.shape), 0.0, 0.0)
        out = div(vf)
        assert np.all(np.isfinite(out.data))


class TestInverseCurl:
    def test_zero_maps_to_zero(self):
        g = cube(16)
        assert inverse_curl(VectorField.zeros(g)).maxabs() == 0.0

    def test_abc_eigenfield_recovered(self):
        g = cube(32)
        v = abc_velocity(g)
        u = inverse_curl(v)
        rel = np.max(np.abs(u.data - v.data)) / v.maxabs()
        assert rel < 1e-10

    def test_round_trip_on_divfree(self):
        g = cube(32)
        v = random_band_limited_vector(g, 7, seed=5, div_free=True)
        u = inverse_curl(curl(v))
        rel = np.sqrt(integrate(magnitude2(VectorField(g, u.data - v.data))) / integrate(magnitude2(v)))
        assert rel < 1e-10

    def test_rejects_mean_flow(self):
        g = cube(16)
        v = random_band_limited_vector(g, 4, seed=6, div_free=True)
        v.data[2] += 0.5
        with pytest.raises(NonZeroMeanVorticity):
            inverse_curl(v)

    def test_rejects_divergent_field(self):
        g = cube(16)
        s = random_band_limited_scalar(g, 4, seed=7)
        with pytest.raises(NotDivergenceFree):
            inverse_curl(grad(s))


class TestIntegrate:
    def test_constant(self):
        g = cube(16)
        one = ScalarField.sample(g, lambda x, y, z: 1.0 + 0 * x)
        assert integrate(one) == pytest.approx(TWO_PI**3)

    def test_odd_mode_integrates_to_zero(self):
        g = cube(16)
        s = ScalarField.sample(g, lambda x, y, z: np.sin(x) + 0 * y + 0 * z)
        assert abs(integrate(s)) < 1e-12

    def test_abc_energy_closed_form(self):
        g = cube(32)
        v = abc_velocity(g)
        value = integrate(magnitude2(v))
        assert abs(value - 3.0 * TWO_PI**3) / (3.0 * TWO_PI**3) < 1e-9


class TestOperatorProperties:
    def test_integration_by_parts(self):
        g = cube(32)
        v = random_band_limited_vector(g, 5, seed=11)
        for seed in (12, 13):
            s = random_band_limited_scalar(g, 5, seed=seed)
            lhs = integrate(ScalarField(g, div(v).data * s.data))
            rhs = -integrate(dot(v, grad(s)))
            scale = max(abs(lhs), abs(rhs), 1.0)
            assert abs(lhs - rhs) / scale < 1e-10

    def test_parseval(self):
        g = cube(32)
        s = random_band_limited_scalar(g, 9, seed=21)
        phys = integrate(ScalarField(g, s.data**2))
        spec = g.rfft(s.data) / (g.n[0] * g.n[1] * g.n[2])
        weights = np.full(g.n[2] // 2 + 1, 2.0)
        weights[0] = 1.0
        weights[-1] = 1.0
        spectral = float(np.sum(np.abs(spec) ** 2 * weights[None, None, :])) * g.volume
        assert abs(phys - spectral) / abs(phys) < 1e-12

    def test_poisson_round_trip(self):
        g = cube(32)
        s = random_band_limited_scalar(g, 6, seed=31)
        u = solve_poisson_zero_mean(s)
        resid = laplacian(u).data - (s.data - s.data.mean())
        assert np.max(np.abs(resid)) < 1e-11
        assert abs(u.data.mean()) < 1e-14

    def test_cross_and_dot_are_pointwise(self):
        g = cube(8)
        a = random_band_limited_vector(g, 2, seed=41)
        b = random_band_limited_vector(g, 2, seed=42)
        c = cross(a, b)
        assert np.max(np.abs(np.einsum("i...,i...->...", a.data, c.data))) < 1e-13
        assert np.max(np.abs(np.einsum("i...,i...->...", b.data, c.data))) < 1e-13
        assert dot(a, a).data == pytest.approx(np.sum(a.data**2, axis=0))
