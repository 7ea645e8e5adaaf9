"""Invariant engine: residuals, helicity, dual-field solves, densities."""

import json

import numpy as np
import pytest

from wring import fieldzoo as fz
from wring import gv
from wring.errors import DegenerateField, FluxObstruction
from wring.fieldcore import (
    Grid3,
    ScalarField,
    VectorField,
    cross,
    random_band_limited_scalar,
)

TWO_PI = 2.0 * np.pi


def cube(n):
    return Grid3((n, n, n), (TWO_PI, TWO_PI, TWO_PI))


@pytest.fixture(scope="module")
def clebsch64():
    return fz.gen_clebsch(cube(64)).with_velocity()


@pytest.fixture(scope="module")
def kupka64():
    return fz.gen_kupka_tube(cube(64))


class TestIntegrabilityResidual:
    def test_clebsch_and_kupka_integrable(self, clebsch64, kupka64):
        assert gv.integrability_residual(clebsch64) < 1e-10
        assert gv.integrability_residual(kupka64) < 1e-10

    def test_beltrami_far_from_integrable(self):
        b = fz.gen_beltrami_abc(cube(32))
        assert gv.integrability_residual(b) > 0.1

    def test_degenerate_rejected(self):
        g = cube(16)
        b = fz.FieldBundle(g, VectorField.zeros(g), VectorField.zeros(g))
        with pytest.raises(DegenerateField):
            gv.integrability_residual(b)


class TestFluxCheck:
    def test_curl_generated_fluxes_vanish(self, clebsch64):
        assert max(abs(f) for f in gv.flux_check(clebsch64)) < 1e-12

    def test_added_constant_shows_up_exactly(self):
        g = cube(16)
        b = fz.gen_clebsch(g)
        w = b.W.copy()
        w.data[2] += 0.25
        shifted = fz.FieldBundle(g, b.A, w)
        fx, fy, fzz = gv.flux_check(shifted)
        assert fzz == pytest.approx(0.25 * g.box[0] * g.box[1], rel=1e-12)

    def test_rings_fluxless(self):
        b = fz.hopf_rings(cube(48))
        assert max(abs(f) for f in gv.flux_check(b)) < 1e-12

    def test_flux_obstruction_blocks_helicity(self):
        g = cube(16)
        b = fz.gen_clebsch(g)
        w = b.W.copy()
        w.data[2] += 0.25
        with pytest.raises(FluxObstruction):
            gv.helicity(fz.FieldBundle(g, b.A, w))


class TestHelicity:
    def test_abc_closed_form(self):
        b = fz.gen_beltrami_abc(cube(32))
        target = 3.0 * TWO_PI**3
        assert abs(gv.helicity(b) - target) / target < 1e-8

    def test_clebsch_helicity_zero_vs_brute_force_oracle(self, clebsch64):
        # oracle: the analytic fields give U = (0, 0, f - mean(f)) and
        # W = (df/dy, -df/dx, 0); the integrand U.W vanishes pointwise, so
        # the independent quadrature at n=128 is exactly zero
        n = 128
        h = TWO_PI / n
        x = np.arange(n) * h
        f2d = 2.0 + np.sin(x)[:, None] * np.cos(x)[None, :]
        u = f2d - f2d.mean()
        integrand = u * 0.0  # U has only a z-component, W_z = 0
        oracle = integrand.sum() * h**2 * TWO_PI
        assert oracle == 0.0
        assert abs(gv.helicity(clebsch64) - oracle) < 1e-9

    def test_hopf_pair_matches_linking_target(self):
        b = fz.hopf_rings(cube(96))
        assert abs(gv.helicity(b) - 2.0) / 2.0 < 0.02


class TestSolveEta:
    def test_clebsch_matches_log_gradient(self, clebsch64):
        g = clebsch64.grid
        sol = gv.solve_eta(clebsch64, gv.EtaChoice.canonical())
        x, y, _ = g.mesh()
        f = 2.0 + np.sin(x) * np.cos(y)
        hx = -np.cos(x) * np.cos(y) / f
        hy = np.sin(x) * np.sin(y) / f
        assert np.max(np.abs(sol.H.x - np.broadcast_to(hx, g.shape))) < 1e-8
        assert np.max(np.abs(sol.H.y - np.broadcast_to(hy, g.shape))) < 1e-8
        assert np.max(np.abs(sol.H.z)) < 1e-10

    def test_identity_a_cross_h_equals_w(self, clebsch64, kupka64):
        for bundle, eps in ((clebsch64, 0.05), (kupka64, 0.05)):
            sol = gv.solve_eta(bundle, gv.EtaChoice.canonical(eps))
            axh = cross(bundle.A, sol.H)
            err = np.max(np.abs((axh.data - bundle.W.data) * sol.mask.data))
            assert err / bundle.W.maxnorm() < 1e-7

    def test_kupka_radial_profile(self, kupka64):
        g = kupka64.grid
        sol = gv.solve_eta(kupka64, gv.EtaChoice.canonical(0.05))
        r0 = kupka64.meta["params"]["r0"]
        chi, dchi = fz.default_kupka_profile(r0, kupka64.meta["params"]["power"])
        x, y, _ = g.mesh()
        dx, dy = x - np.pi, y - np.pi
        r = np.sqrt(dx**2 + dy**2)
        mask = sol.mask.data.astype(bool)
        wz = 2.0 * chi(r) + r * dchi(r)
        safe_r = np.where(r > 1e-12, r, 1.0)
        safe_chi = np.where(chi(r) > 1e-12, chi(r), 1.0)
        h_rad = -wz / (safe_r * safe_chi)
        exact_x = np.broadcast_to(h_rad * dx / safe_r, g.shape)
        scale = np.max(np.abs(sol.H.data))
        err = np.max(np.abs((sol.H.x - exact_x) * mask)) / scale
        assert err < 1e-6

    def test_irrotational_field_admits_zero_h(self):
        b = fz.gen_clebsch(cube(16), f="1 + 0*x")
        sol = gv.solve_eta(b, gv.EtaChoice.canonical())
        assert sol.H.maxabs() == 0.0
        assert gv.gv_invariant(b).value == 0.0


class TestGvInvariant:
    def test_first_integral_families_vanish(self, clebsch64):
        for variant in ("canonical", "velocity"):
            assert abs(gv.gv_invariant(clebsch64, gv.EtaChoice(variant)).value) < 1e-6

    def test_morse_vanishes(self):
        b = fz.gen_morse(cube(64)).with_velocity()
        for variant in ("canonical", "velocity"):
            assert abs(gv.gv_invariant(b, gv.EtaChoice(variant)).value) < 1e-6

    def test_kupka_eps_independent(self, kupka64):
        values = [
            gv.gv_invariant(kupka64, gv.EtaChoice.canonical(eps)).value
            for eps in (0.02, 0.05, 0.1, 0.2)
        ]
        assert all(abs(v) < 1e-6 for v in values)
        assert max(values) - min(values) < 1e-7

    def test_density_shape_and_mask(self, kupka64):
        res = gv.gv_invariant(kupka64, gv.EtaChoice.canonical(0.05))
        assert res.density.data.shape == kupka64.grid.shape
        assert 0.0 <= res.excluded_volume_fraction < 1.0
        outside = res.density.data[res.mask.data == 0.0]
        assert np.all(outside == 0.0)

    def test_richardson_report(self, kupka64):
        res = gv.gv_invariant(kupka64, gv.EtaChoice.canonical(0.1), richardson=True)
        assert res.richardson_value is not None
        assert abs(res.richardson_value) < 1e-6


class TestGaugeShift:
    def test_zero_shift_is_identity(self, clebsch64):
        sol = gv.solve_eta(clebsch64, gv.EtaChoice.canonical())
        shifted = gv.gauge_shift(sol.H, clebsch64, ScalarField.zeros(clebsch64.grid))
        assert np.array_equal(shifted.data, sol.H.data)

    def test_specific_gauge_field(self, clebsch64):
        g = clebsch64.grid
        sol = gv.solve_eta(clebsch64, gv.EtaChoice.canonical())
        base = gv.gv_of_field(sol.H)
        f = ScalarField.sample(g, lambda x, y, z: np.sin(x) * np.cos(z) + 0 * y)
        shifted = gv.gauge_shift(sol.H, clebsch64, f)
        assert abs(gv.gv_of_field(shifted) - base) < 1e-6

    def test_unit_shift(self, clebsch64):
        g = clebsch64.grid
        sol = gv.solve_eta(clebsch64, gv.EtaChoice.canonical())
        one = ScalarField.sample(g, lambda x, y, z: 1.0 + 0 * x)
        shifted = gv.gauge_shift(sol.H, clebsch64, one)
        assert np.allclose(shifted.data, sol.H.data + clebsch64.A.data)

    def test_random_band_limited_shifts(self, clebsch64):
        sol = gv.solve_eta(clebsch64, gv.EtaChoice.canonical())
        base = gv.gv_of_field(sol.H)
        for seed in range(5):
            f = random_band_limited_scalar(clebsch64.grid, 8, 500 + seed)
            drift = abs(gv.gv_of_field(gv.gauge_shift(sol.H, clebsch64, f)) - base)
            assert drift < 1e-6


class TestHelicalCompression:
    def test_vertical_normal_has_no_compression(self, clebsch64):
        dens = gv.helical_compression(clebsch64)
        assert np.max(np.abs(dens.data)) < 1e-10

    def test_kupka_axisymmetric_density_vanishes(self, kupka64):
        dens = gv.helical_compression(kupka64, eps=0.05)
        assert np.max(np.abs(dens.data)) < 1e-6

    def test_sheared_bundle_generally_nonzero(self):
        # two independent z shears tilt the leaf normal into a twisting
        # direction field; its compression density no longer vanishes
        b = fz.gen_clebsch(cube(32))
        dm = fz.DiffeoMap(
            (
                fz.Shear.from_names("z", "x", 0.3, 1),
                fz.Shear.from_names("z", "y", 0.25, 2),
            )
        )
        dens = gv.helical_compression(fz.apply_diffeo(b, dm))
        assert np.all(np.isfinite(dens.data))
        assert np.max(np.abs(dens.data)) > 1e-6  # diagnostic only, no target


class TestAnalyze:
    def test_clebsch_report(self, clebsch64):
        report = gv.analyze(clebsch64)
        assert report.integrable
        assert abs(report.gv) < 1e-6
        assert abs(report.helicity) < 1e-9
        assert report.deviations["gv"] == report.gv
        assert report.deviations["helicity"] == report.helicity
        doc = report.to_json_dict()
        json.dumps(doc)  # must be serializable as-is
        assert doc["schema"] == "wring-report/1"

    def test_beltrami_refused(self):
        report = gv.analyze(fz.gen_beltrami_abc(cube(32)))
        assert not report.integrable
        assert report.gv is None
        assert report.helicity == pytest.approx(3.0 * TWO_PI**3, rel=1e-8)

    def test_eta_agreement_on_high_coverage_bundle(self):
        b = fz.gen_clebsch(cube(64), f="2 + sin(2*pi*x/Lx + 1)*cos(2*pi*y/Ly + 1)").with_velocity()
        eps = 5e-4
        can = gv.gv_invariant(b, gv.EtaChoice.canonical(eps))
        vel = gv.gv_invariant(b, gv.EtaChoice.velocity(eps))
        assert 1.0 - can.excluded_volume_fraction > 0.99
        assert 1.0 - vel.excluded_volume_fraction > 0.99
        assert abs(can.value - vel.value) < 1e-5

    def test_eta_choice_validation(self):
        with pytest.raises(ValueError):
            gv.EtaChoice("magic")
        with pytest.raises(ValueError):
            gv.EtaChoice("canonical", eps=1.5)
