"""Constitutive-law tests: closed-form limits, finite-difference oracles,
and direct evaluations frozen from the calibrated parameter set."""

import math

import numpy as np
import pytest

from smawire import constitutive as law
from smawire.errors import DomainError
from smawire.params import bundled_params

P = bundled_params()


class TestStress:
    def test_zero_strain_austenite(self):
        assert law.stress(0.0, 0.0, P) == 0.0

    def test_transformation_strain_absorbed(self):
        assert law.stress(P.eps_T, 1.0, P) == pytest.approx(0.0, abs=1e-6)

    def test_pure_austenite_modulus(self):
        # Closed-form limit: stress(eps, 0) = E_A * eps.
        assert law.stress(0.01, 0.0, P) == pytest.approx(5.0e8, rel=1e-12)

    def test_pure_martensite_modulus(self):
        for eps in (0.0, 0.02, 0.05):
            assert law.stress(eps, 1.0, P) == pytest.approx(
                P.E_M * (eps - P.eps_T), rel=1e-12, abs=1e-3)

    def test_negative_allowed(self):
        assert law.stress(0.0, 0.5, P) < 0.0

    def test_domain_error(self):
        with pytest.raises(DomainError):
            law.stress(0.01, 1.1, P)
        with pytest.raises(DomainError):
            law.stress(0.01, -0.01, P)

    def test_roundoff_clamp(self):
        # Within 1e-9 of the bounds is accepted and clamped.
        assert law.stress(0.01, 1.0 + 5e-10, P) == law.stress(0.01, 1.0, P)


class TestStressPartials:
    def test_endpoint_moduli(self):
        d_eps, _ = law.stress_partials(0.013, 0.0, P)
        assert d_eps == pytest.approx(P.E_A, rel=1e-12)
        d_eps, _ = law.stress_partials(0.04, 1.0, P)
        assert d_eps == pytest.approx(P.E_M, rel=1e-12)

    def test_finite_difference_oracle(self):
        # Central differences of stress() at step 1e-8 are the oracle.
        rng = np.random.default_rng(1234)
        for _ in range(100):
            eps = rng.uniform(0.0, 0.05)
            x = rng.uniform(0.01, 0.99)
            d_eps, d_x = law.stress_partials(eps, x, P)
            h = 1e-8
            fd_eps = (law.stress(eps + h, x, P) - law.stress(eps - h, x, P)) / (2 * h)
            fd_x = (law.stress(eps, x + h, P) - law.stress(eps, x - h, P)) / (2 * h)
            assert d_eps == pytest.approx(fd_eps, rel=1e-6)
            assert d_x == pytest.approx(fd_x, rel=1e-6)

    def test_strain_derivative_positive(self):
        xs = np.linspace(0.0, 1.0, 21)
        d_eps, _ = law.stress_partials(0.02, xs, P)
        assert np.all(d_eps > 0.0)


class TestForceLength:
    def test_zero(self):
        f, l = law.force_length(0.0, 0.0, P)
        assert f == 0.0 and l == P.l0

    def test_force_from_stress(self):
        # pi * (37.5e-6)^2 * 2e8
        f, _ = law.force_length(0.0, 2e8, P)
        assert f == pytest.approx(0.88357, rel=1e-4)

    def test_length_linear(self):
        _, l = law.force_length(0.045, 0.0, P)
        assert l == pytest.approx(P.l0 * 1.045, rel=1e-12)


class TestOuterInterpolators:
    def test_temperature_term_vanishes_at_T0(self):
        for x in np.linspace(0.0, 1.0, 11):
            assert law.sigma_A_outer(x, P.T0, P) == pytest.approx(
                float(law.sigma_A0(x, P)), rel=1e-12)

    def test_loading_branch_start_value(self):
        # Direct evaluation: E_AR*ln(1+lambda_AR) + sigma_AB.
        expected = P.E_AR * math.log(1.0 + P.lambda_AR) + P.sigma_AB
        got = law.sigma_A_outer(0.0, P.T0, P)
        assert got == pytest.approx(expected, rel=1e-12)
        assert got == pytest.approx(3.27670e5, rel=1e-4)

    def test_unloading_branch_end_value(self):
        expected = P.E_ML * math.log(1.0 + P.lambda_ML) + P.E_MC + P.sigma_MB
        assert law.sigma_M_outer(1.0, P.T0, P) == pytest.approx(expected, rel=1e-12)

    def test_loading_above_unloading(self):
        xs = np.arange(0.0, 1.0001, 0.1)
        assert np.all(law.sigma_A_outer(xs, P.T0, P)
                      >= law.sigma_M_outer(xs, P.T0, P))

    def test_branch_gap_independent_of_temperature(self):
        xs = np.linspace(0.0, 1.0, 31)
        gap_cold = law.sigma_A_outer(xs, 280.0, P) - law.sigma_M_outer(xs, 280.0, P)
        gap_hot = law.sigma_A_outer(xs, 420.0, P) - law.sigma_M_outer(xs, 420.0, P)
        assert np.allclose(gap_cold, gap_hot, rtol=1e-12, atol=1e-6)

    def test_dx_derivatives_match_fd(self):
        xs = np.linspace(0.02, 0.98, 25)
        h = 1e-7
        for fn, dfn in ((law.sigma_A0, law.sigma_A0_dx),
                        (law.sigma_M0, law.sigma_M0_dx),
                        (law.sigma_S, law.sigma_S_dx)):
            fd = (fn(xs + h, P) - fn(xs - h, P)) / (2 * h)
            assert np.allclose(dfn(xs, P), fd, rtol=1e-5)

    def test_log_domain_error(self):
        # Coefficients that would push a log argument nonpositive are
        # rejected at construction.
        with pytest.raises(DomainError):
            P.with_values(lambda_AL=-1.5)
        with pytest.raises(DomainError):
            P.with_values(lambda_MR=-1.0)


class TestResistance:
    def test_austenite_reference(self):
        expected = P.l0 * P.rho_eA0 / P.area
        got = law.resistance(0.0, 0.0, P.T0, P)
        assert got == pytest.approx(expected, rel=1e-12)
        assert got == pytest.approx(18.357, rel=1e-3)

    def test_martensite_reference(self):
        assert law.resistance(0.0, 1.0, P.T0, P) == pytest.approx(22.68, rel=1e-3)

    def test_zero_alpha_removes_temperature_dependence(self):
        # alpha_A = 0 in the bundled set.
        assert law.resistance(0.0, 0.0, P.T0 + 10.0, P) == pytest.approx(
            law.resistance(0.0, 0.0, P.T0, P), rel=1e-12)

    def test_increasing_in_phase_fraction(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            eps = rng.uniform(0.0, 0.05)
            T = rng.uniform(280.0, 420.0)
            rho_A, rho_M = law.resistivities(T, P)
            xs = np.linspace(0.0, 1.0, 10)
            r = law.resistance(eps, xs, T, P)
            if rho_M > rho_A:
                assert np.all(np.diff(r) > 0.0)

    def test_geometry_guard(self):
        with pytest.raises(DomainError):
            law.resistance(4.0, 0.0, P.T0, P)


def test_randomized_property_suite():
    """1000 randomized states: FD agreement and monotonicity properties."""
    rng = np.random.default_rng(2024)
    h = 1e-8
    for _ in range(1000):
        eps = rng.uniform(0.0, 0.05)
        x = rng.uniform(0.01, 0.99)
        T = rng.uniform(280.0, 420.0)
        d_eps, d_x = law.stress_partials(eps, x, P)
        fd_eps = (law.stress(eps + h, x, P) - law.stress(eps - h, x, P)) / (2 * h)
        fd_x = (law.stress(eps, x + h, P) - law.stress(eps, x - h, P)) / (2 * h)
        assert d_eps == pytest.approx(fd_eps, rel=1e-6)
        assert d_x == pytest.approx(fd_x, rel=1e-6)
        assert d_eps > 0.0
        rho_A, rho_M = law.resistivities(T, P)
        if rho_M > rho_A:
            assert (law.resistance(eps, min(x + 0.01, 1.0), T, P)
                    > law.resistance(eps, x, T, P))
