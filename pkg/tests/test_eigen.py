import math

import numpy as np
import pytest
from scipy.special import gamma as gamma_fn, kv, iv
from scipy.integrate import quad

from krflx import strings as st
from krflx import eigen, krein

IDENT = st.identity_string()
P12, P15, P18 = (st.power_string(a) for a in (1.2, 1.5, 1.8))


def g_bessel(alpha, lam, x):
    """Independent closed form for the power family: the killed diffusion is a
    space-changed squared Bessel process, so the hitting-time transform is a
    Bessel-K ratio."""
    s = lam * alpha * x ** (1.0 / alpha)
    if s <= 0:
        return 1.0
    return (2.0 / gamma_fn(alpha)) * s ** (alpha / 2) * kv(alpha, 2.0 * math.sqrt(s))


class TestPsi:
    def test_sinh(self):
        ev = eigen.psi(IDENT, 1.0, 1.0)
        assert ev.value == pytest.approx(math.sinh(1.0), rel=1e-12)
        assert ev.truncation_bound <= 1e-10

    def test_lambda_zero(self):
        ev = eigen.psi(P15, 0.0, 0.7)
        assert ev.value == 0.7
        assert ev.truncation_bound == 0.0

    def test_two_term_partial_and_bound(self):
        # partial sum x + lam (s*m*s)(x) = 1 + 1/6 with the d = 2 certificate
        # x lam^2 E^2 = (1/2)(m*s)^2 e^{m*s} at (m*s)(1) = 1/2
        partial = (eigen.psi(IDENT, 1.0, 1.0, tol=1e-14).value
                   - eigen.psi_series_tail(IDENT, 1.0, 1.0, from_k=2))
        assert partial == pytest.approx(1.0 + 1.0 / 6.0, rel=1e-12)
        bound = 0.5 * 0.25 * math.exp(0.5)
        assert abs(math.sinh(1.0) - partial) <= bound

    def test_certificates_are_valid(self):
        # the converged value never leaves partial +- bound
        for m, alpha in ((P12, 1.2), (P15, 1.5), (P18, 1.8)):
            s = eigen._series(m)
            for lam in (0.5, 2.0):
                for x in (0.4, 1.3):
                    full = eigen.psi(m, lam, x, tol=1e-13).value
                    for d in (1, 2, 3, 5):
                        partial = full - eigen.psi_series_tail(m, lam, x, from_k=d)
                        bound = x * lam ** d * s.bound_E(d, lam, x)
                        assert abs(full - partial) <= bound * (1 + 1e-12)

    def test_negative_x(self):
        with pytest.raises(st.DomainError):
            eigen.psi(IDENT, 1.0, -0.1)


class TestPsiPlus:
    def test_cosh(self):
        assert eigen.psi_plus(IDENT, 1.0, 1.0).value == pytest.approx(
            math.cosh(1.0), rel=1e-12)

    def test_trivial(self):
        assert eigen.psi_plus(IDENT, 0.0, 1.0).value == 1.0
        assert eigen.psi_plus(P15, 3.0, 0.0).value == 1.0


class TestPhi1:
    def test_exp_solution(self):
        # dm = dx: u'' = u, u(0) = 1, u'(0) = -1 => e^{-x}
        assert eigen.phi1(IDENT, 1.0, 1.0).value == pytest.approx(
            math.exp(-1.0), rel=1e-11)

    def test_trivial(self):
        assert eigen.phi1(P15, 0.0, 1.0).value == 1.0
        assert eigen.phi1(P15, 2.0, 0.0).value == 1.0

    @pytest.mark.parametrize("alpha", [1.2, 1.5, 1.8])
    def test_vs_bessel_oracle(self, alpha):
        # phi1 = g + c1 psi with the Bessel-K g and the closed-form c1
        m = st.power_string(alpha)
        for lam in (0.5, 1.0, 2.0):
            c1 = lam * krein.H_closed(alpha, lam) - lam * m(1.0)
            for x in (0.3, 1.0, 2.0):
                target = (g_bessel(alpha, lam, x)
                          + c1 * eigen.psi(m, lam, x, tol=1e-12).value)
                assert eigen.phi1(m, lam, x, tol=1e-12).value == pytest.approx(
                    target, abs=2e-9)


class TestPhi1Plus:
    def test_exp_derivative(self):
        assert eigen.phi1_plus(IDENT, 1.0, 1.0).value == pytest.approx(
            -math.exp(-1.0), rel=1e-11)

    def test_modified_neumann_limit(self):
        # phi1+(x) - lam*(m(x) - m(1)) -> 0 as x -> 0; for the power family
        # the gap decays like the leading moment m*G1 ~ x^(2/alpha - 1)
        lam = 1.7
        gaps = []
        for x in (1e-2, 1e-4, 1e-6):
            mt = lam * (P15(x) - P15(1.0))
            gaps.append(abs(eigen.phi1_plus(P15, lam, x).value - mt))
        assert gaps[2] < gaps[1] < gaps[0]
        assert gaps[2] < 0.05 * gaps[0]

    def test_lambda_zero(self):
        assert eigen.phi1_plus(P15, 0.0, 1.0).value == 0.0


class TestG:
    def test_exp_closed_form(self):
        for lam, x in ((1.0, 1.0), (4.0, 0.5), (2.0, 1.5)):
            assert eigen.g_quadrature(IDENT, lam, x) == pytest.approx(
                math.exp(-math.sqrt(lam) * x), rel=1e-10)

    def test_trivial(self):
        assert eigen.g_quadrature(P15, 1.0, 0.0) == 1.0
        assert eigen.g_quadrature(P15, 0.0, 2.0) == 1.0

    def test_decomposition_matches(self):
        assert eigen.g_decomposition(IDENT, 4.0, 0.5) == pytest.approx(
            math.exp(-1.0), rel=1e-11)
        assert eigen.g_decomposition(IDENT, 1.0, 1.0) == pytest.approx(
            math.exp(-1.0), rel=1e-11)

    @pytest.mark.parametrize("alpha", [1.2, 1.5, 1.8])
    def test_two_routes_and_bessel(self, alpha):
        m = st.power_string(alpha)
        for lam in (0.5, 2.0):
            for x in (0.3, 1.5):
                gq = eigen.g_quadrature(m, lam, x, tol=1e-11)
                gd = eigen.g_decomposition(m, lam, x, tol=1e-11)
                gb = g_bessel(alpha, lam, x)
                assert abs(gq - gd) < 1e-9
                assert gq == pytest.approx(gb, abs=1e-9)

    def test_monotone_in_lambda(self):
        lams = [0.25, 0.5, 1.0, 2.0, 4.0]
        vals = [eigen.g_quadrature(P15, l, 1.0) for l in lams]
        assert all(vals[i + 1] < vals[i] for i in range(len(vals) - 1))

    def test_monotone_in_x(self):
        xs = np.linspace(0.1, 3.0, 12)
        vals = [eigen.g_quadrature(P15, 1.0, x) for x in xs]
        assert all(vals[i + 1] < vals[i] for i in range(len(vals) - 1))

    def test_negative_lambda(self):
        with pytest.raises(st.DomainError):
            eigen.g_quadrature(P15, -1.0, 1.0)


class TestWronskian:
    @pytest.mark.parametrize("m", [IDENT, P12, P15, P18])
    def test_unit(self, m):
        for lam in (0.5, 1.0, 2.0, 4.0):
            for x in (0.2, 1.0, 2.5):
                assert abs(eigen.wronskian(m, lam, x) - 1.0) < 1e-8


class TestPhi1Certificates:
    def test_bound_covers_remainder(self):
        # the certified bound must dominate the true remainder, including the
        # small-x regime where only one or two terms are taken
        for m, alpha in ((P15, 1.5), (P18, 1.8)):
            for lam in (1.0, 4.0):
                for x in (5e-3, 0.1, 1.0):
                    ref = eigen.phi1(m, lam, x, tol=1e-15).value
                    ev = eigen.phi1(m, lam, x, tol=1e-6)
                    assert abs(ev.value - ref) <= ev.truncation_bound * (1 + 1e-10)


class TestResidual:
    def test_linear_string(self):
        assert eigen.residual_integral_eq(IDENT, 1.0, 2.0) < 1e-8

    def test_lambda_zero(self):
        assert eigen.residual_integral_eq(IDENT, 0.0, 2.0) == 0.0

    def test_power_string(self):
        assert eigen.residual_integral_eq(P15, 1.0, 1.0) < 1e-6


class TestRegularReduction:
    def test_M0_equation(self):
        # for m in M0 with m(0+) >= 0, u = phi1 + lam m(1) psi solves
        # u = 1 + lam int_0^x (x-y) u dm  (m(0+) = 0 here)
        m = st.power_string(0.5)
        lam = 1.0
        xs = np.concatenate([[0.0], np.geomspace(1e-10, 1.5, 8000)])
        u = np.array([1.0] + [
            eigen.phi1(m, lam, x, tol=1e-12).value
            + lam * m(1.0) * eigen.psi(m, lam, x, tol=1e-12).value
            for x in xs[1:]])
        rhs = 1.0 + lam * eigen.volterra_apply(m, u, xs)
        assert float(np.max(np.abs(u - rhs))) < 1e-8


class TestGridBackend:
    def test_power_cross_check(self):
        ge = eigen.grid_eigen(P15, 1.0, x_max=2.0)
        for x in (0.2, 1.0, 1.9):
            assert ge.psi_at(x) == pytest.approx(
                eigen.psi(P15, 1.0, x).value, rel=3e-5)
            assert ge.phi1_at(x) == pytest.approx(
                eigen.phi1(P15, 1.0, x).value, rel=2e-4, abs=1e-6)

    def test_exp_string_bessel_identity(self):
        # for m = -e^{-x}: g(lam; x) = I0(2 sqrt(lam) e^{-x/2}) / I0(2 sqrt(lam))
        m = st.ExpTailString()
        lam = 1.0
        ge = eigen.grid_eigen(m, lam, x_max=40.0)
        lamH = lam * krein.H(m, lam)
        c1 = lamH - lam * m(1.0)
        z0 = 2.0 * math.sqrt(lam)
        for x in (0.3, 1.0, 2.5):
            target = iv(0, z0 * math.exp(-x / 2.0)) / iv(0, z0)
            got = ge.phi1_at(x) - c1 * ge.psi_at(x)
            assert got == pytest.approx(target, abs=5e-5)


class TestSeriesTails:
    def test_psi_tail_definition(self):
        full = eigen.psi(P15, 1.3, 0.8, tol=1e-13).value
        tail1 = eigen.psi_series_tail(P15, 1.3, 0.8, from_k=1)
        assert full - tail1 == pytest.approx(0.8, rel=1e-11)

    def test_phi_tail_definition(self):
        lam, x = 1.3, 0.8
        full = eigen.phi1(P15, lam, x, tol=1e-13).value
        tail1 = eigen.phi1_series_tail(P15, lam, x, from_k=1)
        assert full - tail1 == pytest.approx(1.0 + lam * P15.G1(x), abs=1e-10)
