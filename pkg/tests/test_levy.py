import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import gamma as gamma_fn, kv
from scipy.stats import ks_2samp

from krflx import strings as st
from krflx import eigen, krein, levy

P15 = st.power_string(1.5)
J32 = st.power_jump(1.0, -1.5, (0.0, 1.0))
EULER = levy.EULER_GAMMA


def chi_oracle(alpha, lam, j_exp=-1.5, hi=1.0):
    """Independent dense-quadrature chi via the Bessel-K hitting transform."""
    def g(x):
        s = lam * alpha * x ** (1.0 / alpha)
        return (2.0 / gamma_fn(alpha)) * s ** (alpha / 2) * kv(alpha, 2.0 * math.sqrt(s))
    G = lambda x: -alpha / (alpha - 1.0) * x ** (1.0 / alpha)
    v1, _ = quad(lambda x: (1.0 - g(x) + lam * G(x)) * x ** j_exp, 0, hi,
                 limit=400, epsabs=1e-13, epsrel=1e-12)
    v2, _ = quad(lambda x: -lam * G(x) * x ** j_exp, 0, hi, limit=200)
    return v1 + v2


class TestDrift:
    def test_reference_pair(self):
        assert levy.drift_b(P15, J32) == pytest.approx(18.0, rel=1e-10)

    def test_empty_j(self):
        assert levy.drift_b(P15, st.JumpMeasure()) == 0.0

    def test_linearity(self):
        assert levy.drift_b(P15, J32.scaled(2.0)) == pytest.approx(36.0, rel=1e-10)

    def test_infinite_tail_raises(self):
        with pytest.raises(st.IntegrabilityError):
            levy.drift_b(st.identity_string(), J32)


class TestChi:
    def test_against_oracle(self):
        for lam in (0.5, 1.0, 2.0, 4.0):
            assert levy.chi(P15, J32, lam) == pytest.approx(
                chi_oracle(1.5, lam), abs=1e-7)

    def test_small_lambda_drift_limit(self):
        # chi(lam)/lam = b + kappa*H(lam)*(1 + o(1)) as lam -> 0
        lam = 1e-5
        got = levy.chi(P15, J32, lam) / lam
        expected = 18.0 + 2.0 * krein.H_closed(1.5, lam)
        assert got == pytest.approx(expected, abs=5e-4)

    def test_linearity_in_j(self):
        lam = 1.3
        v1 = levy.chi(P15, J32, lam)
        assert levy.chi(P15, J32.scaled(2.0), lam) == pytest.approx(2 * v1, rel=1e-9)
        j_hi = st.power_jump(0.5, -0.5, (0.0, 2.0))
        v2 = levy.chi(P15, j_hi, lam)
        assert levy.chi(P15, J32 + j_hi, lam) == pytest.approx(v1 + v2, rel=1e-8)

    def test_lambda_zero(self):
        assert levy.chi(P15, J32, 0.0) == 0.0

    def test_complete_monotonicity_spot(self):
        # chi(lam)/lam is the Laplace transform of a positive measure: its
        # finite differences alternate on a geometric grid
        lams = np.geomspace(0.25, 8.0, 9)
        f = np.array([levy.chi(P15, J32, l) / l for l in lams])
        d1 = np.diff(f)
        d2 = np.diff(d1)
        d3 = np.diff(d2)
        assert np.all(d1 < 0)
        assert np.all(d2 > 0)
        assert np.all(d3 < 0)

    def test_scaling_identity(self):
        # chi of the rescaled pair equals gamma * chi(lam / gamma^{1/alpha})
        alpha = 1.5
        for gam in (10.0, 100.0):
            mg = st.rescale(P15, gam ** (1 - 1 / alpha), gam)
            jg = J32.pushforward(gam)
            lam = 1.0
            lhs = levy.chi(mg, jg, lam)
            rhs = gam * levy.chi(P15, J32, lam / gam ** (1 / alpha))
            assert lhs == pytest.approx(rhs, rel=1e-6)

    def test_condition_violation_reported(self):
        j_bad = st.power_jump(1.0, -3.0, (0.0, 1.0))
        with pytest.raises(st.IntegrabilityError):
            levy.chi(P15, j_bad, 1.0)

    def test_exponent_wrapper(self):
        le = levy.chi_exponent(P15, J32)
        assert le.drift == pytest.approx(18.0, rel=1e-10)
        assert le.kappa == pytest.approx(2.0)
        assert le(1.0) == pytest.approx(levy.chi(P15, J32, 1.0), rel=1e-12)


class TestStableExponent:
    def test_reference_value(self):
        assert levy.stable_exponent(1.5, 1.0) == pytest.approx(
            -4.898979485566356, abs=1e-12)

    def test_homogeneity(self):
        assert levy.stable_exponent(1.5, 2.0) == pytest.approx(
            -4.898979485566356 * 2 ** 1.5, rel=1e-13)

    def test_identity_with_H(self):
        # chi(lam) == lam * H(lam) exactly, 9 spot pairs
        for alpha in (1.2, 1.5, 1.8):
            for lam in (0.5, 1.0, 2.0):
                assert abs(levy.stable_exponent(alpha, lam)
                           - lam * krein.H_closed(alpha, lam)) < 1e-12

    def test_domain(self):
        with pytest.raises(st.DomainError):
            levy.stable_exponent(2.0, 1.0)
        with pytest.raises(st.DomainError):
            levy.stable_exponent(1.5, -1.0)


class TestSamplers:
    def test_gaussian_branch(self):
        x = levy.sample_stable(2.0, 3.0, 2.0, 200_000, seed=1)
        assert np.mean(x) == pytest.approx(0.0, abs=0.02)
        assert np.var(x) == pytest.approx(6.0, rel=0.02)

    def test_t_zero(self):
        assert np.all(levy.sample_stable(1.5, 1.0, 0.0, 10, seed=1) == 0.0)

    @pytest.mark.parametrize("alpha", [1.2, 1.5, 1.8])
    def test_cms_laplace_validation(self, alpha):
        # never trust the sampler: empirical transform vs e^{-t chi(lam)}
        t = 1.0
        x = levy.sample_stable(alpha, 1.0, t, 300_000, seed=7)
        for lam in (0.2, 0.4):
            vals = np.exp(-lam * x)
            target = math.exp(-t * levy.stable_exponent(alpha, lam))
            se = vals.std() / math.sqrt(len(vals))
            assert abs(vals.mean() - target) < 3.5 * se

    def test_subordinator_branch(self):
        x = levy.reference_ilt_sample(0.5, 1.0, 300_000, seed=3)
        c = krein.H_closed(0.5, 1.0)
        for lam in (0.5, 1.0, 2.0):
            vals = np.exp(-lam * x)
            target = math.exp(-c * lam ** 0.5)
            se = vals.std() / math.sqrt(len(vals))
            assert abs(vals.mean() - target) < 3.5 * se

    def test_alpha1_branch(self):
        kt = 1.7
        x = levy.reference_ilt_sample(1.0, kt, 400_000, seed=11)
        for lam in (0.5, 1.0):
            vals = np.exp(-lam * x)
            target = math.exp(kt * lam * (math.log(lam) + 2 * EULER))
            se = vals.std() / math.sqrt(len(vals))
            assert abs(vals.mean() - target) < 3.5 * se

    def test_determinism(self):
        a = levy.sample_stable(1.5, 2.0, 1.0, 100, seed=9)
        b = levy.sample_stable(1.5, 2.0, 1.0, 100, seed=9)
        assert np.array_equal(a, b)


class TestTailPrediction:
    def test_reference_constant(self):
        # kappa alpha^(alpha-1)/Gamma(alpha) = 2.7639 for (1.5, 2)
        assert levy.tail_prediction(1.5, 2.0, 100.0) == pytest.approx(
            2.7639 * 1e-3, rel=1e-4)

    def test_power_scaling(self):
        assert levy.tail_prediction(1.5, 2.0, 20.0) / levy.tail_prediction(
            1.5, 2.0, 10.0) == pytest.approx(2.0 ** -1.5, rel=1e-12)

    def test_kappa_zero(self):
        assert levy.tail_prediction(1.5, 0.0, 5.0) == 0.0


class TestArcsine:
    def test_stieltjes_values(self):
        assert levy.arcsine_stieltjes(0.5, 0.5, 1.0) == pytest.approx(
            1 / math.sqrt(2.0), abs=1e-14)
        assert levy.arcsine_stieltjes(0.5, 1.0, 2.0) == pytest.approx(1 / 3.0)
        assert levy.arcsine_stieltjes(0.5, 0.0, 2.0) == pytest.approx(0.5)

    def test_degenerate_samplers(self):
        assert np.all(levy.sample_arcsine(0.5, 1.0, 50, seed=1) == 1.0)
        assert np.all(levy.sample_arcsine(0.5, 0.0, 50, seed=1) == 0.0)

    def test_symmetric_sampler(self):
        y = levy.sample_arcsine(0.5, 0.5, 100_000, seed=5)
        vals = 1.0 / (1.0 + y)
        se = vals.std() / math.sqrt(len(vals))
        assert abs(vals.mean() - 1 / math.sqrt(2.0)) < 3 * se

    def test_asymmetric_sampler_out_of_calibration(self):
        # calibrated at lam = 1, validated at 0.5 and 2; probe lam = 3
        s = levy.ArcsineSampler(0.6, 0.3, seed=2)
        y = s.sample(150_000, seed=8)
        vals = 1.0 / (3.0 + y)
        se = vals.std() / math.sqrt(len(vals))
        target = levy.arcsine_stieltjes(0.6, 0.3, 3.0)
        assert abs(vals.mean() - target) < 4 * se + 2e-4

    def test_mean_matches_weight(self):
        # E[Y_{alpha,p}] = p (from the transform expansion at large lam)
        y = levy.sample_arcsine(0.5, 0.5, 60_000, seed=3)
        assert y.mean() == pytest.approx(0.5, abs=0.01)


class TestLaplaceDistance:
    def test_self_consistency(self):
        rng = np.random.default_rng(4)
        x = rng.exponential(size=40_000)
        # exponent of Exp(1): chi(lam) = log(1 + lam)
        dist, rows = levy.chi, None
        d, table = __import__("krflx").harness.laplace_distance(
            x, lambda lam: math.log1p(lam), [0.5, 1.0, 2.0])
        assert d < 3 * max(se for _, _, se in table)

    def test_shift_lower_bound(self):
        rng = np.random.default_rng(4)
        x = rng.exponential(size=40_000) + 0.5
        d, table = __import__("krflx").harness.laplace_distance(
            x, lambda lam: math.log1p(lam), [0.5, 1.0, 2.0])
        lam = 1.0
        bound = abs(math.exp(-0.5 * lam) - 1.0) * math.exp(-math.log1p(lam))
        assert d >= bound - 0.01
