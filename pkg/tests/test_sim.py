import math

import numpy as np
import pytest
from scipy.stats import gamma as gamma_dist, ks_2samp
from scipy.special import gamma as gamma_fn, kv

from krflx import strings as st
from krflx import eigen, levy, sim

P15 = st.power_string(1.5)
IDENT = st.identity_string()
J32 = st.power_jump(1.0, -1.5, (0.0, 1.0))


class TestExactFirstPassage:
    def test_laplace_transform(self):
        rng = np.random.default_rng(1)
        T = sim.first_passage_batch(P15, np.full(200_000, 1.0), rng)
        vals = np.exp(-T)
        target = eigen.g_quadrature(P15, 1.0, 1.0)
        se = vals.std() / math.sqrt(len(vals))
        assert abs(vals.mean() - target) < 3 * se

    def test_mean_exit_time(self):
        # E[T0 from x0] = int_0^x0 m(y,oo) dy = 3 for the alpha=3/2 string
        rng = np.random.default_rng(12)
        T = sim.first_passage_batch(P15, np.full(400_000, 1.0), rng)
        se = T.std() / math.sqrt(len(T))
        assert abs(T.mean() - 3.0) < 3 * se

    def test_quantiles_exact(self):
        # T0 = alpha x^{1/alpha} / Gamma(alpha): quantiles from the gamma ppf
        rng = np.random.default_rng(2)
        T = sim.first_passage_batch(P15, np.full(200_000, 2.0), rng)
        qs = np.quantile(T, [0.1, 0.5, 0.9])
        exact = 1.5 * 2.0 ** (2 / 3) / gamma_dist.ppf([0.9, 0.5, 0.1], 1.5)
        np.testing.assert_allclose(qs, exact, rtol=0.01)

    def test_scaled_string_time_change(self):
        # speed measure c*dm multiplies hitting times by c
        rng = np.random.default_rng(3)
        m2 = st.rescale(P15, 2.0, 1.0)
        T = sim.first_passage_batch(m2, np.full(100_000, 1.0), rng)
        se = T.std() / math.sqrt(len(T))
        assert abs(T.mean() - 6.0) < 3 * se

    def test_log_string_branch(self):
        # alpha = 1: T0 = x / Exp
        rng = np.random.default_rng(4)
        T = sim.first_passage_batch(st.power_string(1.0), np.full(100_000, 2.0), rng)
        med = np.median(T)
        assert med == pytest.approx(2.0 / math.log(2.0), rel=0.02)

    def test_x0_validation(self):
        with pytest.raises(st.DomainError):
            sim.first_passage(P15, 0.0, 1)


class TestEulerMaruyama:
    def test_laplace_vs_closed_form(self):
        # dm = dx from x0 = 1: E[e^{-T0}] = e^{-1}
        rng = np.random.default_rng(42)
        T = sim.first_passage_batch(IDENT, np.ones(100_000), rng, method="em",
                                    t_cap=40.0)
        vals = np.exp(-T)
        se = vals.std() / math.sqrt(len(vals))
        assert abs(vals.mean() - math.exp(-1.0)) < 3 * se + 1e-3

    def test_vs_exact_quantiles(self):
        rng = np.random.default_rng(7)
        T = sim.first_passage_batch(P15, np.full(30_000, 1.0), rng, method="em")
        qs = np.quantile(T, [0.25, 0.5, 0.75])
        exact = 1.5 / gamma_dist.ppf([0.75, 0.5, 0.25], 1.5)
        np.testing.assert_allclose(qs, exact, rtol=0.03)

    def test_tiny_start_returns_residual(self):
        rng = np.random.default_rng(8)
        T = sim.first_passage_batch(P15, np.full(64, 1e-9), rng, method="em",
                                    x_abs_factor=1.0)
        # absorbed immediately: only the mean add-back remains
        assert np.all(T == P15.tail_integral(1e-9))


class TestIltPath:
    def test_mean_eta(self):
        vals = sim.ilt_marginal_batch(P15, J32, 1e-4, 1.0, 4000, seed=0)
        se = vals.std() / math.sqrt(len(vals))
        assert abs(vals.mean() - 18.0) < 3 * se

    def test_truncation_consistency(self):
        # different eps grids agree within combined Monte Carlo bands
        a = sim.ilt_marginal_batch(P15, J32, 1e-3, 1.0, 4000, seed=5)
        b = sim.ilt_marginal_batch(P15, J32, 1e-5, 1.0, 4000, seed=6)
        se = math.hypot(a.std() / 63.2, b.std() / 63.2)
        assert abs(a.mean() - b.mean()) < 3 * se

    def test_laplace_check(self):
        # empirical E[e^{-lam eta(1)}] vs the exponent of the eps-truncated,
        # mean-compensated pair
        eps, lam, n = 1e-5, 1.0, 10_000
        vals = np.exp(-lam * sim.ilt_marginal_batch(P15, J32, eps, 1.0, n, seed=9))
        j_trunc = st.JumpMeasure(parts=(st.PowerJumpPart(1.0, -1.5, eps, 1.0),))
        drift_eps = 18.0 * eps ** (1 / 6.0)
        exponent = levy.chi(P15, j_trunc, lam) + lam * drift_eps
        target = math.exp(-exponent)
        se = vals.std() / math.sqrt(n)
        assert abs(vals.mean() - target) < 3 * se

    def test_no_drift_when_support_above_eps(self):
        j_hi = st.power_jump(1.0, -1.5, (0.5, 1.0))
        path = sim.sample_ilt(P15, j_hi, 0.1, 2.0, seed=1)
        assert path.drift == 0.0

    def test_warn_on_large_eps(self):
        path = sim.sample_ilt(P15, J32, 1e-3, 1.0, seed=1)
        assert path.warn is not None
        path2 = sim.sample_ilt(P15, J32, 1e-6, 1.0, seed=1)
        assert path2.warn is None

    def test_path_eta_inverse_roundtrip(self):
        path = sim.sample_ilt(P15, J32, 1e-4, 3.0, seed=11)
        ts = np.linspace(0.05, 0.9 * path.eta(np.array([3.0]))[0], 50)
        ell = path.inverse(ts)
        assert np.all(path.eta(ell) >= ts - 1e-12)
        assert np.all(path.eta_pre(ell) <= ts + 1e-12)

    def test_stationary_increments(self):
        # eta(2) - eta(1) along one path vs a fresh eta(1): same law
        inc, fresh = [], []
        for i in range(1500):
            p = sim.sample_ilt(P15, J32, 1e-3, 2.0, seed=10_000 + i)
            e = p.eta(np.array([1.0, 2.0]))
            inc.append(e[1] - e[0])
            fresh.append(e[0])
        assert ks_2samp(np.array(inc), np.array(fresh)).pvalue > 0.01

    def test_deterministic(self):
        a = sim.sample_ilt(P15, J32, 1e-4, 1.0, seed=3)
        b = sim.sample_ilt(P15, J32, 1e-4, 1.0, seed=3)
        assert np.array_equal(a.u, b.u) and np.array_equal(a.T, b.T)

    def test_marginal_block_invariance(self):
        full = sim.ilt_marginal_batch(P15, J32, 1e-3, 1.0, 8, seed=21)
        part = np.concatenate([
            sim.ilt_marginal_batch(P15, J32, 1e-3, 1.0, 3, seed=21, path_offset=0),
            sim.ilt_marginal_batch(P15, J32, 1e-3, 1.0, 5, seed=21, path_offset=3)])
        assert np.array_equal(full, part)


class TestBilateral:
    def _make(self, seed=13, t_hi=30.0):
        return sim.bilateral(P15, J32, P15, J32, t_hi, seed, eps=1e-5)

    def test_occupation_partition(self):
        bi = self._make()
        ts = np.linspace(0.1, 25.0, 200)
        A = bi.A(ts)
        bi_sw = sim.BilateralPath(plus=bi.minus, minus=bi.plus)
        Abar = bi_sw.A(ts)
        np.testing.assert_allclose(A + Abar, ts, atol=1e-9)

    def test_A_monotone_and_bounded(self):
        bi = self._make(seed=14)
        ts = np.linspace(0.1, 25.0, 400)
        A = bi.A(ts)
        assert np.all(np.diff(A) >= -1e-12)
        assert np.all(A >= -1e-12) and np.all(A <= ts + 1e-12)

    def test_sandwich_brackets_exact(self):
        bi = self._make(seed=15)
        ts = np.linspace(0.5, 25.0, 300)
        mid, width = bi.A_sandwich(ts)
        A = bi.A(ts)
        assert np.all(A <= mid + width / 2 + 1e-9)
        assert np.all(A >= mid - width / 2 - 1e-9)

    def test_williams_identity(self):
        # pathwise: A^{-1}(t) = t + eta_-(eta_+^{-1}(t)), 10 paths
        for i in range(10):
            bi = self._make(seed=100 + i)
            a_hi = 0.8 * float(bi.plus.eta(np.array([bi.plus.horizon * 0.7]))[0])
            grid = np.linspace(0.01, a_hi, 200)
            assert sim.williams_residual(bi, grid) < 1e-8

    def test_degenerate_minus_side(self):
        # j_- = 0 beyond a drift: A^{-1}(t) = t
        j_empty = st.JumpMeasure()
        pp = sim.sample_ilt(P15, J32, 1e-5, 2.0, seed=1)
        pm = sim.IltPath(u=np.array([]), T=np.array([]), drift=0.0, horizon=2.0)
        bi = sim.BilateralPath(plus=pp, minus=pm)
        a = np.linspace(0.01, 10.0, 50)
        np.testing.assert_allclose(bi.A_inverse(a), a, atol=1e-12)

    def test_horizon_guard(self):
        bi = self._make(seed=16)
        with pytest.raises(st.DomainError):
            bi.A(np.array([bi.horizon_t * 1.5]))

    def test_ell_inverse(self):
        bi = self._make(seed=17)
        ts = np.linspace(0.5, 20.0, 100)
        u = bi.ell(ts)
        eta = bi.drift * u + bi.cum[np.searchsorted(bi.u, u, side="right")]
        assert np.all(eta >= ts - 1e-9)
