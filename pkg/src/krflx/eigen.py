"""Eigenfunctions of d/dm d+/dx with certified truncation error.

For a string m with square-integrable values near 0 the module evaluates

  psi(lam; x)   = sum_k lam^k (s*m*)^k s (x)        Dirichlet solution,
  phi1(lam; x)  = 1 + sum_k lam^(k+1) (s*m*)^k G1(x)  modified-Neumann solution,
  g(lam; x)     = psi(lam; x) * int_x^oo dy / psi(lam; y)^2,

together with right-derivatives, where U*f(x) = int_0^x f dU and
G1(x) = int_0^x (m(y) - m(1)) dy.  phi1 is the unique eigenfunction with
u(0) = 1 and u+(x) - lam*(m(x) - m(1)) -> 0 as x -> 0+, which replaces the
Neumann condition when 0 is an exit boundary; g is the Laplace transform of
the first hitting time of 0.

Truncation certificates use E^d(lam; x) = (1/d!) (m*s)(x)^d exp(lam (m*s)(x)):

  |psi   - partial_d|  <=  x lam^d E^d          (d series terms)
  |psi+  - partial_d|  <=  lam^(d+1) E^d
  |phi1  - partial_d|  <=  lam^(d+2) x S(x) E^d
  |phi1+ - partial_d|  <=  lam^(d+1) S(x) E^d

with S(x) = sup_{y<=x} |m*G1(y)|.

Two backends: an exact generalized-power-sum engine for strings whose density
is a global power sum (each iterated integral is a short exact power sum), and
a grid Volterra engine for tabulated or non-power strings (piecewise power
cells, exponent-aware first cell).  All evaluation is pure; per-(m, lam)
series are memoized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import quad

from .strings import (DomainError, IntegrabilityError, StringMeasure, LogString)

_MAX_TERMS = 400
_MERGE_DIGITS = 10
# iterated integrals accumulate exponentially large terms before the sign
# structure cancels them down to O(e^{-sqrt(lam) x}) values; extended
# precision keeps the decomposition route accurate through the cancellation
_LD = np.longdouble


class ToleranceError(RuntimeError):
    """Requested tolerance unreachable within the term cap."""


@dataclass(frozen=True)
class EigenEval:
    lam: float
    x: float
    value: float
    derivative_plus: Optional[float]
    truncation_bound: float
    terms_used: int


# ---------------------------------------------------------------------------
# power-sum engine
# ---------------------------------------------------------------------------

def _merge(coefs, exps):
    # group by rounded exponent, but keep full-precision representatives:
    # rounding only serves as the collision key
    key = np.round(exps.astype(float), _MERGE_DIGITS)
    uniq, inv = np.unique(key, return_inverse=True)
    out_c = np.zeros(len(uniq), dtype=coefs.dtype)
    np.add.at(out_c, inv, coefs)
    out_e = np.empty(len(uniq), dtype=exps.dtype)
    out_e[inv] = exps
    return out_c, out_e


class _PowerSeries:
    """Iterated bullet integrals as exact power sums for one (m, lam)."""

    def __init__(self, m: StringMeasure):
        pt = m.density_power_terms()
        if pt is None:
            raise TypeError("power-sum engine needs a power-sum density")
        self.m = m
        self.dens = tuple((_LD(c), _LD(e)) for c, e in pt)
        # (m*s)(x) = sum c x^{e+2}/(e+2)
        self.ms_terms = tuple((c / (e + 2.0), e + 2.0) for c, e in pt)
        # psi chain seeded with s, derivative chain with the m-bullet partials
        self.p_terms = [(np.array([1.0], dtype=_LD), np.array([1.0], dtype=_LD))]
        self.mp_terms = []           # m * p_k
        g1 = self._g1_terms()
        self.q_terms = [g1] if g1 is not None else None
        self.mq_terms = [] if g1 is not None else None
        self._smg1_sup_cache = {}

    def _g1_terms(self):
        vt = self.m.value_power_terms()
        if vt is None:
            return None
        terms, const = vt
        m1 = self.m.value(1.0)
        cs, es = [], []
        for c, e in terms:
            cs.append(_LD(c) / (_LD(e) + 1.0))
            es.append(_LD(e) + 1.0)
        cs.append(_LD(const) - _LD(m1))
        es.append(_LD(1.0))
        c, e = _merge(np.array(cs, dtype=_LD), np.array(es, dtype=_LD))
        keep = np.abs(c) > 0.0
        return c[keep], e[keep]

    def _bullet_m(self, coefs, exps):
        """f = sum c x^e  ->  int_0^x f dm (requires e + e_dens + 1 > 0)."""
        out_c, out_e = [], []
        for cd, ed in self.dens:
            e_new = exps + ed + 1.0
            if np.any(e_new <= 0):
                raise IntegrabilityError("bullet integrand not integrable near 0")
            out_c.append(coefs * cd / e_new)
            out_e.append(e_new)
        return _merge(np.concatenate(out_c), np.concatenate(out_e))

    @staticmethod
    def _bullet_s(coefs, exps):
        e_new = exps + 1.0
        return coefs / e_new, e_new

    def extend_psi(self, k: int):
        while len(self.p_terms) <= k:
            c, e = self.p_terms[-1]
            mc, me = self._bullet_m(c, e)
            if len(self.mp_terms) == len(self.p_terms) - 1:
                self.mp_terms.append((mc, me))
            self.p_terms.append(self._bullet_s(mc, me))
        while len(self.mp_terms) < len(self.p_terms):
            c, e = self.p_terms[len(self.mp_terms)]
            self.mp_terms.append(self._bullet_m(c, e))

    def extend_phi(self, k: int):
        if self.q_terms is None:
            raise TypeError("phi1 needs power-sum string values (no log terms)")
        while len(self.q_terms) <= k:
            c, e = self.q_terms[-1]
            mc, me = self._bullet_m(c, e)
            if len(self.mq_terms) == len(self.q_terms) - 1:
                self.mq_terms.append((mc, me))
            self.q_terms.append(self._bullet_s(mc, me))
        while len(self.mq_terms) < len(self.q_terms):
            c, e = self.q_terms[len(self.mq_terms)]
            self.mq_terms.append(self._bullet_m(c, e))

    # -- certificate ingredients ---------------------------------------------
    def ms(self, x: float) -> float:
        return float(sum(c * x ** e for c, e in self.ms_terms))

    def bound_E(self, d: int, lam: float, x: float) -> float:
        v = self.ms(x)
        if v <= 0:
            return 0.0
        return math.exp(d * math.log(v) - math.lgamma(d + 1.0) + abs(lam) * v)

    def s_sup(self, x: float) -> float:
        """S(x) = sup_{y<=x} |m*G1(y)|, cached on a log grid."""
        key = round(math.log(max(x, 1e-300)), 6)
        hit = self._smg1_sup_cache.get(key)
        if hit is not None:
            return hit
        self.extend_phi(0)
        c, e = self.mq_terms[0]
        ys = np.geomspace(max(x * 1e-8, 1e-12), x, 257)
        vals = np.abs((ys[:, None] ** e[None, :]) @ c)
        out = float(vals.max())
        self._smg1_sup_cache[key] = out
        return out

    @staticmethod
    def eval_terms(terms, x: float):
        c, e = terms
        return np.sum(c * _LD(x) ** e)


_series_cache: dict = {}


def _series(m: StringMeasure) -> _PowerSeries:
    s = _series_cache.get(m)
    if s is None:
        s = _PowerSeries(m)
        _series_cache[m] = s
    return s


def has_power_series(m: StringMeasure) -> bool:
    return m.density_power_terms() is not None


def _sum_powers(series_terms, lam, x, tol_abs, lam_power0, cap=_MAX_TERMS,
                extend=None, bound=None):
    """Sum lam^{k+k0} T_k(x) until the certified bound drops below tol_abs."""
    total = _LD(0.0)
    k = 0
    while True:
        if extend is not None:
            extend(k)
        total += lam ** (k + lam_power0) * _PowerSeries.eval_terms(series_terms[k], x)
        k += 1
        b = bound(k)
        if b <= tol_abs or k >= cap:
            return total, b, k


def psi(m: StringMeasure, lam: float, x: float, tol: float = 1e-10) -> EigenEval:
    """Dirichlet eigenfunction psi(lam; x); value certified within tol."""
    if x < 0:
        raise DomainError("psi requires x >= 0")
    if x == 0.0:
        return EigenEval(lam, x, 0.0, 1.0, 0.0, 0)
    if lam == 0.0:
        return EigenEval(lam, x, x, 1.0, 0.0, 1)
    s = _series(m)
    bound = lambda d: x * abs(lam) ** d * s.bound_E(d, lam, x)
    val, b, k = _sum_powers(s.p_terms, lam, x, tol, 0, extend=s.extend_psi, bound=bound)
    if b > tol:
        raise ToleranceError(f"psi: bound {b:.3g} > tol {tol:.3g} at term cap {k}")
    return EigenEval(lam, x, float(val), None, b, k)


def psi_plus(m: StringMeasure, lam: float, x: float, tol: float = 1e-10) -> EigenEval:
    """Right-derivative of psi; psi+(lam; 0) = 1."""
    if x < 0:
        raise DomainError("psi_plus requires x >= 0")
    if x == 0.0 or lam == 0.0:
        return EigenEval(lam, x, 1.0, None, 0.0, 0)
    s = _series(m)
    bound = lambda d: abs(lam) ** (d + 1) * s.bound_E(d, lam, x)
    s.extend_psi(0)
    total = _LD(1.0)
    k = 0
    while True:
        s.extend_psi(k)
        total += lam ** (k + 1) * _PowerSeries.eval_terms(s.mp_terms[k], x)
        k += 1
        b = bound(k)
        if b <= tol or k >= _MAX_TERMS:
            break
    if b > tol:
        raise ToleranceError(f"psi_plus: bound {b:.3g} > tol {tol:.3g}")
    return EigenEval(lam, x, float(total), None, b, k)


def phi1(m: StringMeasure, lam: float, x: float, tol: float = 1e-10) -> EigenEval:
    """Modified-Neumann eigenfunction phi1(lam; x); phi1(lam; 0) = 1."""
    if x < 0:
        raise DomainError("phi1 requires x >= 0")
    if x == 0.0 or lam == 0.0:
        return EigenEval(lam, x, 1.0, None, 0.0, 0)
    s = _series(m)
    S = s.s_sup(x)
    # after summing K terms the partial sum runs to d = K - 1 inclusive and
    # the remainder obeys |...| <= lam^(d+2) x S E^d
    bound = lambda d: abs(lam) ** (d + 2) * x * S * s.bound_E(d, lam, x)
    total = _LD(1.0)
    k = 0
    while True:
        s.extend_phi(k)
        total += lam ** (k + 1) * _PowerSeries.eval_terms(s.q_terms[k], x)
        k += 1
        b = bound(k - 1)
        if b <= tol or k >= _MAX_TERMS:
            break
    if b > tol:
        raise ToleranceError(f"phi1: bound {b:.3g} > tol {tol:.3g}")
    return EigenEval(lam, x, float(total), None, b, k)


def phi1_plus(m: StringMeasure, lam: float, x: float, tol: float = 1e-10) -> EigenEval:
    """Right-derivative of phi1; phi1+(x) - lam*(m(x) - m(1)) -> 0 as x -> 0."""
    if x < 0:
        raise DomainError("phi1_plus requires x >= 0")
    if lam == 0.0:
        return EigenEval(lam, x, 0.0, None, 0.0, 0)
    if x == 0.0:
        raise DomainError("phi1_plus at x = 0 is -lam*m(0+) + lam*m(1); undefined when m(0+) = -oo")
    s = _series(m)
    S = s.s_sup(x)
    mt = lam * (m.value(x) - m.value(1.0))
    # summing K derivative terms covers the stated partial sum with d = K + 1:
    # |...| <= lam^(d+1) S E^d
    bound = lambda d: abs(lam) ** (d + 1) * S * s.bound_E(d, lam, x)
    total = _LD(mt)
    k = 0
    while True:
        s.extend_phi(k)
        total += lam ** (k + 2) * _PowerSeries.eval_terms(s.mq_terms[k], x)
        k += 1
        b = bound(k + 1)
        if b <= tol or k >= _MAX_TERMS:
            break
    if b > tol:
        raise ToleranceError(f"phi1_plus: bound {b:.3g} > tol {tol:.3g}")
    return EigenEval(lam, x, float(total), None, b, k)


def psi_series_tail(m: StringMeasure, lam: float, x: float, from_k: int,
                    rel_tol: float = 1e-14) -> float:
    """Psi-remainder sum_{k >= from_k} lam^k (s*m*)^k s (x), exact term sums.

    from_k = 1 gives psi - x (the symbol Psi of the small-x expansions)."""
    s = _series(m)
    total = _LD(0.0)
    k = from_k
    while k < _MAX_TERMS:
        s.extend_psi(k)
        t = lam ** k * _PowerSeries.eval_terms(s.p_terms[k], x)
        total += t
        k += 1
        if abs(t) <= rel_tol * (abs(total) + 1e-300) and k > from_k + 1:
            break
    return float(total)


def phi1_series_tail(m: StringMeasure, lam: float, x: float, from_k: int,
                     rel_tol: float = 1e-14) -> float:
    """Phi-remainder sum_{k >= from_k} lam^(k+1) (s*m*)^k G1 (x).

    from_k = 1 gives phi1 - 1 - lam*G1 (the symbol Phi^1), from_k = 2 the
    second-order remainder Phi^2."""
    s = _series(m)
    total = _LD(0.0)
    k = from_k
    while k < _MAX_TERMS:
        s.extend_phi(k)
        t = lam ** (k + 1) * _PowerSeries.eval_terms(s.q_terms[k], x)
        total += t
        k += 1
        if abs(t) <= rel_tol * (abs(total) + 1e-300) and k > from_k + 1:
            break
    return float(total)


# ---------------------------------------------------------------------------
# g: quadrature route and decomposition route
# ---------------------------------------------------------------------------

def _psi_fn(m, lam, tol):
    if has_power_series(m):
        s = _series(m)
        def f(y, _s=s):
            total, k = _LD(0.0), 0
            while True:
                _s.extend_psi(k)
                t = lam ** k * _PowerSeries.eval_terms(_s.p_terms[k], y)
                total += t
                k += 1
                if (t <= 1e-17 * total and k > 2) or k >= _MAX_TERMS:
                    return float(total)
        return f
    ge = grid_eigen(m, lam)
    return ge.psi_at


def _psi_plus_fn(m, lam, tol):
    if has_power_series(m):
        s = _series(m)
        def f(y, _s=s):
            total, k = _LD(1.0), 0
            while True:
                _s.extend_psi(k)
                t = lam ** (k + 1) * _PowerSeries.eval_terms(_s.mp_terms[k], y)
                total += t
                k += 1
                if (t <= 1e-17 * total and k > 2) or k >= _MAX_TERMS:
                    return float(total)
        return f
    ge = grid_eigen(m, lam)
    return ge.psi_plus_at


def g_quadrature(m: StringMeasure, lam: float, x: float, tol: float = 1e-10) -> float:
    """g(lam; x) = psi(lam; x) int_x^oo dy/psi^2 for lam >= 0.

    The tail beyond the cutoff X is bounded by 1/(psi(X) psi+(X)) using the
    chord lower bound psi(y) >= psi(X) + psi+(X)(y - X); X is pushed out until
    that bound is below tol/10.
    """
    if lam < 0:
        raise DomainError("g is defined for lam >= 0")
    if x < 0:
        raise DomainError("g requires x >= 0")
    if lam == 0.0 or x == 0.0:
        return 1.0
    pf = _psi_fn(m, lam, tol)
    ppf = _psi_plus_fn(m, lam, tol)
    X = max(2.0 * x, 1.0)
    for _ in range(200):
        rem = 1.0 / (pf(X) * ppf(X))
        if rem < tol * 0.1:
            break
        X *= 1.7
    else:
        raise ToleranceError("g tail envelope did not reach tolerance")
    # integrate in log coordinates: y = x e^s spreads the 1/psi^2 mass evenly
    val, err = quad(lambda s: (x * math.exp(s)) / pf(x * math.exp(s)) ** 2,
                    0.0, math.log(X / x), limit=400, epsabs=0.0, epsrel=1e-13)
    return pf(x) * (val + rem / 2.0)


def g_decomposition(m: StringMeasure, lam: float, x: float, c1: Optional[float] = None,
                    tol: float = 1e-10) -> float:
    """g = phi1 - c1 * psi with c1(lam) = lam*H(lam) - lam*m(1)."""
    if lam < 0:
        raise DomainError("g is defined for lam >= 0")
    if x == 0.0 or lam == 0.0:
        return 1.0
    if c1 is None:
        from . import krein
        c1 = krein.c1(m, lam)
    return phi1(m, lam, x, tol=tol).value - c1 * psi(m, lam, x, tol=tol).value


def g_plus_decomposition(m: StringMeasure, lam: float, x: float,
                         c1: Optional[float] = None, tol: float = 1e-10) -> float:
    """Right-derivative of g via the decomposition route."""
    if c1 is None:
        from . import krein
        c1 = krein.c1(m, lam)
    return phi1_plus(m, lam, x, tol=tol).value - c1 * psi_plus(m, lam, x, tol=tol).value


def wronskian(m: StringMeasure, lam: float, x: float, tol: float = 1e-8) -> float:
    """g psi+ - g+ psi with g from quadrature and g+ from the decomposition;
    the exact value is 1 for every x > 0.  Sub-evaluations run well below tol
    because the decomposition multiplies them by c1 and psi-sized factors."""
    sub = tol * 1e-3
    gq = g_quadrature(m, lam, x, tol=sub)
    gp = g_plus_decomposition(m, lam, x, tol=sub)
    return gq * psi_plus(m, lam, x, tol=sub).value - gp * psi(m, lam, x, tol=sub).value


# ---------------------------------------------------------------------------
# grid Volterra backend
# ---------------------------------------------------------------------------

class GridEigen:
    """psi, phi1 and right-derivatives on a geometric grid for strings without
    a global power-sum density (tables, exponential tails).

    Cells model the density as c*y^s (log-linear density interpolation); the
    first cell uses the declared left exponent and an exponent-aware model of
    the integrand, which is what keeps singular-density strings accurate.
    """

    def __init__(self, m: StringMeasure, lam: float, x_max: float = None,
                 n: int = 3000, x_min_factor: float = 1e-8):
        self.m = m
        self.lam = lam
        if x_max is None:
            x_max = 40.0
        self.x = np.concatenate([[0.0], np.geomspace(x_max * x_min_factor, x_max, n)])
        x = self.x
        rho = np.array([m.density(v) for v in x[1:]])
        self.left_exp = m.grid_left_exponent()
        a, b = x[1:-1], x[2:]
        ra, rb = np.maximum(rho[:-1], 1e-300), np.maximum(rho[1:], 1e-300)
        s = np.clip(np.log(rb / ra) / np.log(b / a), -8.0, 8.0)
        c = ra / a ** s
        e0, e1v, e2v = s + 1.0, s + 2.0, s + 3.0
        self._mu0 = c * (b ** e0 - a ** e0) / e0
        self._mu1 = c * (b ** e1v - a ** e1v) / e1v
        self._mu2 = c * (b ** e2v - a ** e2v) / e2v
        self._a, self._b = a, b
        self._c_first = rho[0] / x[1] ** self.left_exp
        self._build()

    def _apply(self, f):
        """T f(x) = int_0^x (x - y) f(y) dm(y) on the grid nodes."""
        x = self.x
        x1 = x[1]
        f1, f2 = f[1], f[2]
        if f1 != 0 and f2 != 0 and f1 * f2 > 0:
            p = math.log(abs(f2 / f1)) / math.log(x[2] / x1)
            p = min(max(p, 0.0), 8.0)
        else:
            p = 1.0
        e0 = p + self.left_exp + 1.0
        first0 = f1 * self._c_first * x1 ** (self.left_exp + 1.0) / e0
        first1 = f1 * self._c_first * x1 ** (self.left_exp + 2.0) / (e0 + 1.0)
        fa, fb = f[1:-1], f[2:]
        sl = (fb - fa) / (self._b - self._a)
        cell0 = fa * self._mu0 + sl * (self._mu1 - self._a * self._mu0)
        cell1 = fa * self._mu1 + sl * (self._mu2 - self._a * self._mu1)
        F0 = np.concatenate([[0.0, first0], first0 + np.cumsum(cell0)])
        F1 = np.concatenate([[0.0, first1], first1 + np.cumsum(cell1)])
        return x * F0 - F1, F0

    def _build(self):
        lam, x = self.lam, self.x
        m1 = self.m.value(1.0)
        psi_v = x.copy()
        psip_v = np.ones_like(x)
        term = x.copy()
        for _ in range(1, 240):
            tv, f0 = self._apply(term)
            term = lam * tv
            psi_v = psi_v + term
            psip_v = psip_v + lam * f0
            if np.max(np.abs(term)) <= 1e-17 * np.max(np.abs(psi_v)):
                break
        g1 = np.array([self.m.G1(v) for v in x[1:]])
        g1 = np.concatenate([[0.0], g1])
        mt = np.concatenate([[0.0], np.array([self.m.value(v) for v in x[1:]]) - m1])
        phi_v = 1.0 + lam * g1
        phip_v = lam * mt
        term = lam * g1
        for _ in range(1, 240):
            tv, f0 = self._apply(term)
            term = lam * tv
            phi_v = phi_v + term
            phip_v = phip_v + lam * f0
            if np.max(np.abs(term)) <= 1e-17 * np.max(np.abs(phi_v)):
                break
        self.psi_v, self.psip_v = psi_v, psip_v
        self.phi_v, self.phip_v = phi_v, phip_v

    def _interp(self, vals, xq):
        return float(np.interp(xq, self.x, vals))

    def psi_at(self, xq):       return self._interp(self.psi_v, xq)
    def psi_plus_at(self, xq):  return self._interp(self.psip_v, xq)
    def phi1_at(self, xq):      return self._interp(self.phi_v, xq)
    def phi1_plus_at(self, xq): return self._interp(self.phip_v, xq)


_grid_cache: dict = {}


def grid_eigen(m: StringMeasure, lam: float, x_max: float = None, **kw) -> GridEigen:
    key = (m, lam, x_max)
    ge = _grid_cache.get(key)
    if ge is None:
        ge = GridEigen(m, lam, x_max=x_max, **kw)
        if len(_grid_cache) > 64:
            _grid_cache.clear()
        _grid_cache[key] = ge
    return ge


# ---------------------------------------------------------------------------
# integral-equation residual (self-test oracle)
# ---------------------------------------------------------------------------

def volterra_apply(m: StringMeasure, u_nodes: np.ndarray, x_nodes: np.ndarray) -> np.ndarray:
    """int_0^x (x - y) u(y) dm(y) at the nodes, by cellwise quadrature with
    power-law density cells and parabolic u; independent of the series engines.

    Each interior cell integrates the parabola through the three surrounding
    nodes against the exact cell moments of the fitted power density, the
    first cell an exponent-aware power model of u."""
    x = np.asarray(x_nodes, dtype=float)
    if x[0] != 0.0:
        raise DomainError("node grid must start at 0")
    u = np.asarray(u_nodes, dtype=float)
    rho = np.array([m.density(v) for v in x[1:]])
    a, b = x[1:-1], x[2:]
    ra, rb = np.maximum(rho[:-1], 1e-300), np.maximum(rho[1:], 1e-300)
    s = np.clip(np.log(rb / ra) / np.log(b / a), -8.0, 8.0)
    c = ra / a ** s
    mom = [c * (b ** (s + k + 1) - a ** (s + k + 1)) / (s + k + 1) for k in range(4)]
    le = m.grid_left_exponent()
    x1 = x[1]
    u1, u2 = u[1], u[2]
    if u1 != 0 and u2 != 0 and u1 * u2 > 0:
        p = min(max(math.log(abs(u2 / u1)) / math.log(x[2] / x1), 0.0), 8.0)
    else:
        p = 1.0
    cf = rho[0] / x1 ** le
    first0 = u1 * cf * x1 ** (le + 1.0) / (p + le + 1.0)
    first1 = u1 * cf * x1 ** (le + 2.0) / (p + le + 2.0)
    # parabola through (x_{j-1}, x_j, x_{j+1}) per cell [x_j, x_{j+1}]
    x_lo = np.concatenate([[0.0], x[1:-2]])       # left neighbour of each cell
    u_lo = np.concatenate([[0.0], u[1:-2]])
    d1 = (u[1:-1] - u_lo) / (a - x_lo)
    d2 = ((u[2:] - u[1:-1]) / (b - a) - d1) / (b - x_lo)
    a0 = u_lo - d1 * x_lo + d2 * x_lo * a
    a1 = d1 - d2 * (x_lo + a)
    a2 = d2
    cell0 = a0 * mom[0] + a1 * mom[1] + a2 * mom[2]
    cell1 = a0 * mom[1] + a1 * mom[2] + a2 * mom[3]
    F0 = np.concatenate([[0.0, first0], first0 + np.cumsum(cell0)])
    F1 = np.concatenate([[0.0, first1], first1 + np.cumsum(cell1)])
    return x * F0 - F1


def residual_integral_eq(m: StringMeasure, lam: float, x_hi: float,
                         n: int = 5000, x_min_factor: float = 1e-12) -> float:
    """Sup-norm residual of u(x) = lam*G1(x) + lam*int_0^x (x-y) u(y) dm(y)
    for u = phi1 - 1, on a dense geometric grid up to x_hi.

    The integral operator is applied by an independent cellwise quadrature, so
    a small residual certifies the series evaluation of phi1.
    """
    if lam == 0.0:
        return 0.0
    xs = np.concatenate([[0.0], np.geomspace(x_hi * x_min_factor, x_hi, n)])
    u = np.array([0.0] + [phi1(m, lam, v, tol=1e-12).value - 1.0 for v in xs[1:]])
    g1 = np.array([0.0] + [m.G1(v) for v in xs[1:]])
    rhs = lam * g1 + lam * volterra_apply(m, u, xs)
    return float(np.max(np.abs(u - rhs)))
