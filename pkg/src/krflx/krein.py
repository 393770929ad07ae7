"""Spectral characteristic functions of strings via the dual-string route.

For a string w on (-oo, oo) with int_-oo^b x^2 dw < oo, let u = f(lam; .) solve

    du/dw d+/dx u = lam u,  u(-oo) = 1,  u+(-oo) = 0,   x < ell,

ell = inf{x : w(x) = oo}.  The spectral characteristic of w is

    h(lam) = b + int_-oo^b (1/f^2 - 1) dx + int_b^ell dx/f^2,

independent of the split point b.  For a string m on (0, oo) with
square-integrable values near 0, H(lam) is h of the generalized inverse
(dual) of m.  The module computes H three ways:

* ``h_dual`` / ``H``: direct ODE integration of f along the dual string, with
  a first-order (Born) closed start at -X and an explicit correction for the
  neglected (-oo, -X] piece, so the start truncation error is second order;
* ``H_boundary``: exponent-aware Richardson extrapolation of
  (1 - g(lam; x) + lam G(x)) / x as x -> 0, whose limit is lam H(lam);
* ``H_closed``: the closed form for the power family m^(alpha).

The coefficient c1(lam) = lam*H(lam) - lam*m(1) makes
g = phi1 - c1 * psi, tying the spectral route to the eigenfunction route.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import gamma as _gamma_fn

from . import eigen
from .strings import (DomainError, DualString, StringMeasure, dual)

EULER_GAMMA = 0.5772156649015329

_F_CAP = 1e120


class TruncationError(RuntimeError):
    """The dual-ODE start truncation cannot reach the tolerance."""


@dataclass(frozen=True)
class SpectralFunction:
    """Callable H(lam) with provenance in {dual_ode, boundary_limit, closed_form}."""

    fn: Callable[[float], float]
    provenance: str
    tol: float

    def __call__(self, lam: float) -> float:
        return self.fn(lam)


# ---------------------------------------------------------------------------
# closed form for the power family
# ---------------------------------------------------------------------------

def H_closed(alpha: float, lam: float) -> float:
    """Spectral characteristic of m^(alpha):

        (G(2-a)/G(a)) a^(a-1)/(1-a) lam^(a-1)    alpha in (0,1)
        -(log lam + 2*euler_gamma)               alpha = 1
        -(G(2-a)/G(a)) a^(a-1)/(a-1) lam^(a-1)   alpha in (1,2)
    """
    if not 0 < alpha < 2:
        raise DomainError(f"alpha must lie in (0,2), got {alpha}")
    if lam <= 0:
        raise DomainError("H is defined for lam > 0")
    if alpha == 1.0:
        return -(math.log(lam) + 2.0 * EULER_GAMMA)
    c = (_gamma_fn(2.0 - alpha) / _gamma_fn(alpha)) * alpha ** (alpha - 1.0)
    if alpha < 1.0:
        return c / (1.0 - alpha) * lam ** (alpha - 1.0)
    return -c / (alpha - 1.0) * lam ** (alpha - 1.0)


def H_exact(m: StringMeasure, lam: float) -> Optional[float]:
    """Closed-form H when m is (an offset of) a scaled power-family string:
    H_{c m^(a)}(lam) = c H_{m^(a)}(c lam), offsets add."""
    from .strings import OffsetString
    shift = 0.0
    base = m
    while isinstance(base, OffsetString):
        shift += base.offset
        base = base.base
    cp = base.canonical_power()
    if cp is None:
        return None
    c, alpha = cp
    return c * H_closed(alpha, c * lam) + shift


# ---------------------------------------------------------------------------
# dual ODE route
# ---------------------------------------------------------------------------

def _born_B(w: DualString, y: float) -> float:
    """B(y) = int_{-oo}^y (y - z) dw(z) = y w(y) - int z dw."""
    return y * w.mass(y) - w.moment(1, y)


def _choose_start(w: DualString, lam: float, tol: float):
    """Start point y0 and whether a Born start/tail correction is needed."""
    if math.isfinite(w.support_lo):
        return w.support_lo, False
    X = max(4.0, 4.0 * abs(w.ell) if math.isfinite(w.ell) else 4.0)
    for _ in range(120):
        # residual after the first-order correction is ~ 3 lam^2 int B^2 dy
        ss = np.geomspace(X, X * 1e6, 41)
        Bs = np.array([_born_B(w, -s) for s in ss])
        err2 = 3.0 * lam * lam * float(np.trapezoid(Bs * Bs, ss))
        if err2 < tol / 3.0:
            return -X, True
        X *= 2.0
    raise TruncationError("dual-ODE start truncation exceeds tolerance")


def _born_tail_integral(w: DualString, y0: float) -> float:
    """-2 int_{-oo}^{y0} B(y) dy (one lam factor applied by the caller).

    Integrated in log coordinates; the range is extended until the local
    power-law continuation of B contributes less than 1e-12 relative.
    """
    from scipy.integrate import quad as _quad
    total = 0.0
    s_lo = math.log(-y0)
    slope_prev = None
    for round_ in range(40):
        s_hi = s_lo + 6.0
        val, _err = _quad(lambda s: _born_B(w, -math.exp(s)) * math.exp(s),
                          s_lo, s_hi, limit=200, epsabs=1e-15, epsrel=1e-11)
        total += val
        # local log-slope of y*B(y); a stabilized power slope lets us close
        # the remaining tail analytically (exact for power-law duals)
        f1 = _born_B(w, -math.exp(s_hi)) * math.exp(s_hi)
        f0 = _born_B(w, -math.exp(s_hi - 0.5)) * math.exp(s_hi - 0.5)
        if f1 <= 0.0:
            break
        slope = (math.log(f1) - math.log(max(f0, 1e-300))) / 0.5
        if slope < -1e-3:
            rest = f1 / (-slope)
            stable = slope_prev is not None and abs(slope - slope_prev) < 0.02 * abs(slope)
            if rest < 1e-12 * max(abs(total), 1e-6) or (stable and round_ >= 1):
                total += rest
                break
        slope_prev = slope
        s_lo = s_hi
    return -2.0 * total


def _integrate_segment(w, lam, y_from, y_to, state, integrand, stop_tol,
                       log_coords, rtol):
    """Advance (u, u', I) over [y_from, y_to); returns (state, y_end, stopped)."""
    u0, up0, I0 = state

    if log_coords:
        # x = -exp(s); v = x u'
        def rhs(s, y):
            u, v, I = y
            x = -math.exp(s)
            dens = w.density(x)
            du = v
            dv = v + x * x * lam * dens * min(u, _F_CAP)
            dI = (1.0 / (u * u) - 1.0) * x if integrand == "minus" else (1.0 / (u * u)) * x
            return [du, dv, dI]

        def ev_tail(s, y):
            lx = -math.exp(s)
            lim = w.ell if math.isfinite(w.ell) else 0.0
            return (lim - lx) / y[0] ** 2 - stop_tol
        ev_tail.terminal = True
        ev_tail.direction = -1

        def ev_cap(s, y):
            return y[0] - _F_CAP
        ev_cap.terminal = True
        ev_cap.direction = 1

        s0 = math.log(-y_from)
        s1 = math.log(-y_to) if y_to < 0 else -60.0
        sol = solve_ivp(rhs, [s0, s1], [u0, y_from * up0, I0], rtol=rtol,
                        atol=1e-14, method="LSODA", max_step=0.25,
                        events=[ev_tail, ev_cap])
        u, v, I = sol.y[:, -1]
        y_end = -math.exp(sol.t[-1])
        stopped = sol.status == 1
        return (u, v / y_end, I), y_end, stopped

    def rhs(x, y):
        u, up, I = y
        dI = (1.0 / (u * u) - 1.0) if integrand == "minus" else (1.0 / (u * u))
        return [up, lam * w.density(x) * min(u, _F_CAP), dI]

    if math.isfinite(w.ell):
        def ev_tail(x, y):
            return (w.ell - x) / y[0] ** 2 - stop_tol
    else:
        def ev_tail(x, y):
            return 1.0 / (y[0] * max(y[1], 1e-300)) - stop_tol
    ev_tail.terminal = True
    ev_tail.direction = -1

    def ev_cap(x, y):
        return y[0] - _F_CAP
    ev_cap.terminal = True
    ev_cap.direction = 1

    sol = solve_ivp(rhs, [y_from, y_to], [u0, up0, I0], rtol=rtol, atol=1e-14,
                    method="LSODA", events=[ev_tail, ev_cap],
                    max_step=max((y_to - y_from) / 40.0, 1e-12))
    u, up, I = sol.y[:, -1]
    return (u, up, I), sol.t[-1], sol.status == 1


def h_dual(w: DualString, lam: float, b: float = 0.0, tol: float = 1e-8,
           rtol: float = 1e-10) -> float:
    """h_w(lam) = b + int_{-oo}^b (1/f^2 - 1) dx + int_b^ell dx/f^2."""
    if lam <= 0:
        raise DomainError("h is defined for lam > 0")
    ell = w.ell
    b_eff = min(b, ell)
    y0, born = _choose_start(w, lam, tol)
    if born:
        u = 1.0 + lam * _born_B(w, y0)
        up = lam * w.mass(y0)
        I_start = lam * _born_tail_integral(w, y0)
    else:
        u, up, I_start = 1.0, 0.0, 0.0
    # atoms sitting exactly at the start (support edge) kick the derivative
    for y_a, wgt in w.atoms:
        if y_a <= y0:
            up += lam * wgt * u
    stop_tol = tol * 1e-3

    # breakpoints: atoms and the integrand switch at b_eff
    points = sorted({y for y, _ in w.atoms if y0 < y < ell} | ({b_eff} if y0 < b_eff < ell else set()))
    atom_at = dict(w.atoms)

    state = (u, up, 0.0)
    y_cur = y0
    h_acc = b_eff + I_start
    if y0 > b_eff:
        # f = 1 (up to the Born correction) on [b_eff, y0]: the plain
        # integrand contributes its length there
        h_acc += y0 - b_eff
    stopped = False
    segments = points + [ell if math.isfinite(ell) else math.inf]
    for y_next in segments:
        if y_cur >= y_next:
            pass
        else:
            integrand = "minus" if y_cur < b_eff or (y_cur == b_eff and y_next <= b_eff) else "plain"
            if y_cur >= b_eff:
                integrand = "plain"
            use_log = y_cur < 0 and (-y_cur) / max(-min(y_next, -1e-8), 1e-8) > 50.0
            if use_log:
                y_mid = min(y_next, -1e-8) if y_next < 0 else -1e-8
                state, y_end, stopped = _integrate_segment(
                    w, lam, y_cur, y_mid, state, integrand, stop_tol, True, rtol)
                y_cur = y_mid if not stopped else y_end
                if not stopped and y_next > y_cur and abs(y_next - y_cur) > 1e-12:
                    state, y_cur, stopped = _integrate_segment(
                        w, lam, y_cur, y_next, state, integrand, stop_tol, False, rtol)
            else:
                state, y_cur, stopped = _integrate_segment(
                    w, lam, y_cur, y_next, state, integrand, stop_tol, False, rtol)
            if stopped:
                break
            if math.isfinite(y_next):
                y_cur = y_next     # snap: float drift must not flip the
                                   # integrand test at the split point
        wgt = atom_at.get(y_next)
        if wgt and not stopped:
            u, up, I = state
            state = (u, up + lam * wgt * u, I)
            y_cur = y_next
    u, up, I = state
    h_acc += I
    if stopped or math.isfinite(ell):
        # remainder of int dx/f^2 (or the 1/f^2 part of the minus-integrand)
        if math.isfinite(ell):
            rem = max(ell - y_cur, 0.0) / u ** 2
        else:
            rem = 1.0 / (u * max(up, 1e-300))
        rem = min(rem, 1.0)
        h_acc += rem / 2.0
        if y_cur < b_eff:
            # stopped before the split: the "-1" part of the integrand up to b
            h_acc += (y_cur - b_eff)
    return h_acc


def f_dual(w: DualString, lam: float, x: float, tol: float = 1e-8,
           rtol: float = 1e-10) -> float:
    """Solution f(lam; x) of the dual eigenproblem, f >= 1 non-decreasing."""
    if lam < 0:
        raise DomainError("f_dual requires lam >= 0")
    if x >= w.ell:
        raise DomainError("f_dual requires x < ell")
    if lam == 0.0:
        return 1.0
    y0, born = _choose_start(w, lam, tol)
    if x <= y0:
        return 1.0 + (lam * _born_B(w, x) if born else 0.0)
    if born:
        state = (1.0 + lam * _born_B(w, y0), lam * w.mass(y0), 0.0)
    else:
        state = (1.0, 0.0, 0.0)
    for y_a, wgt in w.atoms:
        if y_a <= y0:
            state = (state[0], state[1] + lam * wgt * state[0], state[2])
    y_cur = y0
    for y_a, wgt in sorted(w.atoms):
        if y0 < y_a < x:
            if y_cur < y_a:
                use_log = y_cur < 0 and (-y_cur) / max(-min(y_a, -1e-8), 1e-8) > 50.0
                state, y_cur, st = _integrate_segment(w, lam, y_cur, y_a, state,
                                                      "plain", 1e-30, use_log, rtol)
            u, up, I = state
            state = (u, up + lam * wgt * u, I)
            y_cur = y_a
    if y_cur < x:
        use_log = y_cur < 0 and x < 0 and (-y_cur) / max(-x, 1e-8) > 50.0
        state, y_cur, st = _integrate_segment(w, lam, y_cur, x, state, "plain",
                                              1e-30, use_log, rtol)
    return state[0]


def H(m: StringMeasure, lam: float, tol: float = 1e-8) -> float:
    """H(lam) = h of the dual string of m (dual-ODE route)."""
    return h_dual(dual(m), lam, b=0.0, tol=tol)


def spectral_function(m: StringMeasure, provenance: str = "dual_ode",
                      tol: float = 1e-8) -> SpectralFunction:
    if provenance == "closed_form":
        def fn(lam, _m=m):
            v = H_exact(_m, lam)
            if v is None:
                raise DomainError("no closed form for this string")
            return v
        return SpectralFunction(fn=fn, provenance=provenance, tol=0.0)
    if provenance == "boundary_limit":
        return SpectralFunction(fn=lambda lam: H_boundary(m, lam),
                                provenance=provenance, tol=1e-4)
    w = dual(m)
    memo = {}

    def fn(lam):
        if lam not in memo:
            memo[lam] = h_dual(w, lam, tol=tol)
        return memo[lam]

    return SpectralFunction(fn=fn, provenance="dual_ode", tol=tol)


def c1(m: StringMeasure, lam: float, tol: float = 1e-8) -> float:
    """c1(lam) = lam*H(lam) - lam*m(1); closed-form H where available."""
    if lam <= 0:
        raise DomainError("c1 is defined for lam > 0")
    h = H_exact(m, lam)
    if h is None:
        h = H(m, lam, tol=tol)
    return lam * h - lam * m.value(1.0)


# ---------------------------------------------------------------------------
# boundary-limit route
# ---------------------------------------------------------------------------

def _exponent_ladder(m: StringMeasure, levels: int) -> list:
    """Exponents of the small-x corrections to (1 - g + lam G)/x.

    For a power-family string of index alpha the correction exponents are
    {k/alpha} and {k/alpha - (1 - 1/alpha)}, k >= 1; for strings with finite
    m(0+), plain integer powers."""
    alpha = m.alpha_hint
    if alpha is None:
        cp = m.canonical_power()
        if cp is not None:
            alpha = cp[1]
    if alpha is None or alpha <= 1.0:
        return [float(k) for k in range(1, levels)]
    inv = 1.0 / alpha
    cand = sorted({k * inv for k in range(1, levels + 2)}
                  | {k * inv - (1.0 - inv) for k in range(1, levels + 2)}
                  | {float(k) for k in range(1, 4)})
    return [e for e in cand if e > 1e-9][: levels - 1]


def H_boundary(m: StringMeasure, lam: float, x0: float = 0.05, levels: int = 8,
               g_tol: float = 1e-12) -> float:
    """lim_{x->0} (1 - g(lam; x) + lam G(x)) / x = lam H(lam), accelerated by
    Richardson extrapolation on x_k = x0 2^-k with the exponent ladder of the
    string family."""
    if lam == 0.0:
        return 0.0
    xs = [x0 * 2.0 ** (-k) for k in range(levels)]
    qv = [(1.0 - eigen.g_quadrature(m, lam, x, tol=g_tol) + lam * m.G(x)) / x
          for x in xs]
    R = list(qv)
    for e in _exponent_ladder(m, levels):
        wgt = 2.0 ** e
        R = [(wgt * R[k + 1] - R[k]) / (wgt - 1.0) for k in range(len(R) - 1)]
        if len(R) == 1:
            break
    return R[0] / lam


# ---------------------------------------------------------------------------
# continuity diagnostic
# ---------------------------------------------------------------------------

def convergence_H(ms: Sequence[StringMeasure], m: StringMeasure, sigma: float,
                  lams: Sequence[float], tol: float = 1e-7):
    """Tabulate H_{m_n}(lam) - (H_m(lam) - sigma^2 lam) for a family m_n -> m
    with int_0^x m_n^2 -> sigma^2 near 0.  Diagnostic only: rows
    (n, lam, H_n, target, gap) plus a per-lam monotone-decay flag."""
    rows = []
    for lam in lams:
        target = H(m, lam, tol=tol) - sigma * sigma * lam
        gaps = []
        for n, mn in enumerate(ms):
            hn = H(mn, lam, tol=tol)
            gaps.append(abs(hn - target))
            rows.append((n, lam, hn, target, hn - target))
        monotone = all(gaps[i + 1] <= gaps[i] * 1.1 for i in range(len(gaps) - 1))
        rows.append(("monotone", lam, None, None, monotone))
    return rows
