"""Simulation of jumping-in diffusions through their excursion structure.

First-passage times
-------------------
The diffusion with generator d/dm d+/dx and speed density rho has SDE
dX = sigma(X) dW, sigma^2 = 2/rho.  Two samplers for the first hitting time
of 0 from x:

* exact: when dm = c * dm^(alpha) (the whole scaled power/log family), the
  process is a space-changed squared Bessel process of dimension 2 - 2*alpha
  and T0 = c * alpha * x^(1/alpha) / Gamma(alpha)   (Gamma(1) = Exp);
* Euler-Maruyama: adaptive step dt = (frac * x / sigma(x))^2 capped, Brownian
  bridge absorption test each step, absorption threshold x_abs with the
  mean-residual-time add-back int_0^x_abs m(y,oo) dy for finite-tail strings.

Inverse local time
------------------
The excursion point process has intensity du x n, n(dx de-start) = j(dx);
small entrance points x < eps are truncated and, when the string has a finite
tail, replaced by the deterministic drift int_(0,eps) E_x[T0] j(dx) per unit
local time (exact in the mean).  For strings with infinite tail (alpha <= 1)
the mean does not exist and the truncated pair (m, j|_(eps,oo)) is simulated
as such; callers account for the reduced jump moment.

Paths are represented by jump coordinates in local time plus the drift rate;
bilateral paths combine an independent pair and expose the occupation time
A(t) both exactly and through the sandwich bracket
eta+(ell(t)-) <= A(t) <= eta+(ell(t)), and the pathwise identity
A^-1(t) = t + eta-(eta+^-1(t)).

All randomness flows from one root seed; streams are derived with hashed
spawn keys, so results are independent of worker count and bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .strings import (DomainError, IntegrabilityError, JumpMeasure,
                      PowerJumpPart, StringMeasure, OffsetString)

__all__ = [
    "BudgetError", "IltPath", "BilateralPath", "first_passage",
    "first_passage_batch", "sample_ilt", "ilt_marginal_batch", "bilateral",
    "williams_residual", "derive_rng",
]


class BudgetError(RuntimeError):
    """Step budget exceeded; carries partial state."""

    def __init__(self, msg, n_alive=None, t_partial=None):
        super().__init__(msg)
        self.n_alive = n_alive
        self.t_partial = t_partial


def derive_rng(seed: int, *key: int) -> np.random.Generator:
    """Deterministic stream for a (seed, index...) pair."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(np.random.SeedSequence(seed))


# ---------------------------------------------------------------------------
# first passage times
# ---------------------------------------------------------------------------

def _canonical(m: StringMeasure):
    base = m
    while isinstance(base, OffsetString):
        base = base.base
    return base.canonical_power()


def exact_available(m: StringMeasure) -> bool:
    return _canonical(m) is not None


def first_passage_batch(m: StringMeasure, x0, rng, method: str = "auto",
                        frac: float = 0.08, x_abs_factor: float = 1e-4,
                        t_cap: float = math.inf, max_steps: int = 2_000_000,
                        dtype=np.float64) -> np.ndarray:
    """Vectorized samples of T0 from the start points x0."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=dtype))
    rng = _as_rng(rng)
    if method == "auto":
        method = "exact" if exact_available(m) else "em"
    if method == "exact":
        cp = _canonical(m)
        if cp is None:
            raise DomainError("exact first-passage sampler needs a scaled power/log string")
        c, alpha = cp
        xp = x0 ** np.asarray(1.0 / alpha, dtype=dtype)
        if alpha == 1.0:
            g = rng.standard_exponential(x0.shape, dtype=dtype)
        elif abs(alpha - 1.5) < 1e-12:
            g = rng.standard_exponential(x0.shape, dtype=dtype)
            z = rng.standard_normal(x0.shape, dtype=dtype)
            g += np.asarray(0.5, dtype=dtype) * z * z
        else:
            g = rng.standard_gamma(alpha, x0.shape, dtype=dtype)
        return np.asarray(c * alpha, dtype=dtype) * xp / g
    return _first_passage_em(m, x0.astype(np.float64), rng, frac, x_abs_factor,
                             t_cap, max_steps)


def _first_passage_em(m, x0, rng, frac, x_abs_factor, t_cap, max_steps):
    n = x0.size
    med = float(np.median(x0))
    x_abs = x_abs_factor * med
    try:
        residual = m.tail_integral(x_abs)
    except IntegrabilityError:
        residual = 0.0
    # reflecting ceiling where the remaining speed mass is negligible: the
    # true time spent above it is O(tail(x_hi)), but an Euler walker with no
    # time cost up there would otherwise wander in space indefinitely
    x_hi = math.inf
    if math.isfinite(m.m_inf):
        ref_tail = m.tail(max(med, x_abs * 4.0))
        x_hi = max(8.0 * med, 8.0)
        for _ in range(60):
            if m.tail(x_hi) <= 1e-12 * max(ref_tail, 1e-300) or x_hi > 1e18:
                break
            x_hi *= 2.0
    X = x0.copy()
    T = np.zeros(n)
    alive = X > x_abs
    T[~alive] = residual
    sigma = lambda x: np.sqrt(2.0 / np.array([m.density(v) for v in np.atleast_1d(x)]))
    # vectorized density for the families used in practice
    pt = m.density_power_terms()
    if pt is not None:
        cs = np.array([c for c, e in pt]); es = np.array([e for c, e in pt])
        sigma = lambda x: np.sqrt(2.0 / ((x[:, None] ** es[None, :]) @ cs))
    elif hasattr(m, "rate"):       # exponential-tail string
        sigma = lambda x: np.sqrt(2.0 / (m.coef * m.rate * np.exp(-m.rate * np.minimum(x, 700.0))))
    for step in range(max_steps):
        if not alive.any():
            break
        xa = X[alive]
        sg = sigma(xa)
        dt = np.minimum((frac * xa / sg) ** 2, 0.25)
        z = rng.standard_normal(xa.size)
        xn = xa + sg * np.sqrt(dt) * z
        t_new = T[alive] + dt
        # Brownian-bridge probability of dipping below x_abs within the step
        with np.errstate(over="ignore"):
            p_hit = np.exp(-2.0 * np.maximum(xa - x_abs, 0.0)
                           * np.maximum(xn - x_abs, 0.0) / (sg ** 2 * dt))
        hit = (xn <= x_abs) | (rng.random(xa.size) < p_hit) | (t_new > t_cap)
        idx = np.flatnonzero(alive)
        T[idx] = t_new
        X[idx] = np.minimum(np.maximum(xn, x_abs), x_hi)
        done = idx[hit]
        T[done] += residual
        alive[done] = False
    else:
        raise BudgetError(f"EM budget of {max_steps} steps exceeded",
                          n_alive=int(alive.sum()), t_partial=T)
    return T


def first_passage(m: StringMeasure, x0: float, seed, method: str = "auto",
                  **kw) -> float:
    """One sample of the first hitting time of 0 from x0 > 0."""
    if x0 <= 0:
        raise DomainError("first_passage requires x0 > 0")
    return float(first_passage_batch(m, [x0], _as_rng(seed), method=method, **kw)[0])


# ---------------------------------------------------------------------------
# inverse local time paths
# ---------------------------------------------------------------------------

@dataclass
class IltPath:
    """Non-decreasing right-continuous path: jumps (u, T) + drift per unit
    local time.  eta(u) = drift*u + sum_{u_i <= u} T_i."""

    u: np.ndarray
    T: np.ndarray
    drift: float
    horizon: float
    eps: float = 0.0
    rate: float = 0.0
    bias_bound: float = 0.0
    warn: Optional[str] = None

    def __post_init__(self):
        o = np.argsort(self.u, kind="stable")
        self.u = np.asarray(self.u, dtype=float)[o]
        self.T = np.asarray(self.T, dtype=float)[o]
        self.cum = np.concatenate([[0.0], np.cumsum(self.T)])
        self.pre = self.drift * self.u + self.cum[:-1]     # eta(u_k-)
        self.post = self.drift * self.u + self.cum[1:]     # eta(u_k)

    def eta(self, u):
        u = np.asarray(u, dtype=float)
        k = np.searchsorted(self.u, u, side="right")
        return self.drift * u + self.cum[k]

    def eta_pre(self, u):
        """eta(u-)."""
        u = np.asarray(u, dtype=float)
        k = np.searchsorted(self.u, u, side="left")
        return self.drift * u + self.cum[k]

    def inverse(self, t):
        """ell(t) = inf{u : eta(u) > t} (right-continuous inverse)."""
        t = np.asarray(t, dtype=float)
        k = np.searchsorted(self.post, t, side="right")
        if self.drift > 0:
            lo = self.cum[k]
            u_lin = (t - lo) / self.drift
            u_cap = np.where(k < len(self.u), self.u[k], self.horizon)
            return np.minimum(u_lin, u_cap)
        return np.where(k < len(self.u), self.u[k], self.horizon)

    def jump_at(self, u):
        """Jump size of eta exactly at local time u (0 if none)."""
        u = np.asarray(u, dtype=float)
        k = np.searchsorted(self.u, u, side="left")
        k = np.minimum(k, len(self.u) - 1) if len(self.u) else k
        if len(self.u) == 0:
            return np.zeros_like(u)
        return np.where(np.isclose(self.u[k], u), self.T[k], 0.0)


def _truncation_drift(m: StringMeasure, j: JumpMeasure, eps: float):
    """int_(0,eps) E_x[T0] j(dx) and the second-moment bias surrogate
    int_(0,eps) 2 (int tail)^2 j(dx)."""
    if not math.isfinite(m.m_inf):
        return 0.0, 0.0
    vt = m.value_power_terms()
    if vt is not None:
        terms, const = vt
        mi = m.m_inf
        drift = (mi - const) * j.moment(1.0, 0.0, eps)
        for c, e in terms:
            drift -= c / (e + 1.0) * j.moment(e + 1.0, 0.0, eps)
        bias = j.integrate(lambda x: 2.0 * m.tail_integral(x) ** 2, 0.0, eps)
    else:
        drift = j.integrate(m.tail_integral, 0.0, eps)
        bias = j.integrate(lambda x: 2.0 * m.tail_integral(x) ** 2, 0.0, eps)
    return drift, bias


def sample_ilt(m: StringMeasure, j: JumpMeasure, eps: float, u_horizon: float,
               seed, compensate: Optional[bool] = None,
               fp_method: str = "auto", warn_frac: float = 0.2,
               **fp_kw) -> IltPath:
    """One inverse-local-time path on local time (0, u_horizon].

    Excursions enter at rate j(eps, oo) per unit local time with start points
    from j restricted to (eps, oo); durations are first-passage samples.  When
    `compensate` (default: automatic when the string tail is finite), the
    truncated small-excursion mass is replaced by its exact mean drift.
    """
    if eps <= 0:
        raise DomainError("truncation level eps must be positive")
    rng = _as_rng(seed)
    if compensate is None:
        compensate = math.isfinite(m.m_inf)
    rate = j.mass(eps, math.inf)
    if not math.isfinite(rate):
        raise IntegrabilityError("j(eps, oo) must be finite")
    N = rng.poisson(rate * u_horizon)
    u = rng.random(N) * u_horizon
    x = j.sample_restricted(eps, N, rng)
    T = first_passage_batch(m, x, rng, method=fp_method, **fp_kw)
    warn = None
    drift = bias = 0.0
    if compensate:
        drift, bias = _truncation_drift(m, j, eps)
        try:
            b_full = None
            from .levy import drift_b
            b_full = drift_b(m, j)
            if b_full and drift > warn_frac * b_full:
                warn = (f"drift correction {drift:.4g} exceeds {warn_frac:.0%} "
                        f"of b={b_full:.4g}; consider smaller eps")
        except IntegrabilityError:
            pass
    return IltPath(u=u, T=np.asarray(T, dtype=float), drift=drift,
                   horizon=u_horizon, eps=eps, rate=rate, bias_bound=bias,
                   warn=warn)


def ilt_marginal_batch(m: StringMeasure, j: JumpMeasure, eps: float, u: float,
                       n_paths: int, seed: int, path_offset: int = 0,
                       compensate: Optional[bool] = None,
                       chunk: int = 30_000_000) -> np.ndarray:
    """eta(u) marginals for n_paths independent paths (hot loop).

    Equivalent in law to sample_ilt(...).eta(u) but skips the path structure;
    used by the fluctuation experiments where only the marginal at a fixed
    time enters.  float32 draws, float64 accumulation.
    """
    cp = _canonical(m)
    if compensate is None:
        compensate = math.isfinite(m.m_inf)
    drift = _truncation_drift(m, j, eps)[0] if compensate else 0.0
    rate = j.mass(eps, math.inf)
    single = len(j.parts) == 1 and not j.atoms and j.parts[0].lo == 0.0
    if cp is not None and single:
        part = j.parts[0]
        e1 = part.exponent + 1.0
        lo_p = max(part.lo, eps) ** e1
        hi_p = part.hi ** e1 if part.hi < math.inf else (0.0 if e1 < 0 else math.inf)
        out = np.empty(n_paths)
        for i in range(n_paths):
            rng = derive_rng(seed, path_offset + i)
            N = int(rng.poisson(rate * u))
            tot = 0.0
            for start in range(0, N, chunk):
                nn = min(chunk, N - start)
                c, alpha = cp
                w = rng.random(nn, dtype=np.float32)
                xp = (lo_p + (hi_p - lo_p) * w) ** np.float32(1.0 / (alpha * e1))
                if abs(alpha - 1.5) < 1e-12:
                    # Gamma(3/2) = Exp + Z^2/2: a joint zero cannot happen at
                    # float32 granularity, unlike a bare f32 gamma draw
                    g = rng.standard_exponential(nn, dtype=np.float32)
                    z = rng.standard_normal(nn, dtype=np.float32)
                    g += np.float32(0.5) * z * z
                elif alpha == 1.0:
                    # f32 exponentials round to 0 with probability ~ 6e-8,
                    # which the 1/g tail actually resolves; draw in f64
                    g = rng.standard_exponential(nn)
                else:
                    g = np.maximum(rng.standard_gamma(alpha, nn, dtype=np.float32),
                                   np.float32(1e-12))
                tot += c * alpha * float(np.sum(xp / g, dtype=np.float64))
            out[i] = drift * u + tot
        return out
    # generic strings: batch the first-passage work across all paths of the
    # call (per-excursion EM would otherwise dominate in solver overhead)
    rng = derive_rng(seed, path_offset, 0xB10C)
    counts = rng.poisson(rate * u, size=n_paths)
    total = int(counts.sum())
    x = j.sample_restricted(eps, total, rng)
    T = first_passage_batch(m, x, rng)
    owner = np.repeat(np.arange(n_paths), counts)
    sums = np.bincount(owner, weights=T, minlength=n_paths)
    return drift * u + sums


# ---------------------------------------------------------------------------
# bilateral paths and occupation times
# ---------------------------------------------------------------------------

@dataclass
class BilateralPath:
    """Two independent inverse-local-time paths glued into a signed process.

    The local time ell(t) is the right-continuous inverse of
    eta = eta_plus + eta_minus; the occupation time of the positive side is
    exposed exactly (position inside the current excursion) and through the
    sandwich midpoint with bracket width Delta eta(ell(t)).
    """

    plus: IltPath
    minus: IltPath

    def __post_init__(self):
        pp, pm = self.plus, self.minus
        u = np.concatenate([pp.u, pm.u])
        T = np.concatenate([pp.T, pm.T])
        side = np.concatenate([np.ones(len(pp.u), dtype=bool),
                               np.zeros(len(pm.u), dtype=bool)])
        o = np.argsort(u, kind="stable")
        self.u, self.T, self.side = u[o], T[o], side[o]
        self.drift = pp.drift + pm.drift
        self.cum = np.concatenate([[0.0], np.cumsum(self.T)])
        Tp = np.where(self.side, self.T, 0.0)
        self.cump = np.concatenate([[0.0], np.cumsum(Tp)])
        self.pre = self.drift * self.u + self.cum[:-1]
        self.post = self.drift * self.u + self.cum[1:]
        self.horizon_u = min(pp.horizon, pm.horizon)
        self.horizon_t = float(self.drift * self.horizon_u
                               + self.cum[np.searchsorted(self.u, self.horizon_u)])

    def _check_horizon(self, t):
        if np.any(np.asarray(t) > self.horizon_t):
            raise DomainError(f"t beyond simulated horizon {self.horizon_t:.6g}")

    def ell(self, t):
        """Local time at real time t."""
        self._check_horizon(t)
        t = np.asarray(t, dtype=float)
        k = np.searchsorted(self.post, t, side="right")
        if self.drift > 0:
            u_lin = (t - self.cum[k]) / self.drift
            u_cap = np.where(k < len(self.u), self.u[k], self.horizon_u)
            return np.minimum(u_lin, u_cap)
        return np.where(k < len(self.u), self.u[k], self.horizon_u)

    def A(self, t):
        """Exact occupation time of the positive side up to t."""
        self._check_horizon(t)
        t = np.asarray(t, dtype=float)
        k = np.searchsorted(self.post, t, side="right")
        kj = np.minimum(k, max(len(self.u) - 1, 0))
        in_jump = (k < len(self.u)) & (t >= self.pre[kj]) if len(self.u) else np.zeros(t.shape, bool)
        dp = self.plus.drift
        if self.drift > 0:
            u_drift = (t - self.cum[k]) / self.drift
            A_drift = self.cump[k] + dp * u_drift
        else:
            A_drift = self.cump[k]
        if len(self.u):
            A_pos = self.cump[kj] + dp * self.u[kj] + (t - self.pre[kj])
            A_neg = self.cump[kj + 1] + dp * self.u[kj]
            A_jump = np.where(self.side[kj], A_pos, A_neg)
            out = np.where(in_jump, A_jump, A_drift)
        else:
            out = A_drift
        return out

    def A_sandwich(self, t):
        """(midpoint, bracket): eta+(ell-) <= A <= eta+(ell) with width
        Delta eta(ell(t))."""
        ut = self.ell(t)
        lo = self.plus.eta_pre(ut)
        hi = self.plus.eta(ut)
        return 0.5 * (lo + hi), hi - lo

    def A_inverse(self, a):
        """A^-1(a) = a + eta_minus(eta_plus^-1(a)) (pathwise identity)."""
        up = self.plus.inverse(a)
        return np.asarray(a, dtype=float) + self.minus.eta(up)

    def A_inverse_direct(self, a):
        """inf{t : A(t) > a} by inverting the piecewise-linear A."""
        a = np.asarray(a, dtype=float)
        t_pts = np.concatenate([[0.0], np.column_stack([self.pre, self.post]).ravel()])
        A_pts = self.A(np.minimum(t_pts, self.horizon_t))
        out = np.empty(a.shape)
        idx = np.searchsorted(A_pts, a, side="right")
        idx = np.clip(idx, 1, len(t_pts) - 1)
        t0, t1 = t_pts[idx - 1], t_pts[idx]
        A0, A1 = A_pts[idx - 1], A_pts[idx]
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where(A1 > A0, (a - A0) / (A1 - A0), 1.0)
        out = t0 + frac * (t1 - t0)
        return out


def bilateral(m_plus: StringMeasure, j_plus: JumpMeasure,
              m_minus: StringMeasure, j_minus: JumpMeasure,
              t_horizon: float, seed, eps: float = 1e-5,
              u_margin: float = 1.6, **kw) -> BilateralPath:
    """Simulate a bilateral path covering real time [0, t_horizon].

    The local-time horizon is grown geometrically until the combined path
    covers t_horizon.
    """
    rng = _as_rng(seed)
    try:
        from .levy import drift_b
        b_tot = drift_b(m_plus, j_plus) + drift_b(m_minus, j_minus)
        u_guess = u_margin * t_horizon / b_tot + 2.0
    except IntegrabilityError:
        u_guess = max(2.0 * math.sqrt(t_horizon), 2.0)
    for _ in range(24):
        pp = sample_ilt(m_plus, j_plus, eps, u_guess, rng, **kw)
        pm = sample_ilt(m_minus, j_minus, eps, u_guess, rng, **kw)
        bi = BilateralPath(plus=pp, minus=pm)
        if bi.horizon_t > t_horizon:
            return bi
        u_guess *= 2.0
    raise BudgetError("horizon not reached; degenerate configuration?")


def williams_residual(path: BilateralPath, t_grid) -> float:
    """max_t |A^-1(t) - (t + eta_-(eta_+^-1(t)))| over occupation levels
    t_grid, comparing the identity against direct inversion of A."""
    t_grid = np.asarray(t_grid, dtype=float)
    lhs = path.A_inverse_direct(t_grid)
    rhs = path.A_inverse(t_grid)
    return float(np.max(np.abs(lhs - rhs)))
