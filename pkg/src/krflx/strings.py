"""Strings (speed measures) on (0, oo), jumping-in measures, and their calculus.

A string is a non-decreasing right-continuous function m: (0, oo) -> R; it is
the speed measure of the operator d/dm d+/dx under natural scale s(x) = x.
This module provides:

* closed-form string families (monomial, logarithmic, exponential-tail) and
  tabulated strings with power-law extrapolation at both ends,
* lazy rescale / offset / clip wrappers,
* derived integrals G(x) = int_0^x m, G1(x) = int_0^x (m - m(1)),
* the Stieltjes "bullet" integral U*f(x) = int_0^x f dU,
* generalized-inverse (dual) strings on (-oo, oo),
* boundary classification at 0 via the two Feller integrals,
* square-integrability (class M1) and jumping-in admissibility checks, both
  returning three-valued certificates,
* JSON (de)serialization of measure specs.

Everything is immutable after construction; all operations are pure.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.integrate import quad

INF = math.inf

TRUE = "true"
FALSE = "false"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class Certificate:
    """Three-valued verdict with the numbers that justify it."""

    status: str
    detail: str
    values: tuple = ()

    def __bool__(self) -> bool:
        if self.status == INCONCLUSIVE:
            raise ValueError("inconclusive certificate has no boolean value: " + self.detail)
        return self.status == TRUE


class DomainError(ValueError):
    pass


class IntegrabilityError(ValueError):
    """An integral required by the operation diverges; detail names the bound."""


# ---------------------------------------------------------------------------
# string measures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StringMeasure:
    """Base class; subclasses define value(), density(), m_inf."""

    alpha_hint: Optional[float] = field(default=None, kw_only=True)

    # -- core evaluations ---------------------------------------------------
    def value(self, x: float) -> float:
        raise NotImplementedError

    def density(self, x: float) -> float:
        raise NotImplementedError

    @property
    def m_inf(self) -> float:
        raise NotImplementedError

    def m_zero(self) -> float:
        """m(0+), possibly -inf."""
        raise NotImplementedError

    def __call__(self, x):
        if np.ndim(x) == 0:
            if x <= 0:
                raise DomainError(f"string evaluated at x={x} <= 0")
            return self.value(float(x))
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0):
            raise DomainError("string evaluated at non-positive x")
        return np.vectorize(self.value)(x)

    # -- structure hooks ----------------------------------------------------
    def density_power_terms(self):
        """(coef, exponent) pairs with rho(x) = sum coef*x**exponent on all of
        (0, oo), or None when the density is not a global power sum."""
        return None

    def value_power_terms(self):
        """((coef, exponent), ...), const) with
        m(x) = sum coef*x**exponent + const, or None (e.g. log strings)."""
        return None

    def canonical_power(self):
        """(c, alpha) such that the measure dm equals c * dm^(alpha)
        (same speed measure as the scaled power family), or None."""
        return None

    def measure(self, a: float, b: float) -> float:
        """Mass of (a, b], 0 < a <= b."""
        if not 0 < a <= b:
            raise DomainError("measure requires 0 < a <= b")
        return self.value(b) - self.value(a)

    # -- derived integrals ----------------------------------------------------
    def G(self, x: float) -> float:
        """int_0^x m(y) dy (closed form where available, else quadrature)."""
        if x == 0:
            return 0.0
        vt = self.value_power_terms()
        if vt is not None:
            terms, const = vt
            tot = const * x
            for c, e in terms:
                if e <= -1:
                    raise IntegrabilityError(f"int_0 m diverges: exponent {e} <= -1")
                tot += c * x ** (e + 1.0) / (e + 1.0)
            return tot
        val, err = quad(self.value, 0.0, x, limit=200)
        return val

    def G1(self, x: float) -> float:
        """int_0^x (m(y) - m(1)) dy."""
        return self.G(x) - self.value(1.0) * x

    def tail(self, x: float, require_finite: bool = False) -> float:
        """m(x, oo) = m(oo) - m(x)."""
        if x <= 0:
            raise DomainError("tail requires x > 0")
        t = self.m_inf - self.value(x)
        if require_finite and not math.isfinite(t):
            raise IntegrabilityError("infinite tail: m(oo) is not finite")
        return t

    def tail_integral(self, x: float) -> float:
        """int_0^x m(y, oo) dy; the mean exit time from x when it is finite."""
        if not math.isfinite(self.m_inf):
            raise IntegrabilityError("infinite tail: m(oo) is not finite")
        return self.m_inf * x - self.G(x)

    # -- grid hints for the numeric backend ----------------------------------
    def grid_left_exponent(self) -> float:
        """Density behaves like c*x**e near 0; returns e."""
        pt = self.density_power_terms()
        if pt:
            return min(e for _, e in pt)
        raise NotImplementedError

    def strictly_increasing(self) -> bool:
        return True


@dataclass(frozen=True)
class MonomialString(StringMeasure):
    """m(x) = coef * x**power with coef*power > 0 (non-decreasing)."""

    coef: float = 1.0
    power: float = 1.0

    def __post_init__(self):
        if self.coef * self.power <= 0:
            raise DomainError("monomial string requires coef*power > 0")

    def value(self, x):
        return self.coef * x ** self.power

    def density(self, x):
        return self.coef * self.power * x ** (self.power - 1.0)

    @property
    def m_inf(self):
        return INF if self.power > 0 else 0.0

    def m_zero(self):
        return 0.0 if self.power > 0 else -INF

    def density_power_terms(self):
        return ((self.coef * self.power, self.power - 1.0),)

    def value_power_terms(self):
        return ((self.coef, self.power),), 0.0

    def canonical_power(self):
        alpha = 1.0 / (self.power + 1.0)
        if not 0 < alpha < 2 or alpha == 1.0:
            return None
        ref = -1.0 / (alpha - 1.0) if alpha > 1 else 1.0 / (1.0 - alpha)
        return self.coef / ref, alpha


@dataclass(frozen=True)
class LogString(StringMeasure):
    """m(x) = coef * log x, coef > 0."""

    coef: float = 1.0

    def __post_init__(self):
        if self.coef <= 0:
            raise DomainError("log string requires coef > 0")

    def value(self, x):
        return self.coef * math.log(x)

    def density(self, x):
        return self.coef / x

    @property
    def m_inf(self):
        return INF

    def m_zero(self):
        return -INF

    def density_power_terms(self):
        return ((self.coef, -1.0),)

    def G(self, x):
        return self.coef * (x * math.log(x) - x) if x > 0 else 0.0

    def canonical_power(self):
        return self.coef, 1.0


@dataclass(frozen=True)
class ExpTailString(StringMeasure):
    """m(x) = -coef * exp(-rate*x); square-summable tail, m(oo) = 0."""

    coef: float = 1.0
    rate: float = 1.0

    def __post_init__(self):
        if self.coef <= 0 or self.rate <= 0:
            raise DomainError("exp-tail string requires coef, rate > 0")

    def value(self, x):
        return -self.coef * math.exp(-self.rate * x)

    def density(self, x):
        return self.coef * self.rate * math.exp(-self.rate * x)

    @property
    def m_inf(self):
        return 0.0

    def m_zero(self):
        return -self.coef

    def G(self, x):
        return self.coef / self.rate * (math.exp(-self.rate * x) - 1.0)

    def grid_left_exponent(self):
        return 0.0


@dataclass(frozen=True)
class TableString(StringMeasure):
    """Tabulated string: values m_j at geometric nodes x_j, density modelled as
    one power law per cell and extrapolated with declared exponents beyond the
    table.  left/right exponents refer to the density rho ~ c*x**e."""

    x: tuple = ()
    m: tuple = ()
    left_exponent: float = 0.0
    right_exponent: float = -2.0

    def __post_init__(self):
        xs = np.asarray(self.x, dtype=float)
        ms = np.asarray(self.m, dtype=float)
        if xs.ndim != 1 or xs.size < 2 or xs.size != ms.size:
            raise DomainError("table requires matching x/m arrays, length >= 2")
        if np.any(np.diff(xs) <= 0) or np.any(xs <= 0):
            raise DomainError("table nodes must be positive and increasing")
        if np.any(np.diff(ms) < 0):
            raise DomainError("table values must be non-decreasing")
        object.__setattr__(self, "x", tuple(map(float, xs)))
        object.__setattr__(self, "m", tuple(map(float, ms)))
        # per-cell power density c*x**s matching the increment with the slope
        # of neighbouring increments in log-log scale
        a, b = xs[:-1], xs[1:]
        dm = np.diff(ms)
        mid = np.sqrt(a * b)
        with np.errstate(divide="ignore", invalid="ignore"):
            dens_mid = dm / (b - a)
        s = np.gradient(np.log(np.maximum(dens_mid, 1e-300)), np.log(mid))
        s = np.clip(s, -6.0, 6.0)
        e = s + 1.0
        c = dm * e / (b ** e - a ** e)
        c = np.where(dm > 0, c, 0.0)
        object.__setattr__(self, "_cell_s", s)
        object.__setattr__(self, "_cell_c", c)

    def _locate(self, x):
        return int(np.searchsorted(self.x, x, side="right")) - 1

    def value(self, x):
        xs, ms = self.x, self.m
        if x <= xs[0]:
            # density c*x**e below the table with declared exponent
            e = self.left_exponent
            c = self._cell_c[0] * xs[0] ** (self._cell_s[0] - e)
            if e <= -1.0:
                return ms[0] - c * (xs[0] ** (e + 1) - x ** (e + 1)) / (e + 1)
            return ms[0] - c * (xs[0] ** (e + 1) - x ** (e + 1)) / (e + 1)
        if x >= xs[-1]:
            e = self.right_exponent
            c = self._cell_c[-1] * xs[-1] ** (self._cell_s[-1] - e)
            if e >= -1.0:
                return ms[-1] + c * (x ** (e + 1) - xs[-1] ** (e + 1)) / (e + 1)
            return ms[-1] + c * (x ** (e + 1) - xs[-1] ** (e + 1)) / (e + 1)
        j = self._locate(x)
        a = xs[j]
        s, c = self._cell_s[j], self._cell_c[j]
        return ms[j] + c * (x ** (s + 1) - a ** (s + 1)) / (s + 1)

    def density(self, x):
        xs = self.x
        if x <= xs[0]:
            e = self.left_exponent
            c = self._cell_c[0] * xs[0] ** (self._cell_s[0] - e)
            return c * x ** e
        if x >= xs[-1]:
            e = self.right_exponent
            c = self._cell_c[-1] * xs[-1] ** (self._cell_s[-1] - e)
            return c * x ** e
        j = self._locate(x)
        return self._cell_c[j] * x ** self._cell_s[j]

    @property
    def m_inf(self):
        if self.right_exponent >= -1.0:
            return INF
        e = self.right_exponent
        c = self._cell_c[-1] * self.x[-1] ** (self._cell_s[-1] - e)
        return self.m[-1] - c * self.x[-1] ** (e + 1) / (e + 1)

    def m_zero(self):
        e = self.left_exponent
        if e <= -1.0:
            return -INF
        c = self._cell_c[0] * self.x[0] ** (self._cell_s[0] - e)
        return self.m[0] - c * self.x[0] ** (e + 1) / (e + 1)

    def grid_left_exponent(self):
        return self.left_exponent


@dataclass(frozen=True)
class ScaledString(StringMeasure):
    """Lazy wrapper a*m(b*x)."""

    base: StringMeasure = None
    a: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise DomainError("rescale requires a, b > 0")

    def value(self, x):
        return self.a * self.base.value(self.b * x)

    def density(self, x):
        return self.a * self.b * self.base.density(self.b * x)

    @property
    def m_inf(self):
        return self.a * self.base.m_inf

    def m_zero(self):
        return self.a * self.base.m_zero()

    def density_power_terms(self):
        pt = self.base.density_power_terms()
        if pt is None:
            return None
        return tuple((self.a * self.b ** (e + 1.0) * c, e) for c, e in pt)

    def value_power_terms(self):
        vt = self.base.value_power_terms()
        if vt is None:
            return None
        terms, const = vt
        return tuple((self.a * c * self.b ** e, e) for c, e in terms), self.a * const

    def canonical_power(self):
        cp = self.base.canonical_power()
        if cp is None:
            return None
        c, alpha = cp
        if alpha == 1.0:
            # a*c*log(b x) = a*c*log x + const: same measure as a*c*log x
            return self.a * c, 1.0
        return self.a * c * self.b ** (1.0 / alpha - 1.0), alpha

    def G(self, x):
        return self.a / self.b * self.base.G(self.b * x)

    def grid_left_exponent(self):
        return self.base.grid_left_exponent()


@dataclass(frozen=True)
class OffsetString(StringMeasure):
    """m(x) + offset: same measure dm, shifted values."""

    base: StringMeasure = None
    offset: float = 0.0

    def value(self, x):
        return self.base.value(x) + self.offset

    def density(self, x):
        return self.base.density(x)

    @property
    def m_inf(self):
        return self.base.m_inf + self.offset

    def m_zero(self):
        return self.base.m_zero() + self.offset

    def density_power_terms(self):
        return self.base.density_power_terms()

    def value_power_terms(self):
        vt = self.base.value_power_terms()
        if vt is None:
            return None
        terms, const = vt
        return terms, const + self.offset

    def canonical_power(self):
        return self.base.canonical_power()

    def G(self, x):
        return self.base.G(x) + self.offset * x

    def grid_left_exponent(self):
        return self.base.grid_left_exponent()


@dataclass(frozen=True)
class ClippedString(StringMeasure):
    """m clipped to the constant `floor` on (0, x0]; an atom of mass
    base(x0) - floor sits at x0.  Used to concentrate square mass near 0."""

    base: StringMeasure = None
    floor: float = 0.0
    x0: float = 0.0

    def __post_init__(self):
        if self.x0 <= 0:
            raise DomainError("clip point must be positive")
        if self.base.value(self.x0) < self.floor - 1e-9 * (abs(self.floor) + 1.0):
            raise DomainError("clip floor exceeds base value at x0; not monotone")

    def value(self, x):
        return self.floor if x <= self.x0 else self.base.value(x)

    def density(self, x):
        return 0.0 if x <= self.x0 else self.base.density(x)

    @property
    def m_inf(self):
        return self.base.m_inf

    def m_zero(self):
        return self.floor

    def G(self, x):
        if x <= self.x0:
            return self.floor * x
        return self.floor * self.x0 + (self.base.G(x) - self.base.G(self.x0)) + 0.0

    def strictly_increasing(self):
        return False


def power_string(alpha: float) -> StringMeasure:
    """The reference string of index alpha in (0,2): the speed measure of a
    Bessel process of dimension 2 - 2*alpha under natural scale.

    m(x) = (1-alpha)^-1 x^(1/alpha - 1)   alpha in (0,1)
           log x                          alpha = 1
           -(alpha-1)^-1 x^(1/alpha - 1)  alpha in (1,2)

    Density rho(x) = (1/alpha) x^(1/alpha - 2) in all three branches.
    """
    if not 0 < alpha < 2:
        raise DomainError(f"alpha must lie in (0,2), got {alpha}")
    if alpha == 1.0:
        return LogString(coef=1.0, alpha_hint=1.0)
    coef = 1.0 / (1.0 - alpha) if alpha < 1 else -1.0 / (alpha - 1.0)
    return MonomialString(coef=coef, power=1.0 / alpha - 1.0, alpha_hint=alpha)


def identity_string() -> StringMeasure:
    """m(x) = x (dm = dx)."""
    return MonomialString(coef=1.0, power=1.0)


# ---------------------------------------------------------------------------
# jumping-in measures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PowerJumpPart:
    """Density coef * x**exponent on (lo, hi]."""

    coef: float
    exponent: float
    lo: float
    hi: float

    def moment(self, k: float, lo: float = 0.0, hi: float = INF) -> float:
        """int x^k over the part intersected with (lo, hi]."""
        a, b = max(self.lo, lo), min(self.hi, hi)
        if a >= b:
            return 0.0
        e = self.exponent + k
        if a == 0.0 and e <= -1.0:
            return INF
        if b == INF and e >= -1.0:
            return INF
        if e == -1.0:
            return self.coef * math.log(b / a)
        top = self.coef * b ** (e + 1.0) / (e + 1.0) if b < INF else 0.0
        bot = self.coef * a ** (e + 1.0) / (e + 1.0) if a > 0 else 0.0
        return top - bot


@dataclass(frozen=True)
class JumpMeasure:
    """Radon measure j on (0, oo): power-density parts plus atoms."""

    parts: tuple = ()
    atoms: tuple = ()      # ((x, weight), ...)

    def moment(self, k: float, lo: float = 0.0, hi: float = INF) -> float:
        tot = sum(p.moment(k, lo, hi) for p in self.parts)
        tot += sum(w * x ** k for x, w in self.atoms if lo < x <= hi)
        return tot

    def mass(self, lo: float = 0.0, hi: float = INF) -> float:
        return self.moment(0.0, lo, hi)

    @property
    def kappa(self) -> float:
        """int_0^oo x j(dx)."""
        return self.moment(1.0)

    def density(self, x: float) -> float:
        return sum(p.coef * x ** p.exponent for p in self.parts if p.lo < x <= p.hi)

    def integrate(self, f: Callable[[float], float], lo: float, hi: float,
                  tol: float = 1e-10) -> float:
        """int f dj over (lo, hi] by closed parts + quadrature."""
        import warnings as _warnings
        tot = 0.0
        for p in self.parts:
            a, b = max(p.lo, lo), min(p.hi, hi)
            if a < b:
                with _warnings.catch_warnings():
                    _warnings.simplefilter("ignore")
                    val, err = quad(lambda x: f(x) * p.coef * x ** p.exponent,
                                    a, b, limit=400, epsabs=tol, epsrel=tol)
                tot += val
        tot += sum(w * f(x) for x, w in self.atoms if lo < x <= hi)
        return tot

    def scaled(self, c: float) -> "JumpMeasure":
        """c * j."""
        return JumpMeasure(
            parts=tuple(PowerJumpPart(c * p.coef, p.exponent, p.lo, p.hi) for p in self.parts),
            atoms=tuple((x, c * w) for x, w in self.atoms),
        )

    def pushforward(self, gamma: float) -> "JumpMeasure":
        """j_gamma(dx) = gamma * j(d(gamma x)): mass at x/gamma, weighted by gamma."""
        return JumpMeasure(
            parts=tuple(
                PowerJumpPart(gamma ** (2.0 + p.exponent) * p.coef, p.exponent,
                              p.lo / gamma, p.hi / gamma)
                for p in self.parts
            ),
            atoms=tuple((x / gamma, gamma * w) for x, w in self.atoms),
        )

    def __add__(self, other: "JumpMeasure") -> "JumpMeasure":
        return JumpMeasure(parts=self.parts + other.parts, atoms=self.atoms + other.atoms)

    def sample_restricted(self, eps: float, n: int, rng: np.random.Generator,
                          dtype=np.float64) -> np.ndarray:
        """n iid points from j restricted to (eps, oo), normalized."""
        weights = [p.moment(0.0, eps, INF) for p in self.parts]
        weights += [w for x, w in self.atoms if x > eps]
        tot = float(sum(weights))
        if tot <= 0 or not math.isfinite(tot):
            raise IntegrabilityError("cannot normalize j on (eps, oo)")
        kinds = rng.choice(len(weights), size=n, p=np.asarray(weights) / tot)
        out = np.empty(n, dtype=dtype)
        np_parts = len(self.parts)
        for i, p in enumerate(self.parts):
            mask = kinds == i
            k = int(mask.sum())
            if k == 0:
                continue
            a, b = max(p.lo, eps), p.hi
            e = p.exponent
            u = rng.random(k, dtype=dtype)
            if e == -1.0:
                out[mask] = a * (b / a) ** u
            else:
                e1 = e + 1.0
                lo_p, hi_p = a ** e1, (b ** e1 if b < INF else (0.0 if e1 < 0 else INF))
                out[mask] = (lo_p + (hi_p - lo_p) * u) ** (1.0 / e1)
        live_atoms = [x for x, w in self.atoms if x > eps]
        for i, xa in enumerate(live_atoms):
            out[kinds == np_parts + i] = xa
        return out


def power_jump(coef: float = 1.0, exponent: float = -1.5,
               support: Sequence[float] = (0.0, 1.0)) -> JumpMeasure:
    lo, hi = support
    return JumpMeasure(parts=(PowerJumpPart(coef, exponent, lo, hi),))


# ---------------------------------------------------------------------------
# basic operations
# ---------------------------------------------------------------------------

def eval_m(m: StringMeasure, x: float) -> float:
    return m(x)


def tail(m: StringMeasure, x: float, require_finite: bool = False) -> float:
    return m.tail(x, require_finite=require_finite)


def G(m: StringMeasure, x: float) -> float:
    if x < 0:
        raise DomainError("G requires x >= 0")
    return m.G(x)


def G1(m: StringMeasure, x: float) -> float:
    if x < 0:
        raise DomainError("G1 requires x >= 0")
    return m.G1(x)


def rescale(m: StringMeasure, a: float, b: float) -> StringMeasure:
    """a * m(b * x); two rescales compose multiplicatively."""
    if isinstance(m, ScaledString):
        return ScaledString(base=m.base, a=a * m.a, b=b * m.b, alpha_hint=m.alpha_hint)
    return ScaledString(base=m, a=a, b=b, alpha_hint=m.alpha_hint)


def normalize_tail(m: StringMeasure) -> StringMeasure:
    """Shift so that m(oo) = 0 (finite m(oo) required); the shift is stored so
    that boundary formulas involving m(1) stay consistent."""
    if not math.isfinite(m.m_inf):
        raise IntegrabilityError("normalize_tail requires finite m(oo)")
    if m.m_inf == 0.0:
        return m
    return OffsetString(base=m, offset=-m.m_inf, alpha_hint=m.alpha_hint)


def bullet(U, f: Callable[[float], float], x: float, tol: float = 1e-11) -> float:
    """U*f(x) = int_0^x f(y) dU(y).

    U may be a StringMeasure, the literal "s" (Lebesgue), or a constant (zero
    measure).  f is a callable on (0, x].
    """
    if x < 0:
        raise DomainError("bullet requires x >= 0")
    if x == 0:
        return 0.0
    if isinstance(U, (int, float)):
        return 0.0
    if U == "s" if isinstance(U, str) else False:
        val, err = quad(f, 0.0, x, limit=400, epsabs=tol, epsrel=tol)
        return val
    integrand = lambda y: f(y) * U.density(y)
    val, err = quad(integrand, 0.0, x, limit=400, epsabs=tol, epsrel=tol,
                    points=[0.0, x] if x < INF else None)
    if not math.isfinite(val):
        raise IntegrabilityError("bullet integrand not integrable near 0")
    return val


# ---------------------------------------------------------------------------
# dual strings (generalized inverses) on (-oo, oo)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DualString:
    """w(y) = inf{x > 0 : m(x) > y} packaged for the spectral ODE.

    mass(y)     -- w(y)
    density(y)  -- dw/dy where absolutely continuous
    atoms       -- ((y, weight), ...) jump locations of w
    support_lo  -- no mass strictly below this level (-inf allowed)
    ell         -- inf{y : w(y) = oo}
    moment(k,y) -- int_{-oo}^y z^k dw(z) = int_0^{w(y)} m(x)^k dx
    """

    m: StringMeasure
    support_lo: float
    ell: float
    atoms: tuple = ()

    def mass(self, y: float) -> float:
        raise NotImplementedError

    def density(self, y: float) -> float:
        raise NotImplementedError

    def moment(self, k: int, y: float) -> float:
        """int_{-oo}^y z^k dw = int_0^{mass(y)} m(x)^k dx."""
        xhi = self.mass(y)
        if xhi == 0.0:
            return 0.0
        vt = self.m.value_power_terms()
        if vt is not None and k in (1, 2):
            terms, const = vt
            if k == 1:
                return self.m.G(xhi)
            # expand (sum c x^e + const)^2
            tot = const * const * xhi
            for c1, e1 in terms:
                tot += 2.0 * const * c1 * xhi ** (e1 + 1.0) / (e1 + 1.0)
                for c2, e2 in terms:
                    e = e1 + e2
                    if e <= -1.0:
                        return INF
                    tot += c1 * c2 * xhi ** (e + 1.0) / (e + 1.0)
            return tot
        val, err = quad(lambda x: self.m.value(x) ** k, 0.0, xhi, limit=200)
        return val


@dataclass(frozen=True)
class _InverseDual(DualString):
    """Dual with an explicit inverse callable (no atoms)."""

    inverse: Callable[[float], float] = None
    inv_density: Callable[[float], float] = None

    def mass(self, y):
        if y >= self.ell:
            return INF
        if y <= self.support_lo:
            return 0.0
        return self.inverse(y)

    def density(self, y):
        if y <= self.support_lo or y >= self.ell:
            return 0.0
        return self.inv_density(y)


@dataclass(frozen=True)
class _ClippedDual(DualString):
    base_dual: DualString = None
    floor: float = 0.0
    x0: float = 0.0
    base_at_x0: float = 0.0

    def mass(self, y):
        if y < self.floor:
            return 0.0
        if y < self.base_at_x0:
            return self.x0
        return self.base_dual.mass(y)

    def density(self, y):
        if y < self.base_at_x0:
            return 0.0
        return self.base_dual.density(y)

    def moment(self, k, y):
        if y < self.floor:
            return 0.0
        tot = self.floor ** k * self.x0          # atom at floor, weight x0
        if y < self.base_at_x0:
            return tot
        xhi = self.base_dual.mass(y)
        val, err = quad(lambda x: self.base_dual.m.value(x) ** k, self.x0, xhi, limit=200)
        return tot + val


def dual(m: StringMeasure) -> DualString:
    """The dual string m*(y) = inf{x > 0 | m(x) > y} on (-oo, oo)."""
    if isinstance(m, MonomialString):
        c, p = m.coef, m.power
        inv = lambda y: (y / c) ** (1.0 / p)
        invd = lambda y: (1.0 / (p * c)) * (y / c) ** (1.0 / p - 1.0)
        if p > 0:
            return _InverseDual(m=m, support_lo=0.0, ell=INF, inverse=inv, inv_density=invd)
        return _InverseDual(m=m, support_lo=-INF, ell=0.0, inverse=inv, inv_density=invd)
    if isinstance(m, LogString):
        c = m.coef
        return _InverseDual(m=m, support_lo=-INF, ell=INF,
                            inverse=lambda y: math.exp(y / c),
                            inv_density=lambda y: math.exp(y / c) / c)
    if isinstance(m, ExpTailString):
        c, r = m.coef, m.rate
        return _InverseDual(m=m, support_lo=-c, ell=0.0,
                            inverse=lambda y: -math.log(-y / c) / r,
                            inv_density=lambda y: -1.0 / (r * y))
    if isinstance(m, ScaledString):
        base_d = dual(m.base)
        a, b = m.a, m.b
        sub = base_d
        return _InverseDual(
            m=m,
            support_lo=a * sub.support_lo,
            ell=a * sub.ell,
            inverse=lambda y: sub.mass(y / a) / b,
            inv_density=lambda y: sub.density(y / a) / (a * b),
        )
    if isinstance(m, OffsetString):
        base_d = dual(m.base)
        d = m.offset
        sub = base_d
        return _InverseDual(
            m=m,
            support_lo=sub.support_lo + d,
            ell=sub.ell + d,
            inverse=lambda y: sub.mass(y - d),
            inv_density=lambda y: sub.density(y - d),
        )
    if isinstance(m, ClippedString):
        base_d = dual(m.base)
        bx0 = m.base.value(m.x0)
        return _ClippedDual(m=m, support_lo=m.floor, ell=base_d.ell,
                            atoms=((m.floor, m.x0 - base_d.mass(m.floor)),),
                            base_dual=base_d, floor=m.floor, x0=m.x0, base_at_x0=bx0)
    if isinstance(m, TableString):
        if not m.strictly_increasing():
            raise DomainError("dual of a table requires a strictly increasing table")
        xs = np.asarray(m.x)
        ms = np.asarray(m.m)

        def inv(y):
            if y <= ms[0]:
                # closed-form inversion of the left power extrapolation
                e = m.left_exponent
                c = m._cell_c[0] * xs[0] ** (m._cell_s[0] - e)
                base = xs[0] ** (e + 1) + (y - ms[0]) * (e + 1) / c
                if base <= 0.0:
                    return 0.0
                return base ** (1.0 / (e + 1))
            if y >= ms[-1]:
                e = m.right_exponent
                c = m._cell_c[-1] * xs[-1] ** (m._cell_s[-1] - e)
                if e < -1.0 and y >= m.m_inf:
                    return INF
                base = xs[-1] ** (e + 1) + (y - ms[-1]) * (e + 1) / c
                return base ** (1.0 / (e + 1))
            j = int(np.searchsorted(ms, y, side="right")) - 1
            lo, hi = xs[j], xs[min(j + 1, len(xs) - 1)]
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if m.value(mid) > y:
                    hi = mid
                else:
                    lo = mid
                if hi - lo < 1e-14 * max(1.0, hi):
                    break
            return hi

        def invd(y):
            x = inv(y)
            rho = m.density(x)
            return 1.0 / rho if rho > 0 else 0.0

        ell = m.m_inf
        return _InverseDual(m=m, support_lo=m.m_zero(), ell=ell, inverse=inv, inv_density=invd)
    raise NotImplementedError(f"dual not implemented for {type(m).__name__}")


# ---------------------------------------------------------------------------
# boundary classification and admissibility checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundaryClass:
    kind: str          # regular | exit | entrance | natural
    I: float
    J: float


def classify_boundary(m: StringMeasure) -> BoundaryClass:
    """Feller classification of the boundary 0 under natural scale:
    I = int_0^1 dy int_0^y dm(z), J = int_0^1 dm(y) int_0^y dz."""
    m0 = m.m_zero()
    if m0 == -INF:
        I = INF
    else:
        # I = int_0^1 (m(y) - m(0+)) dy = G(1) - m(0+)
        try:
            I = m.G(1.0) - m0
        except IntegrabilityError:
            I = INF
    # J = int_0^1 y dm(y)
    pt = m.density_power_terms()
    if pt is not None:
        J = 0.0
        for c, e in pt:
            if e + 1.0 <= -1.0:
                J = INF
                break
            J += c / (e + 2.0)
    else:
        val, err = quad(lambda y: y * m.density(y), 0.0, 1.0, limit=200)
        J = val if math.isfinite(val) else INF
        if isinstance(m, ClippedString):
            J += m.x0 * (m.base.value(m.x0) - m.floor)
    if math.isfinite(I) and math.isfinite(J):
        kind = "regular"
    elif math.isfinite(J):
        kind = "exit"
    elif math.isfinite(I):
        kind = "entrance"
    else:
        kind = "natural"
    return BoundaryClass(kind=kind, I=I, J=J)


def check_M1(m: StringMeasure, delta: float = 1.0) -> Certificate:
    """Strictly increasing + int_{0+} m(x)^2 dx < oo."""
    if not m.strictly_increasing():
        return Certificate(FALSE, "string is not strictly increasing")
    vt = m.value_power_terms()
    if vt is not None:
        terms, const = vt
        worst = min((e for c, e in terms if c != 0.0), default=0.0)
        margin = 2.0 * worst + 1.0
        if abs(margin) < 1e-12:
            return Certificate(INCONCLUSIVE,
                               f"borderline exponent: 2*{worst} + 1 ~ 0")
        if margin > 0:
            return Certificate(TRUE, f"analytic: value exponent {worst} > -1/2",
                               values=(worst,))
        return Certificate(FALSE, f"analytic: value exponent {worst} <= -1/2",
                           values=(worst,))
    if isinstance(m, LogString):
        return Certificate(TRUE, "analytic: log^2 is integrable at 0")
    if isinstance(m, ExpTailString):
        return Certificate(TRUE, "analytic: bounded near 0")
    # numeric: extrapolated quadrature of int_0^d m^2 on shrinking d
    try:
        vals = []
        for d in (delta, delta / 4.0, delta / 16.0, delta / 64.0):
            v, err = quad(lambda x: m.value(x) ** 2, 0.0, d, limit=400)
            vals.append(v)
        if not all(math.isfinite(v) for v in vals):
            return Certificate(FALSE, "quadrature diverged", values=tuple(vals))
        # Cauchy differences must vanish geometrically for a convergent tail
        d1 = vals[0] - vals[1]
        d2 = vals[1] - vals[2]
        d3 = vals[2] - vals[3]
        if d2 <= 0 or d1 <= 0:
            return Certificate(TRUE, "numeric: integral stabilized", values=tuple(vals))
        ratio = d3 / d2
        if ratio < 0.9:
            return Certificate(TRUE, f"numeric: contraction ratio {ratio:.3f} < 0.9",
                               values=tuple(vals))
        if ratio > 1.1:
            return Certificate(FALSE, f"numeric: differences growing (ratio {ratio:.3f})",
                               values=tuple(vals))
        return Certificate(INCONCLUSIVE, f"numeric: contraction ratio {ratio:.3f} in [0.9,1.1]",
                           values=tuple(vals))
    except Exception as exc:  # quadrature blow-up counts as divergence evidence
        return Certificate(INCONCLUSIVE, f"quadrature failed: {exc}")


def check_condition_C(m: StringMeasure, j: JumpMeasure, x0: float = 1.0) -> Certificate:
    """Admissibility of (m, j) for a jumping-in diffusion with m(0+) = -oo or
    an exit-type origin:

      (i)  j(x0, oo) + int_0^x0 x j(dx) + int_0^x0 |G_m(x)| j(dx) < oo,
      (ii) j(0, x0) = oo.
    """
    far = j.mass(x0, INF)
    xm = j.moment(1.0, 0.0, x0)
    # |G| ~ c x^{e+1} near 0 for power values; integrate |G| dj
    try:
        def absG(x):
            return abs(m.G(x))
        gm = 0.0
        import warnings as _warnings
        for p in j.parts:
            a, b = p.lo, min(p.hi, x0)
            if a < b:
                vt = m.value_power_terms()
                if vt is not None and a == 0.0:
                    terms, const = vt
                    worst = min((e for c, e in terms if c != 0.0), default=0.0)
                    if worst + 1.0 + p.exponent <= -1.0:
                        gm = INF
                        break
                with _warnings.catch_warnings():
                    _warnings.simplefilter("ignore")
                    val, err = quad(lambda x: absG(x) * p.coef * x ** p.exponent,
                                    a, b, limit=400)
                gm += val
        gm += sum(w * absG(x) for x, w in j.atoms if 0 < x <= x0)
    except IntegrabilityError:
        gm = INF
    near_mass = j.mass(0.0, x0)
    vals = (far, xm, gm, near_mass)
    if not all(math.isfinite(v) for v in (far, xm, gm)):
        bad = ["j(x0,oo)", "int x j", "int |G| j"][[far, xm, gm].index(
            next(v for v in (far, xm, gm) if not math.isfinite(v)))]
        return Certificate(FALSE, f"clause (i) fails: {bad} diverges", values=vals)
    if math.isfinite(near_mass):
        return Certificate(FALSE, f"clause (ii) fails: j(0,{x0}) = {near_mass:.6g} < oo",
                           values=vals)
    return Certificate(
        TRUE,
        f"j({x0},oo)={far:.6g}, int x j={xm:.6g}, int|G|j={gm:.6g}, j(0,{x0})=oo",
        values=vals,
    )


# ---------------------------------------------------------------------------
# JSON measure specs
# ---------------------------------------------------------------------------

def parse_measure(spec: Union[dict, str]) -> StringMeasure:
    """Build a StringMeasure from a JSON-style dict.

    kinds: power_string {alpha}, monomial {coef, power}, log {coef},
           linear {slope, intercept}, exp_tail {coef, rate},
           table {x, m, left_exponent, right_exponent},
           rescale {base, a, b}, offset {base, offset},
           normalize_tail {base}, clip {base, floor, x0}.
    """
    if isinstance(spec, str):
        spec = json.loads(spec)
    kind = spec.get("kind")
    if kind == "power_string":
        return power_string(float(spec["alpha"]))
    if kind == "monomial":
        return MonomialString(coef=float(spec["coef"]), power=float(spec["power"]),
                              alpha_hint=spec.get("alpha_hint"))
    if kind == "log":
        return LogString(coef=float(spec.get("coef", 1.0)), alpha_hint=1.0)
    if kind == "linear":
        base = MonomialString(coef=float(spec.get("slope", 1.0)), power=1.0)
        icpt = float(spec.get("intercept", 0.0))
        return OffsetString(base=base, offset=icpt) if icpt else base
    if kind == "exp_tail":
        return ExpTailString(coef=float(spec.get("coef", 1.0)), rate=float(spec.get("rate", 1.0)))
    if kind == "table":
        return TableString(x=tuple(spec["x"]), m=tuple(spec["m"]),
                           left_exponent=float(spec["left_exponent"]),
                           right_exponent=float(spec["right_exponent"]),
                           alpha_hint=spec.get("alpha_hint"))
    if kind == "rescale":
        return rescale(parse_measure(spec["base"]), float(spec["a"]), float(spec["b"]))
    if kind == "offset":
        return OffsetString(base=parse_measure(spec["base"]), offset=float(spec["offset"]))
    if kind == "normalize_tail":
        return normalize_tail(parse_measure(spec["base"]))
    if kind == "clip":
        return ClippedString(base=parse_measure(spec["base"]), floor=float(spec["floor"]),
                             x0=float(spec["x0"]))
    raise DomainError(f"unknown measure kind: {kind!r} (at /kind)")


def parse_jump(spec: Union[dict, str]) -> JumpMeasure:
    """kinds: jump_density {expr: pow, coeff, exponent, support}, jump_sum
    {parts: [...]}, atoms may accompany either."""
    if isinstance(spec, str):
        spec = json.loads(spec)
    kind = spec.get("kind")
    atoms = tuple((float(x), float(w)) for x, w in spec.get("atoms", ()))
    if kind == "jump_density":
        if spec.get("expr", "pow") != "pow":
            raise DomainError(f"unknown jump expr {spec.get('expr')!r} (at /expr)")
        lo, hi = spec.get("support", (0.0, 1.0))
        j = power_jump(coef=float(spec.get("coeff", 1.0)),
                       exponent=float(spec["exponent"]),
                       support=(float(lo), float(hi) if hi is not None else INF))
        return JumpMeasure(parts=j.parts, atoms=atoms)
    if kind == "jump_sum":
        total = JumpMeasure(atoms=atoms)
        for part in spec["parts"]:
            total = total + parse_jump(part)
        return total
    raise DomainError(f"unknown jump kind: {kind!r} (at /kind)")
