"""The implicit involution f_{a,b}, its entropy analogue, and the series F.

f_{a,b} is the decreasing map of [0, 1] onto itself with
``f(x)**a - f(x)**b == x**a - x**b``.  All root finding is done in
logarithmic coordinates: with ``z = -log x`` and ``u = -log f(x)`` the
defining relation reads ``h(u) == h(z)`` for a unimodal ``h``, and ``u`` is
the root on the other side of the peak.  Working with ``u`` directly keeps
full relative precision in ``-log f`` when ``f`` is close to 1, which is what
the integrals need.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import integrate, special

DEFAULT_TOL = 1e-12
MAX_ITER = 200


class ConvergenceError(RuntimeError):
    """A root or series could not be certified to the requested tolerance."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


@dataclass(frozen=True)
class ExponentPair:
    """Exponents ``0 < a < b`` of the involution f_{a,b}."""

    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > self.a):
            raise DomainError(f"need 0 < a < b, got a={self.a}, b={self.b}")
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise DomainError("exponents must be finite")

    def scaled(self, gamma: float) -> "ExponentPair":
        return ExponentPair(self.a * gamma, self.b * gamma)


@dataclass(frozen=True)
class FuncSample:
    x: float
    y: float
    residual: float


def _pair(pair) -> ExponentPair:
    if isinstance(pair, ExponentPair):
        return pair
    a, b = pair
    return ExponentPair(float(a), float(b))


def _check_unit(x: float) -> None:
    if not (0.0 <= x <= 1.0):
        raise DomainError(f"x={x} outside [0, 1]")


def rho(pair) -> float:
    """Fixed point of f_{a,b}; the maximiser of x**a - x**b on [0, 1]."""
    p = _pair(pair)
    return math.exp(-(math.log(p.b) - math.log(p.a)) / (p.b - p.a))


def power_gap(pair, x: float) -> float:
    p = _pair(pair)
    _check_unit(x)
    return x**p.a - x**p.b


# ---------------------------------------------------------------------------
# Branch solvers in log coordinates
# ---------------------------------------------------------------------------


class _LogInvolution:
    """Unimodal ``h`` on (0, inf) with peak at ``peak``; ``conj`` swaps branches."""

    peak: float

    def h(self, u: float) -> float:
        raise NotImplementedError

    def dh(self, u: float) -> float:
        raise NotImplementedError

    def guess(self, target: float, upper: bool) -> float:
        raise NotImplementedError

    def conj(self, z: float) -> float:
        """Return ``u`` with ``h(u) == h(z)`` on the opposite side of the peak."""
        if z == 0.0:
            return math.inf
        if math.isinf(z):
            return 0.0
        delta = z - self.peak
        if abs(delta) < 3e-5 * self.peak:
            # root solve loses precision at the flat peak; use the local
            # expansion of the reflection instead (error O(delta^4))
            c = -self.h3 / (3.0 * self.h2)
            return self.peak - delta + c * delta**2 - c * c * delta**3
        target = self.h(z)
        # upper: solution has u < peak, i.e. f(x) above the fixed point
        upper = z > self.peak
        vp = math.log(self.peak)

        def g(v):
            return self.h(math.exp(v)) - target

        def dg(v):
            u = math.exp(v)
            return u * self.dh(u)

        u0 = self.guess(target, upper)
        if upper and u0 < 1e-200:
            # h(u) = log(u) + const + O(u) here, so the guess is exact to O(u)
            return u0
        v0 = math.log(u0)
        if upper:
            lo, hi = min(v0, vp) - 1.0, vp
            step = 1.0
            while g(lo) > 0:
                step *= 2.0
                lo -= step
                if lo < -800:
                    raise ConvergenceError("cannot bracket upper branch")
        else:
            lo, hi = vp, max(v0, vp) + 1.0
            step = 1.0
            while g(hi) > 0:
                step *= 2.0
                hi += step
                if hi > 800:
                    raise ConvergenceError("cannot bracket lower branch")
        # orient so that g(neg) < 0 < g(pos)
        neg, pos = (lo, hi) if upper else (hi, lo)
        v = min(max(v0, lo), hi)
        if not lo < v < hi:
            v = 0.5 * (lo + hi)
        for _ in range(MAX_ITER):
            gv = g(v)
            if gv == 0.0:
                return math.exp(v)
            if gv < 0:
                neg = v
            else:
                pos = v
            d = dg(v)
            a, b = min(neg, pos), max(neg, pos)
            vn = v - gv / d if d != 0.0 else math.nan
            if not (a < vn < b):
                vn = 0.5 * (a + b)
            if abs(vn - v) <= 4e-16 * max(1.0, abs(v)) or b - a <= 4e-16 * max(1.0, abs(v)):
                return math.exp(vn)
            v = vn
        raise ConvergenceError(f"branch solve for z={z} did not converge")


class _PowerInvolution(_LogInvolution):
    # h(u) = log(e^{-au} - e^{-bu}) = -a u + log(1 - e^{-(b-a) u})
    def __init__(self, a: float, b: float):
        self.a, self.b, self.d = a, b, b - a
        self.peak = math.log(b / a) / (b - a)
        e = b / a
        self.h2 = -self.d**2 * e / (e - 1.0) ** 2
        self.h3 = self.d**3 * e * (e + 1.0) / (e - 1.0) ** 3

    def h(self, u):
        return -self.a * u + math.log(-math.expm1(-self.d * u))

    def dh(self, u):
        return -self.a + self.d / math.expm1(self.d * u)

    def guess(self, target, upper):
        if upper:
            return math.exp(target) / self.d
        return -target / self.a

    def decay_rate(self, z: float) -> float:
        """Lower bound on -d log u / dz for the conjugate at and beyond ``z``."""
        return self.a - self.d / math.expm1(self.d * z)


class _EntropyInvolution(_LogInvolution):
    # -y log y with y = e^{-u} is u e^{-u}; h(u) = log u - u
    peak = 1.0
    h2 = -1.0
    h3 = 2.0

    def h(self, u):
        return math.log(u) - u

    def dh(self, u):
        return 1.0 / u - 1.0

    def guess(self, target, upper):
        if upper:
            return math.exp(target)
        return -target + math.log(-target) if target < -1 else 2.0

    def decay_rate(self, z: float) -> float:
        return 1.0 - 1.0 / z


@lru_cache(maxsize=256)
def _power(a: float, b: float) -> _PowerInvolution:
    return _PowerInvolution(a, b)


_ENTROPY = _EntropyInvolution()


def neg_log_f_of_exp(pair, z: float) -> float:
    """``-log f_{a,b}(exp(-z))`` to full relative precision."""
    p = _pair(pair)
    return _power(p.a, p.b).conj(z)


def neg_log_f_tilde_of_exp(z: float) -> float:
    """``-log f~(exp(-z))`` for the entropy involution."""
    return _ENTROPY.conj(z)


def _residual(pair: ExponentPair, x: float, y: float) -> float:
    return abs((y**pair.a - y**pair.b) - (x**pair.a - x**pair.b))


def f_eval(pair, x: float, tol: float = DEFAULT_TOL) -> FuncSample:
    """Evaluate f_{a,b}(x) on the decreasing branch.

    Raises ConvergenceError if the residual of the defining equation cannot
    be brought under ``tol`` (typically because ``tol`` is below what double
    precision can resolve).
    """
    p = _pair(pair)
    _check_unit(x)
    if tol <= 0:
        raise DomainError("tol must be positive")
    if x == 0.0:
        y = 1.0
    elif x == 1.0:
        y = 0.0
    else:
        y = math.exp(-_power(p.a, p.b).conj(-math.log(x)))
    res = _residual(p, x, y)
    if res > tol:
        raise ConvergenceError(f"residual {res:.3e} exceeds tol {tol:.1e} at x={x}")
    return FuncSample(x, y, res)


def f_value(pair, x: float) -> float:
    return f_eval(pair, x, tol=1e-9).y


def f_tilde_eval(x: float, tol: float = DEFAULT_TOL) -> FuncSample:
    """Evaluate f~(x), the decreasing solution of -y log y = -x log x."""
    _check_unit(x)
    if x == 0.0:
        y = 1.0
    elif x == 1.0:
        y = 0.0
    else:
        y = math.exp(-_ENTROPY.conj(-math.log(x)))

    def ent(t):
        return 0.0 if t == 0.0 else -t * math.log(t)

    res = abs(ent(y) - ent(x))
    if res > tol:
        raise ConvergenceError(f"residual {res:.3e} exceeds tol {tol:.1e} at x={x}")
    return FuncSample(x, y, res)


# ---------------------------------------------------------------------------
# The series F (b = a + 1)
# ---------------------------------------------------------------------------

_STIRLING_T0 = 20.0
_DIRECT_CHUNK = 4096
_EM_SWITCH = 4096


def _stirling_corr(z):
    z = np.asarray(z, dtype=float)
    z2 = z * z
    return (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - 1.0 / (1680.0 * z2)) / z2) / z2) / z


def _reduced_log_coef(a: float, t) -> np.ndarray:
    """``log[Gamma(bt) / (Gamma(at) Gamma(t+1))] - t log(b^b / a^a)`` with b = a+1.

    Evaluated without the O(t log t) cancellation of the raw log-gamma
    difference, so it stays accurate for t in the millions.
    """
    b = a + 1.0
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    big = t >= _STIRLING_T0
    tb = t[big]
    out[big] = (
        -0.5 * np.log(2.0 * math.pi * tb * b / a)
        + _stirling_corr(b * tb)
        - _stirling_corr(a * tb)
        - _stirling_corr(tb)
    )
    ts = t[~big]
    mlog = b * math.log(b) - a * math.log(a)
    out[~big] = special.gammaln(b * ts) - special.gammaln(a * ts) - special.gammaln(ts + 1.0) - ts * mlog
    return out


@lru_cache(maxsize=64)
def _reduced_chunk(a: float, start: int, size: int) -> np.ndarray:
    ell = np.arange(start, start + size, dtype=float)
    arr = _reduced_log_coef(a, ell) - np.log(a * ell)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SeriesResult:
    value: float
    tail_bound: float
    terms: int
    method: str


def series_F_detail(a: float, x: float, tol: float = DEFAULT_TOL, max_terms: int = 10**6) -> SeriesResult:
    """Sum F(x) = sum_l Gamma(bl)/(Gamma(al) l!) (x^a - x^b)^l / (al), b = a+1.

    Terms are summed directly while a geometric tail bound (the term ratio
    increases to its limit q = (x^a - x^b) b^b / a^a) can certify ``tol``.
    When q is too close to 1 for that, the remainder past a fixed cut is
    evaluated by Euler-Maclaurin on the smooth interpolant of the terms, with
    its remainder bounded by the third-derivative term.
    """
    if a <= 0:
        raise DomainError("a must be positive")
    _check_unit(x)
    b = a + 1.0
    c = x**a - x**b
    if c <= 0.0:
        return SeriesResult(0.0, 0.0, 0, "exact")
    mlog = b * math.log(b) - a * math.log(a)
    logq = min(math.log(c) + mlog, 0.0)
    q = math.exp(logq)

    total = 0.0
    n = 0
    cut = min(_EM_SWITCH, max_terms)
    while n < cut:
        size = min(_DIRECT_CHUNK, cut - n)
        logs = _reduced_chunk(a, n + 1, size) + logq * np.arange(n + 1, n + 1 + size)
        terms = np.exp(logs)
        total += math.fsum(terms)
        n += size
        last = terms[-1]
        if q < 1.0:
            bound = last * q / (1.0 - q)
            if bound <= 0.5 * tol or last == 0.0:
                return SeriesResult(total, bound, n, "direct")

    tail, err = _em_tail(a, logq, n + 1)
    if err > tol:
        raise ConvergenceError(f"series tail bound {err:.2e} exceeds tol {tol:.1e} at x={x}")
    return SeriesResult(total + tail, err, n, "euler-maclaurin")


def _em_tail(a: float, logq: float, n: int) -> tuple[float, float]:
    """Sum of terms l >= n via Euler-Maclaurin; returns (value, error bound)."""

    def logh(t):
        return _reduced_log_coef(a, np.atleast_1d(t))[0] - math.log(a * t) + t * logq

    # t = n / w^2 maps [n, inf) to (0, 1]; the t^{-3/2} decay becomes constant
    def integrand(w):
        if w <= 0.0:
            return 0.0
        t = n / (w * w)
        return math.exp(logh(t)) * 2.0 * n / (w * w * w)

    integral, qerr = integrate.quad(integrand, 0.0, 1.0, epsabs=1e-15, epsrel=1e-13, limit=200)
    hn = math.exp(logh(n))
    d1 = -1.5 / n + logq
    d2 = 1.5 / n**2
    d3 = -3.0 / n**3
    dh1 = d1 * hn
    dh3 = abs(d3) + 3 * abs(d1) * d2 + abs(d1) ** 3
    value = integral + 0.5 * hn - dh1 / 12.0
    bound = 2.0 * dh3 * hn / 720.0 + qerr + 1e-16 * abs(value)
    return value, bound


def series_F(a: float, x: float, tol: float = DEFAULT_TOL, max_terms: int = 10**6) -> float:
    return series_F_detail(a, x, tol, max_terms).value


def series_coefficient_ratios(a: float, n: int) -> np.ndarray:
    """Ratios kappa_{l+1} / (kappa_l b^b/a^a) for l = 1..n; all must be <= 1."""
    g = _reduced_log_coef(a, np.arange(1, n + 2, dtype=float))
    return np.exp(np.diff(g))


# ---------------------------------------------------------------------------
# Exact coefficient identity
# ---------------------------------------------------------------------------


def bm_coefficient(b: int, m: int) -> Fraction:
    """Coefficient of w^m in F(1 - w), computed exactly; equals 1/m."""
    if int(b) != b or b < 2:
        raise DomainError("b must be an integer >= 2")
    if int(m) != m or m < 1:
        raise DomainError("m must be an integer >= 1")
    b, m = int(b), int(m)
    total = 0
    for ell in range(1, m + 1):
        top = b * ell - 1
        low = b * ell - m + 1
        # product of the consecutive integers low..top; contains 0 if low <= 0
        prod = 0 if low <= 0 else math.perm(top, m - 1)
        term = math.comb(m, ell) * prod
        total += -term if (m - ell) % 2 else term
    return Fraction(total, math.factorial(m))


# ---------------------------------------------------------------------------
# Derivative, concavity and scaling
# ---------------------------------------------------------------------------


def _dphi(p: ExponentPair, x: float) -> float:
    if x == 0.0:
        if p.a > 1:
            return 0.0
        return 1.0 if p.a == 1 else math.inf
    return p.a * x ** (p.a - 1) - p.b * x ** (p.b - 1)


def f_derivative(pair, x: float, tol: float = DEFAULT_TOL) -> float:
    """f'(x) = phi'(x) / phi'(f(x)) with phi(x) = x^a - x^b; -1 at the fixed point."""
    p = _pair(pair)
    _check_unit(x)
    r = rho(p)
    if abs(x - r) <= 1e-10:
        return -1.0
    y = f_eval(p, x, tol).y
    num, den = _dphi(p, x), _dphi(p, y)
    if den == 0.0 or not math.isfinite(num) or not math.isfinite(den):
        raise DomainError(f"derivative of f_({p.a},{p.b}) is not finite at x={x}")
    return num / den


@dataclass(frozen=True)
class ConcavityReport:
    k: int
    max_second_difference: float
    first_violation: float | None
    phi_gap_ok: bool
    psi_gap_ok: bool

    @property
    def ok(self) -> bool:
        return self.first_violation is None and self.phi_gap_ok and self.psi_gap_ok


def _phi_k(k: int, x: float) -> float:
    return x**k * (1.0 - x)


def _psi_k(k: int, x: float) -> float:
    # phi'' / phi'^2 for phi = x^k (1-x)
    if x == 0.0:
        return -2.0 if k == 1 else math.inf
    return k / x**k * ((k - 1) - (k + 1) * x) / (k - (k + 1) * x) ** 2


def concavity_check(
    k: int, grid_size: int = 1000, lo: float = 0.01, hi: float = 0.99, slack: float = 1e-8
) -> ConcavityReport:
    if k < 1:
        raise DomainError("k must be >= 1")
    p = ExponentPair(k, k + 1)
    xs = np.linspace(lo, hi, grid_size)
    ys = np.array([f_eval(p, float(x)).y for x in xs])
    d2 = ys[:-2] - 2 * ys[1:-1] + ys[2:]
    bad = np.nonzero(d2 > slack)[0]
    first = float(xs[bad[0] + 1]) if bad.size else None

    r = k / (k + 1)
    sigmas = np.linspace(0.0, 1.0 / (k + 1), grid_size + 1)[1:]
    phi_ok = all(_phi_k(k, r - s) - _phi_k(k, r + s) >= -1e-15 for s in sigmas)
    psi_ok = True
    for s in sigmas:
        lhs, rhs = _psi_k(k, max(r - s, 0.0)), _psi_k(k, r + s)
        if lhs < rhs - 1e-9 * max(1.0, abs(rhs)):
            psi_ok = False
            break
    return ConcavityReport(k, float(d2.max()), first, phi_ok, psi_ok)


def phi_gap(k: int, sigma: float) -> float:
    """phi(rho - sigma) - phi(rho + sigma) for phi = x^k (1-x), rho = k/(k+1)."""
    r = k / (k + 1)
    return _phi_k(k, r - sigma) - _phi_k(k, r + sigma)


def scaling_check(pair, gamma: float, x: float, tol: float = DEFAULT_TOL) -> float:
    """|f_{a gamma, b gamma}(x) - f_{a,b}(x^gamma)^{1/gamma}|."""
    p = _pair(pair)
    if gamma <= 0:
        raise DomainError("gamma must be positive")
    direct = f_eval(p.scaled(gamma), x, tol).y
    via = f_eval(p, x**gamma, tol).y ** (1.0 / gamma)
    return abs(direct - via)
