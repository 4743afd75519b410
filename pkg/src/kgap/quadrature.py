"""Certified evaluation of the definite integrals of -log f(x)/x and F(x)/x.

Every integral is taken in the variable ``z = -log x``, where
``dx / x = -dz`` and the integrand becomes ``-log f(exp(-z))``.  The
logarithmic singularity at x = 1 turns into ``-(1/a) log z`` at z = 0, which
the substitution ``z = w**2`` makes bounded.  The fixed point always sits on a
panel boundary.  Tails beyond the truncation point are bounded using the
exponential decay of the integrand.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

from .core_math import (
    ConvergenceError,
    DomainError,
    ExponentPair,
    _ENTROPY,
    _pair,
    _power,
    series_F_detail,
)

MAX_PANELS = 10_000

# Gauss-Kronrod 7/15 abscissae and weights on [-1, 1] (positive half).
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS_WEIGHTS = np.zeros(15)
# Gauss nodes are the odd-indexed Kronrod nodes on each half
GAUSS_WEIGHTS[[1, 3, 5]] = _WG[:3]
GAUSS_WEIGHTS[7] = _WG[3]
GAUSS_WEIGHTS[[9, 11, 13]] = _WG[2::-1]


@dataclass(frozen=True)
class IntegralResult:
    value: float
    error_estimate: float
    evaluations: int

    def __post_init__(self):
        if self.error_estimate < 0 or self.evaluations <= 0:
            raise ValueError("malformed integral result")

    def __add__(self, other: "IntegralResult") -> "IntegralResult":
        return IntegralResult(
            self.value + other.value,
            self.error_estimate + other.error_estimate,
            self.evaluations + other.evaluations,
        )


def gauss_kronrod_panel(func: Callable[[float], float], lo: float, hi: float) -> tuple[float, float]:
    """One G7/K15 panel: (Kronrod value, |Kronrod - Gauss|)."""
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    fx = np.array([func(mid + half * t) for t in NODES])
    k = half * float(np.dot(KRONROD_WEIGHTS, fx))
    g = half * float(np.dot(GAUSS_WEIGHTS, fx))
    return k, abs(k - g)


def adaptive_integrate(
    func: Callable[[float], float],
    breakpoints: list[float],
    tol: float,
    max_panels: int = MAX_PANELS,
) -> IntegralResult:
    """Globally adaptive G7/K15 over consecutive breakpoints.

    The worst panel is bisected until the summed |K15 - G7| estimates fall
    below ``tol``.  Panel contributions are summed in left-to-right order so
    the result does not depend on the refinement history.
    """
    heap = []
    evals = 0
    for lo, hi in zip(breakpoints[:-1], breakpoints[1:]):
        v, e = gauss_kronrod_panel(func, lo, hi)
        evals += 15
        heapq.heappush(heap, (-e, lo, hi, v))
    total_err = sum(-h[0] for h in heap)
    while total_err > tol:
        if len(heap) >= max_panels:
            raise ConvergenceError(
                f"error estimate {total_err:.2e} above tol {tol:.1e} after {len(heap)} panels"
            )
        neg_e, lo, hi, _ = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            raise ConvergenceError("panel width underflow")
        total_err += neg_e
        for a, b in ((lo, mid), (mid, hi)):
            v, e = gauss_kronrod_panel(func, a, b)
            evals += 15
            total_err += e
            heapq.heappush(heap, (-e, a, b, v))
    panels = sorted(heap, key=lambda h: h[1])
    value = math.fsum(h[3] for h in panels)
    err = math.fsum(-h[0] for h in panels)
    return IntegralResult(value, err, evals)


# ---------------------------------------------------------------------------
# Closed-form targets
# ---------------------------------------------------------------------------


def main_target(pair) -> float:
    p = _pair(pair)
    return math.pi**2 / (3 * p.a * p.b)


def split_targets(pair) -> tuple[float, float]:
    p = _pair(pair)
    half = math.pi**2 / (6 * p.a * p.b)
    lr2 = 0.5 * math.log(_rho_of(p)) ** 2
    return half - lr2, half + lr2


def _rho_of(p: ExponentPair) -> float:
    return math.exp(-_power(p.a, p.b).peak)


TILDE_TARGET = math.pi**2 / 3
TILDE_SPLIT_TARGETS = (math.pi**2 / 6 - 0.5, math.pi**2 / 6 + 0.5)


def F_target(a: float) -> float:
    return math.pi**2 / (6 * a * (a + 1))


# ---------------------------------------------------------------------------
# Integrals of -log f(x)/x
# ---------------------------------------------------------------------------


def _cutoff(u: Callable[[float], float], rate: Callable[[float], float], start: float, budget: float):
    """Smallest Z (on a geometric ladder) whose tail bound u(Z)/rate(Z) <= budget."""
    z = start
    for _ in range(200):
        r = rate(z)
        if r > 0:
            bound = u(z) / r
            if bound <= budget:
                return z, bound
        z *= 1.25
    raise ConvergenceError("could not place the tail cut-off")


def _split_parts(inv, tol: float) -> tuple[IntegralResult, IntegralResult]:
    """(integral over x in [0, rho], integral over x in [rho, 1]) for an involution."""
    zr = inv.peak
    # x in [rho, 1] is z in [0, zr]; substitute z = w^2
    sw = math.sqrt(zr)
    upper = adaptive_integrate(lambda w: 2.0 * w * inv.conj(w * w) if w > 0 else 0.0, [0.0, sw], 0.5 * tol)

    # x in [0, rho] is z in [zr, inf)
    zcut, tail = _cutoff(inv.conj, inv.decay_rate, 2.0 * zr + 1.0, 0.1 * tol)
    body = adaptive_integrate(inv.conj, [zr, 0.5 * (zr + zcut), zcut], 0.4 * tol)
    lower = IntegralResult(body.value, body.error_estimate + tail, body.evaluations + 1)
    return lower, upper


def integral_split(pair, tol: float = 1e-10) -> tuple[IntegralResult, IntegralResult]:
    """Integrals of -log f(x)/x over [0, rho] and over [rho, 1]."""
    p = _pair(pair)
    if tol < 1e-10:
        raise DomainError("tol must be at least 1e-10")
    return _split_parts(_power(p.a, p.b), tol)


def integral_main(pair, tol: float = 1e-10) -> IntegralResult:
    """Integral of -log f_{a,b}(x)/x over [0, 1]; should equal pi^2/(3ab)."""
    lower, upper = integral_split(pair, tol)
    res = lower + upper
    if res.error_estimate > tol:
        raise ConvergenceError(f"certified error {res.error_estimate:.2e} exceeds tol {tol:.1e}")
    return res


def integral_tilde_split(tol: float = 1e-9) -> tuple[IntegralResult, IntegralResult]:
    """Integrals of -log f~(x)/x over [0, 1/e] and over [1/e, 1]."""
    if tol < 1e-10:
        raise DomainError("tol must be at least 1e-10")
    return _split_parts(_ENTROPY, tol)


def integral_tilde(tol: float = 1e-9) -> IntegralResult:
    lower, upper = integral_tilde_split(tol)
    return lower + upper


# ---------------------------------------------------------------------------
# Integral of F(x)/x
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FIntegral:
    direct: IntegralResult
    termwise: IntegralResult
    target: float


def beta_term_values(a: float, n: int) -> np.ndarray:
    """Integral of the l-th series term over dx/x via the beta function, l = 1..n."""
    b = a + 1.0
    ell = np.arange(1, n + 1, dtype=float)
    logs = (
        special.gammaln(b * ell)
        - special.gammaln(a * ell)
        - special.gammaln(ell + 1.0)
        + special.betaln(a * ell, ell + 1.0)
    )
    return np.exp(logs) / (a * ell)


def beta_partial_sums(a: float, n: int) -> np.ndarray:
    return np.cumsum(beta_term_values(a, n))


def integral_F_termwise(a: float, n_terms: int = 10**6) -> IntegralResult:
    """Term-by-term integration of F(x)/x using the beta integral.

    Terms beyond ``n_terms`` are summed in closed form, using that each term
    equals 1/(a b l^2).
    """
    terms = beta_term_values(a, n_terms)
    b = a + 1.0
    head = math.fsum(terms)
    tail = float(special.polygamma(1, n_terms + 1)) / (a * b)
    # rounding in the log-gamma combination, about 64 ulp per term
    err = 64 * np.finfo(float).eps * head
    return IntegralResult(head + tail, err, n_terms)


def integral_F_direct(a: float, tol: float = 1e-8, point_tol: float = 1e-12) -> IntegralResult:
    """Quadrature of the series F(x)/x over [0, 1], in z = -log x."""
    if a <= 0:
        raise DomainError("a must be positive")
    b = a + 1.0
    zr = math.log(b / a)
    point_err = [0.0]

    def F_of_z(z: float) -> float:
        if z <= 0:
            return 0.0
        res = series_F_detail(a, math.exp(-z), point_tol)
        point_err[0] = max(point_err[0], res.tail_bound)
        return res.value

    def rate(z):
        # F(e^{-z}) <= F(e^{-Z}) e^{-a(z-Z)} / (1 - e^{-Z}) for z >= Z
        return a * (-math.expm1(-z))

    zcut, tail = _cutoff(F_of_z, rate, 2.0 * zr + 1.0, 0.1 * tol)
    body = adaptive_integrate(F_of_z, [0.0, zr, 0.5 * (zr + zcut), zcut], 0.8 * tol)
    err = body.error_estimate + tail + point_err[0] * zcut
    return IntegralResult(body.value, err, body.evaluations + 1)


def integral_F(a: float, tol: float = 1e-8) -> FIntegral:
    """F(x)/x integrated two ways; both should match pi^2/(6ab)."""
    return FIntegral(integral_F_direct(a, tol), integral_F_termwise(a), F_target(a))
