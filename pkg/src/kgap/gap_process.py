"""Probability of having no k-gap in sequences of independent events.

A k-gap is a run of k consecutive events none of which occur.  The event
A_k asks for no k-gap in C_1, C_2, ... where C_n has probability
1 - (1 - s)^n.  Probabilities are propagated exactly by a dynamic programme
over the length of the trailing run of failures, in log space so that values
far below the double-precision range (s = 1e-4 gives roughly exp(-5000))
remain representable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .core_math import DomainError, _power


@dataclass(frozen=True)
class GapParams:
    k: int
    s: float

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise DomainError(f"k must be a positive integer, got {self.k}")
        if not 0.0 < self.s < 1.0:
            raise DomainError(f"s must lie in (0, 1), got {self.s}")


@dataclass
class RunLengthState:
    """Mass of 'no k-gap so far' split by trailing failure-run length.

    ``weights[j]`` is the conditional share of that mass whose current run of
    failures has length j; the absolute probabilities are
    ``weights[j] * exp(log_mass)``.
    """

    k: int
    weights: list = field(default_factory=list)
    log_mass: float = 0.0
    step: int = 0

    @classmethod
    def start(cls, k: int) -> "RunLengthState":
        return cls(k, [1.0] + [0.0] * (k - 1), 0.0, 0)

    @property
    def probabilities(self) -> list:
        m = math.exp(self.log_mass)
        return [w * m for w in self.weights]

    @property
    def total(self) -> float:
        return math.exp(self.log_mass)

    def advance(self, p: float) -> None:
        """Append one independent event that occurs with probability ``p``."""
        w = self.weights
        miss = 1.0 - p
        new = [p * sum(w)] + [miss * w[j - 1] for j in range(1, self.k)]
        tot = sum(new)
        if tot <= 0.0:
            self.weights = new
            self.log_mass = -math.inf
        else:
            self.weights = [v / tot for v in new]
            self.log_mass += math.log(tot)
        self.step += 1


def g_no_gap(k: int, u, n: int):
    """Probability that n independent events of probability u have no k-gap.

    Uses the recursion obtained by conditioning on the first event to occur.
    Works with floats or with exact ``Fraction`` inputs.
    """
    if k < 1 or n < 0:
        raise DomainError("need k >= 1 and n >= 0")
    x = 1 - u
    g = [u**0] * k  # g_0 .. g_{k-1} = 1
    if n < k:
        return g[n]
    powers = [x**j for j in range(k)]
    for m in range(k, n + 1):
        # g_m = (1-x) (g_{m-1} + x g_{m-2} + ... + x^{k-1} g_{m-k})
        acc = sum(powers[j] * g[-1 - j] for j in range(k))
        g.append((1 - x) * acc)
        g.pop(0)
    return g[-1]


def g_bounds(k: int, u: float, n: int) -> tuple[float, float, float]:
    """(f^n, g_n(u), f^{n-k+1}) with f = f_{k,k+1}(1-u)."""
    fval = math.exp(-_power(k, k + 1).conj(-math.log1p(-u)))
    return fval**n, g_no_gap(k, u, n), fval ** (n - k + 1)


def g_bounds_check(k: int, u: float, n: int, slack: float = 1e-12) -> bool:
    lo, g, hi = g_bounds(k, u, n)
    return lo <= g * (1 + slack) + slack and g <= hi * (1 + slack) + slack


def frr_residual(k: int, x: float) -> float:
    """f^k - (1-x)(f^{k-1} + x f^{k-2} + ... + x^{k-1}) with f = f_{k,k+1}(x)."""
    f = math.exp(-_power(k, k + 1).conj(-math.log(x)))
    return f**k - (1 - x) * sum(x**j * f ** (k - 1 - j) for j in range(k))


@dataclass(frozen=True)
class GapProbability:
    """P_s(A_k) in log form, with its certified relative truncation error."""

    k: int
    s: float
    log_value: float
    rel_error: float
    n_events: int

    @property
    def value(self) -> float:
        return math.exp(self.log_value)

    @property
    def log_lower(self) -> float:
        return self.log_value + math.log1p(-self.rel_error)


def _future_gap_bound(x: float, k: int, n: int) -> float:
    """Union bound on a k-gap that ends after event n, given none up to n.

    A gap ending at e <= n+k-1 needs event e to fail (probability x^e); a gap
    ending at e >= n+k needs k fresh failures.
    """
    first = x ** (n + 1) * (1 - x ** (k - 1)) / (1 - x) if k > 1 else 0.0
    second = x ** (k * (n + 1)) / (1 - x**k)
    return first + second


def prefix_no_gap(k: int, probs: Sequence[float], given_first: bool = False) -> RunLengthState:
    """Run the DP over an explicit finite list of event probabilities."""
    st = RunLengthState.start(k)
    for i, p in enumerate(probs):
        st.advance(1.0 if (given_first and i == 0) else p)
    return st


def p_Ak(params: GapParams, tol: float = 1e-12, condition_first: bool = False) -> GapProbability:
    """P_s(A_k), truncated where the remaining gap risk is below ``tol`` (relative).

    With ``condition_first`` the first event is forced to occur and the
    result is P_s(C_1 and A_k) (the factor P(C_1) = s included).
    """
    k, s = params.k, params.s
    if tol <= 0:
        raise DomainError("tol must be positive")
    x = 1.0 - s
    logx = math.log1p(-s)
    st = RunLengthState.start(k)
    n = 0
    while True:
        n += 1
        if condition_first and n == 1:
            # keep only the branch where C_1 occurred
            st.weights = [1.0] + [0.0] * (k - 1)
            st.log_mass = math.log(s)
            st.step = 1
        else:
            st.advance(-math.expm1(n * logx))
        if n >= k and _future_gap_bound(x, k, n) <= tol:
            break
    # P(A_k) lies in [P_n (1 - delta), P_n]; report the upper end
    return GapProbability(k, s, st.log_mass, _future_gap_bound(x, k, n), n)


def direct_product_A1(s: float, tol: float = 1e-15) -> float:
    """log prod_{n>=1} (1 - (1-s)^n), the k = 1 case, summed directly."""
    logx = math.log1p(-s)
    total = 0.0
    n = 0
    while True:
        n += 1
        t = math.log(-math.expm1(n * logx))
        total += t
        if math.exp(n * logx) / s <= tol:
            return total


@dataclass(frozen=True)
class Sandwich:
    """Certified log-bounds on P_s(A_k) from block-constant comparison processes."""

    k: int
    s: float
    r: int
    q: float
    log_lower: float
    log_upper: float

    @property
    def lower(self) -> float:
        return math.exp(self.log_lower)

    @property
    def upper(self) -> float:
        return math.exp(self.log_upper)


def sandwich_bounds(params: GapParams, tol: float = 1e-12) -> Sandwich:
    """Lower/upper bounds from blocks of width r = floor(s^{-1/2}).

    lower = s^r prod_i (1 - e^{-irq}) f(e^{-irq})^{r-1}
    upper = prod_i f(e^{-irq})^{r-k+1},  f = f_{k,k+1}, q = -log(1-s).
    Infinite products are truncated; the dropped factors are bounded so the
    lower bound stays a lower bound.
    """
    k, s = params.k, params.s
    r = math.floor(s**-0.5)
    if r < k + 1:
        raise DomainError(f"block width r={r} < k+1={k + 1}; s={s} too large for the block bounds")
    q = -math.log1p(-s)
    inv = _power(k, k + 1)
    sum_u = 0.0  # sum_i -log f(e^{-irq})
    sum_v = 0.0  # sum_i -log(1 - e^{-irq})
    i = 0
    while True:
        i += 1
        z = i * r * q
        u = inv.conj(z)
        v = -math.log(-math.expm1(-z))
        sum_u += u
        sum_v += v
        rate = inv.decay_rate(z)
        if rate > 0:
            # terms decay at least like exp(-rate * step) beyond this point
            ratio = math.exp(-rate * r * q)
            tail_u = u * ratio / (1 - ratio)
            ez = math.exp(-z)
            tail_v = ez * math.exp(-r * q) / ((1 - ez) * (1 - math.exp(-r * q)))
            tail = (r - 1) * tail_u + tail_v
            if tail <= tol:
                break
    log_upper = -(r - k + 1) * sum_u
    log_lower = r * math.log(s) - sum_v - (r - 1) * sum_u - tail
    return Sandwich(k, s, r, q, log_lower, log_upper)


def lambda_k(k: int) -> float:
    if k < 1:
        raise DomainError("k must be >= 1")
    return math.pi**2 / (3 * k * (k + 1))


def asymptotic_deviation(k: int, s_list: Sequence[float], tol: float = 1e-12) -> list[float]:
    """|-s log P_s(A_k) - lambda_k| for each s."""
    lam = lambda_k(k)
    return [abs(-s * p_Ak(GapParams(k, s), tol).log_value - lam) for s in s_list]
