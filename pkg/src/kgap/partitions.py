"""Exact partition counts: no k consecutive part values, unrestricted, MacMahon.

Counts are Python integers, built by dynamic programmes over part values.
For the restricted counts the state is the remaining sum together with a
bit mask recording which of the previous k-1 part values are present.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core_math import DomainError
from .gap_process import GapParams, p_Ak

KINDS = ("p_k", "unrestricted", "macmahon_lhs", "macmahon_rhs")


@dataclass(frozen=True)
class PartitionTable:
    kind: str
    counts: tuple
    k: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown table kind {self.kind!r}")
        if not self.counts or self.counts[0] != 1:
            raise ValueError("counts[0] must be 1 (the empty partition)")

    @property
    def N(self) -> int:
        return len(self.counts) - 1

    def __getitem__(self, n: int) -> int:
        return self.counts[n]

    def __len__(self) -> int:
        return len(self.counts)

    def to_csv(self, stream=None) -> str:
        buf = io.StringIO() if stream is None else stream
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "count"])
        for n, c in enumerate(self.counts):
            w.writerow([n, str(c)])
        return buf.getvalue() if stream is None else ""


def _shifted_cumulative(t: np.ndarray, v: int) -> np.ndarray:
    """out[s] = sum_{m >= 1} t[s - m v] (object arrays of Python ints)."""
    n = len(t)
    out = np.zeros(n, dtype=object)
    for start in range(v, n, v):
        stop = min(start + v, n)
        width = stop - start
        out[start:stop] = t[start - v : start - v + width] + out[start - v : start - v + width]
    return out


def _no_run_counts(N: int, k: int, values: Iterable[int]) -> list:
    """Partitions of 0..N into parts from ``values`` (ascending), no k consecutive values present.

    The mask bit i records whether value v-1-i is present; values absent
    from ``values`` reset the relevant bits.
    """
    full = (1 << (k - 1)) - 1
    tables = {0: np.zeros(N + 1, dtype=object)}
    tables[0][0] = 1
    prev = None
    for v in values:
        if v > N:
            break
        if prev is not None and v != prev + 1:
            # skipped values are absent: shift the masks accordingly
            gap = v - prev - 1
            shifted = {}
            for m, t in tables.items():
                nm = (m << gap) & full
                shifted[nm] = t if nm not in shifted else shifted[nm] + t
            tables = shifted
        new: dict = {}
        for m, t in tables.items():
            absent = (m << 1) & full
            new[absent] = t if absent not in new else new[absent] + t
            if m != full:
                present = ((m << 1) | 1) & full
                shifted_t = _shifted_cumulative(t, v)
                new[present] = shifted_t if present not in new else new[present] + shifted_t
        tables = new
        prev = v
    total = np.zeros(N + 1, dtype=object)
    for t in tables.values():
        total = total + t
    return [int(c) for c in total]


def count_pk(k: int, N: int) -> PartitionTable:
    """Partitions of n <= N with no k distinct consecutive part values all present."""
    if k < 2:
        raise DomainError("k must be >= 2")
    if N < 0:
        raise DomainError("N must be >= 0")
    return PartitionTable("p_k", tuple(_no_run_counts(N, k, range(1, N + 1))), k)


def _coin_counts(N: int, parts: Iterable[int]) -> list:
    p = [0] * (N + 1)
    p[0] = 1
    for v in parts:
        if v > N:
            break
        for s in range(v, N + 1):
            p[s] += p[s - v]
    return p


def count_unrestricted(N: int) -> PartitionTable:
    if N < 0:
        raise DomainError("N must be >= 0")
    return PartitionTable("unrestricted", tuple(_coin_counts(N, range(1, N + 1))))


def count_macmahon(N: int) -> tuple[PartitionTable, PartitionTable]:
    """(no 1s and no two consecutive parts, parts divisible by 2 or 3)."""
    if N < 0:
        raise DomainError("N must be >= 0")
    lhs = _no_run_counts(N, 2, range(2, N + 1))
    rhs = _coin_counts(N, [v for v in range(2, N + 1) if v % 2 == 0 or v % 3 == 0])
    return PartitionTable("macmahon_lhs", tuple(lhs)), PartitionTable("macmahon_rhs", tuple(rhs))


def sandwich_r_check(N: int) -> bool:
    """max(r(n-1), r(n)) <= p_2(n) <= sum_{l<=n} r(l), and r(n) <= r(n+2)."""
    if N < 2:
        raise DomainError("N must be >= 2")
    r = count_macmahon(N)[0].counts
    p2 = count_pk(2, N).counts
    running = 0
    for n in range(N + 1):
        running += r[n]
        if n >= 2 and not (max(r[n - 1], r[n]) <= p2[n] <= running):
            return False
    return all(r[n] <= r[n + 2] for n in range(N - 1))


# ---------------------------------------------------------------------------
# Generating functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SeriesComparison:
    lhs: float
    rhs: float
    residual: float
    bound: float


def _log_euler_product(x: float, tol: float, residues=None, modulus: int = 1) -> tuple[float, float]:
    """sum_i -log(1 - x^i) over i (optionally restricted to residues mod modulus).

    Returns (partial sum, bound on the remainder); the remainder uses
    -log(1 - x^i) <= x^i / (1 - x).
    """
    total = 0.0
    i = 0
    while True:
        i += 1
        if residues is None or i % modulus in residues:
            total += -math.log1p(-(x**i))
        tail = x ** (i + 1) / (1 - x) ** 2
        if tail <= tol:
            return total, tail


def gk_consistency(k: int, x: float, N: int, tol: float = 1e-12) -> SeriesComparison:
    """Compare sum_{n<=N} p_k(n) x^n with P_{1-x}(A_k) / prod (1 - x^i)."""
    if not 0 < x <= 0.6:
        raise DomainError("x must lie in (0, 0.6] for a certifiable tail")
    table = count_pk(k, N).counts
    lhs = math.fsum(float(c) * x**n for n, c in enumerate(table))
    # p_k(n) <= p(n) and p(n) y^n <= G(y) for y = sqrt(x)
    y = math.sqrt(x)
    logG_y, _ = _log_euler_product(y, 1e-16)
    ratio = x / y
    series_tail = math.exp(logG_y) * ratio ** (N + 1) / (1 - ratio)

    logG, prod_tail = _log_euler_product(x, tol)
    P = p_Ak(GapParams(k, 1 - x), tol)
    rhs = P.value * math.exp(logG)
    # rhs uncertainty: relative truncation of P and of the product
    rhs_err = rhs * (P.rel_error + math.expm1(prod_tail))
    bound = series_tail + rhs_err + 1e-14 * max(lhs, rhs)
    return SeriesComparison(lhs, rhs, abs(lhs - rhs), bound)


def factorization_check(x: float, tol: float = 1e-12) -> SeriesComparison:
    """Compare P_{1-x}(C_1 and A_2) with prod_j (1 - x^{6j+1})(1 - x^{6j+5})."""
    if not 0 < x <= 0.6:
        raise DomainError("x must lie in (0, 0.6]")
    P = p_Ak(GapParams(2, 1 - x), tol, condition_first=True)
    log_prod, tail = _log_euler_product(x, tol, residues={1, 5}, modulus=6)
    rhs = math.exp(-log_prod)
    lhs = P.value
    bound = lhs * P.rel_error + rhs * math.expm1(tail) + 1e-14
    return SeriesComparison(lhs, rhs, abs(lhs - rhs), bound)


def hardy_ramanujan_constant(k: int) -> float:
    """c_k with log p_k(n) ~ c_k sqrt(n)."""
    return math.pi * math.sqrt(2.0 / 3.0 * (1.0 - 2.0 / (k * (k + 1))))


def asymptotic_ratio_pk(k: int, n_list: Sequence[int], table: PartitionTable | None = None) -> list[float]:
    """log p_k(n) / (c_k sqrt(n)) for each n."""
    N = max(n_list)
    if table is None or table.N < N:
        table = count_pk(k, N)
    c = hardy_ramanujan_constant(k)
    return [math.log(table[n]) / (c * math.sqrt(n)) for n in n_list]


# ---------------------------------------------------------------------------
# Brute force and the monotonicity injections
# ---------------------------------------------------------------------------


def generate_partitions(n: int, max_part: int | None = None):
    """Yield partitions of n as non-increasing tuples."""
    if max_part is None:
        max_part = n
    if n == 0:
        yield ()
        return
    for first in range(min(n, max_part), 0, -1):
        for rest in generate_partitions(n - first, first):
            yield (first,) + rest


def has_k_consecutive(parts: Sequence[int], k: int) -> bool:
    present = set(parts)
    return any(all(i + j in present for j in range(k)) for i in present)


def inject_k3(parts: tuple, k: int) -> tuple:
    """Monotonicity map for k >= 3: add a 1, or turn a 2 into a 3."""
    present = set(parts)
    if all(v in present for v in range(2, k + 1)):
        lst = list(parts)
        lst.remove(2)
        lst.append(3)
        return tuple(sorted(lst, reverse=True))
    return tuple(sorted(parts + (1,), reverse=True))


def inject_k2(parts: tuple) -> tuple:
    """Monotonicity map for k = 2: add a 1, or drop a 2 and add 3 to the largest part."""
    if 2 not in parts:
        return tuple(sorted(parts + (1,), reverse=True))
    lst = list(parts)
    lst.remove(2)
    lst[0] += 3
    return tuple(sorted(lst, reverse=True))
