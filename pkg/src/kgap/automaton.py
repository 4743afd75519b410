"""Threshold growth on the cross neighbourhood N_k, and its enhanced variant.

Sites are integer pairs (x, y).  A grid covers a rectangle R(a,b;c,d) =
{a..c} x {b..d} and stores boolean arrays indexed ``[x - a, y - b]``.

Two dynamics are implemented:

* original: an inactive site activates once at least ``theta`` sites of its
  cross N_k(z) = {z +- (v,0), z +- (0,v): 1 <= v < k} are active;
* enhanced: any k active sites F inside some N_k(z) activate the whole
  bounding rectangle of F, and any site with two active nearest neighbours
  activates.

Closures are computed with a work queue by numba kernels on a padded array.
Both dynamics keep every closure inside the bounding box of the start set;
the kernels report any attempted activation outside the grid and the Python
wrappers raise ``ContainmentError`` if one ever happens.
"""

from __future__ import annotations

import io
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from numba import njit
from scipy import stats

from .core_math import DomainError
from .gap_process import GapParams, p_Ak, prefix_no_gap

VARIANTS = ("original", "enhanced")
BLOCK_TRIALS = 256  # trials sharing one Philox stream in Monte Carlo runs


class ContainmentError(RuntimeError):
    """A closure tried to activate a site outside its grid."""


# ---------------------------------------------------------------------------
# Basic types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelParams:
    k: int
    theta: int | None = None
    variant: str = "original"

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 2:
            raise DomainError(f"k must be an integer >= 2, got {self.k}")
        if self.theta is None:
            object.__setattr__(self, "theta", self.k)
        if self.theta < 1:
            raise DomainError("theta must be >= 1")
        if self.variant not in VARIANTS:
            raise DomainError(f"variant must be one of {VARIANTS}, got {self.variant!r}")

    @property
    def neighbourhood(self) -> list[tuple[int, int]]:
        return [tuple(o) for o in _tables(self.k)[0]]


@dataclass(frozen=True, order=True)
class Rectangle:
    """R(a,b;c,d) = {a..c} x {b..d}."""

    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        if self.a > self.c or self.b > self.d:
            raise ValueError(f"empty rectangle {self}")

    @classmethod
    def square(cls, L: int) -> "Rectangle":
        return cls(1, 1, L, L)

    @classmethod
    def bounding(cls, sites: Iterable[tuple[int, int]]) -> "Rectangle":
        xs, ys = zip(*sites)
        return cls(min(xs), min(ys), max(xs), max(ys))

    @property
    def width(self) -> int:
        return self.c - self.a + 1

    @property
    def height(self) -> int:
        return self.d - self.b + 1

    @property
    def area(self) -> int:
        return self.width * self.height

    @property
    def long(self) -> int:
        return max(self.width, self.height)

    def contains_site(self, site) -> bool:
        x, y = site
        return self.a <= x <= self.c and self.b <= y <= self.d

    def contains(self, other: "Rectangle") -> bool:
        return self.a <= other.a and self.b <= other.b and other.c <= self.c and other.d <= self.d

    def dist(self, other: "Rectangle") -> int:
        """L-infinity distance between the two site sets."""
        dx = max(0, other.a - self.c, self.a - other.c)
        dy = max(0, other.b - self.d, self.b - other.d)
        return max(dx, dy)

    def union_box(self, other: "Rectangle") -> "Rectangle":
        return Rectangle(min(self.a, other.a), min(self.b, other.b), max(self.c, other.c), max(self.d, other.d))

    def sites(self):
        for x in range(self.a, self.c + 1):
            for y in range(self.b, self.d + 1):
                yield (x, y)

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.a, self.b, self.c, self.d)


@dataclass
class Grid:
    bounds: Rectangle
    occupied: np.ndarray
    active: np.ndarray | None = None

    def __post_init__(self):
        shape = (self.bounds.width, self.bounds.height)
        self.occupied = np.asarray(self.occupied, dtype=bool)
        if self.occupied.shape != shape:
            raise ValueError(f"occupied has shape {self.occupied.shape}, bounds need {shape}")
        if self.active is None:
            self.active = self.occupied.copy()

    @classmethod
    def from_sites(cls, bounds: Rectangle, sites: Iterable[tuple[int, int]]) -> "Grid":
        occ = np.zeros((bounds.width, bounds.height), dtype=bool)
        for x, y in sites:
            if not bounds.contains_site((x, y)):
                raise ValueError(f"site {(x, y)} outside {bounds}")
            occ[x - bounds.a, y - bounds.b] = True
        return cls(bounds, occ)

    def occupied_sites(self) -> list[tuple[int, int]]:
        xs, ys = np.nonzero(self.occupied)
        return [(int(x) + self.bounds.a, int(y) + self.bounds.b) for x, y in zip(xs, ys)]

    def active_sites(self) -> list[tuple[int, int]]:
        xs, ys = np.nonzero(self.active)
        return [(int(x) + self.bounds.a, int(y) + self.bounds.b) for x, y in zip(xs, ys)]

    def to_rle(self) -> str:
        """Run-length text snapshot: one line per row y, '#' active, 'o' occupied, '.' empty."""
        out = io.StringIO()
        r = self.bounds
        out.write(f"bounds {r.a} {r.b} {r.c} {r.d}\n")
        for j in range(r.height):
            row = []
            for i in range(r.width):
                row.append("o" if self.occupied[i, j] else ("#" if self.active[i, j] else "."))
            runs = [f"{len(list(g))}{ch}" for ch, g in itertools.groupby(row)]
            out.write(" ".join(runs) + "\n")
        return out.getvalue()

    @classmethod
    def from_rle(cls, text: str) -> "Grid":
        lines = text.strip().splitlines()
        a, b, c, d = (int(v) for v in lines[0].split()[1:])
        bounds = Rectangle(a, b, c, d)
        occ = np.zeros((bounds.width, bounds.height), dtype=bool)
        act = np.zeros_like(occ)
        for j, line in enumerate(lines[1:]):
            i = 0
            for run in line.split():
                n, ch = int(run[:-1]), run[-1]
                occ[i : i + n, j] = ch == "o"
                act[i : i + n, j] = ch in "o#"
                i += n
        return cls(bounds, occ, act)


# ---------------------------------------------------------------------------
# Neighbourhood tables and numba kernels
# ---------------------------------------------------------------------------

_NN = np.array([(-1, 0), (1, 0), (0, -1), (0, 1)], dtype=np.int64)


@lru_cache(maxsize=None)
def _tables(k: int):
    """Offsets of N_k, its k-subsets with their bounding boxes, and lookup tables."""
    offs = []
    for v in range(1, k):
        offs += [(-v, 0), (v, 0), (0, -v), (0, v)]
    offs = np.array(offs, dtype=np.int64)
    subsets = list(itertools.combinations(range(len(offs)), k))
    members = np.array(subsets, dtype=np.int64)
    bbox = np.empty((len(subsets), 4), dtype=np.int64)
    masks = np.empty(len(subsets), dtype=np.int64)
    for i, sub in enumerate(subsets):
        pts = offs[list(sub)]
        bbox[i] = (pts[:, 0].min(), pts[:, 1].min(), pts[:, 0].max(), pts[:, 1].max())
        masks[i] = sum(1 << j for j in sub)
    by_off = np.array([[i for i, sub in enumerate(subsets) if o in sub] for o in range(len(offs))], dtype=np.int64)
    for arr in (offs, members, bbox, masks, by_off):
        arr.flags.writeable = False
    return offs, members, bbox, masks, by_off


@njit(cache=True)
def _closure_original_kernel(active, inside, offs, theta):
    W, H = active.shape
    cnt = np.zeros((W, H), np.int64)
    sx = np.empty(W * H, np.int64)
    sy = np.empty(W * H, np.int64)
    top = 0
    for x in range(W):
        for y in range(H):
            if active[x, y]:
                sx[top] = x
                sy[top] = y
                top += 1
    escaped = False
    n = offs.shape[0]
    while top > 0:
        top -= 1
        wx = sx[top]
        wy = sy[top]
        for o in range(n):
            zx = wx + offs[o, 0]
            zy = wy + offs[o, 1]
            cnt[zx, zy] += 1
            if cnt[zx, zy] >= theta and not active[zx, zy]:
                if inside[zx, zy]:
                    active[zx, zy] = True
                    sx[top] = zx
                    sy[top] = zy
                    top += 1
                else:
                    escaped = True
    return escaped


@njit(cache=True)
def _closure_enhanced_kernel(active, inside, offs, members, bbox, by_off, nn):
    W, H = active.shape
    k = members.shape[1]
    cnt2 = np.zeros((W, H), np.int64)
    sx = np.empty(W * H, np.int64)
    sy = np.empty(W * H, np.int64)
    top = 0
    for x in range(W):
        for y in range(H):
            if active[x, y]:
                sx[top] = x
                sy[top] = y
                top += 1
    escaped = False
    n = offs.shape[0]
    while top > 0:
        top -= 1
        wx = sx[top]
        wy = sy[top]
        # two active nearest neighbours
        for d in range(4):
            zx = wx + nn[d, 0]
            zy = wy + nn[d, 1]
            cnt2[zx, zy] += 1
            if cnt2[zx, zy] >= 2 and not active[zx, zy]:
                if inside[zx, zy]:
                    active[zx, zy] = True
                    sx[top] = zx
                    sy[top] = zy
                    top += 1
                else:
                    escaped = True
        # k active sites in some N_k(z) with w among them
        for o in range(n):
            zx = wx - offs[o, 0]
            zy = wy - offs[o, 1]
            for t in range(by_off.shape[1]):
                s = by_off[o, t]
                ok = True
                for j in range(k):
                    m = members[s, j]
                    if not active[zx + offs[m, 0], zy + offs[m, 1]]:
                        ok = False
                        break
                if not ok:
                    continue
                for x in range(zx + bbox[s, 0], zx + bbox[s, 2] + 1):
                    for y in range(zy + bbox[s, 1], zy + bbox[s, 3] + 1):
                        if not active[x, y]:
                            if inside[x, y]:
                                active[x, y] = True
                                sx[top] = x
                                sy[top] = y
                                top += 1
                            else:
                                escaped = True
    return escaped


def _margin(k: int) -> int:
    return 2 * k


def _run_closure(occupied: np.ndarray, params: ModelParams) -> np.ndarray:
    """Closure of a boolean array under the model, confined to the array."""
    k = params.k
    m = _margin(k)
    W, H = occupied.shape
    active = np.zeros((W + 2 * m, H + 2 * m), dtype=np.bool_)
    active[m : m + W, m : m + H] = occupied
    inside = np.zeros_like(active)
    inside[m : m + W, m : m + H] = True
    offs, members, bbox, _, by_off = _tables(k)
    if params.variant == "original":
        escaped = _closure_original_kernel(active, inside, offs, params.theta)
    else:
        escaped = _closure_enhanced_kernel(active, inside, offs, members, bbox, by_off, _NN)
    if escaped:
        raise ContainmentError("closure left the bounding rectangle")
    return active[m : m + W, m : m + H].copy()


def closure(grid: Grid, params: ModelParams) -> Grid:
    """Least fixed point of the dynamics containing the occupied set."""
    return Grid(grid.bounds, grid.occupied.copy(), _run_closure(grid.occupied, params))


def is_internally_spanned(rect: Rectangle, occupied, params: ModelParams) -> bool:
    """True iff the occupied sites inside ``rect`` alone activate all of ``rect``."""
    grid = occupied if isinstance(occupied, Grid) else Grid.from_sites(rect, occupied)
    if grid.bounds != rect:
        raise ValueError("grid bounds differ from the rectangle")
    return bool(_run_closure(grid.occupied, params).all())


def traversability_check(rect: Rectangle, occupied, k: int) -> bool:
    """No k consecutive empty columns and no k consecutive empty rows in ``rect``."""
    grid = occupied if isinstance(occupied, Grid) else Grid.from_sites(rect, occupied)
    occ = grid.occupied
    for line in (occ.any(axis=1), occ.any(axis=0)):
        run = 0
        for filled in line:
            run = 0 if filled else run + 1
            if run >= k:
                return False
    return True


# ---------------------------------------------------------------------------
# Rectangle merging
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MergeStep:
    step: int
    members: tuple  # node ids of the clique
    absorbed: tuple  # node ids of other rectangles inside the result
    result: int  # node id of the merged rectangle


@dataclass(frozen=True)
class Node:
    rect: Rectangle
    witness: frozenset
    children: tuple = ()


@dataclass
class SpanResult:
    """Trace of the merging algorithm; ``final`` lists node ids alive at the end."""

    bounds: Rectangle
    params: ModelParams
    nodes: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    final: list = field(default_factory=list)

    @property
    def tau(self) -> int:
        return len(self.steps)

    @property
    def rectangles(self) -> list[Rectangle]:
        return [self.nodes[i].rect for i in self.final]

    def covered(self) -> np.ndarray:
        r = self.bounds
        out = np.zeros((r.width, r.height), dtype=bool)
        for rect in self.rectangles:
            out[rect.a - r.a : rect.c - r.a + 1, rect.b - r.b : rect.d - r.b + 1] = True
        return out

    def spans(self, rect: Rectangle | None = None) -> bool:
        target = self.bounds if rect is None else rect
        return len(self.final) == 1 and self.nodes[self.final[0]].rect == target

    def last_step(self) -> list[Node]:
        """Clique members of the merge that produced the single final rectangle."""
        if len(self.final) != 1 or not self.nodes[self.final[0]].children:
            return []
        return [self.nodes[i] for i in self.nodes[self.final[0]].children]


@njit(cache=True)
def _paint(rects, shape0, shape1, m):
    """Label array: index of the first rectangle (in list order) covering each site, else -1."""
    lab = np.full((shape0, shape1), -1, np.int64)
    for i in range(rects.shape[0] - 1, -1, -1):
        for x in range(rects[i, 0] + m, rects[i, 2] + m + 1):
            for y in range(rects[i, 1] + m, rects[i, 3] + m + 1):
                lab[x, y] = i
    return lab


@njit(cache=True)
def _push_candidate(ids, count, rects, buf, n, uniq):
    """Append the key (area, r, sorted distinct ids...) of ``ids[:count]`` to ``buf``.

    Returns the (possibly reallocated) buffer and the new row count.
    """
    r = 0
    for i in range(count):
        v = ids[i]
        pos = r
        dup = False
        for j in range(r):
            if uniq[j] == v:
                dup = True
                break
            if uniq[j] > v:
                pos = j
                break
        if dup:
            continue
        for j in range(r, pos, -1):
            uniq[j] = uniq[j - 1]
        uniq[pos] = v
        r += 1
    if r < 2:
        return buf, n
    a0 = rects[uniq[0], 0]
    b0 = rects[uniq[0], 1]
    c0 = rects[uniq[0], 2]
    d0 = rects[uniq[0], 3]
    for i in range(1, r):
        a0 = min(a0, rects[uniq[i], 0])
        b0 = min(b0, rects[uniq[i], 1])
        c0 = max(c0, rects[uniq[i], 2])
        d0 = max(d0, rects[uniq[i], 3])
    if n == buf.shape[0]:
        bigger = np.empty((2 * n, buf.shape[1]), np.int64)
        bigger[:n] = buf
        buf = bigger
    buf[n, :] = -1
    buf[n, 0] = (c0 - a0 + 1) * (d0 - b0 + 1)
    buf[n, 1] = r
    for i in range(r):
        buf[n, 2 + i] = uniq[i]
    return buf, n + 1


@njit(cache=True)
def _candidates(lab, rects, offs, members, bbox, masks, nn, m, k):
    """Candidate cliques: rectangles touched by one rule firing, and touching pairs.

    Each row is (bounding-box area, r, member indices..., -1 padding).
    """
    W, H = lab.shape
    buf = np.empty((64, k + 2), np.int64)
    n = 0
    uniq = np.empty(k, np.int64)
    ids = np.empty(k, np.int64)
    nsub = members.shape[0]
    noff = offs.shape[0]
    # two covered nearest neighbours around an uncovered site
    for x in range(m, W - m):
        for y in range(m, H - m):
            if lab[x, y] >= 0:
                continue
            for d1 in range(4):
                l1 = lab[x + nn[d1, 0], y + nn[d1, 1]]
                if l1 < 0:
                    continue
                for d2 in range(d1 + 1, 4):
                    l2 = lab[x + nn[d2, 0], y + nn[d2, 1]]
                    if l2 < 0:
                        continue
                    ids[0] = l1
                    ids[1] = l2
                    buf, n = _push_candidate(ids, 2, rects, buf, n, uniq)
    # k covered sites in some N_k(z) whose bounding box is not covered
    reach = noff // 4
    for zx in range(m - reach, W - m + reach):
        for zy in range(m - reach, H - m + reach):
            cover = 0
            ncov = 0
            for o in range(noff):
                if lab[zx + offs[o, 0], zy + offs[o, 1]] >= 0:
                    cover |= 1 << o
                    ncov += 1
            if ncov < k:
                continue
            for s in range(nsub):
                if cover & masks[s] != masks[s]:
                    continue
                full = True
                for x in range(zx + bbox[s, 0], zx + bbox[s, 2] + 1):
                    for y in range(zy + bbox[s, 1], zy + bbox[s, 3] + 1):
                        if lab[x, y] < 0:
                            full = False
                            break
                    if not full:
                        break
                if full:
                    continue
                for j in range(k):
                    mm = members[s, j]
                    ids[j] = lab[zx + offs[mm, 0], zy + offs[mm, 1]]
                buf, n = _push_candidate(ids, k, rects, buf, n, uniq)
    # pairs of rectangles at distance <= 1 (their union closes to its box)
    nr = rects.shape[0]
    for i in range(nr):
        for j in range(i + 1, nr):
            dx = max(0, rects[j, 0] - rects[i, 2], rects[i, 0] - rects[j, 2])
            dy = max(0, rects[j, 1] - rects[i, 3], rects[i, 1] - rects[j, 3])
            if max(dx, dy) <= 1:
                ids[0] = i
                ids[1] = j
                buf, n = _push_candidate(ids, 2, rects, buf, n, uniq)
    return buf[:n]


def _is_clique_union(rects: Sequence[Rectangle], params: ModelParams) -> bool:
    """Closure of the union, confined to its bounding box, fills the box."""
    box = rects[0]
    for r in rects[1:]:
        box = box.union_box(r)
    occ = np.zeros((box.width, box.height), dtype=bool)
    for r in rects:
        occ[r.a - box.a : r.c - box.a + 1, r.b - box.b : r.d - box.b + 1] = True
    return bool(_run_closure(occ, params).all())


def span_algorithm(occupied, params: ModelParams, bounds: Rectangle | None = None) -> SpanResult:
    """Merge internally spanned rectangles, starting from single sites, until no clique is left.

    A clique is a set of 2..k rectangles, pairwise within distance 2k, whose
    union has closure equal to its bounding box.  Candidates come from single
    rule firings on the current union and from pairs of touching rectangles.
    Each scan sorts its candidates by merged box area, then size, then
    rectangle order, and applies them in turn while all their members are
    still present; every applied candidate is confirmed by a closure run.
    """
    if params.variant != "enhanced":
        raise DomainError("the merging algorithm is defined for the enhanced model")
    if isinstance(occupied, Grid):
        bounds = occupied.bounds
        sites = occupied.occupied_sites()
    else:
        sites = sorted(set(map(tuple, occupied)))
        if bounds is None and sites:
            bounds = Rectangle.bounding(sites)
    if not sites:
        raise DomainError("need at least one occupied site")
    k = params.k
    offs, members, bbox, masks, _ = _tables(k)
    mg = _margin(k)
    shape = (bounds.width + 2 * mg, bounds.height + 2 * mg)

    res = SpanResult(bounds, params)
    for x, y in sorted(sites):
        res.nodes.append(Node(Rectangle(x, y, x, y), frozenset([(x, y)])))
    alive = list(range(len(res.nodes)))  # kept sorted by rectangle
    step = 0
    while len(alive) > 1:
        rects = np.array(
            [(r.a - bounds.a, r.b - bounds.b, r.c - bounds.a, r.d - bounds.b) for r in (res.nodes[i].rect for i in alive)],
            dtype=np.int64,
        )
        lab = _paint(rects, shape[0], shape[1], mg)
        keys = _candidates(lab, rects, offs, members, bbox, masks, _NN, mg, k)
        if len(keys) == 0:
            break
        # rows sorted by (area, r, member order); apply those whose members survive
        live = set(alive)
        for row in np.unique(keys, axis=0):
            chosen = [alive[int(i)] for i in row[2 : 2 + row[1]]]
            if not live.issuperset(chosen):
                continue
            clique = [res.nodes[i] for i in chosen]
            if not _is_clique_union([n.rect for n in clique], params):
                raise AssertionError(f"candidate {[n.rect for n in clique]} failed the clique test")
            merged = clique[0].rect
            for n in clique[1:]:
                merged = merged.union_box(n.rect)
            witness = frozenset().union(*(n.witness for n in clique))
            res.nodes.append(Node(merged, witness, tuple(chosen)))
            new_id = len(res.nodes) - 1
            absorbed = tuple(i for i in live if i not in chosen and merged.contains(res.nodes[i].rect))
            live -= set(chosen) | set(absorbed)
            live.add(new_id)
            res.steps.append(MergeStep(step, tuple(chosen), absorbed, new_id))
            step += 1
        alive = sorted(live, key=lambda i: res.nodes[i].rect)
    res.final = alive
    return res


def last_merge_clauses(result: SpanResult) -> dict[str, bool]:
    """Check the properties of the last merge for a spanned rectangle R."""
    params = result.params
    k = params.k
    R = result.bounds
    parts = result.last_step()
    rects = [p.rect for p in parts]
    checks = {"spans": result.spans()}
    checks["piece_count"] = 2 <= len(parts) <= k
    checks["proper_subrectangles"] = all(R.contains(r) and r != R for r in rects) and len(set(rects)) == len(rects)
    box = rects[0] if rects else R
    for r in rects[1:]:
        box = box.union_box(r)
    checks["union_closure_fills"] = bool(rects) and box == R and _is_clique_union(rects, params)
    checks["pairwise_distance"] = all(r1.dist(r2) <= 2 * k for r1, r2 in itertools.combinations(rects, 2))
    disjoint = all(not (p.witness & q.witness) for p, q in itertools.combinations(parts, 2))
    spanned = True
    for p in parts:
        g = Grid.from_sites(R, p.witness)
        act = _run_closure(g.occupied, params)
        xs, ys = np.nonzero(act)
        got = Rectangle(int(xs.min()) + R.a, int(ys.min()) + R.b, int(xs.max()) + R.a, int(ys.max()) + R.b)
        spanned &= got == p.rect and int(act.sum()) == p.rect.area
    checks["disjoint_spanning_witnesses"] = disjoint and spanned
    return checks


@dataclass(frozen=True)
class LongSideResult:
    found: bool
    rect: Rectangle | None
    method: str  # "self", "descent" or "search"


def long_side_check(
    rect: Rectangle, occupied, params: ModelParams, ell: int, result: SpanResult | None = None
) -> LongSideResult:
    """Find an internally spanned R' inside ``rect`` with long(R') in [ell, 2 ell + 2k].

    Follows the merge hierarchy from ``rect`` down, always into the piece
    with the longest side; if that path skips the window, every rectangle of
    the hierarchy is searched.  ``result`` may pass in an existing trace
    of the merging algorithm on the same input.
    """
    if ell < 1:
        raise DomainError("ell must be positive")
    if rect.long < ell:
        raise DomainError("long(rect) < ell")
    p = ModelParams(params.k, variant="enhanced")
    grid = occupied if isinstance(occupied, Grid) else Grid.from_sites(rect, occupied)
    res = result if result is not None else span_algorithm(grid, p)
    if not res.spans(rect):
        raise DomainError("rectangle is not internally spanned")
    hi = 2 * ell + 2 * p.k
    if rect.long <= hi:
        return LongSideResult(True, rect, "self")
    node = res.nodes[res.final[0]]
    while node.children:
        node = max((res.nodes[i] for i in node.children), key=lambda n: (n.rect.long, [-v for v in n.rect.as_tuple()]))
        if node.rect.long <= hi:
            if node.rect.long >= ell:
                return LongSideResult(True, node.rect, "descent")
            break
    for n in res.nodes:
        if ell <= n.rect.long <= hi:
            return LongSideResult(True, n.rect, "search")
    return LongSideResult(False, None, "search")


# ---------------------------------------------------------------------------
# Nucleation event
# ---------------------------------------------------------------------------


def nucleation_sites(m: int, k: int) -> dict[str, list]:
    """Sites entering the event H on R(m, m)."""
    if m <= k + 1:
        raise DomainError("need m > k + 1")
    block = [(x, y) for x in range(1, k + 1) for y in range(1, k + 1)]
    cols = [[(k + i, j) for j in range(1, i + 1)] for i in range(1, m - k)]
    rows = [[(j, k + i) for j in range(1, i + 1)] for i in range(1, m - k)]
    return {"block": block, "corners": [(m, 1), (1, m)], "columns": cols, "rows": rows}


def _no_gap(flags: Sequence[bool], k: int) -> bool:
    run = 0
    for f in flags:
        run = 0 if f else run + 1
        if run >= k:
            return False
    return True


def nucleation_event(occ: np.ndarray, m: int, k: int) -> bool:
    """Whether H holds for a boolean array over R(m, m) (index [x-1, y-1])."""
    S = nucleation_sites(m, k)
    at = lambda s: bool(occ[s[0] - 1, s[1] - 1])  # noqa: E731
    if not all(map(at, S["block"])) or not all(map(at, S["corners"])):
        return False
    c = [any(map(at, col)) for col in S["columns"]]
    r = [any(map(at, row)) for row in S["rows"]]
    return _no_gap(c, k) and _no_gap(r, k)


def nucleation_probability(m: int, k: int, s: float) -> float:
    """P_s(H) = s^(k^2+2) * P(no k-gap among the first m-k-1 column events)^2."""
    if m <= k + 1:
        raise DomainError("need m > k + 1")
    probs = [-math.expm1(i * math.log1p(-s)) for i in range(1, m - k)]
    g = prefix_no_gap(k, probs).total
    return s ** (k * k + 2) * g * g


def nucleation_probability_enumerated(m: int, k: int, s) -> float | Fraction:
    """P_s(H) by summing over all states of the sites H depends on (small m only)."""
    S = nucleation_sites(m, k)
    sites = S["block"] + S["corners"] + [x for col in S["columns"] for x in col] + [x for row in S["rows"] for x in row]
    if len(sites) > 22:
        raise DomainError("too many sites to enumerate")
    total = 0 * s
    occ = np.zeros((m, m), dtype=bool)
    for bits in itertools.product((False, True), repeat=len(sites)):
        for (x, y), b in zip(sites, bits):
            occ[x - 1, y - 1] = b
        if nucleation_event(occ, m, k):
            j = sum(bits)
            total += s**j * (1 - s) ** (len(sites) - j)
    return total


def nucleation_lower_bound(m: int, k: int, s: float) -> float:
    """s^(k^2+2) * P_s(A_k)^2, the bound used for the nucleation estimate."""
    return s ** (k * k + 2) * math.exp(2 * p_Ak(GapParams(k, s)).log_value)


@dataclass(frozen=True)
class NucleationSample:
    occurrences: int
    spanned_when_occurring: int
    trials: int


def nucleation_H(m: int, k: int, s: float, mode: str = "exact", trials: int = 1000, seed: int = 42):
    """Exact P_s(H), or sampled occurrences of H each checked to span R(m, m)."""
    if mode == "exact":
        return nucleation_probability(m, k, s)
    if mode != "sample":
        raise DomainError("mode must be 'exact' or 'sample'")
    params = ModelParams(k)
    hits = spanned = 0
    for t in range(trials):
        occ = _uniforms(seed, t, m) < s
        if nucleation_event(occ, m, k):
            hits += 1
            if _run_closure(occ, params).all():
                spanned += 1
            else:
                raise AssertionError(f"H occurred but R({m},{m}) is not spanned (trial {t})")
    return NucleationSample(hits, spanned, trials)


# ---------------------------------------------------------------------------
# Spanning probability I(L, s)
# ---------------------------------------------------------------------------


@njit(cache=True)
def _exhaustive_counts(L, original, theta, offs, members, bbox, by_off, nn, m):
    n = L * L
    counts = np.zeros(n + 1, np.int64)
    W = L + 2 * m
    inside = np.zeros((W, W), np.bool_)
    inside[m : m + L, m : m + L] = True
    active = np.zeros((W, W), np.bool_)
    escaped_any = False
    for mask in range(1 << n):
        active[:, :] = False
        pop = 0
        for i in range(n):
            if (mask >> i) & 1:
                active[m + i // L, m + i % L] = True
                pop += 1
        if original:
            esc = _closure_original_kernel(active, inside, offs, theta)
        else:
            esc = _closure_enhanced_kernel(active, inside, offs, members, bbox, by_off, nn)
        escaped_any |= esc
        full = True
        for x in range(m, m + L):
            for y in range(m, m + L):
                if not active[x, y]:
                    full = False
        if full:
            counts[pop] += 1
    return counts, escaped_any


@dataclass(frozen=True)
class SpanningPolynomial:
    """I(L, s) = sum_j counts[j] s^j (1-s)^(L^2-j)."""

    L: int
    counts: tuple

    def __call__(self, s):
        n = self.L * self.L
        return sum(c * s**j * (1 - s) ** (n - j) for j, c in enumerate(self.counts) if c)


def exhaustive_I(L: int, params: ModelParams) -> SpanningPolynomial:
    if not 1 <= L <= 5:
        raise DomainError("exhaustive enumeration supports 1 <= L <= 5")
    offs, members, bbox, _, by_off = _tables(params.k)
    counts, escaped = _exhaustive_counts(
        L, params.variant == "original", params.theta, offs, members, bbox, by_off, _NN, _margin(params.k)
    )
    if escaped:
        raise ContainmentError("closure left the square during enumeration")
    return SpanningPolynomial(L, tuple(int(c) for c in counts))


def _shell_index(L: int) -> np.ndarray:
    """Position of site (x, y) (0-based) in the nested shell order max(x, y) = 0, 1, 2, ..."""
    idx = np.empty((L, L), dtype=np.int64)
    for q in range(L):
        for y in range(q + 1):
            idx[q, y] = q * q + y
        for x in range(q):
            idx[x, q] = q * q + q + 1 + x
    return idx


def _block_uniforms(seed: int, block: int, L: int) -> np.ndarray:
    """Uniform fields for the trials of one block, shape (BLOCK_TRIALS, L, L).

    Values are drawn site-major so the L x L corner of a larger field is the
    same field; square sizes are therefore coupled through the seed.
    """
    gen = np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), block]))
    u = gen.random((L * L, BLOCK_TRIALS))
    return u[_shell_index(L)].transpose(2, 0, 1)


def _uniforms(seed: int, trial: int, L: int) -> np.ndarray:
    return _block_uniforms(seed, trial // BLOCK_TRIALS, L)[trial % BLOCK_TRIALS]


@njit(cache=True)
def _count_spanned(fields, s, original, theta, offs, members, bbox, by_off, nn, m):
    T, L, _ = fields.shape
    W = L + 2 * m
    inside = np.zeros((W, W), np.bool_)
    inside[m : m + L, m : m + L] = True
    active = np.zeros((W, W), np.bool_)
    out = np.zeros(T, np.bool_)
    escaped_any = False
    for t in range(T):
        active[:, :] = False
        for x in range(L):
            for y in range(L):
                if fields[t, x, y] < s:
                    active[m + x, m + y] = True
        if original:
            esc = _closure_original_kernel(active, inside, offs, theta)
        else:
            esc = _closure_enhanced_kernel(active, inside, offs, members, bbox, by_off, nn)
        escaped_any |= esc
        full = True
        for x in range(m, m + L):
            for y in range(m, m + L):
                if not active[x, y]:
                    full = False
        out[t] = full
    return out, escaped_any


def spanned_trials(L: int, s: float, trials: int, seed: int, params: ModelParams) -> np.ndarray:
    """Boolean outcome of each trial; trial t depends only on (seed, t)."""
    if trials < 1:
        raise DomainError("trials must be >= 1")
    if L < 1 or not 0 <= s <= 1:
        raise DomainError("need L >= 1 and s in [0, 1]")
    offs, members, bbox, _, by_off = _tables(params.k)
    out = np.empty(trials, dtype=bool)
    for block in range(-(-trials // BLOCK_TRIALS)):
        fields = _block_uniforms(seed, block, L)
        res, esc = _count_spanned(
            fields, s, params.variant == "original", params.theta, offs, members, bbox, by_off, _NN, _margin(params.k)
        )
        if esc:
            raise ContainmentError("closure left the square")
        lo = block * BLOCK_TRIALS
        n = min(BLOCK_TRIALS, trials - lo)
        out[lo : lo + n] = res[:n]
    return out


@dataclass(frozen=True)
class MonteCarloEstimate:
    spanned: int
    trials: int
    estimate: float
    ci_low: float
    ci_high: float
    confidence: float


def wilson_interval(successes: int, trials: int, confidence: float = 0.99) -> tuple[float, float]:
    ci = stats.binomtest(successes, trials).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def monte_carlo_I(
    L: int, s: float, trials: int, seed: int, params: ModelParams, confidence: float = 0.99
) -> MonteCarloEstimate:
    hits = int(spanned_trials(L, s, trials, seed, params).sum())
    lo, hi = wilson_interval(hits, trials, confidence)
    return MonteCarloEstimate(hits, trials, hits / trials, lo, hi, confidence)


SWEEP_HEADER = ("k", "variant", "L", "s", "s_log_L", "trials", "spanned", "estimate", "ci_low", "ci_high", "seed")


def threshold_sweep(
    k: int,
    L_list: Sequence[int],
    s_list: Sequence[float],
    trials: int,
    seed: int,
    variant: str = "original",
    theta: int | None = None,
) -> list[dict]:
    """Coupled estimates of I(L, s): every (L, s) reuses the same random fields."""
    params = ModelParams(k, theta, variant)
    rows = []
    for L in L_list:
        for s in s_list:
            est = monte_carlo_I(L, s, trials, seed, params)
            rows.append(
                dict(
                    k=k,
                    variant=variant,
                    L=L,
                    s=s,
                    s_log_L=s * math.log(L),
                    trials=trials,
                    spanned=est.spanned,
                    estimate=est.estimate,
                    ci_low=est.ci_low,
                    ci_high=est.ci_high,
                    seed=seed,
                )
            )
    return rows
