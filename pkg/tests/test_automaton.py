import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgap.core_math import DomainError
from kgap.automaton import (
    SWEEP_HEADER,
    Grid,
    ModelParams,
    Rectangle,
    closure,
    exhaustive_I,
    is_internally_spanned,
    last_merge_clauses,
    long_side_check,
    monte_carlo_I,
    nucleation_H,
    nucleation_lower_bound,
    nucleation_probability,
    nucleation_probability_enumerated,
    span_algorithm,
    spanned_trials,
    threshold_sweep,
    traversability_check,
    wilson_interval,
)

ORIG2 = ModelParams(2)
ENH2 = ModelParams(2, variant="enhanced")
ENH3 = ModelParams(3, variant="enhanced")


def random_grid(rng, w, h, s, origin=(1, 1)):
    bounds = Rectangle(origin[0], origin[1], origin[0] + w - 1, origin[1] + h - 1)
    return Grid(bounds, rng.random((w, h)) < s)


def test_model_params():
    p = ModelParams(3)
    assert p.theta == 3
    assert len(p.neighbourhood) == 8
    assert (0, 0) not in p.neighbourhood
    assert set(ModelParams(4).neighbourhood) == {(v * sx, 0) for v in (1, 2, 3) for sx in (1, -1)} | {
        (0, v * sy) for v in (1, 2, 3) for sy in (1, -1)
    }
    with pytest.raises(DomainError):
        ModelParams(1)
    with pytest.raises(DomainError):
        ModelParams(2, variant="other")


def test_rectangle_geometry():
    r = Rectangle(1, 2, 4, 3)
    assert (r.width, r.height, r.area, r.long) == (4, 2, 8, 4)
    assert r.contains(Rectangle(2, 2, 3, 3))
    assert not r.contains(Rectangle(0, 2, 3, 3))
    assert r.dist(Rectangle(6, 3, 7, 9)) == 2
    assert r.dist(Rectangle(2, 2, 2, 2)) == 0
    assert r.union_box(Rectangle(7, 7, 7, 7)) == Rectangle(1, 2, 7, 7)
    assert len(list(r.sites())) == r.area
    with pytest.raises(ValueError):
        Rectangle(3, 1, 2, 1)


def test_closure_examples():
    sq = Rectangle.square(2)
    empty = Grid.from_sites(sq, [])
    assert not closure(empty, ORIG2).active.any()
    diag = Grid.from_sites(sq, [(1, 1), (2, 2)])
    assert closure(diag, ORIG2).active.all()
    assert is_internally_spanned(sq, [(1, 1), (2, 2)], ORIG2)
    assert not is_internally_spanned(sq, [(1, 1), (1, 2)], ORIG2)
    assert is_internally_spanned(sq, list(sq.sites()), ORIG2)


def test_enhanced_connected_set_fills_bounding_box():
    rng = np.random.default_rng(3)
    for _ in range(30):
        # a random lattice path is connected
        pos = np.array([0, 0])
        path = [tuple(pos)]
        for _ in range(rng.integers(2, 25)):
            pos = pos + [(1, 0), (-1, 0), (0, 1), (0, -1)][rng.integers(4)]
            path.append(tuple(int(v) for v in pos))
        box = Rectangle.bounding(path)
        for p in (ENH2, ENH3):
            assert is_internally_spanned(box, path, p)


def test_grid_rle_round_trip():
    rng = np.random.default_rng(0)
    g = closure(random_grid(rng, 7, 5, 0.3, origin=(2, -1)), ORIG2)
    back = Grid.from_rle(g.to_rle())
    assert back.bounds == g.bounds
    assert np.array_equal(back.occupied, g.occupied)
    assert np.array_equal(back.active, g.active)
    assert set(g.occupied_sites()) <= set(g.active_sites())


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), s=st.floats(0.05, 0.5), k=st.integers(2, 4))
def test_closure_monotone_and_dominated(seed, s, k):
    rng = np.random.default_rng(seed)
    g = random_grid(rng, 12, 10, s)
    extra = g.occupied | (rng.random(g.occupied.shape) < 0.05)
    g2 = Grid(g.bounds, extra)
    orig, enh = ModelParams(k), ModelParams(k, variant="enhanced")
    c_small = closure(g, orig).active
    c_big = closure(g2, orig).active
    assert np.all(c_small <= c_big)
    assert np.all(closure(g, enh).active <= closure(g2, enh).active)
    assert np.all(c_small <= closure(g, enh).active)
    assert np.all(g.occupied <= c_small)


def test_traversability_examples():
    sq = Rectangle.square(6)
    assert traversability_check(sq, list(sq.sites()), 2)
    # two empty adjacent columns, everything else full
    sites = [(x, y) for x, y in sq.sites() if x not in (3, 4)]
    assert not traversability_check(sq, sites, 2)
    assert not is_internally_spanned(sq, sites, ORIG2)
    assert not is_internally_spanned(sq, sites, ENH2)


def test_traversability_necessary():
    rng = np.random.default_rng(11)
    seen = 0
    for _ in range(300):
        for p in (ORIG2, ENH3):
            g = random_grid(rng, 8, 8, 0.25)
            if is_internally_spanned(g.bounds, g, p):
                seen += 1
                assert traversability_check(g.bounds, g, p.k)
    assert seen > 20


def test_span_algorithm_examples():
    one = span_algorithm([(3, 4)], ENH2)
    assert one.tau == 0 and one.rectangles == [Rectangle(3, 4, 3, 4)]
    two = span_algorithm([(1, 1), (2, 2)], ENH2)
    assert two.rectangles == [Rectangle(1, 1, 2, 2)]
    assert two.spans() and two.tau == 1
    # within distance 2k but without a shared neighbour: not a clique
    apart = span_algorithm([(1, 1), (3, 3)], ENH2)
    assert len(apart.rectangles) == 2
    with pytest.raises(DomainError):
        span_algorithm([(1, 1)], ORIG2)
    with pytest.raises(DomainError):
        span_algorithm([], ENH2)


@pytest.mark.parametrize("params,size,s", [(ENH2, 20, 0.1), (ENH3, 20, 0.15), (ENH2, 25, 0.05)])
def test_span_algorithm_matches_closure(params, size, s):
    rng = np.random.default_rng(params.k * 100 + size)
    for _ in range(15):
        g = random_grid(rng, size, size, s)
        if not g.occupied.any():
            continue
        res = span_algorithm(g, params)
        assert np.array_equal(res.covered(), closure(g, params).active)
        rects = res.rectangles
        for r1, r2 in itertools.combinations(rects, 2):
            assert not r1.contains(r2) and not r2.contains(r1)
        occupied = set(g.occupied_sites())
        for i, j in itertools.combinations(res.final, 2):
            assert not res.nodes[i].witness & res.nodes[j].witness
        for i in res.final:
            node = res.nodes[i]
            assert node.witness <= occupied
            assert Rectangle.bounding(node.witness) == node.rect
            assert is_internally_spanned(node.rect, node.witness, params)


def test_last_merge_clauses_on_spanned_instances():
    rng = np.random.default_rng(5)
    checked = 0
    for params, s in ((ENH2, 0.2), (ENH3, 0.3)):
        for _ in range(60):
            g = random_grid(rng, 10, 10, s)
            if not is_internally_spanned(g.bounds, g, params):
                continue
            res = span_algorithm(g, params)
            clauses = last_merge_clauses(res)
            assert all(clauses.values()), clauses
            checked += 1
    assert checked > 20


def test_long_side_window():
    rng = np.random.default_rng(9)
    found = 0
    for params, s, ell in ((ENH2, 0.2, 5), (ENH3, 0.3, 7)):
        for _ in range(40):
            g = random_grid(rng, 24, 24, s)
            if not is_internally_spanned(g.bounds, g, params):
                continue
            out = long_side_check(g.bounds, g, params, ell)
            assert out.found
            assert ell <= out.rect.long <= 2 * ell + 2 * params.k
            sub = Grid(out.rect, g.occupied[out.rect.a - 1 : out.rect.c, out.rect.b - 1 : out.rect.d])
            assert is_internally_spanned(out.rect, sub, params)
            found += 1
    assert found > 10
    sq = Rectangle.square(5)
    assert long_side_check(sq, list(sq.sites()), ENH2, 5).method == "self"


def test_nucleation_formula_against_enumeration():
    for m, k in ((4, 2), (5, 2), (6, 2), (5, 3)):
        for s in (Fraction(1, 3), Fraction(7, 10)):
            exact = nucleation_probability_enumerated(m, k, s)
            assert nucleation_probability(m, k, float(s)) == pytest.approx(float(exact), rel=1e-12)


def test_nucleation_smallest_square():
    # m = k + 2 leaves one column event, too few for a k-gap when k >= 2
    for k in (2, 3):
        s = 0.4
        assert nucleation_probability(k + 2, k, s) == pytest.approx(s ** (k * k + 2), rel=1e-14)
    with pytest.raises(DomainError):
        nucleation_probability(3, 2, 0.5)


def test_nucleation_lower_bound():
    for m, k, s in ((8, 2, 0.3), (12, 3, 0.2), (6, 2, 0.05)):
        assert nucleation_H(m, k, s) >= nucleation_lower_bound(m, k, s)


def test_nucleation_sampling_spans():
    res = nucleation_H(8, 2, 0.6, mode="sample", trials=512, seed=1)
    assert res.occurrences > 0
    assert res.spanned_when_occurring == res.occurrences


def test_exhaustive_small_squares():
    one = exhaustive_I(1, ORIG2)
    assert one(Fraction(1, 3)) == Fraction(1, 3)
    two = exhaustive_I(2, ORIG2)
    assert two(Fraction(1, 2)) == Fraction(7, 16)
    with pytest.raises(DomainError):
        exhaustive_I(6, ORIG2)


def test_exhaustive_enhanced_dominates():
    for L in (2, 3, 4):
        orig = exhaustive_I(L, ModelParams(3))
        enh = exhaustive_I(L, ModelParams(3, variant="enhanced"))
        for s in (0.2, 0.5, 0.8):
            assert enh(s) >= orig(s) - 1e-15


def test_monte_carlo_matches_exhaustive():
    exact = float(exhaustive_I(2, ORIG2)(0.5))
    est = monte_carlo_I(2, 0.5, 100_000, 42, ORIG2)
    assert est.ci_low <= exact <= est.ci_high
    poly3 = exhaustive_I(3, ORIG2)
    est3 = monte_carlo_I(3, 0.3, 20_000, 7, ORIG2)
    assert est3.ci_low <= float(poly3(0.3)) <= est3.ci_high


def test_monte_carlo_edge_and_determinism():
    assert monte_carlo_I(6, 1.0, 300, 1, ORIG2).estimate == 1.0
    a = spanned_trials(5, 0.3, 700, 123, ENH3)
    b = spanned_trials(5, 0.3, 700, 123, ENH3)
    assert np.array_equal(a, b)
    # a trial depends only on (seed, trial index)
    assert np.array_equal(spanned_trials(5, 0.3, 300, 123, ENH3), a[:300])


def test_coupling_is_pathwise_in_s_and_variant():
    lo = spanned_trials(6, 0.2, 1000, 5, ModelParams(3))
    hi = spanned_trials(6, 0.3, 1000, 5, ModelParams(3))
    enh = spanned_trials(6, 0.2, 1000, 5, ModelParams(3, variant="enhanced"))
    assert np.all(lo <= hi)
    assert np.all(lo <= enh)


def test_wilson_interval():
    lo, hi = wilson_interval(50, 100)
    assert lo < 0.5 < hi
    assert wilson_interval(0, 10)[0] == 0.0


def test_threshold_sweep_rows():
    rows = threshold_sweep(2, [3, 5], [0.2, 0.4], 500, 42)
    assert len(rows) == 4
    assert tuple(rows[0]) == SWEEP_HEADER
    by = {(r["L"], r["s"]): r["estimate"] for r in rows}
    assert by[(3, 0.2)] <= by[(3, 0.4)]
    assert by[(5, 0.2)] <= by[(5, 0.4)]
    assert rows[0]["s_log_L"] == pytest.approx(0.2 * np.log(3))
