"""Curtain and chain combinatorics."""

import math

import numpy as np
import pytest

from curtainmodel import (AnnulusCover, Chain, ChainError, Curtain, Euclidean,
                          HalfPlane, Side, SpaceDomainError, chain_from_spec,
                          chain_separates, check_backtracking,
                          curtains_disjoint, curtains_meet, dual_chain,
                          glue_chains, h2_certified_gap, separates, side_of,
                          support_points, validate_chain)
from conftest import sample_pair

LOG100 = math.log(100.0)


def e2_axis_curtain(r=0.0):
    e = Euclidean(2)
    line = e._line([0.0, 0.0], [1.0, 0.0], (-60.0, 60.0))
    return Curtain(line, r), e


def h2_axis(domain=(-30.0, 30.0)):
    h = HalfPlane()
    return h._vertical(0.0, 1.0, 0.0, domain), h


# ---------------------------------------------------------------------------
# sides and separation
# ---------------------------------------------------------------------------

def test_side_examples():
    h, e = e2_axis_curtain()
    assert side_of(h, e.point([0.4, 10.0])) is Side.ON
    assert side_of(h, e.point([-3.0, 2.0])) is Side.MINUS
    axis, hp = h2_axis()
    hh = Curtain(axis, 0.0)
    # projection parameter of 100i is log 100 > 1/2
    assert hp.project(hp.point(100j), axis) == pytest.approx(LOG100, abs=1e-9)
    assert side_of(hh, hp.point(100j)) is Side.PLUS


def test_side_tie_resolves_on():
    h, e = e2_axis_curtain()
    assert side_of(h, e.point([0.5, 3.0])) is Side.ON
    assert side_of(h, e.point([-0.5, 3.0])) is Side.ON


def test_partition_property(spaces, rng):
    for name in ("euclidean2", "half_plane", "annulus"):
        space = spaces[name]
        x, y = sample_pair(space, rng, min_distance=1.5)
        geo = space.geodesic(x, y)
        h = Curtain(geo, geo.length / 2)
        for _ in range(60):
            p = space.sample_point(rng)
            assert side_of(h, p) in (Side.MINUS, Side.ON, Side.PLUS)


def test_separates_examples():
    h, e = e2_axis_curtain()
    assert separates(h, e.point([-2.0, 0.0]), e.point([2.0, 0.0]))
    assert not separates(h, e.point([0.3, 0.0]), e.point([2.0, 0.0]))
    a = AnnulusCover(True)
    lift = a.boundary_lift((-20.0, 20.0))
    hh = Curtain(lift, math.pi)
    # projections are the angular coordinates 0 and 2 pi, straddling the pole
    assert separates(hh, a.point((0.0, 1.0)), a.point((2 * math.pi, 1.0)))


def test_halfspace_gap_at_least_one(spaces, rng):
    # d(h-, h+) = 1: projections are 1-Lipschitz so sampled opposite-side
    # points are always > 1 apart
    for name in ("euclidean2", "half_plane", "annulus"):
        space = spaces[name]
        x, y = sample_pair(space, rng, min_distance=2.5)
        geo = space.geodesic(x, y)
        h = Curtain(geo, geo.length / 2)
        minus = [p for p in (space.sample_point(rng) for _ in range(120))
                 if side_of(h, p) is Side.MINUS]
        plus = [p for p in (space.sample_point(rng) for _ in range(120))
                if side_of(h, p) is Side.PLUS]
        for p in minus[:8]:
            for q in plus[:8]:
                assert space.distance(p, q) >= 1.0 - 1e-6


def test_pole_must_be_interior():
    e = Euclidean(2)
    seg = e.geodesic(e.point([0, 0]), e.point([3, 0]))
    with pytest.raises(SpaceDomainError):
        Curtain(seg, 0.3)       # pole [-0.2, 0.8] leaves the domain
    Curtain(seg, 1.5)           # interior pole is fine


# ---------------------------------------------------------------------------
# dual chains
# ---------------------------------------------------------------------------

def test_dual_chain_cardinality_euclidean_example():
    e = Euclidean(2)
    ch = dual_chain(e.point([0, 0]), e.point([2.5, 0]))
    assert len(ch) == 2 == math.ceil(2.5) - 1
    assert chain_separates(ch, e.point([0, 0]), e.point([2.5, 0]))
    rs = [c.r for c in ch]
    assert rs[1] - rs[0] > 1.0


def test_dual_chain_short_distance_empty(spaces, rng):
    for name in ("euclidean2", "half_plane", "annulus"):
        space = spaces[name]
        x, y = sample_pair(space, rng, min_distance=0.1)
        geo = space.geodesic(x, y)
        z = geo.point_at(min(0.9, geo.length * 0.5))
        assert len(dual_chain(x, z)) == max(0, math.ceil(space.distance(x, z)) - 1)


def test_dual_chain_halfplane_e4():
    h = HalfPlane()
    x, y = h.point(1j), h.point(complex(0.0, math.e ** 4))
    ch = dual_chain(x, y)
    assert len(ch) == 3
    for c in ch:
        assert separates(c, x, y)


@pytest.mark.parametrize("name", ["euclidean2", "half_plane", "product",
                                  "glued", "annulus"])
def test_dual_chain_cardinality_random(spaces, rng, name):
    space = spaces[name]
    hits = 0
    for _ in range(120):
        try:
            x, y = sample_pair(space, rng, min_distance=1.01)
        except RuntimeError:
            continue
        d = space.distance(x, y)
        try:
            ch = dual_chain(x, y)
        except SpaceDomainError:
            continue  # incomplete-annulus style failures are legitimate
        hits += 1
        assert len(ch) == math.ceil(d) - 1
        assert chain_separates(ch, x, y)
        for a, b in zip(ch.curtains, ch.curtains[1:]):
            assert b.r - a.r > 1.0
            assert curtains_disjoint(a, b)
    assert hits > 60


def test_dual_chain_validation(spaces, rng):
    for name in ("euclidean2", "half_plane", "annulus"):
        space = spaces[name]
        x, y = sample_pair(space, rng, min_distance=3.2)
        ch = dual_chain(x, y)
        assert validate_chain(ch) == []


# ---------------------------------------------------------------------------
# meeting and disjointness
# ---------------------------------------------------------------------------

def test_same_dual_disjointness_threshold():
    axis, hp = h2_axis()
    a = Curtain(axis, 0.0)
    assert not curtains_disjoint(a, Curtain(axis, 0.9))
    assert curtains_disjoint(a, Curtain(axis, 1.5))
    w = curtains_meet(a, Curtain(axis, 0.9))
    assert w is not None and side_of(a, w) is Side.ON


def test_euclidean_slab_meeting_closed_form():
    e = Euclidean(2)
    hx = Curtain(e._line([0, 0], [1, 0], (-40, 40)), 0.0)
    hy = Curtain(e._line([0, 0], [0, 1], (-40, 40)), 7.0)
    w = curtains_meet(hx, hy)
    assert w is not None
    assert side_of(hx, w) is Side.ON and side_of(hy, w) is Side.ON
    far = Curtain(e._line([0, 0], [1, 0], (-40, 40)), 5.0)
    assert curtains_disjoint(hx, far)
    assert curtains_meet(hx, far) is None


def test_support_points_are_members(spaces, rng):
    for name in ("euclidean2", "half_plane", "product", "annulus"):
        space = spaces[name]
        x, y = sample_pair(space, rng, min_distance=2.2)
        geo = space.geodesic(x, y)
        h = Curtain(geo, geo.length / 2)
        pts = support_points(h)
        assert len(pts) >= 1
        for p in pts:
            assert side_of(h, p) is Side.ON


# ---------------------------------------------------------------------------
# gluing chains (lemma arithmetic and a constructed instance)
# ---------------------------------------------------------------------------

def _axis_chain(h, axis, poles, grade):
    return Chain(tuple(Curtain(axis, r) for r in poles), grade, "constructed")


def test_glue_chains_cardinality_arithmetic():
    # |c|=5, |c'|=L+4=6, L=2 -> merged cardinality 5+6-4 = 7
    L = 2
    gap = h2_certified_gap(L)
    axis, hp = h2_axis((-90.0, 90.0))
    c = _axis_chain(hp, axis, [i * gap for i in range(5)], L)
    cp = _axis_chain(hp, axis, [4 * gap + 0.4 + i * gap for i in range(6)], L)
    merged = glue_chains(c, cp, L)
    assert len(merged) == 5 + 6 - L - 2 == 7
    assert validate_chain(merged) == []


def test_glue_chains_requires_long_second_chain():
    L = 2
    axis, hp = h2_axis((-60.0, 60.0))
    c = _axis_chain(hp, axis, [0.0, 3.1], L)
    cp = _axis_chain(hp, axis, [6.0, 9.1, 12.2][:L + 1], L)
    with pytest.raises(ChainError):
        glue_chains(c, cp, L)


def test_glue_chains_merged_chain_is_valid():
    L = 1
    gap = h2_certified_gap(L)
    axis, hp = h2_axis((-200.0, 200.0))
    c = _axis_chain(hp, axis, [i * gap for i in range(4)], L)
    cp = _axis_chain(hp, axis, [3 * gap + 1.3 + i * gap for i in range(L + 3)], L)
    merged = glue_chains(c, cp, L)
    assert len(merged) == 4 + (L + 3) - L - 2
    assert validate_chain(merged) == []
    x = hp.point(complex(0.0, math.exp(-2.0)))
    y = hp.point(complex(0.0, math.exp(3 * gap + 1.3 + (L + 2) * gap + 2.0)))
    assert chain_separates(merged, x, y)


def test_glue_chains_rejects_wrongly_interleaved():
    # an early curtain of c' buried strictly inside c violates the far
    # half-space hypothesis of h_0
    L = 1
    gap = h2_certified_gap(L)
    axis, hp = h2_axis((-400.0, 400.0))
    c = _axis_chain(hp, axis, [0.0, gap], L)
    cp = _axis_chain(hp, axis, [gap / 2.0] + [2 * gap + i * gap
                                              for i in range(L + 2)], L)
    with pytest.raises(ChainError):
        glue_chains(c, cp, L)


# ---------------------------------------------------------------------------
# backtracking diagnostic
# ---------------------------------------------------------------------------

def test_check_backtracking_pattern_mismatch():
    axis, hp = h2_axis()
    h = Curtain(axis, 0.0)
    k = Curtain(axis, 8.0)
    geo = hp.geodesic(hp.point(complex(0.0, math.exp(-2.0))),
                      hp.point(complex(0.0, math.exp(10.0))))
    with pytest.raises(ChainError):
        check_backtracking(h, k, 1, geo, [1.0, 2.0, 3.0, 4.0])
    with pytest.raises(ChainError):
        check_backtracking(h, k, 1, geo, [2.0, 1.0, 3.0, 4.0])


def test_check_backtracking_no_weaving_instances(spaces, rng):
    """Curtains in these backends are convex, so a geodesic cannot revisit
    one: randomized search finds no admissible pattern, and the lemma holds
    vacuously (zero falsification events)."""
    hp = spaces["half_plane"]
    axis, _ = h2_axis((-60.0, 60.0))
    gap = h2_certified_gap(1)
    h = Curtain(axis, 0.0)
    k = Curtain(axis, gap)
    found = []
    for _ in range(100):
        x, y = sample_pair(hp, rng, min_distance=4.0)
        geo = hp.geodesic(x, y)
        ts = np.linspace(0.0, geo.length, 40)
        in_h = [bool(side_of(h, geo.point_at(float(t))) is Side.ON) for t in ts]
        in_k = [bool(side_of(k, geo.point_at(float(t))) is Side.ON) for t in ts]
        # weaving = both memberships occur and one recurs after the other
        for i in range(40):
            for j in range(i + 1, 40):
                for a in range(j + 1, 40):
                    for b in range(a + 1, 40):
                        if in_h[i] and in_k[j] and ((in_k[a] and in_h[b]) or
                                                    (in_h[a] and in_k[b])):
                            ok = check_backtracking(
                                h, k, 1, geo,
                                [float(ts[i]), float(ts[j]),
                                 float(ts[a]), float(ts[b])])
                            found.append(ok)
    assert all(found)  # vacuous or true: never a falsification


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def test_chain_roundtrip(spaces, rng):
    for name in ("euclidean2", "half_plane", "annulus"):
        space = spaces[name]
        x, y = sample_pair(space, rng, min_distance=2.5)
        ch = dual_chain(x, y)
        spec = ch.to_spec()
        back = chain_from_spec(space, spec)
        assert len(back) == len(ch)
        assert chain_separates(back, x, y)
        assert [c.r for c in back] == [c.r for c in ch]
