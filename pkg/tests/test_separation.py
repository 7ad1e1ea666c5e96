"""L-separation verdicts, corridor tables, and certified chain builders."""

import math

import pytest

from curtainmodel import (AnnulusCover, Chain, ChainError, Curtain, Euclidean,
                          FalsificationEvent, Glued, HalfPlane, Product,
                          SpaceDomainError, annulus_certified_wall_gap,
                          build_certified_chain, chain_separates,
                          curtains_meet, dualize_chain, h2_certified_gap,
                          l_separation, pair_verdict, separates, side_of,
                          validate_chain)
from curtainmodel.oracle import GeneratorSpec, build_family
from curtainmodel.separation import h2_corridor_candidates
from conftest import sample_pair


def test_euclidean_slab_refutation_spec_instance():
    # horizontal slabs y in [0,1] and y in [4,5]; L = 7 -> an 8-chain of
    # transverse slabs crosses both
    e = Euclidean(2)
    vert = e._line([0.0, 0.0], [0.0, 1.0], (-60.0, 60.0))
    h = Curtain(vert, 0.5)
    k = Curtain(vert, 4.5)
    v = l_separation(h, k, 7, [])
    assert v.refuted
    assert len(v.crossing) == 8
    assert validate_chain(v.crossing) == []
    for c in v.crossing:
        assert curtains_meet(c, h) is not None
        assert curtains_meet(c, k) is not None


@pytest.mark.parametrize("L", [1, 2, 4, 8, 16, 32])
def test_euclidean_all_disjoint_pairs_refuted(rng, L):
    e = Euclidean(2)
    for _ in range(6):
        x, y = sample_pair(e, rng, scale=5.0, min_distance=2.5)
        geo = e.geodesic_extended(x, y, 2.0)
        d = e.distance(x, y)
        h = Curtain(geo, 0.2 * d)
        k = Curtain(geo, 0.2 * d + 1.2 + 0.6 * d * float(rng.uniform()))
        v = l_separation(h, k, L, [])
        assert v.refuted and len(v.crossing) == L + 1


def test_l_separation_needs_disjoint_curtains():
    e = Euclidean(2)
    line = e._line([0.0, 0.0], [1.0, 0.0], (-20.0, 20.0))
    with pytest.raises(SpaceDomainError):
        l_separation(Curtain(line, 0.0), Curtain(line, 0.8), 3, [])


def test_h2_corridor_certification_far_pair():
    # axis curtains at parameters 0 and 10: certified at L = 50 relative to
    # the corridor family
    h2 = HalfPlane()
    axis = h2._vertical(0.0, 1.0, 0.0, (-25.0, 25.0))
    h = Curtain(axis, 0.0)
    k = Curtain(axis, 10.0)
    fam = h2_corridor_candidates(10.0)
    v = l_separation(h, k, 50, fam, exhaustive=True)
    assert v.certified
    assert v.family_size == len(fam)
    assert v.method == "corridor_exhaustion"


def test_h2_gap_table_monotone_and_frozen():
    gaps = {L: h2_certified_gap(L) for L in (1, 2, 3, 4, 5, 8)}
    for a, b in zip(sorted(gaps), sorted(gaps)[1:]):
        assert gaps[b] <= gaps[a]
    # frozen against the corridor family shipped with the package: the
    # wedge pair dual to the mid-corridor perpendicular refutes
    # 1-separation up to pole gap ~5, so L=1 certifies only at 6
    assert gaps[1] == pytest.approx(6.0)
    assert gaps[2] == pytest.approx(3.0)
    assert gaps[3] == pytest.approx(2.4)
    assert gaps[5] == pytest.approx(1.2)


def test_annulus_wall_gap_table():
    for complete in (True, False):
        g1 = annulus_certified_wall_gap(1, complete)
        assert g1 == pytest.approx(3.8)
        assert annulus_certified_wall_gap(4, complete) <= g1


def test_annulus_sheets_rule():
    a = AnnulusCover(True)
    lift = a.boundary_lift((-40.0, 40.0))
    h = Curtain(lift, 0.0)
    k = Curtain(lift, 2 * math.pi + 1.5)
    v = l_separation(h, k, 1, [])
    assert v.certified and v.method == "annulus_different_sheets"
    near = Curtain(lift, 3.0)
    v2 = l_separation(h, near, 1, [])
    assert not v2.certified or v2.method != "annulus_different_sheets"


def test_glued_anchor_pinch():
    g = Glued([Euclidean(2), Euclidean(2)],
              [[[0.0, 0.0]], [[0.0, 0.0]]])
    e = g.parts[0]
    geo0 = g._embed(0, e._line([2.0, 2.0], [1.0, 0.0], (-6.0, 6.0)))
    geo1 = g._embed(1, e._line([-3.0, 1.0], [0.0, 1.0], (-6.0, 6.0)))
    h = Curtain(geo0, 0.0)
    k = Curtain(geo1, 0.0)
    # single-point gluing: every curtain meeting both passes the wedge
    # point, so chains crossing both have cardinality <= 1
    for L in (1, 3, 5):
        v = l_separation(h, k, L, [])
        assert v.certified and v.method == "glued_anchor_pinch"


def test_product_factor_pairs_refuted():
    p = Product(HalfPlane(), Euclidean(1))
    h2 = p.left
    beta = h2.geodesic(h2.point(1j), h2.point(complex(0.0, math.e ** 8)))
    lifted = p.embed_left(beta, Euclidean(1).point([0.0]))
    h = Curtain(lifted, 1.0)
    k = Curtain(lifted, 6.0)
    for L in (1, 4, 9):
        v = l_separation(h, k, L, [])
        assert v.refuted and len(v.crossing) == L + 1
        assert v.method == "product_other_factor"


def test_pair_verdict_same_axis_uses_table():
    h2 = HalfPlane()
    axis = h2._vertical(0.0, 1.0, 0.0, (-40.0, 40.0))
    v = pair_verdict(Curtain(axis, 0.0), Curtain(axis, 7.0), 1)
    assert v.certified and v.method == "h2_gap_table"
    v2 = pair_verdict(Curtain(axis, 0.0), Curtain(axis, 4.8), 1)
    assert v2.refuted  # the wedge pair crosses both at this gap


# ---------------------------------------------------------------------------
# certified chain builders
# ---------------------------------------------------------------------------

def test_certified_chain_halfplane_counts():
    h2 = HalfPlane()
    x, y = h2.point(1j), h2.point(complex(0.0, math.e ** 20))
    for L, expected in [(1, 4), (2, 7), (3, 8), (5, 16)]:
        ch = build_certified_chain(x, y, L)
        assert len(ch) == expected
        assert chain_separates(ch, x, y)
        assert validate_chain(ch) == []
        gap = h2_certified_gap(L)
        for a, b in zip(ch.curtains, ch.curtains[1:]):
            assert b.r - a.r >= gap - 1e-9


def test_certified_chain_annulus_walls():
    a = AnnulusCover(True)
    x, y = a.point((0.0, 2.0)), a.point((12 * math.pi, 2.0))
    ch = build_certified_chain(x, y, 1)
    assert len(ch) >= 8
    assert chain_separates(ch, x, y)
    assert validate_chain(ch) == []


def test_certified_chain_glued_cross_part():
    g = Glued([Euclidean(2), Euclidean(2)], [[[0.0, 0.0]], [[0.0, 0.0]]])
    x = g.point((0, [-6.0, 0.0]))
    y = g.point((1, [6.0, 0.0]))
    ch = build_certified_chain(x, y, 3)
    # one leg curtain per part, pinched at the anchor
    assert len(ch) == 2
    assert chain_separates(ch, x, y)


def test_certified_chain_flat_is_single():
    e = Euclidean(2)
    ch = build_certified_chain(e.point([0, 0]), e.point([9, 0]), 4)
    assert len(ch) == 1


# ---------------------------------------------------------------------------
# dualize_chain
# ---------------------------------------------------------------------------

def _axis_l_chain(h2, count, gap, grade, start=0.0):
    axis = h2._vertical(0.0, 1.0, 0.0, (-40.0, start + count * gap + 40.0))
    return Chain(tuple(Curtain(axis, start + i * gap) for i in range(count)),
                 grade, "constructed")


def test_dualize_chain_n1_instance():
    # L=1, |c| = 14 = (4L+10) -> n = 1: at least 2 dual curtains
    h2 = HalfPlane()
    gap = h2_certified_gap(1)
    c = _axis_l_chain(h2, 14, gap, 1, start=3.0)
    a = h2.point(complex(0.0, math.exp(-2.0)))
    b = h2.point(complex(0.0, math.exp(3.0 + 13 * gap + 2.0)))
    out = dualize_chain(c, a, b)
    assert len(out) >= 2
    assert all(separates(h, a, b) for h in out)
    assert out.grade == 1


def test_dualize_chain_n0_empty():
    h2 = HalfPlane()
    c = _axis_l_chain(h2, 5, h2_certified_gap(1), 1)
    a = h2.point(complex(0.0, math.exp(-2.0)))
    b = h2.point(complex(0.0, math.exp(40.0)))
    out = dualize_chain(c, a, b)
    assert len(out) == 0


def test_dualize_chain_l2_n3():
    # L=2, n=3 needs |c| = 54; output cardinality >= 4, poles on [a, b]
    h2 = HalfPlane()
    gap = h2_certified_gap(2)
    c = _axis_l_chain(h2, 54, gap, 2, start=3.0)
    a = h2.point(complex(0.0, math.exp(-2.0)))
    b = h2.point(complex(0.0, math.exp(3.0 + 53 * gap + 2.0)))
    out = dualize_chain(c, a, b)
    assert len(out) >= 4
    geo_key = out.curtains[0].dual.key()
    assert all(h.dual.key() == geo_key for h in out)
    assert all(separates(h, a, b) for h in out)


def test_dualize_chain_requires_separation():
    h2 = HalfPlane()
    c = _axis_l_chain(h2, 14, h2_certified_gap(1), 1)
    a = h2.point(complex(0.0, math.exp(5.0)))  # inside the chain span
    b = h2.point(complex(0.0, math.exp(40.0)))
    with pytest.raises(ChainError):
        dualize_chain(c, a, b)
