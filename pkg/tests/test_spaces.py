"""Backend geometry: distances, geodesics, projections, isometries.

Closed forms are checked against independent oracles: numerical
integration of the hyperbolic length element, golden-section projection
search, and sparse-graph shortest paths on fine discretizations.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from curtainmodel import (AnnulusCover, Euclidean, GeodesicExitsSpace, Glued,
                          HalfPlane, Isometry, Product, SpaceDomainError,
                          horizontal_translation, load_space_document,
                          scaling, space_from_spec)
from conftest import sample_pair

LOG4 = 1.3862943611198906  # |log(4/1)|, frozen from the integration oracle


# ---------------------------------------------------------------------------
# distances
# ---------------------------------------------------------------------------

def test_euclidean_pythagoras():
    e = Euclidean(2)
    assert e.distance(e.point([0, 0]), e.point([3, 4])) == pytest.approx(5.0)


def test_annulus_boundary_deck_displacement():
    # one full turn along the boundary lift costs exactly 2 pi
    a = AnnulusCover(True)
    d = a.distance(a.point((0.0, 1.0)), a.point((2 * math.pi, 1.0)))
    assert d == pytest.approx(2 * math.pi, abs=1e-12)


def halfplane_length_oracle(path, n=4000):
    """Numerical integration of |dz|/y along a piecewise-linear path."""
    total = 0.0
    for (a, b) in zip(path, path[1:]):
        ts = np.linspace(0.0, 1.0, n)
        zs = a + (b - a) * ts
        seg = np.abs(np.diff(zs)) / ((zs.imag[1:] + zs.imag[:-1]) / 2.0)
        total += float(np.sum(seg))
    return total


def test_halfplane_vertical_distance_vs_integration():
    h = HalfPlane()
    d = h.distance(h.point(1j), h.point(4j))
    oracle = halfplane_length_oracle([1j, 4j])
    assert d == pytest.approx(LOG4, abs=1e-12)
    assert d == pytest.approx(oracle, abs=1e-6)


def test_halfplane_distance_vs_integration_along_geodesic(rng):
    h = HalfPlane()
    for _ in range(5):
        x, y = sample_pair(h, rng, min_distance=0.3)
        geo = h.geodesic(x, y)
        pts = [geo.point_at(t).data
               for t in np.linspace(0.0, geo.length, 200)]
        oracle = halfplane_length_oracle(pts, n=60)
        assert h.distance(x, y) == pytest.approx(oracle, rel=1e-4)


@pytest.mark.parametrize("name", ["euclidean2", "half_plane", "product",
                                  "glued", "annulus", "annulus_incomplete"])
def test_metric_axioms(spaces, rng, name):
    space = spaces[name]
    for _ in range(150):
        x = space.sample_point(rng)
        y = space.sample_point(rng)
        z = space.sample_point(rng)
        dxy = space.distance(x, y)
        assert dxy >= 0.0
        assert dxy == pytest.approx(space.distance(y, x), abs=1e-9)
        assert space.distance(x, x) <= 1e-9
        assert dxy <= space.distance(x, z) + space.distance(z, y) + 1e-7


@given(st.floats(-50, 50), st.floats(-8, 8), st.floats(-50, 50),
       st.floats(-8, 8), st.floats(-50, 50), st.floats(-8, 8))
@settings(max_examples=150, deadline=None)
def test_halfplane_triangle_inequality_hypothesis(x1, e1, x2, e2, x3, e3):
    h = HalfPlane()
    a = h.point(complex(x1, math.exp(e1)))
    b = h.point(complex(x2, math.exp(e2)))
    c = h.point(complex(x3, math.exp(e3)))
    assert h.distance(a, b) <= h.distance(a, c) + h.distance(c, b) + 1e-7


def test_mismatched_spaces_rejected():
    e2, e3 = Euclidean(2), Euclidean(3)
    with pytest.raises(SpaceDomainError):
        e2.distance(e2.point([0, 0]), e3.point([0, 0, 0]))
    with pytest.raises(SpaceDomainError):
        HalfPlane().point(complex(0, -1))
    with pytest.raises(SpaceDomainError):
        AnnulusCover(False).point((0.0, 1.0))


# ---------------------------------------------------------------------------
# geodesics
# ---------------------------------------------------------------------------

def test_euclidean_straight_line():
    e = Euclidean(2)
    g = e.geodesic(e.point([0, 0]), e.point([2, 0]))
    assert np.allclose(g.point_at(1.0).data, [1, 0])


def test_halfplane_vertical_geodesic_midratio():
    h = HalfPlane()
    g = h.geodesic(h.point(1j), h.point(4j))
    assert g.point_at(math.log(2)).data == pytest.approx(2j, abs=1e-12)


def test_product_geodesic_is_factorwise():
    p = Product(HalfPlane(), Euclidean(1))
    x = p.point((1j, [0.0]))
    y = p.point((4j, [3.0]))
    g = p.geodesic(x, y)
    d = p.distance(x, y)
    mid = g.point_at(d / 2)
    # each factor coordinate sits at the factor midpoint
    assert mid.data[0].data == pytest.approx(2j, abs=1e-9)
    assert mid.data[1].data[0] == pytest.approx(1.5, abs=1e-9)


@pytest.mark.parametrize("name", ["euclidean2", "half_plane", "product",
                                  "glued", "annulus"])
def test_geodesic_unit_speed(spaces, rng, name):
    space = spaces[name]
    for _ in range(8):
        x, y = sample_pair(space, rng, min_distance=0.5)
        geo = space.geodesic(x, y)
        d = geo.length
        assert space.distance(x, geo.point_at(0.0)) <= 1e-9
        assert space.distance(y, geo.point_at(d)) <= 1e-9
        ss = rng.uniform(0, d, size=10)
        ts = rng.uniform(0, d, size=10)
        for s, t in zip(ss, ts):
            dd = space.distance(geo.point_at(float(s)), geo.point_at(float(t)))
            assert dd == pytest.approx(abs(s - t), abs=1e-7)


def test_geodesic_midpoint_property(spaces, rng):
    for name in ("euclidean2", "half_plane", "product", "glued", "annulus"):
        space = spaces[name]
        x, y = sample_pair(space, rng, min_distance=0.5)
        d = space.distance(x, y)
        m = space.geodesic(x, y).point_at(d / 2)
        assert space.distance(x, m) == pytest.approx(d / 2, abs=1e-7)
        assert space.distance(m, y) == pytest.approx(d / 2, abs=1e-7)


def test_incomplete_annulus_geodesic_exits():
    a = AnnulusCover(False)
    with pytest.raises(GeodesicExitsSpace):
        a.geodesic(a.point((0.0, 1.5)), a.point((6.5, 1.5)))
    # chords that clear the disc still work
    g = a.geodesic(a.point((0.0, 2.0)), a.point((0.8, 2.0)))
    assert g.length == pytest.approx(
        a.distance(a.point((0.0, 2.0)), a.point((0.8, 2.0))))


# ---------------------------------------------------------------------------
# projections
# ---------------------------------------------------------------------------

def golden_projection_oracle(space, x, geo, lo, hi, iters=200):
    invphi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc = space.distance(x, geo.point_at(c))
    fd = space.distance(x, geo.point_at(d))
    for _ in range(iters):
        if b - a < 1e-12:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = space.distance(x, geo.point_at(c))
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = space.distance(x, geo.point_at(d))
    return (a + b) / 2


def test_euclidean_orthogonal_projection():
    e = Euclidean(2)
    axis = e.geodesic(e.point([-10, 0]), e.point([10, 0]))
    t = e.project(e.point([3, 7]), axis)
    assert axis.point_at(t).data == pytest.approx([3, 0])


def test_halfplane_projection_foot_vs_golden_oracle():
    h = HalfPlane()
    axis = h._vertical(0.0, 1.0, 0.0, (-8.0, 8.0))
    x = h.point(3 + 4j)
    t = h.project(x, axis)
    t_oracle = golden_projection_oracle(h, x, axis, -8.0, 8.0)
    assert t == pytest.approx(t_oracle, abs=1e-7)
    assert axis.point_at(t).data == pytest.approx(5j, abs=1e-7)


def test_product_projection_factor_decomposition(rng):
    p = Product(HalfPlane(), Euclidean(1))
    h = HalfPlane()
    beta = h.geodesic(h.point(1j), h.point(5 + 3j))
    lifted = p.embed_left(beta, Euclidean(1).point([2.0]))
    x = p.point((h.sample_point(rng), [0.7]))
    assert p.project(x, lifted) == pytest.approx(
        h.project(x.data[0], beta), abs=1e-9)


@pytest.mark.parametrize("name", ["euclidean2", "half_plane", "product",
                                  "glued", "annulus"])
def test_projection_optimality(spaces, rng, name):
    space = spaces[name]
    for _ in range(6):
        x, y = sample_pair(space, rng, min_distance=0.5)
        geo = space.geodesic(x, y)
        z = space.sample_point(rng)
        t = space.project(z, geo)
        dstar = space.distance(z, geo.point_at(t))
        for s in rng.uniform(0, geo.length, size=20):
            assert dstar <= space.distance(z, geo.point_at(float(s))) + 1e-9


# ---------------------------------------------------------------------------
# isometries
# ---------------------------------------------------------------------------

def _example_isometries(spaces):
    e2 = spaces["euclidean2"]
    h = spaces["half_plane"]
    p = spaces["product"]
    g = spaces["glued"]
    a = spaces["annulus"]
    return [
        Isometry(e2, "t", {"type": "translation", "vector": [1.0, -0.5]}),
        Isometry(e2, "rot", {"type": "rotation", "center": [1.0, 2.0],
                             "angle": 0.7}),
        horizontal_translation(h, 1.0),
        scaling(h, 2.0),
        Isometry(h, "mix", {"type": "mobius", "a": 2.0, "b": 1.0,
                            "c": 1.0, "d": 1.0}),
        Isometry(p, "shear", {"type": "pair",
                              "left": {"type": "mobius", "a": 1, "b": 1,
                                       "c": 0, "d": 1},
                              "right": {"type": "identity"}}),
        Isometry(a, "deck", {"type": "deck", "turns": 1}),
        Isometry(g, "spin", {"type": "glued_map", "perm": [0, 1],
                             "part_actions": [
                                 {"type": "identity"},
                                 {"type": "rotation", "center": [0.0, 0.0],
                                  "angle": 0.4}]}),
    ]


def test_isometry_invariance(spaces, rng):
    for iso in _example_isometries(spaces):
        space = iso.space
        for _ in range(25):
            x = space.sample_point(rng)
            y = space.sample_point(rng)
            d0 = space.distance(x, y)
            d1 = space.distance(iso.apply(x), iso.apply(y))
            assert abs(d0 - d1) <= 1e-9 * max(1.0, d0)


def test_power_composition(spaces, rng):
    for iso in _example_isometries(spaces):
        space = iso.space
        x = space.sample_point(rng)
        for n, m in [(2, 3), (0, 5), (-2, 4), (3, -7)]:
            lhs = iso.apply(x, n + m)
            rhs = iso.apply(iso.apply(x, m), n)
            assert space.distance(lhs, rhs) <= 1e-8
        assert space.distance(iso.apply(x, 0), x) == 0.0


def test_translation_and_deck_examples():
    e2 = Euclidean(2)
    t = Isometry(e2, "t", {"type": "translation", "vector": [1, 0]})
    assert np.allclose(t.apply(e2.point([0, 0]), 5).data, [5, 0])
    h = HalfPlane()
    z1 = horizontal_translation(h, 1.0)
    assert z1.apply(h.point(1j), 3).data == pytest.approx(3 + 1j)
    a = AnnulusCover(True)
    deck = Isometry(a, "deck", {"type": "deck", "turns": 1})
    th, r = deck.apply(a.point((0.3, 2.0)), 2).data
    assert th == pytest.approx(0.3 + 4 * math.pi)
    assert r == pytest.approx(2.0)


# ---------------------------------------------------------------------------
# graph oracles for the exotic backends
# ---------------------------------------------------------------------------

def _grid_graph_distances(nodes, edges, sources):
    n = len(nodes)
    rows = [i for i, j, w in edges] + [j for i, j, w in edges]
    cols = [j for i, j, w in edges] + [i for i, j, w in edges]
    data = [w for _, _, w in edges] * 2
    mat = coo_matrix((data, (rows, cols)), shape=(n, n))
    return dijkstra(mat.tocsr(), indices=sources)


def test_annulus_distance_vs_polar_grid_oracle():
    # grid resolution 0.01 over a window covering a wrap geodesic
    a = AnnulusCover(True)
    thetas = np.arange(-0.3, 7.3, 0.01)
    radii = np.arange(1.0, 2.2, 0.01)
    nt, nr = len(thetas), len(radii)

    def nid(i, j):
        return i * nr + j

    def chord(i1, j1, i2, j2):
        r1, r2 = radii[j1], radii[j2]
        dth = abs(thetas[i1] - thetas[i2])
        return math.sqrt(max(r1 * r1 + r2 * r2 - 2 * r1 * r2 * math.cos(dth), 0.0))

    steps = [(1, 0), (0, 1), (1, 1), (1, -1), (2, 1), (1, 2), (2, -1), (1, -2)]
    edges = []
    for i in range(nt):
        for j in range(nr):
            for di, dj in steps:
                i2, j2 = i + di, j + dj
                if 0 <= i2 < nt and 0 <= j2 < nr:
                    edges.append((nid(i, j), nid(i2, j2), chord(i, j, i2, j2)))

    def closest(th, r):
        return nid(int(round((th - thetas[0]) / 0.01)),
                   int(round((r - radii[0]) / 0.01)))

    pairs = [((0.0, 2.0), (7.0, 2.0)),   # wrap geodesic
             ((0.0, 1.5), (1.0, 2.0)),   # chord geodesic
             ((0.2, 1.0), (6.8, 1.0))]   # boundary to boundary
    src = [closest(*p) for p, _ in pairs]
    dist = _grid_graph_distances(list(range(nt * nr)), edges, src)
    for (p, q), row in zip(pairs, dist):
        exact = a.distance(a.point(p), a.point(q))
        graph = row[closest(*q)]
        assert graph == pytest.approx(exact, rel=0.02), (p, q)


def test_glued_distance_vs_dense_graph_oracle():
    g = Glued([Euclidean(2), Euclidean(2)], [[[0.0, 0.0]], [[0.0, 0.0]]])
    step = 0.25
    axis = np.arange(-2.0, 2.0 + 1e-9, step)
    m = len(axis)

    def nid(part, i, j):
        return part * m * m + i * m + j

    steps = [(1, 0), (0, 1), (1, 1), (1, -1), (2, 1), (1, 2), (2, -1), (1, -2)]
    edges = []
    for part in range(2):
        for i in range(m):
            for j in range(m):
                for di, dj in steps:
                    i2, j2 = i + di, j + dj
                    if 0 <= i2 < m and 0 <= j2 < m:
                        w = step * math.hypot(di, dj)
                        edges.append((nid(part, i, j), nid(part, i2, j2), w))
    mid = int(round((0.0 - axis[0]) / step))
    edges.append((nid(0, mid, mid), nid(1, mid, mid), 0.0))

    def closest(part, x, y):
        return nid(part, int(round((x - axis[0]) / step)),
                   int(round((y - axis[0]) / step)))

    pairs = [((0, (-1.5, 0.5)), (1, (1.0, 1.0))),
             ((0, (1.0, -1.0)), (0, (-1.0, 1.5))),
             ((1, (0.5, 0.0)), (1, (0.0, -1.5)))]
    src = [closest(p, *xy) for (p, xy), _ in pairs]
    dist = _grid_graph_distances(list(range(2 * m * m)), edges, src)
    for ((p1, xy1), (p2, xy2)), row in zip(pairs, dist):
        exact = g.distance(g.point((p1, list(xy1))), g.point((p2, list(xy2))))
        graph = row[closest(p2, *xy2)]
        # the 8+knight neighborhood overestimates lengths by < 3 percent
        assert exact <= graph + 1e-9
        assert graph == pytest.approx(exact, rel=0.04)


# ---------------------------------------------------------------------------
# JSON specs
# ---------------------------------------------------------------------------

def test_space_spec_roundtrip(spaces):
    for space in spaces.values():
        clone = space_from_spec(space.to_spec())
        assert clone == space


def test_load_space_document(tmp_path):
    doc = {"space": {"kind": "annulus_cover", "complete": True},
           "isometries": [{"name": "deck",
                           "action": {"type": "deck", "turns": 2}}]}
    path = tmp_path / "space.json"
    import json
    path.write_text(json.dumps(doc))
    space, isos = load_space_document(str(path))
    assert isinstance(space, AnnulusCover)
    assert set(isos) == {"deck"}
    th, _ = isos["deck"].apply(space.point((0.0, 1.5)), 1).data
    assert th == pytest.approx(4 * math.pi)
