"""Exact finite-scale ground truth for longest separating L-chains.

The oracle enumerates an explicit curtain family for a query pair, builds
the separation graph (curtains separating the pair, ordered along the
connecting geodesic, with edges recording pairwise verdicts at grade L),
and extracts longest chains by dynamic programming over the DAG.

All results are exact relative to the family: an edge means "ordered and
not refuted within the family at grade L". Certified-edge chains are valid
lower-bound witnesses; unrefuted-edge chains are the family-relative
maximum used for upper bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .curtains import (CERT_ORACLE, Chain, Curtain, Side, curtains_disjoint,
                       side_of, separates, support_points)
from .spaces import (AnnulusCover, Euclidean, Glued, Geodesic, HalfPlane,
                     Point, Product, Space, SpaceDomainError)
from .separation import (CERTIFIED, INCONCLUSIVE, REFUTED, SeparationVerdict,
                         l_separation, pair_verdict)


@dataclass(frozen=True)
class GeneratorSpec:
    """How a curtain family is produced.

    ``step`` is the pole spacing of the dual-to-segment grid; ``enrich``
    adds the backend-specific transverse generators; ``corridor`` marks the
    family as an exhaustive corridor enumeration for certification
    purposes.
    """

    step: float = 0.5
    pad: float = 1.0
    enrich: bool = True
    corridor: bool = False
    max_candidates: int = 400

    def to_dict(self):
        return {"step": self.step, "pad": self.pad, "enrich": self.enrich,
                "corridor": self.corridor, "max_candidates": self.max_candidates}


@dataclass(frozen=True)
class CurtainFamily:
    space: Space
    curtains: tuple
    generator: dict
    counts: dict
    exhaustive_corridor: bool = False

    def __len__(self):
        return len(self.curtains)

    def __iter__(self):
        return iter(self.curtains)

    def to_spec(self):
        return {"space": self.space.to_spec(),
                "curtains": [c.to_spec() for c in self.curtains],
                "generator": self.generator,
                "counts": self.counts,
                "exhaustive_corridor": self.exhaustive_corridor}


def family_from_spec(doc: dict) -> CurtainFamily:
    from .spaces import space_from_spec
    from .curtains import curtain_from_spec
    space = space_from_spec(doc["space"])
    cs = _dedup([curtain_from_spec(space, c) for c in doc["curtains"]])
    return CurtainFamily(space, tuple(cs), doc.get("generator", {}),
                         doc.get("counts", {}),
                         doc.get("exhaustive_corridor", False))


def _dedup(curtains) -> list:
    seen = set()
    out = []
    for c in curtains:
        k = c.key()
        if k not in seen:
            seen.add(k)
            out.append(c)
    return out


# ---------------------------------------------------------------------------
# family generators
# ---------------------------------------------------------------------------

def build_family(x: Point, y: Point, spec: GeneratorSpec = GeneratorSpec()
                 ) -> CurtainFamily:
    """Deterministic curtain family for the query pair: a dual-to-segment
    pole grid, the greedy dual chain, and backend enrichments."""
    from .curtains import dual_chain
    space = x.space
    d = space.distance(x, y)
    counts = {}
    out = []
    if d > 1.0:
        try:
            geo = space.geodesic_extended(x, y, spec.pad)
        except SpaceDomainError:
            geo = space.geodesic(x, y)
        a, b = geo.domain
        grid = []
        r = 0.5
        while r <= d - 0.5 + 1e-9:
            if a < r - 0.5 and r + 0.5 < b:
                grid.append(Curtain(geo, r))
            r += spec.step
        counts["dual_grid"] = len(grid)
        out.extend(grid)
        chain = dual_chain(x, y)
        counts["dual_chain"] = len(chain)
        out.extend(chain.curtains)
    if spec.enrich and d > 0:
        enr = _enrichment(space, x, y, d, spec)
        counts["enrichment"] = len(enr)
        out.extend(enr)
    out = _dedup(out)[:spec.max_candidates]
    return CurtainFamily(space, tuple(out), spec.to_dict(), counts,
                         exhaustive_corridor=spec.corridor)


def _enrichment(space, x, y, d, spec) -> list:
    out = []
    if isinstance(space, Euclidean) and space.dim >= 2:
        geo = space.geodesic(x, y)
        u = np.asarray(geo.spec["u"], dtype=float)
        e = np.zeros(space.dim)
        e[int(np.argmin(np.abs(u)))] = 1.0
        m = e - np.dot(e, u) * u
        m /= np.linalg.norm(m)
        mid = geo.point_at(d / 2.0).data
        span = max(d, 12.0)
        line = space._line(mid - span * m, m, (0.0, 2.0 * span))
        for r in np.arange(1.0, 2.0 * span - 1.0 + 1e-9, 1.25):
            out.append(Curtain(line, float(r)))
    elif isinstance(space, HalfPlane):
        geo = space.geodesic(x, y)
        for u in np.arange(0.5, d - 0.5 + 1e-9, 1.0):
            base = geo.point_at(float(u))
            eps = 1e-5
            dz = geo.point_at(min(float(u) + eps, d)).data - \
                geo.point_at(max(float(u) - eps, 0.0)).data
            n = dz / abs(dz) * 1j
            perp = space.geodesic_through(base.data, n, domain=(-12.0, 12.0))
            for p in (-2.0, -1.0, 0.0, 1.0, 2.0):
                out.append(Curtain(perp, p))
    elif isinstance(space, AnnulusCover):
        th1, th2 = x.data[0], y.data[0]
        lo, hi = min(th1, th2), max(th1, th2)
        rho0 = 1.0 if space.complete else 1.0 + 1e-6
        for phi in np.arange(lo + 1.2, hi - 1.2 + 1e-9, 1.5):
            wall = space.wall(float(phi), rho0)
            out.append(Curtain(wall, 0.0))
        if space.complete and hi - lo > 2.0:
            lift = space.boundary_lift((lo - 30.0, hi + 30.0))
            for p in np.arange(lo + 0.7, hi - 0.7 + 1e-9, 1.0):
                out.append(Curtain(lift, float(p)))
    elif isinstance(space, Product):
        for side, factor, other in (("left", space.left, space.right),
                                    ("right", space.right, space.left)):
            fx = x.data[0] if side == "left" else x.data[1]
            fy = y.data[0] if side == "left" else y.data[1]
            frozen = x.data[1] if side == "left" else x.data[0]
            df = factor.distance(fx, fy)
            if df <= 1.2:
                continue
            geo = factor.geodesic(fx, fy)
            lifted = (space.embed_left(geo, frozen) if side == "left"
                      else space.embed_right(geo, frozen))
            for r in np.arange(0.55, df - 0.55 + 1e-9, 1.0):
                out.append(Curtain(lifted, float(r)))
    elif isinstance(space, Glued):
        (i, p), (j, q) = x.data, y.data
        if i == j:
            part = space.parts[i]
            sub = _enrichment(part, p, q, part.distance(p, q), spec)
            for c in sub:
                try:
                    out.append(Curtain(space._embed(i, c.dual), c.r))
                except SpaceDomainError:
                    pass
    return out


# ---------------------------------------------------------------------------
# separation graph
# ---------------------------------------------------------------------------

@dataclass
class SeparationGraph:
    """Curtains of a family separating a query pair, ordered along the
    connecting geodesic, with pairwise verdicts at grade L.

    ``certified[i][j]`` / ``unrefuted[i][j]`` (i < j in the vertex order)
    mark edges usable for certified-lower and family-relative-upper chains
    respectively.
    """

    x: Point
    y: Point
    L: int
    curtains: list
    order: list = field(default_factory=list)
    certified: dict = field(default_factory=dict)
    unrefuted: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)


def _orientation(c: Curtain, x: Point) -> int:
    """+1 when x lies on the MINUS side of c, -1 when on the PLUS side."""
    return 1 if side_of(c, x) is Side.MINUS else -1


def _pair_in_order(ci: Curtain, cj: Curtain, si: int, sj: int,
                   offsets=None) -> bool:
    """ci's support entirely on the x-side of cj and cj's support entirely
    on the y-side of ci, in each curtain's own orientation."""
    from .curtains import DEFAULT_OFFSETS
    offsets = offsets or DEFAULT_OFFSETS
    xside_j = Side.MINUS if sj > 0 else Side.PLUS
    yside_i = Side.PLUS if si > 0 else Side.MINUS
    for p in support_points(ci, offsets):
        if side_of(cj, p) is not xside_j:
            return False
    for p in support_points(cj, offsets):
        if side_of(ci, p) is not yside_i:
            return False
    return True


_VERDICT_CACHE: dict = {}


def _cached_pair_verdict(h: Curtain, k: Curtain, L: int,
                         fam: Optional[CurtainFamily]) -> SeparationVerdict:
    key = tuple(sorted((hash(h.key()), hash(k.key())))) + (L,)
    hit = _VERDICT_CACHE.get(key)
    if hit is not None:
        return hit
    v = pair_verdict(h, k, L)
    if v.outcome == INCONCLUSIVE and fam is not None and len(fam) > 0:
        v = l_separation(h, k, L, fam)
    if len(_VERDICT_CACHE) > 100000:
        _VERDICT_CACHE.clear()
    _VERDICT_CACHE[key] = v
    return v


def build_separation_graph(x: Point, y: Point, L: int,
                           fam: CurtainFamily) -> SeparationGraph:
    base = None
    curt = [c for c in fam if separates(c, x, y)]
    g = SeparationGraph(x, y, L, curt)
    if not curt:
        return g
    space = x.space
    try:
        base = space.geodesic(x, y)
    except SpaceDomainError:
        base = curt[0].dual
    proxies = [space.project(c.pole_point(), base) for c in curt]
    order = list(np.argsort(proxies))
    g.order = order
    signs = [_orientation(c, x) for c in curt]
    n = len(order)
    for a in range(n):
        for b in range(a + 1, n):
            i, j = order[a], order[b]
            ci, cj = curt[i], curt[j]
            if not curtains_disjoint(ci, cj):
                continue
            if not _pair_in_order(ci, cj, signs[i], signs[j]):
                continue
            v = _cached_pair_verdict(ci, cj, L, fam)
            g.verdicts[(i, j)] = v
            if v.outcome != REFUTED:
                g.unrefuted[(i, j)] = True
            if v.outcome == CERTIFIED:
                g.certified[(i, j)] = True
    return g


def _longest_path(order: Sequence[int], edges: dict) -> list:
    pos = {v: a for a, v in enumerate(order)}
    n = len(order)
    best = [1] * n
    prev = [-1] * n
    for b in range(n):
        for a in range(b):
            if (order[a], order[b]) in edges and best[a] + 1 > best[b]:
                best[b] = best[a] + 1
                prev[b] = a
    if n == 0:
        return []
    b = int(np.argmax(best))
    path = []
    while b >= 0:
        path.append(order[b])
        b = prev[b]
    return path[::-1]


def longest_L_chain(x: Point, y: Point, L: int, fam: CurtainFamily
                    ) -> tuple:
    """Exact family-relative maximum L-chain separating x from y: the
    longest path over edges not refuted within the family. Returns
    (cardinality, Chain with certificate OracleVerified)."""
    g = build_separation_graph(x, y, L, fam)
    if not g.curtains:
        return 0, Chain((), L, CERT_ORACLE)
    path = _longest_path(g.order, g.unrefuted)
    chain = Chain(tuple(g.curtains[i] for i in path), L, CERT_ORACLE)
    return len(chain), chain


def longest_certified_chain(x: Point, y: Point, L: int, fam: CurtainFamily
                            ) -> tuple:
    """Longest chain whose every edge carries a certified verdict (a sound
    lower-bound witness)."""
    g = build_separation_graph(x, y, L, fam)
    if not g.curtains:
        return 0, Chain((), L, CERT_ORACLE)
    path = _longest_path(g.order, g.certified)
    chain = Chain(tuple(g.curtains[i] for i in path), L, CERT_ORACLE)
    return len(chain), chain


def refute_or_certify_pairwise(fam: CurtainFamily, L: int) -> dict:
    """Verdict matrix over all disjoint pairs of the family (symmetric,
    keyed by index pairs i < j); non-disjoint pairs are skipped."""
    out = {}
    cs = list(fam.curtains)
    for i in range(len(cs)):
        for j in range(i + 1, len(cs)):
            if not curtains_disjoint(cs[i], cs[j]):
                continue
            out[(i, j)] = _cached_pair_verdict(cs[i], cs[j], L, fam)
    return out


# ---------------------------------------------------------------------------
# exhaustive cross-check (small families)
# ---------------------------------------------------------------------------

def exhaustive_longest_chain(x: Point, y: Point, L: int, fam: CurtainFamily,
                             cap: int = 12) -> int:
    """Maximum L-chain cardinality by depth-first enumeration over all
    subsets of the (ordered) separating curtains, requiring an edge for
    EVERY pair of the subset. Exact; only for families of <= cap curtains."""
    g = build_separation_graph(x, y, L, fam)
    verts = list(g.order)
    if len(verts) > cap:
        raise ValueError(f"family too large for enumeration ({len(verts)})")
    edges = g.unrefuted
    pos = {v: i for i, v in enumerate(verts)}
    best = 0

    def extend(chain, start):
        nonlocal best
        best = max(best, len(chain))
        for idx in range(start, len(verts)):
            v = verts[idx]
            if all((u, v) in edges for u in chain):
                chain.append(v)
                extend(chain, idx + 1)
                chain.pop()

    extend([], 0)
    return best


def clear_verdict_cache():
    _VERDICT_CACHE.clear()
