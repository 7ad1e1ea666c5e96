"""Curtains, half-spaces, and chains.

A curtain dual to a geodesic ``alpha`` at parameter ``r`` is the preimage
of the pole interval [r-1/2, r+1/2] under closest-point projection onto
``alpha``. The two open projection preimages flanking the pole are the
half-spaces. Chains are ordered families of curtains in which every
curtain separates its neighbors; the separation grade records whether the
chain is additionally pairwise L-separated.

Set-level statements (separation, disjointness, meeting) are checked on
finite support samples of genuine curtain members, so "yes" answers carry
verified witnesses while "no" answers are sample-relative. Exact rules are
used where the backend admits them (same dual geodesic, Euclidean slabs).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .spaces import (EQ_TOL, Euclidean, Geodesic, Point, Space,
                     SpaceDomainError, point_from_spec, point_to_raw)

DISJOINT_TOL = 1e-6          # pole-interval clearance for sampled disjointness
POLE_SPACING = 1.0 + 1e-3    # preferred greedy spacing between pole centers
DEFAULT_OFFSETS = (-8.0, -4.0, -2.0, -1.0, -0.5, 0.5, 1.0, 2.0, 4.0, 8.0)


class Side(Enum):
    MINUS = -1
    ON = 0
    PLUS = 1


class ChainError(ValueError):
    """A chain operation's preconditions failed."""


class FalsificationEvent(AssertionError):
    """A paper-theorem check failed; fatal to a run's pass status."""


# ---------------------------------------------------------------------------
# curtains
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Curtain:
    """A geodesic plus a pole parameter r, denoting the projection preimage
    of [r-1/2, r+1/2]. The pole must sit strictly inside the interior of the
    dual's parameter domain."""

    dual: Geodesic
    r: float

    def __post_init__(self):
        a, b = self.dual.domain
        if not (a < self.r - 0.5 and self.r + 0.5 < b):
            raise SpaceDomainError(
                f"pole [{self.r - 0.5}, {self.r + 0.5}] not interior to "
                f"domain {self.dual.domain}")

    @property
    def space(self) -> Space:
        return self.dual.space

    @property
    def pole(self):
        return (self.r - 0.5, self.r + 0.5)

    def pole_point(self, offset: float = 0.0) -> Point:
        return self.dual.point_at(self.r + offset)

    def key(self):
        return (self.dual.key(), round(self.r, 9))

    def __hash__(self):
        return hash(self.key())

    def __eq__(self, other):
        return isinstance(other, Curtain) and self.key() == other.key()

    def projection_parameter(self, x: Point) -> float:
        return self.space.project(x, self.dual)

    def pole_clearance(self, x: Point) -> float:
        """Distance from the projected parameter to the pole interval
        (0 when x lies in the curtain)."""
        t = self.projection_parameter(x)
        return max(0.0, abs(t - self.r) - 0.5)

    def to_spec(self) -> dict:
        return {"geodesic": self.dual.spec, "r": self.r}


def curtain_from_spec(space: Space, spec: dict) -> Curtain:
    return Curtain(space.geodesic_from_spec(spec["geodesic"]), spec["r"])


def side_of(h: Curtain, x: Point) -> Side:
    """Which piece of the partition {h-, h, h+} contains x.

    The pole is closed and the half-spaces are open: projections landing
    exactly on r +- 1/2 resolve to ON.
    """
    t = h.projection_parameter(x)
    if t < h.r - 0.5:
        return Side.MINUS
    if t > h.r + 0.5:
        return Side.PLUS
    return Side.ON


def separates(h: Curtain, x: Point, y: Point) -> bool:
    """True iff x and y lie in opposite open half-spaces of h."""
    return {side_of(h, x), side_of(h, y)} == {Side.MINUS, Side.PLUS}


# -- support samples ---------------------------------------------------------

_SUPPORT_CACHE: dict = {}


def support_points(h: Curtain, offsets: Sequence[float] = DEFAULT_OFFSETS,
                   pole_fracs: Sequence[float] = (-0.45, 0.0, 0.45)) -> list:
    """Finite sample of genuine members of the curtain: points on the dual
    geodesic across the pole plus closed-form fiber points where the
    backend provides them."""
    ck = (h.key(), tuple(offsets), tuple(pole_fracs))
    hit = _SUPPORT_CACHE.get(ck)
    if hit is not None:
        return hit
    pts = []
    for f in pole_fracs:
        u = h.r + f
        pts.extend(h.space.transversal(h.dual, u, offsets))
    pts.extend(h.space.far_members(h.dual))
    # keep only verified members (transversal fibers are exact, but guard)
    out = [p for p in pts if side_of(h, p) is Side.ON]
    if not out:
        out = [h.pole_point()]
    if len(_SUPPORT_CACHE) > 200000:
        _SUPPORT_CACHE.clear()
    _SUPPORT_CACHE[ck] = out
    return out


# -- pairwise set relations (sample-relative where no exact rule applies) ----

def _euclidean_slab(h: Curtain):
    """(unit normal, lo, hi) of the slab {lo <= <x, n> <= hi} in R^n."""
    s = h.dual.spec
    if s.get("kind") != "euclidean_line":
        return None
    n = np.asarray(s["u"], dtype=float)
    base = float(np.dot(np.asarray(s["p0"]), n))
    return n, base + h.r - 0.5, base + h.r + 0.5


def curtains_disjoint(h: Curtain, k: Curtain,
                      offsets: Sequence[float] = DEFAULT_OFFSETS) -> bool:
    """Whether the two curtains are disjoint.

    Same-dual pairs and Euclidean slab pairs are decided exactly; other
    pairs by requiring pole-interval clearance > DISJOINT_TOL on sampled
    supports (sample-relative).
    """
    if h.dual == k.dual:
        return abs(h.r - k.r) > 1.0 + 1e-12
    if isinstance(h.space, Euclidean):
        sh, sk = _euclidean_slab(h), _euclidean_slab(k)
        if sh is not None and sk is not None:
            n1, lo1, hi1 = sh
            n2, lo2, hi2 = sk
            c = float(np.dot(n1, n2))
            if abs(abs(c) - 1.0) > 1e-9:
                return False  # non-parallel slabs always intersect
            if c < 0:
                lo2, hi2 = -hi2, -lo2
            return lo2 > hi1 + 1e-12 or lo1 > hi2 + 1e-12
    for p in support_points(h, offsets):
        if k.pole_clearance(p) <= DISJOINT_TOL:
            return False
    for p in support_points(k, offsets):
        if h.pole_clearance(p) <= DISJOINT_TOL:
            return False
    return True


def curtains_meet(h: Curtain, k: Curtain,
                  offsets: Sequence[float] = DEFAULT_OFFSETS) -> Optional[Point]:
    """A verified common point of the two curtains, or None if the sampled
    search finds none. A returned Point is an exact witness (ON both)."""
    if h.dual == k.dual:
        if abs(h.r - k.r) <= 1.0:
            mid = 0.5 * (h.r + k.r)
            p = h.dual.point_at(mid)
            if side_of(h, p) is Side.ON and side_of(k, p) is Side.ON:
                return p
        return None
    if isinstance(h.space, Euclidean):
        sh, sk = _euclidean_slab(h), _euclidean_slab(k)
        if sh is not None and sk is not None:
            n1, lo1, hi1 = sh
            n2, lo2, hi2 = sk
            c = float(np.dot(n1, n2))
            if abs(abs(c) - 1.0) > 1e-9:
                # solve for a point with <x,n1>=mid1, <x,n2>=mid2 in the
                # plane spanned by n1, n2
                m1, m2 = 0.5 * (lo1 + hi1), 0.5 * (lo2 + hi2)
                a = np.array([[1.0, c], [c, 1.0]])
                lam = np.linalg.solve(a, np.array([m1, m2]))
                x = lam[0] * n1 + lam[1] * n2
                p = Point(h.space, x)
                if side_of(h, p) is Side.ON and side_of(k, p) is Side.ON:
                    return p
    best = None
    for p in support_points(h, offsets):
        if side_of(k, p) is Side.ON:
            return p
    for p in support_points(k, offsets):
        if side_of(h, p) is Side.ON:
            return p
    # shared wrap regions of annulus chords (both poles grab the same far
    # points, which local supports can miss)
    from .spaces import AnnulusCover
    if isinstance(h.space, AnnulusCover):
        th_hi = max(h.dual.spec.get("th0", 0.0), k.dual.spec.get("th0", 0.0))
        th_lo = min(h.dual.spec.get("th0", 0.0), k.dual.spec.get("th0", 0.0))
        rmin = 1.2 if h.space.complete else 1.5
        for dth in (2.0 * math.pi, 4.0 * math.pi, 8.0 * math.pi):
            for r in (rmin, 4.0, 20.0):
                for raw in ((th_hi + dth, r), (th_lo - dth, r)):
                    p = Point(h.space, raw)
                    if side_of(h, p) is Side.ON and side_of(k, p) is Side.ON:
                        return p
    # midpoints of short cross geodesics between pole feet
    for fu in (-0.4, 0.0, 0.4):
        for fv in (-0.4, 0.0, 0.4):
            a = h.pole_point(fu)
            b = k.pole_point(fv)
            try:
                g = h.space.geodesic(a, b)
            except SpaceDomainError:
                continue
            p = g.point_at(0.5 * g.length)
            if side_of(h, p) is Side.ON and side_of(k, p) is Side.ON:
                return p
    return best


def separates_sets(h: Curtain, lower: Curtain, upper: Curtain,
                   offsets: Sequence[float] = DEFAULT_OFFSETS) -> bool:
    """Sampled check that h separates the curtain ``lower`` from ``upper``
    (lower in one open half-space, upper in the other)."""
    sides_lo = {side_of(h, p) for p in support_points(lower, offsets)}
    sides_hi = {side_of(h, p) for p in support_points(upper, offsets)}
    return ((sides_lo == {Side.MINUS} and sides_hi == {Side.PLUS}) or
            (sides_lo == {Side.PLUS} and sides_hi == {Side.MINUS}))


def ordered_pair(h: Curtain, k: Curtain,
                 offsets: Sequence[float] = DEFAULT_OFFSETS) -> bool:
    """Sampled check that h lies entirely in k's MINUS half-space and k in
    h's PLUS half-space (the orientation used by chain dynamic programs)."""
    if h.dual == k.dual:
        return k.r - h.r > 1.0 + 1e-12
    for p in support_points(h, offsets):
        if side_of(k, p) is not Side.MINUS:
            return False
    for p in support_points(k, offsets):
        if side_of(h, p) is not Side.PLUS:
            return False
    return True


# ---------------------------------------------------------------------------
# chains
# ---------------------------------------------------------------------------

PLAIN = "plain"

CERT_CONSTRUCTED = "constructed"
CERT_ORACLE = "oracle_verified"
CERT_UNVERIFIED = "unverified"


@dataclass(frozen=True)
class Chain:
    """An ordered tuple of curtains with a separation grade.

    ``grade`` is either the string "plain" or an integer L (an L-chain);
    ``certificate`` records how the L-separation claim was established.
    """

    curtains: tuple
    grade: object = PLAIN
    certificate: str = CERT_UNVERIFIED

    def __len__(self):
        return len(self.curtains)

    def __iter__(self):
        return iter(self.curtains)

    def __getitem__(self, i):
        return self.curtains[i]

    @property
    def cardinality(self) -> int:
        return len(self.curtains)

    @property
    def is_l_chain(self) -> bool:
        return self.grade != PLAIN

    def to_spec(self) -> dict:
        return {"curtains": [c.to_spec() for c in self.curtains],
                "grade": self.grade, "certificate": self.certificate}


def chain_from_spec(space: Space, spec: dict) -> Chain:
    cs = tuple(curtain_from_spec(space, c) for c in spec["curtains"])
    return Chain(cs, spec.get("grade", PLAIN),
                 spec.get("certificate", CERT_UNVERIFIED))


def validate_chain(chain: Chain, offsets: Sequence[float] = DEFAULT_OFFSETS,
                   long_range_checks: int = 4) -> list:
    """Violations of the chain conditions on sampled supports.

    Consecutive curtains must be disjoint and every interior curtain must
    separate its neighbors; a few long-range pairs are spot-checked for the
    induced ordering. Empty result = no violation found.
    """
    cs = chain.curtains
    bad = []
    for i in range(len(cs) - 1):
        if not curtains_disjoint(cs[i], cs[i + 1], offsets):
            bad.append(f"curtains {i} and {i + 1} are not disjoint")
    for i in range(1, len(cs) - 1):
        if not separates_sets(cs[i], cs[i - 1], cs[i + 1], offsets):
            bad.append(f"curtain {i} fails to separate its neighbors")
    n = len(cs)
    if n >= 4 and long_range_checks > 0:
        picks = {(0, n - 1), (0, n // 2), (n // 2, n - 1), (1, n - 2)}
        for (i, j) in list(picks)[:long_range_checks]:
            if j - i >= 2 and not separates_sets(cs[(i + j) // 2], cs[i], cs[j],
                                                 offsets):
                bad.append(f"curtain {(i + j) // 2} fails to separate "
                           f"{i} from {j}")
    return bad


# ---------------------------------------------------------------------------
# chain constructions
# ---------------------------------------------------------------------------

def dual_chain(x: Point, y: Point) -> Chain:
    """Greedy chain of curtains dual to [x, y], pairwise disjoint, each
    separating x from y, of cardinality ceil(d(x,y)) - 1.

    Pole centers are spaced just over 1 apart starting near parameter 1/2;
    the spacing margin shrinks when d(x, y) is barely above an integer so
    the count is met exactly. Distance <= 1 yields the empty chain.
    """
    space = x.space
    d = space.distance(x, y)
    if d <= 1.0:
        return Chain((), PLAIN, CERT_CONSTRUCTED)
    k = math.ceil(d) - 1
    geo = space.geodesic(x, y)
    slack = d - k  # strictly positive: d > ceil(d) - 1
    m = min(POLE_SPACING - 1.0, slack / (k + 1))
    curtains = tuple(Curtain(geo, 0.5 + m + j * (1.0 + m)) for j in range(k))
    return Chain(curtains, PLAIN, CERT_CONSTRUCTED)


def glue_chains(c: Chain, cp: Chain, L: int,
                offsets: Sequence[float] = DEFAULT_OFFSETS) -> Chain:
    """Merge two overlapping L-chains into one of cardinality
    |c| + |c'| - L - 2, after checking the half-space overlap hypotheses.

    With c = {..., h_0} and c' = {h'_1, ...}: every h'_j must meet the far
    half-space of h_0 and every h_i must meet the near half-space of h'_1;
    the merged chain drops h_0 and the first L+1 curtains of c'.
    """
    if len(c) <= 1:
        raise ChainError("need |c| > 1")
    if len(cp) <= L + 1:
        raise ChainError(f"need |c'| > L+1 = {L + 1}")
    for ch, nm in ((c, "c"), (cp, "c'")):
        if ch.grade == PLAIN or ch.grade > L:
            raise ChainError(f"{nm} is not an L-chain at grade {L}")
    h0 = c.curtains[-1]
    hp1 = cp.curtains[0]
    # the far side of h_0 is the one containing the tail of c'
    far = side_of(h0, cp.curtains[-1].pole_point())
    if far is Side.ON:
        raise ChainError("cannot orient: tail of c' touches h_0")
    for j, hj in enumerate(cp.curtains):
        if not any(side_of(h0, p) is far for p in support_points(hj, offsets)):
            raise ChainError(
                f"hypothesis failed: curtain {j} of c' misses the far "
                f"half-space of h_0")
    near = side_of(hp1, c.curtains[0].pole_point())
    if near is Side.ON:
        raise ChainError("cannot orient: head of c touches h'_1")
    for i, hi in enumerate(c.curtains):
        if not any(side_of(hp1, p) is near for p in support_points(hi, offsets)):
            raise ChainError(
                f"hypothesis failed: curtain {i} of c misses the near "
                f"half-space of h'_1")
    merged = c.curtains[:-1] + cp.curtains[L + 1:]
    return Chain(merged, L, CERT_CONSTRUCTED)


def check_backtracking(h: Curtain, k: Curtain, L: int, alpha: Geodesic,
                       ts: Sequence[float]) -> bool:
    """No-backtracking diagnostic for an L-separated pair: with four
    increasing parameters hitting the curtains in an alternating pattern,
    the middle excursion t3 - t2 must be at most L + 1.

    Returns the truth of that bound; a False return is a falsification
    event. Raises ChainError when the four points do not match either
    admissible pattern.
    """
    t1, t2, t3, t4 = ts
    if not (t1 < t2 < t3 < t4):
        raise ChainError("parameters must be strictly increasing")
    memb = [(side_of(h, alpha.point_at(t)) is Side.ON,
             side_of(k, alpha.point_at(t)) is Side.ON) for t in ts]
    pat_a = memb[0][0] and memb[1][1] and memb[2][1] and memb[3][0]
    pat_b = memb[0][0] and memb[1][1] and memb[2][0] and memb[3][1]
    if not (pat_a or pat_b):
        raise ChainError(
            f"pattern not matched: memberships (in h, in k) = {memb}")
    return (t3 - t2) <= L + 1 + EQ_TOL


def chain_separates(chain: Chain, x: Point, y: Point) -> bool:
    """Every curtain of the chain separates x from y."""
    return all(separates(h, x, y) for h in chain.curtains)


def clear_support_cache():
    _SUPPORT_CACHE.clear()
