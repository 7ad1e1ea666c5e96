"""Concrete CAT(0) space backends.

Five backends are provided: Euclidean space, the hyperbolic upper
half-plane, products, spaces glued along a common anchor set, and the
universal cover of the plane with an open unit disc removed (complete or
incomplete, depending on whether the boundary circle is included).

Every backend exposes the same surface: exact distances, unit-speed
geodesics, closest-point projection onto geodesics, named isometries,
point sampling, and JSON (de)serialization of space and isometry specs.

All objects are immutable after construction and all operations are pure.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

EQ_TOL = 1e-9          # equality tolerance for reals
OPT_TOL = 1e-7         # optimization tolerance (projection parameters)

TWO_PI = 2.0 * math.pi


class SpaceDomainError(ValueError):
    """A point, parameter, or pair of arguments violates a backend domain."""


class GeodesicExitsSpace(SpaceDomainError):
    """The geodesic between the two points leaves the (incomplete) space."""


# ---------------------------------------------------------------------------
# points and geodesics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Point:
    """A location in a specific space backend.

    ``data`` is backend specific: an ``np.ndarray`` for Euclidean space, a
    complex number for the half-plane, a pair of Points for products,
    ``(part_index, Point)`` for glued spaces and ``(theta, r)`` for the
    annulus cover.
    """

    space: "Space"
    data: object

    def __repr__(self):
        return f"Point({self.space.name}, {self.space.format_point(self)})"


@dataclass(frozen=True)
class Geodesic:
    """A unit-speed geodesic ``t -> Point`` on a closed parameter domain.

    ``spec`` is a JSON-serializable description sufficient to rebuild the
    geodesic; ``closed_projection`` (when present) maps a Point directly to
    the minimizing parameter, bypassing the generic search.
    """

    space: "Space"
    domain: tuple  # (a, b), entries may be +-inf
    evaluate: Callable[[float], Point] = field(compare=False, repr=False)
    spec: dict = field(default_factory=dict)
    closed_projection: Optional[Callable[[Point], float]] = field(
        default=None, compare=False, repr=False)

    def point_at(self, t: float) -> Point:
        a, b = self.domain
        if t < a - 1e-9 or t > b + 1e-9:
            raise SpaceDomainError(f"parameter {t} outside domain {self.domain}")
        return self.evaluate(min(max(t, a), b))

    @property
    def length(self) -> float:
        a, b = self.domain
        return b - a

    def key(self):
        """Hashable identity used for caching and curtain deduplication."""
        return (self.space.key(), _freeze(self.spec))

    def __hash__(self):
        return hash(self.key())

    def __eq__(self, other):
        return isinstance(other, Geodesic) and self.key() == other.key()


def _freeze(obj):
    if isinstance(obj, dict):
        return tuple(sorted((k, _freeze(v)) for k, v in obj.items()))
    if isinstance(obj, (list, tuple)):
        return tuple(_freeze(v) for v in obj)
    if isinstance(obj, float):
        return round(obj, 12)
    return obj


def _golden_minimize(f, lo, hi, tol=1e-9, max_iter=200):
    """Golden-section minimum of a convex function on [lo, hi]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a < tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


# ---------------------------------------------------------------------------
# space base class
# ---------------------------------------------------------------------------

class Space:
    """Base class for CAT(0) backends (immutable, thread-safe)."""

    kind = "abstract"
    #: True when the backend is Gromov hyperbolic as a metric space.
    intrinsically_hyperbolic = False
    #: True when every pair of points is joined by a geodesic in the space.
    geodesically_complete = True
    #: True when the space is flat (isometric to a Euclidean space).
    flat = False

    # -- identity ----------------------------------------------------------
    @property
    def name(self) -> str:
        return self.kind

    def key(self):
        return _freeze(self.to_spec())

    def __hash__(self):
        return hash(self.key())

    def __eq__(self, other):
        return isinstance(other, Space) and self.key() == other.key()

    def to_spec(self) -> dict:
        raise NotImplementedError

    # -- points ------------------------------------------------------------
    def point(self, raw) -> Point:
        data = self._coerce(raw)
        self._check(data)
        return Point(self, data)

    def _coerce(self, raw):
        return raw

    def _check(self, data):
        raise NotImplementedError

    def format_point(self, p: Point) -> str:
        return repr(p.data)

    def points_equal(self, x: Point, y: Point, tol: float = EQ_TOL) -> bool:
        return self.distance(x, y) <= tol

    # -- metric ------------------------------------------------------------
    def distance(self, x: Point, y: Point) -> float:
        self._require_mine(x)
        self._require_mine(y)
        return self._dist(x.data, y.data)

    def distance_many(self, x: Point, pts: Sequence[Point]) -> np.ndarray:
        """Distances from x to each point of ``pts`` (default: loop)."""
        return np.array([self.distance(x, p) for p in pts])

    def _dist(self, a, b) -> float:
        raise NotImplementedError

    def _require_mine(self, p: Point):
        if p.space != self:
            raise SpaceDomainError(
                f"point of {p.space.name} passed to {self.name}")

    # -- geodesics ----------------------------------------------------------
    def geodesic(self, x: Point, y: Point) -> Geodesic:
        """Unit-speed geodesic with gamma(0)=x, gamma(d)=y."""
        self._require_mine(x)
        self._require_mine(y)
        if self.points_equal(x, y):
            raise SpaceDomainError("geodesic endpoints coincide")
        return self._geodesic(x, y)

    def _geodesic(self, x: Point, y: Point) -> Geodesic:
        raise NotImplementedError

    def geodesic_extended(self, x: Point, y: Point, pad: float) -> Geodesic:
        """Geodesic through x, y with the domain padded where the backend
        allows extension; the pad is clipped, never an error."""
        return self._extend(self._geodesic(x, y), pad)

    def _extend(self, geo: Geodesic, pad: float) -> Geodesic:
        return geo  # backends override where extension exists

    def geodesic_from_spec(self, spec: dict) -> Geodesic:
        raise NotImplementedError

    # -- projection ----------------------------------------------------------
    def project(self, x: Point, geo: Geodesic) -> float:
        """Parameter minimizing t -> d(x, geo(t)); convex in CAT(0)."""
        self._require_mine(x)
        if geo.space != self:
            raise SpaceDomainError("geodesic from a different space")
        a, b = geo.domain
        if not (a < b or a == b):
            raise SpaceDomainError("empty geodesic domain")
        if geo.closed_projection is not None:
            t = geo.closed_projection(x)
            return min(max(t, a), b)
        return self._project_search(x, geo)

    def _project_search(self, x: Point, geo: Geodesic) -> float:
        a, b = geo.domain
        if math.isinf(a) or math.isinf(b):
            t0 = 0.0 if a < 0.0 < b else (a if not math.isinf(a) else b)
            reach = 2.0 * self.distance(x, geo.point_at(t0)) + 1.0
            a = max(a, t0 - reach)
            b = min(b, t0 + reach)
        f = lambda t: self.distance(x, geo.point_at(t))
        return _golden_minimize(f, a, b, tol=1e-9)

    # -- sampling ------------------------------------------------------------
    def sample_point(self, rng: np.random.Generator, scale: float = 3.0) -> Point:
        raise NotImplementedError

    def sample_in_ball(self, center: Point, radius: float, k: int,
                       rng: np.random.Generator) -> list:
        """k points within distance ``radius`` of center (quasi-uniform)."""
        out = [center]
        attempts = 0
        while len(out) < k and attempts < 20 * k:
            attempts += 1
            target = self.sample_point(rng, scale=max(radius, 2.0))
            try:
                geo = self.geodesic(center, target)
            except SpaceDomainError:
                continue
            u = radius * math.sqrt(rng.uniform(0.0, 1.0))
            u = min(u, geo.length * 0.999)
            try:
                out.append(geo.point_at(u))
            except SpaceDomainError:
                continue
        return out

    def transversal(self, geo: Geodesic, t: float, offsets: Sequence[float]):
        """Points of the fiber over geo(t) of the projection onto ``geo``
        at the given signed distances, where a closed form exists.

        Returns a list of Points (possibly just [geo(t)] when the backend
        has no closed-form fiber description).
        """
        return [geo.point_at(t)]

    def far_members(self, geo: Geodesic) -> list:
        """Candidate points far from the geodesic whose projections
        accumulate on single parameters (empty for most backends). Callers
        must filter by actual curtain membership."""
        return []


# ---------------------------------------------------------------------------
# Euclidean space
# ---------------------------------------------------------------------------

class Euclidean(Space):
    kind = "euclidean"
    flat = True

    def __init__(self, dim: int):
        if dim < 1:
            raise SpaceDomainError("Euclidean dimension must be >= 1")
        self.dim = int(dim)

    @property
    def name(self):
        return f"euclidean({self.dim})"

    def to_spec(self):
        return {"kind": "euclidean", "dim": self.dim}

    def _coerce(self, raw):
        a = np.asarray(raw, dtype=float)
        return a

    def _check(self, data):
        if data.shape != (self.dim,):
            raise SpaceDomainError(f"expected {self.dim} coordinates")
        if not np.all(np.isfinite(data)):
            raise SpaceDomainError("non-finite coordinates")

    def _dist(self, a, b):
        return float(np.linalg.norm(a - b))

    def distance_many(self, x, pts):
        arr = np.array([p.data for p in pts])
        return np.linalg.norm(arr - x.data, axis=1)

    def _geodesic(self, x, y):
        d = self._dist(x.data, y.data)
        return self._line(x.data, (y.data - x.data) / d, (0.0, d))

    def _line(self, p0, u, domain):
        p0 = np.asarray(p0, dtype=float)
        u = np.asarray(u, dtype=float)
        spec = {"kind": "euclidean_line", "p0": list(map(float, p0)),
                "u": list(map(float, u)), "domain": list(domain)}
        ev = lambda t: Point(self, p0 + t * u)
        proj = lambda q: float(np.dot(q.data - p0, u))
        return Geodesic(self, tuple(domain), ev, spec, proj)

    def _extend(self, geo, pad):
        s = geo.spec
        a, b = geo.domain
        return self._line(np.array(s["p0"]), np.array(s["u"]), (a - pad, b + pad))

    def geodesic_from_spec(self, spec):
        return self._line(np.array(spec["p0"]), np.array(spec["u"]),
                          tuple(spec["domain"]))

    def sample_point(self, rng, scale=3.0):
        return Point(self, rng.normal(0.0, scale, size=self.dim))

    def transversal(self, geo, t, offsets):
        u = np.array(geo.spec["u"])
        # any unit normal; in dim >= 2 pick the least-aligned basis vector
        if self.dim == 1:
            return [geo.point_at(t)]
        e = np.zeros(self.dim)
        e[int(np.argmin(np.abs(u)))] = 1.0
        n = e - np.dot(e, u) * u
        n /= np.linalg.norm(n)
        base = geo.point_at(t).data
        return [Point(self, base + s * n) for s in offsets]


# ---------------------------------------------------------------------------
# hyperbolic upper half-plane
# ---------------------------------------------------------------------------

class HalfPlane(Space):
    """Upper half-plane model of the hyperbolic plane; points are complex."""

    kind = "half_plane"
    intrinsically_hyperbolic = True

    def to_spec(self):
        return {"kind": "half_plane"}

    def _coerce(self, raw):
        if isinstance(raw, complex):
            return raw
        if isinstance(raw, (tuple, list)) and len(raw) == 2:
            return complex(raw[0], raw[1])
        if isinstance(raw, (int, float)):
            return complex(raw, 0.0)
        return raw

    def _check(self, data):
        if not isinstance(data, complex) or not (data.imag > 0.0):
            raise SpaceDomainError("half-plane points need imag > 0")
        if not (math.isfinite(data.real) and math.isfinite(data.imag)):
            raise SpaceDomainError("non-finite coordinates")

    def _dist(self, a, b):
        # 2 asinh(|a-b| / (2 sqrt(Im a Im b))): stable form of acosh(1+...)
        return 2.0 * math.asinh(abs(a - b) / (2.0 * math.sqrt(a.imag * b.imag)))

    def distance_many(self, x, pts):
        arr = np.array([p.data for p in pts], dtype=complex)
        return 2.0 * np.arcsinh(np.abs(arr - x.data) /
                                (2.0 * np.sqrt(arr.imag * x.data.imag)))

    # geodesics: vertical lines x=a with y = exp(s t + o), or semicircles
    # centered on the real axis with point (c - R tanh u, R sech u),
    # u = s t + o.
    def _vertical(self, a, sign, offset, domain):
        spec = {"kind": "h2_vertical", "a": float(a), "sign": float(sign),
                "offset": float(offset), "domain": list(domain)}

        def ev(t):
            return Point(self, complex(a, math.exp(sign * t + offset)))

        def proj(q):
            return (math.log(abs(q.data - a)) - offset) / sign

        return Geodesic(self, tuple(domain), ev, spec, proj)

    def _circle(self, c, R, sign, offset, domain):
        spec = {"kind": "h2_circle", "c": float(c), "R": float(R),
                "sign": float(sign), "offset": float(offset),
                "domain": list(domain)}

        def ev(t):
            u = sign * t + offset
            return Point(self, complex(c - R * math.tanh(u), R / math.cosh(u)))

        def proj(q):
            z = q.data
            u = math.log(abs(z - c - R)) - math.log(abs(z - c + R))
            return (u - offset) / sign

        return Geodesic(self, tuple(domain), ev, spec, proj)

    def _geodesic(self, x, y):
        z1, z2 = x.data, y.data
        d = self._dist(z1, z2)
        if abs(z1.real - z2.real) < 1e-12:
            a = z1.real
            sign = 1.0 if z2.imag > z1.imag else -1.0
            offset = math.log(z1.imag)
            return self._vertical(a, sign, offset, (0.0, d))
        c = (abs(z2) ** 2 - abs(z1) ** 2) / (2.0 * (z2.real - z1.real))
        R = abs(z1 - c)
        # parameter of z on the circle: u = log|z-c-R| - log|z-c+R|
        u1 = math.log(abs(z1 - c - R)) - math.log(abs(z1 - c + R))
        u2 = math.log(abs(z2 - c - R)) - math.log(abs(z2 - c + R))
        sign = 1.0 if u2 > u1 else -1.0
        return self._circle(c, R, sign, u1, (0.0, d))

    def _extend(self, geo, pad):
        s = dict(geo.spec)
        a, b = geo.domain
        s["domain"] = [a - pad, b + pad]
        return self.geodesic_from_spec(s)

    def geodesic_from_spec(self, spec):
        dom = tuple(spec["domain"])
        if spec["kind"] == "h2_vertical":
            return self._vertical(spec["a"], spec["sign"], spec["offset"], dom)
        return self._circle(spec["c"], spec["R"], spec["sign"], spec["offset"], dom)

    def geodesic_through(self, z: complex, direction: complex,
                         domain=(-20.0, 20.0)) -> Geodesic:
        """Complete geodesic through z with the given (Euclidean) tangent."""
        vx, vy = direction.real, direction.imag
        if abs(vx) < 1e-12:
            sign = 1.0 if vy > 0 else -1.0
            return self._vertical(z.real, sign, math.log(z.imag), domain)
        c = z.real + z.imag * vy / vx
        R = math.hypot(z.real - c, z.imag)
        u0 = math.log(abs(z - c - R)) - math.log(abs(z - c + R))
        # forward direction on the circle has decreasing x for increasing u
        sign = -1.0 if vx > 0 else 1.0
        return self._circle(c, R, sign, u0, domain)

    def sample_point(self, rng, scale=3.0):
        return Point(self, complex(rng.normal(0.0, scale),
                                   math.exp(rng.normal(0.0, 1.0))))

    def transversal(self, geo, t, offsets):
        base = geo.point_at(t)
        # tangent of the geodesic at base (Euclidean), rotated by 90 degrees
        eps = 1e-5
        a, b = geo.domain
        t2 = min(t + eps, b)
        t1 = max(t - eps, a)
        dz = geo.point_at(t2).data - geo.point_at(t1).data
        if abs(dz) == 0.0:
            return [base]
        n = dz / abs(dz) * 1j
        perp = self.geodesic_through(base.data, n)
        out = []
        for s in offsets:
            try:
                out.append(perp.point_at(s))
            except SpaceDomainError:
                pass
        return out


# ---------------------------------------------------------------------------
# products
# ---------------------------------------------------------------------------

class Product(Space):
    kind = "product"

    def __init__(self, left: Space, right: Space):
        self.left = left
        self.right = right
        self.flat = left.flat and right.flat

    @property
    def name(self):
        return f"product({self.left.name}, {self.right.name})"

    def to_spec(self):
        return {"kind": "product", "left": self.left.to_spec(),
                "right": self.right.to_spec()}

    def _coerce(self, raw):
        if isinstance(raw, (tuple, list)) and len(raw) == 2:
            lp = raw[0] if isinstance(raw[0], Point) else self.left.point(raw[0])
            rp = raw[1] if isinstance(raw[1], Point) else self.right.point(raw[1])
            return (lp, rp)
        return raw

    def _check(self, data):
        if not (isinstance(data, tuple) and len(data) == 2):
            raise SpaceDomainError("product points are pairs")
        lp, rp = data
        if lp.space != self.left or rp.space != self.right:
            raise SpaceDomainError("factor points in the wrong factor space")

    def _dist(self, a, b):
        return math.hypot(self.left.distance(a[0], b[0]),
                          self.right.distance(a[1], b[1]))

    def _geodesic(self, x, y):
        dl = self.left.distance(x.data[0], y.data[0])
        dr = self.right.distance(x.data[1], y.data[1])
        d = math.hypot(dl, dr)
        cl, cr = dl / d, dr / d
        if dr == 0.0:
            return self.embed_left(self.left.geodesic(x.data[0], y.data[0]),
                                   x.data[1])
        if dl == 0.0:
            return self.embed_right(self.right.geodesic(x.data[1], y.data[1]),
                                    x.data[0])
        gl = self.left.geodesic(x.data[0], y.data[0])
        gr = self.right.geodesic(x.data[1], y.data[1])
        spec = {"kind": "product_segment", "x": point_to_raw(x),
                "y": point_to_raw(y), "domain": [0.0, d]}

        def ev(t):
            return Point(self, (gl.point_at(cl * t), gr.point_at(cr * t)))

        return Geodesic(self, (0.0, d), ev, spec, None)

    def embed_left(self, geo_left: Geodesic, frozen_right: Point) -> Geodesic:
        """Lift a geodesic of the left factor at a frozen right coordinate;
        the product parameter equals the factor parameter."""
        a, b = geo_left.domain
        spec = {"kind": "product_embed", "side": "left", "inner": geo_left.spec,
                "frozen": point_to_raw(frozen_right), "domain": [a, b]}
        ev = lambda t: Point(self, (geo_left.point_at(t), frozen_right))
        proj = lambda q: self.left.project(q.data[0], geo_left)
        return Geodesic(self, (a, b), ev, spec, proj)

    def embed_right(self, geo_right: Geodesic, frozen_left: Point) -> Geodesic:
        a, b = geo_right.domain
        spec = {"kind": "product_embed", "side": "right", "inner": geo_right.spec,
                "frozen": point_to_raw(frozen_left), "domain": [a, b]}
        ev = lambda t: Point(self, (frozen_left, geo_right.point_at(t)))
        proj = lambda q: self.right.project(q.data[1], geo_right)
        return Geodesic(self, (a, b), ev, spec, proj)

    def _extend(self, geo, pad):
        # extension only for factor-embedded geodesics
        s = geo.spec
        if s.get("kind") == "product_embed":
            if s["side"] == "left":
                inner = self.left.geodesic_from_spec(s["inner"])
                frozen = point_from_spec(self.right, s["frozen"])
                return self.embed_left(self.left._extend(inner, pad), frozen)
            inner = self.right.geodesic_from_spec(s["inner"])
            frozen = point_from_spec(self.left, s["frozen"])
            return self.embed_right(self.right._extend(inner, pad), frozen)
        return geo

    def geodesic_from_spec(self, spec):
        if spec["kind"] == "product_embed":
            if spec["side"] == "left":
                return self.embed_left(self.left.geodesic_from_spec(spec["inner"]),
                                       point_from_spec(self.right, spec["frozen"]))
            return self.embed_right(self.right.geodesic_from_spec(spec["inner"]),
                                    point_from_spec(self.left, spec["frozen"]))
        if spec["kind"] == "product_segment":
            x = point_from_spec(self, spec["x"])
            y = point_from_spec(self, spec["y"])
            return self._geodesic(x, y)
        raise SpaceDomainError(f"unknown product geodesic kind {spec['kind']}")

    def sample_point(self, rng, scale=3.0):
        return Point(self, (self.left.sample_point(rng, scale),
                            self.right.sample_point(rng, scale)))

    def transversal(self, geo, t, offsets):
        s = geo.spec
        base = geo.point_at(t)
        out = [base]
        # factor-embedded geodesics: the fiber contains the other factor
        if s.get("kind") == "product_embed" and s["side"] == "left":
            rp = base.data[1]
            for off in offsets:
                moved = _move_in_space(self.right, rp, off)
                if moved is not None:
                    out.append(Point(self, (base.data[0], moved)))
        elif s.get("kind") == "product_embed" and s["side"] == "right":
            lp = base.data[0]
            for off in offsets:
                moved = _move_in_space(self.left, lp, off)
                if moved is not None:
                    out.append(Point(self, (moved, base.data[1])))
        return out


def _move_in_space(space, p, dist):
    """Some point at the given distance from p (sign picks a direction)."""
    if isinstance(space, Euclidean):
        q = p.data.copy()
        q[0] += dist
        return Point(space, q)
    if isinstance(space, HalfPlane):
        return Point(space, p.data * math.exp(dist))
    if isinstance(space, AnnulusCover):
        th, r = p.data
        return Point(space, (th, max(r + dist, space._rmin() + 1e-9)))
    return None


# ---------------------------------------------------------------------------
# glued spaces (wedge along isometric copies of a common anchor set A)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GluingSpec:
    """Anchors: one list of Points per part; entry m of every list is the
    copy of the same element of A. diam_a is the diameter of A and
    N = ceil(diam_a) + 3 is the chain constant of the gluing estimates."""

    anchors: tuple          # tuple over parts of tuples of Points
    diam_a: float

    @property
    def n_constant(self) -> int:
        return int(math.ceil(self.diam_a)) + 3


class Glued(Space):
    """Parts glued along isometric copies of a common compact set A.

    A single anchor point per part is exact (wedge sum); a general compact
    A is approximated by minimizing over the finite anchor grid.
    """

    kind = "glued"
    # with >= 2 parts the wedge is never flat in the relevant sense
    flat = False

    def __init__(self, parts: Sequence[Space], anchors, diam_a: float = 0.0):
        if len(parts) < 2:
            raise SpaceDomainError("glued spaces need at least 2 parts")
        self.parts = tuple(parts)
        anchor_tuples = []
        for i, per_part in enumerate(anchors):
            pts = tuple(p if isinstance(p, Point) else self.parts[i].point(p)
                        for p in (per_part if isinstance(per_part, (list, tuple))
                                  else [per_part]))
            anchor_tuples.append(pts)
        m = len(anchor_tuples[0])
        if any(len(t) != m for t in anchor_tuples):
            raise SpaceDomainError("every part needs the same anchor count")
        self.gluing = GluingSpec(tuple(anchor_tuples), float(diam_a))

    @property
    def name(self):
        return f"glued({', '.join(p.name for p in self.parts)})"

    def to_spec(self):
        return {"kind": "glued",
                "parts": [p.to_spec() for p in self.parts],
                "anchors": [[point_to_raw(p) for p in per]
                            for per in self.gluing.anchors],
                "diam_a": self.gluing.diam_a}

    def _coerce(self, raw):
        if (isinstance(raw, (tuple, list)) and len(raw) == 2
                and isinstance(raw[0], int)):
            i = raw[0]
            if not 0 <= i < len(self.parts):
                raise SpaceDomainError("part index out of range")
            p = raw[1] if isinstance(raw[1], Point) else self.parts[i].point(raw[1])
            return (i, p)
        return raw

    def _check(self, data):
        if not (isinstance(data, tuple) and len(data) == 2):
            raise SpaceDomainError("glued points are (part_index, point)")
        i, p = data
        if not (isinstance(i, int) and 0 <= i < len(self.parts)):
            raise SpaceDomainError("part index out of range")
        if p.space != self.parts[i]:
            raise SpaceDomainError("point not in the indexed part")

    def _legs(self, i, p):
        """Distances from p (in part i) to each anchor copy in part i."""
        part = self.parts[i]
        return np.array([part.distance(p, a) for a in self.gluing.anchors[i]])

    def _dist(self, a, b):
        i, p = a
        j, q = b
        if i == j:
            return self.parts[i].distance(p, q)
        return float(np.min(self._legs(i, p) + self._legs(j, q)))

    def _geodesic(self, x, y):
        i, p = x.data
        j, q = y.data
        if i == j:
            return self._embed(i, self.parts[i].geodesic(p, q))
        legs = self._legs(i, p) + self._legs(j, q)
        m = int(np.argmin(legs))
        ai = self.gluing.anchors[i][m]
        aj = self.gluing.anchors[j][m]
        g1 = self.parts[i].geodesic(p, ai) if self.parts[i].distance(p, ai) > 0 else None
        g2 = self.parts[j].geodesic(aj, q) if self.parts[j].distance(aj, q) > 0 else None
        return self._concat(i, g1, j, g2, ai, aj)

    def _embed(self, i, geo):
        spec = {"kind": "glued_embed", "part": i, "inner": geo.spec}
        ev = lambda t: Point(self, (i, geo.point_at(t)))

        def proj(q):
            jj, pp = q.data
            if jj == i:
                return self.parts[i].project(pp, geo)
            # other parts see the geodesic through the best anchor copy
            legs = self._legs(jj, pp)
            m = int(np.argmin(legs))
            return self.parts[i].project(self.gluing.anchors[i][m], geo)

        return Geodesic(self, geo.domain, ev, spec, proj)

    def _concat(self, i, g1, j, g2, ai, aj):
        l1 = 0.0 if g1 is None else g1.length
        l2 = 0.0 if g2 is None else g2.length
        x_raw = point_to_raw(Point(self, (i, ai if g1 is None else g1.point_at(0.0))))
        y_raw = point_to_raw(Point(self, (j, aj if g2 is None else g2.point_at(l2))))
        spec = {"kind": "glued_concat", "x": x_raw, "y": y_raw,
                "domain": [0.0, l1 + l2]}

        def ev(t):
            if t <= l1:
                if g1 is None:
                    return Point(self, (i, ai))
                return Point(self, (i, g1.point_at(min(t, l1))))
            if g2 is None:
                return Point(self, (j, aj))
            return Point(self, (j, g2.point_at(min(t - l1, l2))))

        return Geodesic(self, (0.0, l1 + l2), ev, spec, None)

    def _extend(self, geo, pad):
        if geo.spec.get("kind") == "glued_embed":
            i = geo.spec["part"]
            inner = self.parts[i].geodesic_from_spec(geo.spec["inner"])
            return self._embed(i, self.parts[i]._extend(inner, pad))
        return geo

    def geodesic_from_spec(self, spec):
        if spec["kind"] == "glued_embed":
            i = spec["part"]
            return self._embed(i, self.parts[i].geodesic_from_spec(spec["inner"]))
        if spec["kind"] == "glued_concat":
            return self._geodesic(point_from_spec(self, spec["x"]),
                                  point_from_spec(self, spec["y"]))
        raise SpaceDomainError(f"unknown glued geodesic kind {spec['kind']}")

    def sample_point(self, rng, scale=3.0):
        i = int(rng.integers(0, len(self.parts)))
        p = self.parts[i].sample_point(rng, scale)
        return Point(self, (i, p))

    def transversal(self, geo, t, offsets):
        if geo.spec.get("kind") == "glued_embed":
            i = geo.spec["part"]
            inner = self.parts[i].geodesic_from_spec(geo.spec["inner"])
            pts = self.parts[i].transversal(inner, t, offsets)
            return [Point(self, (i, p)) for p in pts]
        return [geo.point_at(t)]

# ---------------------------------------------------------------------------
# universal cover of the plane minus the unit disc
# ---------------------------------------------------------------------------

class AnnulusCover(Space):
    """Universal cover of R^2 minus the unit disc, coordinates (theta, r).

    ``complete=True`` includes the boundary circle r=1 (cover of the plane
    minus the *open* disc); ``complete=False`` excludes it and the space is
    incomplete by design.
    """

    kind = "annulus_cover"

    def __init__(self, complete: bool = True):
        self.complete = bool(complete)
        self.geodesically_complete = self.complete

    @property
    def name(self):
        return f"annulus_cover({'complete' if self.complete else 'incomplete'})"

    def to_spec(self):
        return {"kind": "annulus_cover", "complete": self.complete}

    def _rmin(self):
        return 1.0

    def _coerce(self, raw):
        if isinstance(raw, (tuple, list)) and len(raw) == 2:
            return (float(raw[0]), float(raw[1]))
        return raw

    def _check(self, data):
        th, r = data
        if not (math.isfinite(th) and math.isfinite(r)):
            raise SpaceDomainError("non-finite coordinates")
        if self.complete:
            if r < 1.0 - 1e-12:
                raise SpaceDomainError("annulus cover needs r >= 1")
        else:
            if r <= 1.0:
                raise SpaceDomainError("incomplete annulus cover needs r > 1")

    @staticmethod
    def _slack(dth, r1, r2):
        return dth - math.acos(1.0 / r1) - math.acos(1.0 / r2)

    def _dist(self, a, b):
        th1, r1 = a
        th2, r2 = b
        dth = abs(th2 - th1)
        slack = self._slack(dth, r1, r2)
        if slack <= 0.0:
            return math.sqrt(max(r1 * r1 + r2 * r2 - 2.0 * r1 * r2 * math.cos(dth), 0.0))
        return math.sqrt(r1 * r1 - 1.0) + math.sqrt(r2 * r2 - 1.0) + slack

    def distance_many(self, x, pts):
        th1, r1 = x.data
        th = np.array([p.data[0] for p in pts])
        r = np.array([p.data[1] for p in pts])
        dth = np.abs(th - th1)
        slack = dth - math.acos(1.0 / r1) - np.arccos(1.0 / r)
        chord = np.sqrt(np.maximum(r1 * r1 + r * r - 2.0 * r1 * r * np.cos(dth), 0.0))
        wrap = math.sqrt(r1 * r1 - 1.0) + np.sqrt(r * r - 1.0) + slack
        return np.where(slack <= 0.0, chord, wrap)

    # -- geodesic kinds ------------------------------------------------------
    def chord(self, th0, r0, psi, domain):
        """Straight segment in the unrolled chart: start (th0, r0), chart
        direction angle psi measured in the frame where the start point sits
        on the positive x-axis. Unit speed; domain must avoid the disc."""
        spec = {"kind": "annulus_chord", "th0": float(th0), "r0": float(r0),
                "psi": float(psi), "domain": list(domain)}
        cx, sx = math.cos(psi), math.sin(psi)

        def ev(t):
            px = r0 + t * cx
            py = t * sx
            return Point(self, (th0 + math.atan2(py, px), math.hypot(px, py)))

        return Geodesic(self, tuple(domain), ev, spec, None)

    def chord_valid_range(self, r0, psi):
        """Largest parameter interval containing t=0 on which the chart line
        (r0 + t cos psi, t sin psi) stays at radius >= 1."""
        # |(r0 + t cos, t sin)|^2 >= 1: t^2 + 2 r0 cos(psi) t + r0^2 - 1 >= 0
        c = math.cos(psi)
        disc = (r0 * c) ** 2 - (r0 * r0 - 1.0)
        if disc <= 0.0:
            return (-math.inf, math.inf)
        t_in = -r0 * c - math.sqrt(disc)   # forbidden open interval (t_in, t_out)
        t_out = -r0 * c + math.sqrt(disc)
        if t_out <= 0.0:
            return (t_out, math.inf)
        if t_in >= 0.0:
            return (-math.inf, t_in)
        raise SpaceDomainError("chord base point inside the disc")

    def boundary_lift(self, domain=(-200.0, 200.0)):
        """The lift of the boundary circle, parametrized by angle (= arc
        length). Only a geodesic of the complete space."""
        if not self.complete:
            raise SpaceDomainError("boundary lift is not in the incomplete space")
        spec = {"kind": "annulus_boundary", "domain": list(domain)}
        ev = lambda t: Point(self, (t, 1.0))
        proj = lambda q: q.data[0]
        return Geodesic(self, tuple(domain), ev, spec, proj)

    def wall(self, phi, rho=None, domain=(-160.0, 160.0)):
        """Complete straight-line geodesic perpendicular to direction phi at
        distance rho >= 1 from the origin (a 'wall' across the corridor)."""
        if rho is None:
            rho = 1.0 if self.complete else 1.0 + 1e-6
        if rho < 1.0 or (not self.complete and rho <= 1.0):
            raise SpaceDomainError("wall must clear the disc")
        # start point at the closest approach, direction +90 degrees
        return self.chord(phi, rho, math.pi / 2.0, domain)

    def _geodesic(self, x, y):
        (th1, r1), (th2, r2) = x.data, y.data
        dth = th2 - th1
        slack = self._slack(abs(dth), r1, r2)
        d = self._dist(x.data, y.data)
        if slack <= 0.0:
            # chord in the chart frame anchored at x (either angular sign)
            bx = r2 * math.cos(dth)
            by = r2 * math.sin(dth)
            psi = math.atan2(by, bx - r1)
            if not self.complete:
                _, hi = self.chord_valid_range(r1, psi)
                if d >= hi - 1e-12:
                    raise GeodesicExitsSpace(
                        "geodesic exits space: chord touches the boundary")
            return self.chord(th1, r1, psi, (0.0, d))
        if not self.complete:
            raise GeodesicExitsSpace(
                "geodesic exits space: the path must run along r=1")
        return self._wrap_geodesic(th1, r1, th2, r2, d)

    def _wrap_geodesic(self, th1, r1, th2, r2, d):
        # mirror when the angle decreases so the construction runs forward
        sg = 1.0 if th2 >= th1 else -1.0
        a1, a2 = sg * th1, sg * th2
        b1 = math.acos(1.0 / r1)
        b2 = math.acos(1.0 / r2)
        l1 = math.sqrt(r1 * r1 - 1.0)
        l2 = math.sqrt(r2 * r2 - 1.0)
        phi1 = a1 + b1
        phi2 = a2 - b2
        arc = phi2 - phi1
        spec = {"kind": "annulus_wrap", "x": [th1, r1], "y": [th2, r2],
                "domain": [0.0, d]}

        def ev(t):
            if t <= l1:
                s = l1 - t  # distance along the tangent back toward x
                ang, rr = phi1 - math.atan2(s, 1.0), math.hypot(1.0, s)
            elif t <= l1 + arc:
                ang, rr = phi1 + (t - l1), 1.0
            else:
                s = min(t - l1 - arc, l2)
                ang, rr = phi2 + math.atan2(s, 1.0), math.hypot(1.0, s)
            return Point(self, (sg * ang, rr))

        return Geodesic(self, (0.0, d), ev, spec, None)

    def _extend(self, geo, pad):
        if geo.spec.get("kind") == "annulus_chord":
            s = geo.spec
            lo, hi = self.chord_valid_range(s["r0"], s["psi"])
            margin = 0.0 if self.complete else 1e-9
            a, b = geo.domain
            return self.chord(s["th0"], s["r0"], s["psi"],
                              (max(a - pad, lo + margin), min(b + pad, hi - margin)))
        if geo.spec.get("kind") == "annulus_boundary":
            a, b = geo.domain
            return self.boundary_lift((a - pad, b + pad))
        return geo

    def geodesic_from_spec(self, spec):
        dom = tuple(spec["domain"])
        if spec["kind"] == "annulus_chord":
            return self.chord(spec["th0"], spec["r0"], spec["psi"], dom)
        if spec["kind"] == "annulus_boundary":
            return self.boundary_lift(dom)
        if spec["kind"] == "annulus_wrap":
            x = self.point(tuple(spec["x"]))
            y = self.point(tuple(spec["y"]))
            return self._geodesic(x, y)
        raise SpaceDomainError(f"unknown annulus geodesic kind {spec['kind']}")

    def project(self, x, geo):
        if geo.spec.get("kind") == "annulus_chord":
            self._require_mine(x)
            return self._chord_project(x, geo)
        return super().project(x, geo)

    def _chord_project(self, x, geo):
        """Projection onto a chord geodesic via a candidate-bracketed golden
        search: the convex displacement has its smooth critical points at
        the chart foot (straight regime) or at signed distance +-1 from the
        line's closest approach to the origin (wrapping regime)."""
        s = geo.spec
        th0, r0, psi = s["th0"], s["r0"], s["psi"]
        a, b = geo.domain
        th, rho = x.data
        delta = th - th0
        cands = []
        if abs(delta) < math.pi:
            # chart coordinates: start point at (r0, 0), direction (cos, sin)
            xx = rho * math.cos(delta)
            yy = rho * math.sin(delta)
            cands.append((xx - r0) * math.cos(psi) + yy * math.sin(psi))
        foot = -r0 * math.cos(psi)   # parameter of closest approach to origin
        cands.extend((foot - 1.0, foot + 1.0))
        lo = max(a, min(cands) - 2.0)
        hi = min(b, max(cands) + 2.0)
        if hi <= lo:
            lo, hi = a, b
            if math.isinf(lo) or math.isinf(hi):
                return self._project_search(x, geo)
        f = lambda t: self._dist(x.data, geo.point_at(t).data)
        t = _golden_minimize(f, lo, hi, tol=1e-9)
        # guard: the bracket must contain the minimum of the convex function
        if t < lo + 1e-6 and lo > a:
            return self._project_search(x, geo)
        if t > hi - 1e-6 and hi < b:
            return self._project_search(x, geo)
        return t

    def wrap_parameters(self, geo: Geodesic):
        """Chord parameters where the projections of entire wrap regions
        accumulate: every point far ahead (in angle) projects to signed
        distance +1 from the line's closest approach to the origin, and
        every point far behind to -1. Returns (s_behind, s_ahead) or None."""
        s = geo.spec
        if s.get("kind") != "annulus_chord":
            return None
        sin_psi = math.sin(s["psi"])
        if abs(sin_psi) < 1e-12:
            return None  # radial chart line: domain-limited, no wrap fixed point
        foot = -s["r0"] * math.cos(s["psi"])
        ahead = foot + (1.0 if sin_psi > 0 else -1.0)
        behind = foot - (1.0 if sin_psi > 0 else -1.0)
        return (behind, ahead)

    def far_members(self, geo):
        if geo.spec.get("kind") != "annulus_chord":
            return []
        th0 = geo.spec["th0"]
        rmin = 1.5 if not self.complete else 1.2
        out = []
        for dth in (TWO_PI, 2.0 * TWO_PI):
            for r in (rmin, 4.0, 20.0):
                out.append(Point(self, (th0 + dth, r)))
                out.append(Point(self, (th0 - dth, r)))
        return out

    def sample_point(self, rng, scale=3.0):
        th = rng.uniform(-scale * math.pi, scale * math.pi)
        r = 1.0 + abs(rng.normal(0.0, scale / 2.0))
        if not self.complete:
            r = max(r, 1.0 + 1e-3)
        return Point(self, (th, r))

    def transversal(self, geo, t, offsets):
        if geo.spec.get("kind") == "annulus_boundary":
            th = geo.point_at(t).data[0]
            out = [geo.point_at(t)]
            for s in offsets:
                if s > 0:
                    out.append(Point(self, (th, 1.0 + s)))
            return out
        if geo.spec.get("kind") == "annulus_chord":
            # fiber direction is radially outward from the chart line
            p = geo.point_at(t)
            th, r = p.data
            out = [p]
            for s in offsets:
                if r + s >= self._rmin() + (0.0 if self.complete else 1e-9):
                    out.append(Point(self, (th, r + s)))
            return out
        return [geo.point_at(t)]


# ---------------------------------------------------------------------------
# isometries
# ---------------------------------------------------------------------------

class Isometry:
    """A named isometry of a backend with closed-form integer powers."""

    def __init__(self, space: Space, name: str, action: dict):
        self.space = space
        self.name = name
        self.action = action
        self._validate()

    def _validate(self):
        kind = self.action.get("type")
        sp = self.space
        ok = (
            (kind == "translation" and isinstance(sp, Euclidean)) or
            (kind == "rotation" and isinstance(sp, Euclidean) and sp.dim == 2) or
            (kind == "mobius" and isinstance(sp, HalfPlane)) or
            (kind == "pair" and isinstance(sp, Product)) or
            (kind == "deck" and isinstance(sp, AnnulusCover)) or
            (kind == "glued_map" and isinstance(sp, Glued)) or
            kind == "identity"
        )
        if not ok:
            raise SpaceDomainError(
                f"action type {kind!r} not valid on {sp.name}")
        if kind == "mobius":
            m = self._mobius_matrix()
            if np.linalg.det(m) <= 0:
                raise SpaceDomainError("mobius action needs positive determinant")

    def _mobius_matrix(self):
        a = self.action
        m = np.array([[a["a"], a["b"]], [a["c"], a["d"]]], dtype=float)
        return m / math.sqrt(abs(np.linalg.det(m)))

    def apply(self, x: Point, n: int = 1) -> Point:
        """g^n applied to x (n may be negative or zero)."""
        if x.space != self.space:
            raise SpaceDomainError("isometry applied to a foreign point")
        if n == 0:
            return x
        kind = self.action["type"]
        if kind == "identity":
            return x
        if kind == "translation":
            v = np.asarray(self.action["vector"], dtype=float)
            return Point(self.space, x.data + n * v)
        if kind == "rotation":
            ctr = np.asarray(self.action["center"], dtype=float)
            ang = n * self.action["angle"]
            c, s = math.cos(ang), math.sin(ang)
            rel = x.data - ctr
            rot = np.array([c * rel[0] - s * rel[1], s * rel[0] + c * rel[1]])
            return Point(self.space, ctr + rot)
        if kind == "mobius":
            m = np.linalg.matrix_power(self._mobius_matrix(), n) if n >= 0 \
                else np.linalg.matrix_power(np.linalg.inv(self._mobius_matrix()), -n)
            z = x.data
            return Point(self.space, (m[0, 0] * z + m[0, 1]) / (m[1, 0] * z + m[1, 1]))
        if kind == "pair":
            sp = self.space
            gl = Isometry(sp.left, self.name + ".L", self.action["left"])
            gr = Isometry(sp.right, self.name + ".R", self.action["right"])
            return Point(sp, (gl.apply(x.data[0], n), gr.apply(x.data[1], n)))
        if kind == "deck":
            k = self.action.get("turns", 1)
            th, r = x.data
            return Point(self.space, (th + TWO_PI * k * n, r))
        if kind == "glued_map":
            return self._apply_glued(x, n)
        raise SpaceDomainError(f"unknown action {kind}")

    def _apply_glued(self, x, n):
        sp = self.space
        perm = self.action.get("perm", list(range(len(sp.parts))))
        acts = self.action.get("part_actions")
        steps = abs(n)
        inverse = n < 0
        i, p = x.data
        if inverse:
            inv_perm = [0] * len(perm)
            for a, b in enumerate(perm):
                inv_perm[b] = a
        for _ in range(steps):
            if not inverse:
                j = perm[i]
                if acts is not None:
                    g = Isometry(sp.parts[i], self.name + f".{i}", acts[i])
                    p = g.apply(p, 1)
                i = j
            else:
                j = inv_perm[i]
                if acts is not None:
                    g = Isometry(sp.parts[j], self.name + f".{j}", acts[j])
                    p = g.apply(p, -1)
                i = j
        return Point(sp, (i, p))

    def push_geodesic(self, geo: Geodesic, n: int = 1) -> Geodesic:
        """Image of a geodesic under g^n (endpoint reconstruction)."""
        a, b = geo.domain
        if math.isinf(a) or math.isinf(b):
            raise SpaceDomainError("cannot push an infinite geodesic by endpoints")
        x = self.apply(geo.point_at(a), n)
        y = self.apply(geo.point_at(b), n)
        g = self.space.geodesic(x, y)
        return g

    def to_spec(self):
        return {"name": self.name, "action": self.action}


# ---------------------------------------------------------------------------
# JSON specs
# ---------------------------------------------------------------------------

def space_from_spec(spec: dict) -> Space:
    kind = spec["kind"]
    if kind == "euclidean":
        return Euclidean(spec["dim"])
    if kind == "half_plane":
        return HalfPlane()
    if kind == "product":
        return Product(space_from_spec(spec["left"]), space_from_spec(spec["right"]))
    if kind == "annulus_cover":
        return AnnulusCover(spec.get("complete", True))
    if kind == "glued":
        parts = [space_from_spec(s) for s in spec["parts"]]
        return Glued(parts, spec["anchors"], spec.get("diam_a", 0.0))
    raise SpaceDomainError(f"unknown space kind {kind!r}")


def point_from_spec(space: Space, raw) -> Point:
    if isinstance(space, Euclidean):
        return space.point(raw)
    if isinstance(space, HalfPlane):
        return space.point(tuple(raw) if isinstance(raw, (list, tuple)) else raw)
    if isinstance(space, Product):
        return space.point((point_from_spec(space.left, raw[0]),
                            point_from_spec(space.right, raw[1])))
    if isinstance(space, Glued):
        return space.point((int(raw[0]),
                            point_from_spec(space.parts[int(raw[0])], raw[1])))
    if isinstance(space, AnnulusCover):
        return space.point(tuple(raw))
    raise SpaceDomainError("unknown space")


def point_to_raw(p: Point):
    sp = p.space
    if isinstance(sp, Euclidean):
        return [float(v) for v in p.data]
    if isinstance(sp, HalfPlane):
        return [p.data.real, p.data.imag]
    if isinstance(sp, Product):
        return [point_to_raw(p.data[0]), point_to_raw(p.data[1])]
    if isinstance(sp, Glued):
        return [p.data[0], point_to_raw(p.data[1])]
    if isinstance(sp, AnnulusCover):
        return [p.data[0], p.data[1]]
    raise SpaceDomainError("unknown space")


def load_space_document(doc) -> tuple:
    """Parse {"space": {...}, "isometries": [{"name", "action"}, ...]}.

    Accepts a dict, a JSON string, or a path to a JSON file. Returns
    (space, {name: Isometry}).
    """
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError:
            with open(doc) as fh:
                doc = json.load(fh)
    space = space_from_spec(doc["space"])
    isos = {}
    for item in doc.get("isometries", []):
        isos[item["name"]] = Isometry(space, item["name"], item["action"])
    return space, isos


# convenience sugar for common half-plane actions -----------------------------

def horizontal_translation(space: HalfPlane, c: float, name="g") -> Isometry:
    return Isometry(space, name, {"type": "mobius", "a": 1.0, "b": float(c),
                                  "c": 0.0, "d": 1.0})


def scaling(space: HalfPlane, lam: float, name="g") -> Isometry:
    return Isometry(space, name, {"type": "mobius", "a": float(lam), "b": 0.0,
                                  "c": 0.0, "d": 1.0})
