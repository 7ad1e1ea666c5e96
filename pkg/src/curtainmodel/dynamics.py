"""Isometry dynamics: translation lengths, the CAT(0) classification, the
curtain-model classification, and contraction constants.

Translation lengths use the subadditivity of n -> d(x, g^n x): every
a_n / n is a certified upper bound for tau(g), and the doubling-difference
(a_N - a_{N/2}) / (N/2) is the extrapolated estimate. In the curtain
model, positive lower bounds for tau_D are certified through the
concatenation inequality: once D(x, g^N x) >= 6 Lambda + 1, iterating
D(x,y) >= D(x,z) + D(z,y) - 6 Lambda along the orbit forces linear growth.

Classification in X distinguishes elliptic (fixed point found), hyperbolic
(displacement infimum attained with a verified axis), and parabolic
(attained minimum stays strictly above the growth estimate; necessarily a
numerical verdict). Classification in the model runs the loxodromic test
first (certified or fitted linear growth of D lower bounds), then elliptic
arguments (elliptic in X, flat collapse, the product bound), and reports
parabolic otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .curtains import Chain, ChainError, Side, side_of
from .metrics import (DEFAULT_BUDGET, D_estimate, IntervalEstimate,
                      SearchBudget, WeightSequence, analytic_cap)
from .spaces import (AnnulusCover, Euclidean, Geodesic, Glued, HalfPlane,
                     Isometry, Point, Product, SpaceDomainError, point_to_raw)

FIX_TOL = 1e-6


def _schedule(n_max: int) -> list:
    out = [1]
    while out[-1] * 2 <= n_max:
        out.append(out[-1] * 2)
    if out[-1] != n_max:
        out.append(n_max)
    return out


# ---------------------------------------------------------------------------
# translation length
# ---------------------------------------------------------------------------

@dataclass
class TranslationEstimate:
    metric: str                      # "base" or "model"
    n_values: list
    displacements: dict              # n -> float (midpoints for the model)
    tau_upper: float                 # certified: min over n of upper_n / n
    tau_limit: float                 # doubling-difference extrapolation
    tau_lower: float = 0.0           # certified (model concatenation bound)
    subadditive_ok: bool = True
    widths: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def interval(self):
        return (self.tau_lower, self.tau_upper)

    def to_row(self):
        return {"metric": self.metric, "tau_lower": self.tau_lower,
                "tau_upper": self.tau_upper, "tau_limit": self.tau_limit,
                "n_values": list(self.n_values),
                "displacements": {str(k): v for k, v in self.displacements.items()},
                "subadditive_ok": self.subadditive_ok}


def translation_length(g: Isometry, x: Point, n_max: int = 64,
                       metric: str = "base",
                       w: WeightSequence = WeightSequence(),
                       truncation: int = 24,
                       budget: SearchBudget = DEFAULT_BUDGET
                       ) -> TranslationEstimate:
    """Estimate tau(g) from the orbit of x on a doubling schedule."""
    if n_max < 8:
        raise ValueError("n_max must be at least 8")
    ns = _schedule(n_max)
    space = g.space
    disp, widths = {}, {}
    uppers = {}
    lowers = {}
    for n in ns:
        xn = g.apply(x, n)
        if metric == "base":
            a = space.distance(x, xn)
            disp[n] = a
            uppers[n] = a
            lowers[n] = a
        else:
            est = D_estimate(x, xn, w, truncation, budget)
            disp[n] = est.midpoint
            widths[n] = est.width
            uppers[n] = est.upper
            lowers[n] = est.lower
    ok = True
    for n in ns:
        if 2 * n in disp and metric == "base":
            if disp[2 * n] > 2.0 * disp[n] + 1e-9:
                ok = False
    tau_upper = min(uppers[n] / n for n in ns)
    n_last = ns[-1]
    n_half = ns[-2] if len(ns) > 1 else ns[-1]
    tau_limit = ((disp[n_last] - disp[n_half]) / (n_last - n_half)
                 if n_last > n_half else disp[n_last] / n_last)
    tau_lower = 0.0
    meta = {}
    if metric == "model":
        six_lambda = 6.0 * w.big_lambda
        for n in ns:
            if lowers[n] >= six_lambda + 1.0:
                cand = (lowers[n] - six_lambda) / n
                if cand > tau_lower:
                    tau_lower = cand
                    meta["certified_at_n"] = n
    return TranslationEstimate(metric, ns, disp, tau_upper, tau_limit,
                               tau_lower, ok, widths, meta)


# ---------------------------------------------------------------------------
# classification in X
# ---------------------------------------------------------------------------

@dataclass
class ClassificationX:
    verdict: str                     # elliptic | hyperbolic | parabolic
    confidence: str                  # certified | numerical
    tau: float
    witness: Optional[dict] = None
    evidence: dict = field(default_factory=dict)

    def to_row(self):
        return {"verdict": self.verdict, "confidence": self.confidence,
                "tau": self.tau, "witness": self.witness,
                "evidence": {k: v for k, v in self.evidence.items()
                             if not isinstance(v, (Point, Geodesic))}}


def _halving_refinement(g: Isometry, x: Point, iters: int = 64):
    """Iterate x <- midpoint([x, g x]); displacement is convex in CAT(0)
    spaces so the sequence is non-increasing and drives x toward Min(g).
    Returns (best point, its displacement, trace of displacements)."""
    space = g.space
    trace = []
    best, best_disp = x, space.distance(x, g.apply(x, 1))
    cur = x
    for _ in range(iters):
        gx = g.apply(cur, 1)
        d = space.distance(cur, gx)
        trace.append(d)
        if d < best_disp:
            best, best_disp = cur, d
        if d <= FIX_TOL * 0.5:
            break
        try:
            geo = space.geodesic(cur, gx)
        except SpaceDomainError:
            break
        cur = geo.point_at(d / 2.0)
    return best, best_disp, trace


def _orbit_circumcenter(g: Isometry, x: Point, n_max: int, iters: int = 64,
                        polish: int = 200):
    """Circumcenter iteration on orbit samples: steps of size 1/(k+2)
    toward the farthest orbit point approach the minimal enclosing ball
    center of bounded orbits; a displacement-halving polish follows. The
    displacement of the final point certifies or rejects ellipticity.
    Returns (point, displacement) or None when geodesics are unavailable
    (incomplete backends)."""
    space = g.space
    orbit = []
    for n in sorted(set(_schedule(n_max) + [-n for n in _schedule(n_max)] + [0])):
        orbit.append(g.apply(x, n))
    cur = x
    try:
        for k in range(iters):
            dists = space.distance_many(cur, orbit)
            far = orbit[int(np.argmax(dists))]
            d = float(np.max(dists))
            if d <= FIX_TOL * 0.25:
                break
            geo = space.geodesic(cur, far)
            cur = geo.point_at(d / (k + 2.0))
    except SpaceDomainError:
        return None
    cur, disp, _ = _halving_refinement(g, cur, iters=polish)
    return cur, disp


def _fixed_point_candidates(g: Isometry, probe: Point) -> list:
    """Closed-form fixed-point candidates of the action (rotation centers,
    elliptic Moebius fixed points, glued anchors); each must still be
    verified by its displacement."""
    space = g.space
    act = g.action
    kind = act.get("type")
    out = []
    if kind == "rotation":
        out.append(Point(space, np.asarray(act["center"], dtype=float)))
    elif kind == "mobius":
        a, b, c, d = act["a"], act["b"], act["c"], act["d"]
        if abs(c) > 1e-15:
            roots = np.roots([c, d - a, -b])
            for z in roots:
                if z.imag > 1e-12:
                    out.append(Point(space, complex(z)))
    elif kind == "pair":
        gl = Isometry(space.left, g.name + ".L", act["left"])
        gr = Isometry(space.right, g.name + ".R", act["right"])
        ls = _fixed_point_candidates(gl, probe.data[0]) or [probe.data[0]]
        rs = _fixed_point_candidates(gr, probe.data[1]) or [probe.data[1]]
        for lp in ls:
            for rp in rs:
                out.append(Point(space, (lp, rp)))
    elif kind == "glued_map":
        for i, per in enumerate(space.gluing.anchors):
            for a in per:
                out.append(Point(space, (i, a)))
    return out


def _verify_axis(g: Isometry, x: Point, tau: float, tol: float = FIX_TOL
                 ) -> Optional[dict]:
    """Check that the geodesic through x and gx is translated by tau; the
    verified axis (as a geodesic spec) or None."""
    space = g.space
    gx = g.apply(x, 1)
    try:
        geo = space.geodesic_extended(x, gx, pad=2.0 * tau + 1.0)
    except SpaceDomainError:
        return None
    a, b = geo.domain
    for t in np.linspace(max(a, -1.5 * tau), min(b, 2.0 * tau), 7):
        t = float(t)
        if t + tau > b or t < a:
            continue
        err = space.distance(geo.point_at(t + tau), g.apply(geo.point_at(t), 1))
        if err > tol * max(1.0, tau):
            return None
    return {"geodesic": geo.spec}


def classify_in_X(g: Isometry, probes: Sequence[Point], n_max: int = 64
                  ) -> ClassificationX:
    """Elliptic / hyperbolic / parabolic verdict in the base space.

    Elliptic needs a fixed point (displacement <= 1e-6 after halving
    refinement). Hyperbolic needs a probe attaining the growth estimate of
    tau with a verified axis. Parabolic is reported when the displacement
    infimum over the refined probe family stays strictly above tau; by
    nature a numerical verdict.
    """
    if not probes:
        raise ValueError("need at least one probe point")
    space = g.space
    te = translation_length(g, probes[0], max(n_max, 8), metric="base")
    tau_hat = max(0.0, te.tau_limit)
    best, best_disp, trace = None, math.inf, []
    for p in probes:
        cand, d, tr = _halving_refinement(g, p)
        if d < best_disp:
            best, best_disp, trace = cand, d, tr
    for p in _fixed_point_candidates(g, probes[0]):
        d = space.distance(p, g.apply(p, 1))
        if d < best_disp:
            best, best_disp = p, d
    if best_disp > FIX_TOL:
        center = _orbit_circumcenter(g, probes[0], max(n_max, 8))
        if center is not None and center[1] < best_disp:
            best, best_disp = center
    evidence = {"tau_upper": te.tau_upper, "tau_limit": te.tau_limit,
                "min_displacement": best_disp,
                "refinement_trace_tail": [round(v, 9) for v in trace[-5:]]}
    if best_disp <= FIX_TOL:
        return ClassificationX("elliptic", "certified", 0.0,
                               {"fixed_point": point_to_raw(best)}, evidence)
    if abs(best_disp - tau_hat) <= FIX_TOL * max(1.0, tau_hat):
        axis = _verify_axis(g, best, best_disp)
        if axis is not None:
            return ClassificationX("hyperbolic", "certified", best_disp,
                                   {"axis": axis,
                                    "axis_point": point_to_raw(best)}, evidence)
    evidence["displacement_gap"] = best_disp - tau_hat
    return ClassificationX("parabolic", "numerical", tau_hat, None, evidence)


# ---------------------------------------------------------------------------
# classification in the curtain model
# ---------------------------------------------------------------------------

@dataclass
class ClassificationModel:
    verdict: str                     # elliptic | parabolic | loxodromic
    tau_interval: tuple
    certified: bool = False
    low_confidence: bool = False
    evidence: dict = field(default_factory=dict)

    def to_row(self):
        return {"verdict": self.verdict,
                "tau_lower": self.tau_interval[0],
                "tau_upper": self.tau_interval[1],
                "certified": self.certified,
                "low_confidence": self.low_confidence,
                "evidence": self.evidence}


def classify_in_model(g: Isometry, x: Point,
                      w: WeightSequence = WeightSequence(),
                      n_max: int = 64, truncation: int = 24,
                      budget: SearchBudget = DEFAULT_BUDGET
                      ) -> ClassificationModel:
    """Loxodromic / elliptic / parabolic verdict in the curtain model."""
    space = g.space
    te = translation_length(g, x, n_max, metric="model", w=w,
                            truncation=truncation, budget=budget)
    ns = te.n_values
    lows = {n: D_estimate(x, g.apply(x, n), w, truncation, budget).lower
            for n in ns}
    evidence = {"tau_D": te.to_row(), "lower_growth": {str(n): lows[n] for n in ns}}
    # loxodromic: certified concatenation bound, else persistent fitted growth
    if te.tau_lower > 0.0:
        return ClassificationModel("loxodromic", te.interval, True,
                                   evidence=evidence)
    n3, n2, n1 = ns[-1], ns[-2], ns[-3] if len(ns) >= 3 else ns[0]
    c_last = (lows[n3] - lows[n2]) / (n3 - n2) if n3 > n2 else 0.0
    c_prev = (lows[n2] - lows[n1]) / (n2 - n1) if n2 > n1 else c_last
    evidence["fitted_growth"] = {"c_last": c_last, "c_prev": c_prev}
    if c_last > 0.05 and c_prev > 0.0 and c_last >= 0.6 * c_prev:
        return ClassificationModel("loxodromic", (0.0, te.tau_upper), False,
                                   evidence=evidence)
    # elliptic: elliptic in X, or a backend cap bounds the whole orbit
    fixed, fd, _ = _halving_refinement(g, x)
    for p in _fixed_point_candidates(g, x):
        d = space.distance(p, g.apply(p, 1))
        if d < fd:
            fixed, fd = p, d
    if fd > FIX_TOL:
        center = _orbit_circumcenter(g, x, n_max)
        if center is not None and center[1] < fd:
            fixed, fd = center
    if fd <= FIX_TOL:
        evidence["elliptic_reason"] = "elliptic_in_X"
        return ClassificationModel("elliptic", (0.0, 0.0), True,
                                   evidence=evidence)
    cap = analytic_cap(x, g.apply(x, 1),
                       space.distance(x, g.apply(x, 1)))
    if cap is not None:
        bound = cap.a * w.first_moment + cap.b
        evidence["elliptic_reason"] = f"{cap.method}: orbit D-diameter <= {bound}"
        return ClassificationModel("elliptic", (0.0, 0.0), True,
                                   evidence=evidence)
    # parabolic: tau_D interval contains 0; orbit unbounded in D
    unbounded = lows[ns[-1]] > lows[ns[0]] + 0.5
    if space.intrinsically_hyperbolic:
        base = space.distance(x, g.apply(x, ns[-1]))
        prev = space.distance(x, g.apply(x, ns[-2]))
        if base > prev + 1e-6:
            evidence["parabolic_reason"] = \
                "hyperbolic backend: unbounded X-orbit transfers to D"
            return ClassificationModel("parabolic", te.interval, False,
                                       low_confidence=False,
                                       evidence=evidence)
    return ClassificationModel("parabolic", te.interval, False,
                               low_confidence=not unbounded,
                               evidence=evidence)


# ---------------------------------------------------------------------------
# contraction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BallSampleSpec:
    radii: tuple = (1.0, 2.0, 4.0, 8.0, 16.0)
    centers_per_radius: int = 32
    points_per_ball: int = 48
    seed: int = 7


@dataclass
class ContractionReport:
    c_estimate: float
    unbounded: bool
    witness: Optional[dict] = None
    per_radius: dict = field(default_factory=dict)
    skipped: int = 0
    seed: int = 0

    def to_row(self):
        return {"c_estimate": None if self.unbounded else self.c_estimate,
                "unbounded": self.unbounded, "witness": self.witness,
                "per_radius": {str(k): v for k, v in self.per_radius.items()},
                "skipped": self.skipped, "seed": self.seed}


def contraction_constant(a_points: Sequence[Point],
                         spec: BallSampleSpec = BallSampleSpec()
                         ) -> ContractionReport:
    """Largest closest-point-projection diameter of sampled balls disjoint
    from the set A; flagged Unbounded when the diameter keeps growing
    proportionally to the radius (flat behavior)."""
    if len(a_points) < 2:
        raise ValueError("A needs at least 2 points")
    space = a_points[0].space
    rng = np.random.default_rng(spec.seed)
    spread = max(space.distance(a_points[0], p) for p in a_points[1:])
    report = ContractionReport(0.0, False, seed=spec.seed)

    def hugging_center(radius):
        # ball center just beyond the disjointness margin, reached by
        # walking away from a random point of A (the adversarial regime)
        base = a_points[int(rng.integers(0, len(a_points)))]
        target = space.sample_point(rng, scale=max(3.0, 2.0 * radius))
        reach = radius * (1.02 + 0.3 * rng.uniform())
        try:
            geo = space.geodesic_extended(base, target, pad=reach)
            if geo.domain[1] <= reach:
                return None
            return geo.point_at(reach)
        except SpaceDomainError:
            return None

    for radius in spec.radii:
        worst = 0.0
        made = 0
        attempts = 0
        while made < spec.centers_per_radius and attempts < 30 * spec.centers_per_radius:
            attempts += 1
            if made % 2 == 0:
                center = hugging_center(radius)
                if center is None:
                    report.skipped += 1
                    continue
            else:
                center = space.sample_point(rng, scale=max(3.0, spread / 2.0,
                                                           2.0 * radius))
            dists = space.distance_many(center, list(a_points))
            if float(np.min(dists)) <= radius + 1e-6:
                report.skipped += 1
                continue
            made += 1
            pts = space.sample_in_ball(center, radius * 0.98,
                                       spec.points_per_ball, rng)
            proj = []
            for p in pts:
                dd = space.distance_many(p, list(a_points))
                proj.append(a_points[int(np.argmin(dd))])
            diam = 0.0
            for i in range(len(proj)):
                for j in range(i + 1, len(proj)):
                    diam = max(diam, space.distance(proj[i], proj[j]))
            if diam > worst:
                worst = diam
                if diam > report.c_estimate:
                    report.c_estimate = diam
                    report.witness = {"center": point_to_raw(center),
                                      "radius": radius, "diameter": diam}
        report.per_radius[radius] = worst
    radii = sorted(report.per_radius)
    if len(radii) >= 2:
        last, prev = radii[-1], radii[-2]
        growing = report.per_radius[last] > report.per_radius[prev] + 0.25 * (last - prev)
        if growing and report.per_radius[last] >= 0.6 * last:
            report.unbounded = True
    return report


def contraction_from_chain(alpha: Geodesic, c: Chain,
                           window: tuple) -> tuple:
    """Contraction bound from chain-meeting frequency: when the geodesic
    meets every curtain of an L-chain with consecutive meeting parameters
    at most T apart (T clamped to >= 1), it is 16 T (L+4)-contracting."""
    if c.grade == "plain":
        raise ChainError("contraction_from_chain needs an L-chain")
    L = int(c.grade)
    lo, hi = window
    grid = np.linspace(lo, hi, 512)
    meets = []
    misses = []
    for idx, h in enumerate(c.curtains):
        ts = [float(t) for t in grid if side_of(h, alpha.point_at(float(t))) is Side.ON]
        if not ts:
            misses.append(idx)
        else:
            meets.append(0.5 * (min(ts) + max(ts)))
    if misses:
        raise ChainError(f"geodesic misses curtains {misses} in the window")
    meets.sort()
    gaps = [b - a for a, b in zip(meets, meets[1:])]
    t_freq = max(1.0, max(gaps) if gaps else 1.0)
    return t_freq, 16.0 * t_freq * (L + 4)


@dataclass
class ContractingEvidence:
    is_contracting: bool
    qi_ok: bool
    contraction: Optional[ContractionReport]
    fitted: dict = field(default_factory=dict)

    def to_row(self):
        return {"is_contracting": self.is_contracting, "qi_ok": self.qi_ok,
                "contraction": None if self.contraction is None
                else self.contraction.to_row(),
                "fitted": self.fitted}


def contracting_isometry_test(g: Isometry, x: Point, n_max: int = 64,
                              spec: BallSampleSpec = BallSampleSpec()
                              ) -> ContractingEvidence:
    """Whether n -> g^n x is a quasi-isometric embedding with a contracting
    image: linear growth persistence for the embedding and a finite
    projection-diameter estimate for the orbit."""
    space = g.space
    ns = _schedule(n_max)
    a = {n: space.distance(x, g.apply(x, n)) for n in ns}
    n3, n2 = ns[-1], ns[-2]
    n1 = ns[-3] if len(ns) >= 3 else ns[0]
    c_last = (a[n3] - a[n2]) / (n3 - n2) if n3 > n2 else 0.0
    c_prev = (a[n2] - a[n1]) / (n2 - n1) if n2 > n1 else c_last
    qi_ok = c_last > 0.05 and c_prev > 0.0 and c_last >= 0.6 * c_prev
    fitted = {"c_last": c_last, "c_prev": c_prev,
              "a_n": {str(n): a[n] for n in ns}}
    if not qi_ok:
        return ContractingEvidence(False, False, None, fitted)
    step = max(1, n_max // 16)
    orbit = [g.apply(x, n) for n in range(-n_max, n_max + 1, step)]
    report = contraction_constant(orbit, spec)
    return ContractingEvidence(not report.unbounded, True, report, fitted)
