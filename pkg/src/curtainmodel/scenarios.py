"""Scenario runner: reproducible experiments over the library surface.

A scenario is a JSON document naming a space, its isometries, points, and
a task list; running it produces a deterministic machine-readable report
(same scenario, same seed -> byte-identical report body). Failures of
paper-theorem checks are recorded as falsification events: they poison the
run's pass status but do not stop execution.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

import numpy as np

from . import __version__
from .curtains import FalsificationEvent, dual_chain
from .dynamics import (BallSampleSpec, classify_in_X, classify_in_model,
                       contracting_isometry_test, contraction_constant,
                       translation_length)
from .metrics import (D_estimate, SearchBudget, WeightSequence, d_infinity,
                      d_L_bounds, four_point_delta, rough_geodesic_defects,
                      weights_from_spec)
from .spaces import (AnnulusCover, Glued, Isometry, Point, Space,
                     SpaceDomainError, point_from_spec, point_to_raw,
                     space_from_spec)

TASK_KINDS = ("dist", "d_inf", "d_L", "D", "classify", "translation",
              "contraction", "delta", "defects", "gluing_sandwich")


class ScenarioError(ValueError):
    """The scenario document violates the schema; the message carries the
    offending field path."""


@dataclass
class Report:
    scenario: dict
    rows: list = field(default_factory=list)
    falsifications: list = field(default_factory=list)
    versions: dict = field(default_factory=dict)
    budgets: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.falsifications

    def to_json(self) -> str:
        body = {"scenario": self.scenario, "rows": self.rows,
                "falsifications": self.falsifications,
                "versions": self.versions, "budgets": self.budgets}
        return json.dumps(body, sort_keys=True, indent=2)

    def to_csv(self) -> str:
        keys = []
        for r in self.rows:
            for k in r:
                if k not in keys:
                    keys.append(k)
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=keys, extrasaction="ignore")
        writer.writeheader()
        for r in self.rows:
            writer.writerow({k: json.dumps(v, sort_keys=True)
                             if isinstance(v, (dict, list)) else v
                             for k, v in r.items()})
        return buf.getvalue()


# ---------------------------------------------------------------------------
# schema checking (field-path errors)
# ---------------------------------------------------------------------------

def _require(cond, path, msg):
    if not cond:
        raise ScenarioError(f"{path}: {msg}")


def validate_scenario(doc: dict):
    _require(isinstance(doc, dict), "$", "scenario must be an object")
    _require(isinstance(doc.get("name"), str), "$.name", "missing string name")
    _require(isinstance(doc.get("seed"), int), "$.seed", "seed is mandatory")
    _require(isinstance(doc.get("space"), dict), "$.space", "missing space spec")
    isos = doc.get("isometries", [])
    _require(isinstance(isos, list), "$.isometries", "must be a list")
    names = set()
    for i, item in enumerate(isos):
        _require(isinstance(item, dict) and "name" in item and "action" in item,
                 f"$.isometries[{i}]", "needs name and action")
        names.add(item["name"])
    pts = doc.get("points", {})
    _require(isinstance(pts, dict), "$.points", "must be an object")
    tasks = doc.get("tasks", [])
    _require(isinstance(tasks, list), "$.tasks", "must be a list")
    for i, t in enumerate(tasks):
        _require(isinstance(t, dict), f"$.tasks[{i}]", "must be an object")
        _require(t.get("kind") in TASK_KINDS, f"$.tasks[{i}].kind",
                 f"unknown task kind {t.get('kind')!r}")
        iso = t.get("isometry")
        if iso is not None:
            _require(iso in names, f"$.tasks[{i}].isometry",
                     f"undeclared isometry {iso!r}")
        for key in ("base",):
            p = t.get(key)
            if isinstance(p, str):
                _require(p in pts, f"$.tasks[{i}].{key}",
                         f"undeclared point {p!r}")


# ---------------------------------------------------------------------------
# resolution helpers
# ---------------------------------------------------------------------------

def _budget_from(doc, scale: int = 1) -> SearchBudget:
    doc = doc or {}
    fam_up = bool(doc.get("family_upper", scale >= 2))
    return SearchBudget(
        certified_chains=bool(doc.get("certified_chains", scale >= 1)),
        family_upper=fam_up,
        family_step=float(doc.get("family_step", 0.5)),
        enrich=bool(doc.get("enrich", True)),
        max_candidates=int(doc.get("max_candidates", 120 * max(scale, 1))))


def _resolve_point(space, named, raw_or_name):
    if isinstance(raw_or_name, str):
        if raw_or_name not in named:
            raise ScenarioError(f"unknown point name {raw_or_name!r}")
        return named[raw_or_name]
    return point_from_spec(space, raw_or_name)


def _sample_pairs(space, spec, rng, named):
    if isinstance(spec, list):
        out = []
        for i, pair in enumerate(spec):
            _require(isinstance(pair, (list, tuple)) and len(pair) == 2,
                     f"pairs[{i}]", "each pair needs two entries")
            out.append((_resolve_point(space, named, pair[0]),
                        _resolve_point(space, named, pair[1])))
        return out
    count = int(spec.get("sample", 20))
    scale = float(spec.get("scale", 3.0))
    min_d = float(spec.get("min_distance", 0.0))
    out = []
    guard = 0
    while len(out) < count and guard < 100 * count:
        guard += 1
        x = space.sample_point(rng, scale)
        y = space.sample_point(rng, scale)
        if space.distance(x, y) > min_d:
            out.append((x, y))
    return out


def _pair_label(x: Point, y: Point):
    return [point_to_raw(x), point_to_raw(y)]


# ---------------------------------------------------------------------------
# task implementations
# ---------------------------------------------------------------------------

def _task_dist(ctx, t, rng):
    for x, y in _sample_pairs(ctx["space"], t.get("pairs", {"sample": 10}),
                              rng, ctx["points"]):
        ctx["rows"].append({"kind": "dist", "pair": _pair_label(x, y),
                            "value": ctx["space"].distance(x, y)})


def _task_d_inf(ctx, t, rng):
    cross = bool(t.get("cross_check", True))
    for x, y in _sample_pairs(ctx["space"], t.get("pairs", {"sample": 10}),
                              rng, ctx["points"]):
        try:
            val = d_infinity(x, y, cross_check=cross)
        except FalsificationEvent as e:
            ctx["fals"].append({"task": "d_inf", "detail": str(e)})
            val = d_infinity(x, y, cross_check=False)
        ctx["rows"].append({"kind": "d_inf", "pair": _pair_label(x, y),
                            "value": val,
                            "distance": ctx["space"].distance(x, y)})


def _task_d_L(ctx, t, rng):
    budget = _budget_from(t.get("budget"), ctx["budget_scale"])
    levels = t.get("levels", [1, 2, 4, 8])
    for x, y in _sample_pairs(ctx["space"], t.get("pairs", {"sample": 5}),
                              rng, ctx["points"]):
        for L in levels:
            est = d_L_bounds(x, y, int(L), budget)
            ctx["rows"].append(
                {"kind": "d_L", "pair": _pair_label(x, y), "L": int(L),
                 "lower": est.lower, "upper": est.upper,
                 "method": f"{est.lower_method}/{est.upper_method}",
                 "budget": budget.max_candidates})


def _task_D(ctx, t, rng):
    budget = _budget_from(t.get("budget"), ctx["budget_scale"])
    trunc = int(t.get("truncation", ctx["truncation"]))
    for x, y in _sample_pairs(ctx["space"], t.get("pairs", {"sample": 5}),
                              rng, ctx["points"]):
        est = D_estimate(x, y, ctx["weights"], trunc, budget)
        ctx["rows"].append(
            {"kind": "D", "pair": _pair_label(x, y), "L": "D",
             "lower": est.lower, "upper": est.upper,
             "method": f"{est.lower_method}/{est.upper_method}",
             "budget": budget.max_candidates})


def _probes_for(ctx, t, rng, base):
    space = ctx["space"]
    spec = t.get("probes", {})
    out = [base]
    for name in spec.get("named", []):
        out.append(_resolve_point(space, ctx["points"], name))
    for _ in range(int(spec.get("sample", 4))):
        out.append(space.sample_point(rng, float(spec.get("scale", 3.0))))
    k = int(spec.get("boundary_approach", 0))
    if k and isinstance(space, AnnulusCover):
        th0 = base.data[0]
        for j in range(k):
            r = 1.0 + 2.0 ** (-j)
            out.append(Point(space, (th0, r)))
        if space.complete:
            out.append(Point(space, (th0, 1.0)))
    return out


def _task_classify(ctx, t, rng):
    g = ctx["isometries"][t["isometry"]]
    base = _resolve_point(ctx["space"], ctx["points"], t.get("base", "x0"))
    n_max = int(t.get("n_max", 64))
    budget = _budget_from(t.get("budget"), ctx["budget_scale"])
    probes = _probes_for(ctx, t, rng, base)
    cx = classify_in_X(g, probes, n_max)
    cm = classify_in_model(g, base, ctx["weights"], n_max,
                           ctx["truncation"], budget)
    ball = BallSampleSpec(seed=int(t.get("seed", ctx["seed"])),
                          centers_per_radius=int(t.get("centers", 12)),
                          points_per_ball=int(t.get("ball_points", 24)))
    ce = contracting_isometry_test(g, base, n_max, ball)
    agree = (cm.verdict == "loxodromic") == ce.is_contracting
    if not agree:
        ctx["fals"].append(
            {"task": "classify", "isometry": g.name,
             "detail": "loxodromic/contracting equivalence violated",
             "model": cm.verdict, "contracting": ce.is_contracting})
    ctx["rows"].append(
        {"kind": "classify", "isometry": g.name,
         "verdict_X": cx.to_row(), "verdict_model": cm.to_row(),
         "contracting": ce.to_row(), "equivalence_ok": agree,
         "seed": ball.seed, "budget": budget.max_candidates})


def _task_translation(ctx, t, rng):
    g = ctx["isometries"][t["isometry"]]
    base = _resolve_point(ctx["space"], ctx["points"], t.get("base", "x0"))
    metric = t.get("metric", "base")
    budget = _budget_from(t.get("budget"), ctx["budget_scale"])
    te = translation_length(g, base, int(t.get("n_max", 64)), metric,
                            ctx["weights"], ctx["truncation"], budget)
    ctx["rows"].append({"kind": "translation", "isometry": g.name,
                        "estimate": te.to_row()})


def _task_contraction(ctx, t, rng):
    space = ctx["space"]
    target = t.get("target", {})
    if "isometry" in target:
        g = ctx["isometries"][target["isometry"]]
        base = _resolve_point(space, ctx["points"], target.get("base", "x0"))
        n = int(target.get("n_max", 32))
        step = max(1, n // 16)
        pts = [g.apply(base, k) for k in range(-n, n + 1, step)]
        label = {"orbit": g.name}
    elif target.get("geodesic") == "boundary_lift":
        span = float(target.get("span", 60.0))
        lift = space.boundary_lift((-span, span))
        pts = [lift.point_at(float(u))
               for u in np.arange(-span, span, float(target.get("step", 0.02)))]
        label = {"geodesic": "boundary_lift"}
    else:
        a = _resolve_point(space, ctx["points"], target["segment"][0])
        b = _resolve_point(space, ctx["points"], target["segment"][1])
        geo = space.geodesic(a, b)
        pts = [geo.point_at(float(u))
               for u in np.linspace(0.0, geo.length, 201)]
        label = {"segment": _pair_label(a, b)}
    spec = BallSampleSpec(
        radii=tuple(t.get("radii", (1.0, 2.0, 4.0, 8.0, 16.0))),
        centers_per_radius=int(t.get("centers", 32)),
        points_per_ball=int(t.get("ball_points", 48)),
        seed=int(t.get("seed", ctx["seed"])))
    rep = contraction_constant(pts, spec)
    ctx["rows"].append({"kind": "contraction", "target": label,
                        "report": rep.to_row()})


def _task_delta(ctx, t, rng):
    space = ctx["space"]
    budget = _budget_from(t.get("budget"), ctx["budget_scale"])
    count = int(t.get("quadruples", {}).get("sample", 8))
    scale = float(t.get("quadruples", {}).get("scale", 3.0))
    quads = [tuple(space.sample_point(rng, scale) for _ in range(4))
             for _ in range(count)]
    diag = four_point_delta(quads, ctx["weights"], ctx["truncation"], budget)
    ctx["rows"].append({"kind": "delta", "delta_fit": diag.delta_fit,
                        "meta": diag.meta})


def _task_defects(ctx, t, rng):
    space = ctx["space"]
    budget = _budget_from(t.get("budget"), ctx["budget_scale"])
    levels = [int(L) for L in t.get("levels", [1, 2, 4, 8])]
    count = int(t.get("triples", {}).get("sample", 10))
    scale = float(t.get("triples", {}).get("scale", 3.0))
    triples = []
    guard = 0
    while len(triples) < count and guard < 50 * count:
        guard += 1
        x = space.sample_point(rng, scale)
        y = space.sample_point(rng, scale)
        d = space.distance(x, y)
        if d < 0.5:
            continue
        try:
            geo = space.geodesic(x, y)
        except SpaceDomainError:
            continue
        z = geo.point_at(float(rng.uniform(0.0, d)))
        triples.append((x, z, y))
    diag = rough_geodesic_defects(triples, levels, ctx["weights"],
                                  ctx["truncation"], budget)
    ctx["fals"].extend({"task": "defects", **f} for f in diag.falsifications)
    ctx["rows"].append({"kind": "defects",
                        "q_L_defects": {str(k): v for k, v
                                        in diag.q_l_defects.items()},
                        "lambda_defect": diag.lambda_defect,
                        "meta": diag.meta})


def _task_gluing_sandwich(ctx, t, rng):
    space = ctx["space"]
    if not isinstance(space, Glued):
        raise ScenarioError("gluing_sandwich needs a glued backend")
    part_idx = int(t.get("part", 0))
    part = space.parts[part_idx]
    n_const = space.gluing.n_constant
    levels = [int(L) for L in t.get("levels",
                                    list(range(n_const + 2, n_const + 9)))]
    budget = _budget_from(t.get("budget"), ctx["budget_scale"])
    count = int(t.get("pairs", {}).get("sample", 10))
    scale = float(t.get("pairs", {}).get("scale", 3.0))
    for _ in range(count):
        p = part.sample_point(rng, scale)
        q = part.sample_point(rng, scale)
        if part.distance(p, q) <= 1.2:
            continue
        x = Point(space, (part_idx, p))
        y = Point(space, (part_idx, q))
        for L in levels:
            lo_l = max(L - n_const, 1)
            e_minus = d_L_bounds(x, y, lo_l, budget)
            e_part = d_L_bounds(p, q, L, budget)
            e_plus = d_L_bounds(x, y, L + n_const, budget)
            ok_low = e_minus.lower - n_const <= e_part.upper + 1e-9
            ok_high = e_part.lower <= e_plus.upper + n_const + 1e-9
            if not (ok_low and ok_high):
                ctx["fals"].append(
                    {"task": "gluing_sandwich", "L": L,
                     "pair": _pair_label(x, y),
                     "detail": "sandwich inequality violated on intervals"})
            ctx["rows"].append(
                {"kind": "gluing_sandwich", "pair": _pair_label(x, y),
                 "L": L, "N": n_const,
                 "glued_minus": e_minus.to_row(), "part": e_part.to_row(),
                 "glued_plus": e_plus.to_row(),
                 "holds": ok_low and ok_high})


_TASKS = {"dist": _task_dist, "d_inf": _task_d_inf, "d_L": _task_d_L,
          "D": _task_D, "classify": _task_classify,
          "translation": _task_translation, "contraction": _task_contraction,
          "delta": _task_delta, "defects": _task_defects,
          "gluing_sandwich": _task_gluing_sandwich}


# ---------------------------------------------------------------------------
# runner
# ---------------------------------------------------------------------------

def run_scenario(doc, out_dir: Optional[str] = None, csv_out: bool = False,
                 seed: Optional[int] = None, budget_scale: int = 1) -> Report:
    """Execute a scenario (dict, JSON string, or file path) and return the
    Report; optionally write report.json / report.csv under out_dir."""
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError:
            with open(doc) as fh:
                doc = json.load(fh)
    validate_scenario(doc)
    space = space_from_spec(doc["space"])
    isometries = {item["name"]: Isometry(space, item["name"], item["action"])
                  for item in doc.get("isometries", [])}
    named = {name: point_from_spec(space, raw)
             for name, raw in doc.get("points", {}).items()}
    the_seed = int(seed if seed is not None else doc["seed"])
    weights = weights_from_spec(doc.get("weights"))
    ctx = {"space": space, "isometries": isometries, "points": named,
           "weights": weights, "truncation": int(doc.get("truncation", 24)),
           "seed": the_seed, "budget_scale": budget_scale,
           "rows": [], "fals": []}
    for idx, task in enumerate(doc.get("tasks", [])):
        rng = np.random.default_rng(np.random.SeedSequence(
            entropy=the_seed, spawn_key=(idx,)))
        start = len(ctx["rows"])
        try:
            _TASKS[task["kind"]](ctx, task, rng)
        except (SpaceDomainError, ScenarioError, ValueError) as e:
            ctx["rows"].append({"kind": task["kind"], "failed": True,
                                "error": str(e)})
        for row in ctx["rows"][start:]:
            row["task"] = idx
    report = Report(scenario=doc, rows=ctx["rows"],
                    falsifications=ctx["fals"],
                    versions={"curtainmodel": __version__},
                    budgets={"seed": the_seed, "budget_scale": budget_scale})
    if out_dir is not None:
        import os
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, f"{doc['name']}.report.json"), "w") as fh:
            fh.write(report.to_json())
        if csv_out:
            with open(os.path.join(out_dir, f"{doc['name']}.report.csv"), "w") as fh:
                fh.write(report.to_csv())
    return report


# ---------------------------------------------------------------------------
# bundled scenarios
# ---------------------------------------------------------------------------

def list_bundled() -> list:
    """Names of the scenario files shipped with the package."""
    root = resources.files("curtainmodel").joinpath("scenario_data")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_bundled(name: str) -> dict:
    root = resources.files("curtainmodel").joinpath("scenario_data")
    path = root.joinpath(f"{name}.json")
    if not path.is_file():
        raise ScenarioError(f"no bundled scenario named {name!r}")
    return json.loads(path.read_text())


def run_bundled(name: str, **kw) -> Report:
    return run_scenario(load_bundled(name), **kw)
