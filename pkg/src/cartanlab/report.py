"""Run a scenario's checks over its sample points and render the outcome."""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import ad
from .checks import CHECKS, PointContext
from .connection import SkewSymmetryError
from .metric import ChartPoint, DegenerateMetricError
from .scenario import Scenario

SCHEMA = "cartanlab.report/1"
POINT_ERRORS = (ad.DomainError, DegenerateMetricError, SkewSymmetryError,
                ZeroDivisionError, np.linalg.LinAlgError)


@dataclass
class CheckResult:
    name: str
    points_evaluated: int = 0
    max_residual: float = 0.0
    max_excess: float = 0.0
    worst_index: int | None = None

    def passed(self) -> bool:
        return self.points_evaluated > 0 and self.max_excess <= 1.0


@dataclass(frozen=True)
class PointError:
    index: int
    check: str | None
    message: str


@dataclass
class CheckReport:
    scenario: Scenario
    points: list[ChartPoint]
    results: list[CheckResult]
    errors: list[PointError] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed() for r in self.results)

    def result(self, name: str) -> CheckResult:
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_dict(self) -> dict:
        s = self.scenario

        def point(i):
            if i is None:
                return None
            p = self.points[i]
            return {"index": i, "x": [float(v) for v in p.x], "y": [float(v) for v in p.y]}

        return {
            "schema": SCHEMA,
            "environment": {
                "dimension": s.metric.dim,
                "metric_family": s.metric.family,
                "connection": s.connection.kind,
                "seed": s.samples.seed,
                "samples": s.samples.count,
                "atol": s.atol,
                "rtol": s.rtol,
            },
            "checks": [{
                "name": r.name,
                "points_evaluated": r.points_evaluated,
                "max_residual": r.max_residual,
                "max_excess": r.max_excess,
                "worst_point": point(r.worst_index),
                "passed": r.passed(),
            } for r in self.results],
            "point_errors": [{"index": e.index, "check": e.check, "message": e.message}
                             for e in self.errors],
            "warnings": list(s.warnings),
            "passed": self.passed,
        }


def _run_point(s: Scenario, index: int, p: ChartPoint):
    """Outcomes for one point: {check: (max_abs, excess)} plus point errors."""
    rng = np.random.Generator(np.random.PCG64([s.samples.seed, index]))
    ctx = PointContext(s.metric, p, s.connection, s.S, s.T, rng)
    try:
        s.S.validate_at(p)
        s.T.validate_at(p)
        ctx.data  # noqa: B018 (shared setup; failure aborts the whole point)
    except POINT_ERRORS as exc:
        return {}, [PointError(index, None, str(exc))]
    out, errors = {}, []
    for name in s.checks:
        try:
            cmp = CHECKS[name](ctx)
        except POINT_ERRORS as exc:
            errors.append(PointError(index, name, str(exc)))
            continue
        resid, excess = cmp.max_abs, cmp.excess(s.atol, s.rtol)
        if not (np.isfinite(resid) and np.isfinite(excess)):
            errors.append(PointError(index, name, "non-finite residual"))
            continue
        out[name] = (resid, excess)
    return out, errors


def run_checks(s: Scenario, workers: int = 1) -> CheckReport:
    """Evaluate every selected check at every sample point.

    Each point draws its random probes from its own generator keyed by
    (seed, index), so ``workers`` never changes the report.
    """
    points = s.samples.points(s.metric.dim)
    jobs = [(s, i, p) for i, p in enumerate(points)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            outcomes = list(pool.map(lambda a: _run_point(*a), jobs))
    else:
        outcomes = [_run_point(*a) for a in jobs]
    results = {name: CheckResult(name) for name in s.checks}
    errors: list[PointError] = []
    for index, (values, errs) in enumerate(outcomes):
        errors.extend(errs)
        for name, (resid, excess) in values.items():
            r = results[name]
            r.points_evaluated += 1
            r.max_residual = max(r.max_residual, resid)
            if r.worst_index is None or excess > r.max_excess:
                r.max_excess, r.worst_index = excess, index
    return CheckReport(s, points, [results[n] for n in s.checks], errors)


def _text(r: CheckReport) -> str:
    s = r.scenario
    lines = [f"cartanlab report: family={s.metric.family} dim={s.metric.dim} "
             f"connection={s.connection.kind} seed={s.samples.seed} "
             f"samples={s.samples.count} atol={s.atol:g} rtol={s.rtol:g}"]
    width = max(len(c.name) for c in r.results)
    lines.append(f"{'check':<{width}}  {'points':>6}  {'max_residual':>12}  "
                 f"{'excess':>10}  {'worst':>5}  status")
    for c in r.results:
        worst = "-" if c.worst_index is None else str(c.worst_index)
        lines.append(f"{c.name:<{width}}  {c.points_evaluated:>6}  {c.max_residual:>12.3e}  "
                     f"{c.max_excess:>10.3g}  {worst:>5}  {'PASS' if c.passed() else 'FAIL'}")
    for w in s.warnings:
        lines.append(f"warning: {w}")
    for e in r.errors:
        where = f" [{e.check}]" if e.check else ""
        lines.append(f"point {e.index}{where}: {e.message}")
    failed = sum(not c.passed() for c in r.results)
    lines.append("overall: PASS" if not failed
                 else f"overall: FAIL ({failed} of {len(r.results)} checks failed)")
    return "\n".join(lines) + "\n"


def emit_report(r: CheckReport, fmt: str = "json") -> bytes:
    """Serialize a report; JSON output is byte-stable for a given scenario."""
    if fmt == "json":
        return (json.dumps(r.to_dict(), indent=2, allow_nan=False) + "\n").encode()
    if fmt == "text":
        return _text(r).encode()
    raise ValueError(f"unknown report format {fmt!r}")
