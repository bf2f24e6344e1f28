"""Scenario configs: a TOML file naming a metric, a connection source, S, T,
a sample plan, tolerances and the checks to run.

Minimal example::

    [metric]
    family = "euclidean"
    dim = 2
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import ad
from .checks import CHECKS
from .connection import ConnectionSource, SkewSymmetryError, TorsionField
from .expr import ExprError
from .metric import ChartPoint, DegenerateMetricError, MetricSpec, check_homogeneity
from .tolerance import ATOL, RTOL

DEFAULT_COUNT = 200
DEFAULT_X_BOX = (-1.0, 1.0)
DEFAULT_FIBER = (0.1, 10.0)
HOMOGENEITY_WARN = 1e-8
_TOP_KEYS = {"metric", "connection", "torsion", "samples", "tolerances", "checks"}


class ScenarioError(ValueError):
    """Malformed or invalid config; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


@dataclass(frozen=True)
class SamplePlan:
    count: int = DEFAULT_COUNT
    seed: int = 0
    x_box: tuple[float, float] = DEFAULT_X_BOX
    fiber_radius: tuple[float, float] = DEFAULT_FIBER

    def __post_init__(self):
        if self.count < 1:
            raise ScenarioError("samples.count", "must be at least 1")
        if self.seed < 0:
            raise ScenarioError("samples.seed", "must be non-negative")
        lo, hi = self.x_box
        if not lo <= hi:
            raise ScenarioError("samples.x_box", "needs lower <= upper")
        rlo, rhi = self.fiber_radius
        if not 0 < rlo <= rhi:
            raise ScenarioError("samples.fiber_radius", "needs 0 < lower <= upper")

    def points(self, dim: int) -> list[ChartPoint]:
        """Sample points; x uniform in the box, y with a log-uniform radius."""
        rng = np.random.Generator(np.random.PCG64(self.seed))
        lo, hi = self.x_box
        rlo, rhi = self.fiber_radius
        out = []
        for _ in range(self.count):
            x = rng.uniform(lo, hi, size=dim)
            u = rng.normal(size=dim)
            u /= np.linalg.norm(u)
            r = math.exp(rng.uniform(math.log(rlo), math.log(rhi)))
            out.append(ChartPoint(x, r * u))
        return out


@dataclass(frozen=True)
class Scenario:
    metric: MetricSpec
    connection: ConnectionSource = field(default_factory=ConnectionSource)
    S: TorsionField | None = None
    T: TorsionField | None = None
    samples: SamplePlan = field(default_factory=SamplePlan)
    atol: float = ATOL
    rtol: float = RTOL
    checks: tuple[str, ...] = tuple(CHECKS)
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        m = self.metric.dim
        if self.S is None:
            object.__setattr__(self, "S", TorsionField.zero("S", m))
        if self.T is None:
            object.__setattr__(self, "T", TorsionField.zero("T", m))
        for name in ("atol", "rtol"):
            if not getattr(self, name) > 0:
                raise ScenarioError(f"tolerances.{name}", "must be positive")
        unknown = [c for c in self.checks if c not in CHECKS]
        if unknown:
            raise ScenarioError("checks", f"unknown check {unknown[0]!r}")
        if not self.checks:
            raise ScenarioError("checks", "no checks selected")

    def with_overrides(self, *, seed=None, count=None, atol=None, rtol=None,
                       only=None) -> "Scenario":
        plan = self.samples
        if seed is not None:
            plan = replace(plan, seed=seed)
        if count is not None:
            plan = replace(plan, count=count)
        return replace(self, samples=plan,
                       atol=self.atol if atol is None else atol,
                       rtol=self.rtol if rtol is None else rtol,
                       checks=self.checks if only is None else tuple(only))


def _pair(value, name: str) -> tuple[float, float]:
    if (not isinstance(value, (list, tuple)) or len(value) != 2
            or not all(isinstance(v, (int, float)) for v in value)):
        raise ScenarioError(name, "expected a pair of numbers")
    return float(value[0]), float(value[1])


def _torsion(value, name: str, dim: int) -> TorsionField:
    if isinstance(value, Mapping):
        extra = set(value) - {"random", "seed"}
        if extra or "random" not in value:
            raise ScenarioError(f"torsion.{name}", "table form is {random = scale, seed = n}")
        rng = np.random.Generator(np.random.PCG64(int(value.get("seed", 0))))
        return TorsionField.random(name, dim, float(value["random"]), rng)
    arr = np.asarray(value, dtype=object)
    if arr.shape != (dim, dim, dim):
        raise ScenarioError(f"torsion.{name}", f"expected shape ({dim}, {dim}, {dim}), got {arr.shape}")
    if all(isinstance(v, (int, float)) for v in arr.ravel()):
        arr = arr.astype(float)
    try:
        return TorsionField(name, arr, dim)
    except (SkewSymmetryError, ExprError) as exc:
        raise ScenarioError(f"torsion.{name}", str(exc)) from exc


def scenario_from_config(cfg: Mapping) -> Scenario:
    """Build and validate a Scenario from a parsed config tree."""
    extra = set(cfg) - _TOP_KEYS
    if extra:
        raise ScenarioError(sorted(extra)[0], "unknown top-level key")
    if "metric" not in cfg:
        raise ScenarioError("metric", "section is required")
    field_name = "metric"
    try:
        metric = MetricSpec.from_config(cfg["metric"])
        m = metric.dim
        field_name = "connection"
        conn = ConnectionSource.from_config(cfg.get("connection", {}), m)
        tors = cfg.get("torsion", {})
        field_name = "torsion"
        extra = set(tors) - {"S", "T"}
        if extra:
            raise ScenarioError(f"torsion.{sorted(extra)[0]}", "unknown key")
        S = _torsion(tors["S"], "S", m) if "S" in tors else None
        T = _torsion(tors["T"], "T", m) if "T" in tors else None
        field_name = "samples"
        s = dict(cfg.get("samples", {}))
        extra = set(s) - {"count", "seed", "x_box", "fiber_radius"}
        if extra:
            raise ScenarioError(f"samples.{sorted(extra)[0]}", "unknown key")
        plan = SamplePlan(
            count=int(s.get("count", DEFAULT_COUNT)),
            seed=int(s.get("seed", 0)),
            x_box=_pair(s.get("x_box", DEFAULT_X_BOX), "samples.x_box"),
            fiber_radius=_pair(s.get("fiber_radius", DEFAULT_FIBER), "samples.fiber_radius"),
        )
        field_name = "tolerances"
        t = cfg.get("tolerances", {})
        extra = set(t) - {"atol", "rtol"}
        if extra:
            raise ScenarioError(f"tolerances.{sorted(extra)[0]}", "unknown key")
        checks = cfg.get("checks", list(CHECKS))
        if not isinstance(checks, list) or not all(isinstance(c, str) for c in checks):
            raise ScenarioError("checks", "expected a list of check names")
        scenario = Scenario(metric, conn, S, T, plan,
                            float(t.get("atol", ATOL)), float(t.get("rtol", RTOL)),
                            tuple(checks))
    except ScenarioError:
        raise
    except ExprError as exc:
        raise ScenarioError(field_name, f"expression error: {exc}") from exc
    except (SkewSymmetryError, DegenerateMetricError) as exc:
        raise ScenarioError(field_name, str(exc)) from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(field_name, str(exc)) from exc
    return replace(scenario, warnings=_homogeneity_warnings(scenario))


def _homogeneity_warnings(s: Scenario, probes: int = 3) -> tuple[str, ...]:
    """Flag an energy that fails the y-scaling test at the first sample points."""
    worst = 0.0
    for p in s.samples.points(s.metric.dim)[:probes]:
        try:
            worst = max(worst, *check_homogeneity(s.metric, p).relative())
        except (ad.DomainError, DegenerateMetricError, ZeroDivisionError):
            continue
    if worst > HOMOGENEITY_WARN:
        return (f"metric energy is not positively 2-homogeneous in y "
                f"(relative scaling residual {worst:.3g})",)
    return ()


def parse_scenario(text: str) -> Scenario:
    """Parse TOML config text."""
    try:
        cfg = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError("", f"config parse error: {exc}") from exc
    return scenario_from_config(cfg)


def load_scenario(source: str | Path) -> Scenario:
    """Load a scenario from a file path, or from inline TOML text.

    A ``str`` containing a newline or ``=`` is treated as inline text.
    """
    if isinstance(source, str) and ("\n" in source or "=" in source):
        return parse_scenario(source)
    path = Path(source)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError("", f"cannot read {path}: {exc.strerror}") from exc
    return parse_scenario(text)
