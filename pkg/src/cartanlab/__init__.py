"""Numerical checks for metric almost-complex connections on pseudo-Finsler manifolds.

Everything is computed per chart at sampled points (x, y) with y != 0,
using truncated Taylor jets for the derivatives of the energy F*.
"""
from .ad import DomainError, Jet, seed
from .connection import (ConnectionData, ConnectionSource, SkewSymmetryError,
                         TorsionField, apply_D, connection_data, torsion_components,
                         torsion_from_D)
from .expr import ExprError, parse
from .kahler import dPhi_components, kahler_residuals, nijenhuis
from .metric import ChartPoint, DegenerateMetricError, MetricSpec, fundamental_tensor
from .report import CheckReport, emit_report, run_checks
from .scenario import Scenario, ScenarioError, load_scenario

__version__ = "0.1.0"

__all__ = [
    "ChartPoint", "CheckReport", "ConnectionData", "ConnectionSource",
    "DegenerateMetricError", "DomainError", "ExprError", "Jet", "MetricSpec",
    "Scenario", "ScenarioError", "SkewSymmetryError", "TorsionField", "apply_D",
    "connection_data", "dPhi_components", "emit_report", "fundamental_tensor",
    "kahler_residuals", "load_scenario", "nijenhuis", "parse", "run_checks", "seed",
    "torsion_components", "torsion_from_D",
]
