"""Pseudo-Finsler energies F*(x, y) and their fundamental tensor.

``g_ij = 1/2 d^2 F* / dy^i dy^j``.  With F* positively 2-homogeneous in y this
gives ``g_ij y^i y^j = F*``, which :func:`check_homogeneity` reports.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import ad, expr
from .ad import DomainError, Jet

FAMILIES = ("euclidean", "riemannian", "randers", "minkowski", "pseudo", "expression")
DEGENERACY_RTOL = 1e-12


class DegenerateMetricError(ValueError):
    """The fundamental tensor is singular at the requested point."""


@dataclass(frozen=True)
class ChartPoint:
    """A point (x, y) of M' in one chart; ``y`` must be nonzero."""

    x: tuple[float, ...]
    y: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        object.__setattr__(self, "y", tuple(float(v) for v in self.y))
        if len(self.x) != len(self.y):
            raise ValueError("x and y must have the same dimension")
        if not any(self.y):
            raise DomainError("point not in M': fiber vector y is zero")

    @property
    def dim(self) -> int:
        return len(self.x)

    def scaled(self, k: float) -> "ChartPoint":
        return ChartPoint(self.x, tuple(k * v for v in self.y))


# ---------------------------------------------------------------------------
# MetricSpec


def _coerce(entry, dim: int) -> expr.ExprAst:
    if isinstance(entry, expr.ExprAst):
        return entry
    if isinstance(entry, (int, float)):
        return expr.ExprAst(expr.Num(float(entry)), dim, repr(float(entry)))
    return expr.parse(str(entry), dim)


def _matrix(rows, dim: int, name: str) -> tuple[tuple[expr.ExprAst, ...], ...]:
    if len(rows) != dim or any(len(r) != dim for r in rows):
        raise ValueError(f"{name} must be a {dim}x{dim} matrix")
    mat = tuple(tuple(_coerce(e, dim) for e in r) for r in rows)
    for i in range(dim):
        for j in range(i):
            if mat[i][j].root != mat[j][i].root:
                raise ValueError(f"{name} must be symmetric: entries ({i + 1},{j + 1}) "
                                 f"and ({j + 1},{i + 1}) differ")
    return mat


def _text(a: expr.ExprAst):
    if isinstance(a.root, expr.Num):
        return a.root.value
    return a.source or expr.to_text(a)


@dataclass(frozen=True)
class MetricSpec:
    """A pseudo-Finsler energy given by a builtin family or an expression.

    ``signature`` is the declared number ``q`` of negative eigenvalues of g;
    ``None`` means undeclared (only allowed for the expression family).
    """

    dim: int
    family: str
    params: Mapping = field(default_factory=dict)
    signature: int | None = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown metric family {self.family!r}")
        if self.dim < 1:
            raise ValueError("dimension must be >= 1")
        q = self.signature
        if self.family == "pseudo":
            if q is None or not 0 < q < self.dim:
                raise ValueError(
                    f"pseudo family needs a signature 0 < q < m, got q={q}, m={self.dim}")
        elif self.family != "expression" and q not in (0, None):
            raise ValueError(f"family {self.family!r} is positive definite (q = 0)")
        elif q is not None and not 0 <= q < self.dim:
            raise ValueError(f"signature q={q} out of range for m={self.dim}")

    # -- constructors -----------------------------------------------------
    @classmethod
    def euclidean(cls, dim: int) -> "MetricSpec":
        return cls(dim, "euclidean")

    @classmethod
    def riemannian(cls, a: Sequence[Sequence]) -> "MetricSpec":
        dim = len(a)
        mat = _matrix(a, dim, "a")
        if any(e.depends_on("y") for r in mat for e in r):
            raise ValueError("riemannian coefficients a_ij may depend on x only")
        return cls(dim, "riemannian", {"a": mat})

    @classmethod
    def pseudo(cls, a: Sequence[Sequence], signature: int) -> "MetricSpec":
        dim = len(a)
        mat = _matrix(a, dim, "a")
        if any(e.depends_on("y") for r in mat for e in r):
            raise ValueError("pseudo coefficients a_ij may depend on x only")
        return cls(dim, "pseudo", {"a": mat}, signature)

    @classmethod
    def randers(cls, a: Sequence[Sequence], b: Sequence) -> "MetricSpec":
        dim = len(a)
        mat = _matrix(a, dim, "a")
        if len(b) != dim:
            raise ValueError(f"b must have {dim} entries")
        vec = tuple(_coerce(e, dim) for e in b)
        if any(e.depends_on("y") for e in vec) or any(
                e.depends_on("y") for r in mat for e in r):
            raise ValueError("randers data (a_ij, b_i) may depend on x only")
        return cls(dim, "randers", {"a": mat, "b": vec})

    @classmethod
    def minkowski(cls, energy: str, dim: int) -> "MetricSpec":
        ast = _coerce(energy, dim)
        if ast.depends_on("x"):
            raise ValueError("locally-Minkowski energy must not depend on x")
        return cls(dim, "minkowski", {"expr": ast})

    @classmethod
    def expression(cls, energy: str, dim: int, signature: int | None = None) -> "MetricSpec":
        return cls(dim, "expression", {"expr": _coerce(energy, dim)}, signature)

    # -- serialization ----------------------------------------------------
    def to_config(self) -> dict:
        out: dict = {"family": self.family, "dim": self.dim}
        p = self.params
        if "a" in p:
            out["a"] = [[_text(e) for e in row] for row in p["a"]]
        if "b" in p:
            out["b"] = [_text(e) for e in p["b"]]
        if "expr" in p:
            out["expr"] = _text(p["expr"])
        if self.signature is not None and (self.signature or self.family != "expression"):
            out["signature"] = self.signature
        return out

    @classmethod
    def from_config(cls, cfg: Mapping) -> "MetricSpec":
        family = cfg.get("family")
        dim = cfg.get("dim")
        if family not in FAMILIES:
            raise ValueError(f"metric.family must be one of {FAMILIES}, got {family!r}")
        if family == "euclidean":
            return cls.euclidean(int(dim))
        if family in ("riemannian", "pseudo", "randers"):
            if "a" not in cfg:
                raise ValueError(f"metric.a is required for family {family!r}")
            a = cfg["a"]
            if dim is not None and len(a) != dim:
                raise ValueError("metric.a does not match metric.dim")
            if family == "riemannian":
                return cls.riemannian(a)
            if family == "pseudo":
                return cls.pseudo(a, int(cfg.get("signature", 0)))
            return cls.randers(a, cfg.get("b", [0.0] * len(a)))
        if "expr" not in cfg or dim is None:
            raise ValueError(f"metric.expr and metric.dim are required for family {family!r}")
        if family == "minkowski":
            return cls.minkowski(cfg["expr"], int(dim))
        sig = cfg.get("signature")
        return cls.expression(cfg["expr"], int(dim), None if sig is None else int(sig))


# ---------------------------------------------------------------------------
# energy evaluation (works on floats and on Jets alike)


def _quadratic(mat, xs, ys, env):
    m = len(ys)
    total = 0.0
    for i in range(m):
        for j in range(m):
            root = mat[i][j].root
            if isinstance(root, expr.Num):
                if root.value == 0.0:
                    continue
                coeff = root.value
            else:
                coeff = expr._eval(root, env)
            total = total + coeff * ys[i] * ys[j]
    return total


def energy_from(spec: MetricSpec, variables: Sequence):
    """F* evaluated on (x^1..x^m, y^1..y^m) given as floats or Jets."""
    m = spec.dim
    xs, ys = list(variables[:m]), list(variables[m:])
    env = {("x", i + 1): v for i, v in enumerate(xs)}
    env.update({("y", i + 1): v for i, v in enumerate(ys)})
    fam = spec.family
    if fam == "euclidean":
        total = 0.0
        for v in ys:
            total = total + v * v
        return total
    if fam in ("riemannian", "pseudo"):
        return _quadratic(spec.params["a"], xs, ys, env)
    if fam == "randers":
        quad = _quadratic(spec.params["a"], xs, ys, env)
        if np.any(np.asarray(quad.value if isinstance(quad, Jet) else quad) <= 0.0):
            raise DomainError("randers: a_ij y^i y^j must be positive")
        beta = 0.0
        for i, b in enumerate(spec.params["b"]):
            beta = beta + expr._eval(b.root, env) * ys[i]
        f = ad.sqrt(quad) + beta
        return f * f
    return expr._eval(spec.params["expr"].root, env)


def energy(spec: MetricSpec, p: ChartPoint) -> float:
    """F*(x, y) as a plain float."""
    _check_dim(spec, p)
    value = float(energy_from(spec, list(p.x) + list(p.y)))
    if not np.isfinite(value):
        raise DomainError("energy is not finite")
    return value


def energy_jet(spec: MetricSpec, p: ChartPoint, order: int) -> Jet:
    _check_dim(spec, p)
    variables = ad.seed(p, order)
    return ad.as_jet(energy_from(spec, variables), variables[0])


def _check_dim(spec: MetricSpec, p: ChartPoint) -> None:
    if p.dim != spec.dim:
        raise ValueError(f"point has dimension {p.dim}, metric has {spec.dim}")


def metric_jet(f: Jet, dim: int) -> Jet:
    """Jet of g_ij = 1/2 F*_{y^i y^j}, batch shape (m, m), two orders below ``f``."""
    first = [f.diff(dim + i) for i in range(dim)]
    rows = [ad.stack([first[i].diff(dim + j) for j in range(dim)]) for i in range(dim)]
    return 0.5 * ad.stack(rows)


# ---------------------------------------------------------------------------
# fundamental tensor


@dataclass(frozen=True, eq=False)
class FundamentalTensor:
    g: np.ndarray
    g_inv: np.ndarray
    dg_dy: np.ndarray  # dg_dy[i, j, k] = d g_ij / d y^k
    at: ChartPoint


def check_nondegenerate(g: np.ndarray) -> None:
    m = g.shape[0]
    scale = np.abs(g).max() ** m
    if scale == 0.0 or abs(np.linalg.det(g)) < DEGENERACY_RTOL * scale:
        raise DegenerateMetricError("degenerate fundamental tensor")


def fundamental_tensor(spec: MetricSpec, p: ChartPoint) -> FundamentalTensor:
    m = spec.dim
    gj = metric_jet(energy_jet(spec, p, 3), m)
    g = np.array(gj.value).reshape(m, m)
    check_nondegenerate(g)
    dg_dy = gj.grad[..., m:]
    return FundamentalTensor(g, np.linalg.inv(g), np.array(dg_dy), p)


# ---------------------------------------------------------------------------
# structural checks


@dataclass(frozen=True)
class HomogeneityResiduals:
    scaling: float  # |F*(x, ky) - k^2 F*(x, y)|
    euler: float  # |g_ij y^i y^j - F*|
    scale: float  # magnitude used for relative comparison

    def relative(self) -> tuple[float, float]:
        s = max(self.scale, np.finfo(float).tiny)
        return self.scaling / s, self.euler / s


def check_homogeneity(spec: MetricSpec, p: ChartPoint, k: float = 2.0) -> HomogeneityResiduals:
    if k <= 0:
        raise ValueError("scaling factor k must be positive")
    f = energy_jet(spec, p, 2)
    f_k = energy(spec, p.scaled(k))
    m = spec.dim
    y = np.asarray(p.y)
    g = np.array(metric_jet(f, m).value).reshape(m, m)
    scaling = abs(f_k - k * k * f.value)
    euler = abs(y @ g @ y - f.value)
    scale = max(abs(f_k), k * k * abs(f.value))
    return HomogeneityResiduals(float(scaling), float(euler), float(scale))


def check_signature(spec: MetricSpec, p: ChartPoint) -> tuple[int, int]:
    """Counts (negative, positive) of eigenvalues of g at ``p``."""
    g = fundamental_tensor(spec, p).g
    eig = np.linalg.eigvalsh(g)
    return int(np.sum(eig < 0)), int(np.sum(eig > 0))
