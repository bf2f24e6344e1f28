"""Nonlinear connections, (HM', S, T)-Cartan coefficients and the connection D.

Index conventions (all arrays 0-based, upper index first):

* ``N[i, j] = N^i_j`` with ``delta_j = d/dx^j - N^i_j d/dy^i``;
* ``dN_dy[k, j, i] = dN^k_j / dy^i``, ``deltaN[k, i, j] = delta_j N^k_i``;
* ``C[k, i, j] = C^k_ij`` with ``nabla_{d/dy^j} d/dy^i = C^k_ij d/dy^k``;
* ``F[k, i, j] = F^k_ij`` with ``nabla_{delta_j} d/dy^i = F^k_ij d/dy^k``;
* ``S[k, i, j] = S^k_ij`` with ``S(d/dy^j, d/dy^i) = S^k_ij d/dy^k`` (same for T);
* ``R[k, i, j] = delta_j N^k_i - delta_i N^k_j``.

Derivative indices always come last.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import ad, expr
from .ad import Jet
from .frame import AdaptedVector
from .metric import (ChartPoint, MetricSpec, check_nondegenerate, energy_jet,
                     metric_jet)
from .tolerance import Comparison

SOURCES = ("canonical", "zero", "expression")
SKEW_TOL = 1e-12


class SkewSymmetryError(ValueError):
    pass


# ---------------------------------------------------------------------------
# nonlinear connection


@dataclass(frozen=True, eq=False)
class NonlinearConnection:
    source: str
    N: np.ndarray
    dN_dy: np.ndarray
    dN_dx: np.ndarray
    deltaN: np.ndarray
    jet: Jet  # order >= 1, batch shape (m, m)

    @classmethod
    def from_jet(cls, source: str, jet: Jet) -> "NonlinearConnection":
        m = jet.shape[0]
        n_val = np.array(jet.value).reshape(m, m)
        grad = jet.grad
        dN_dx = np.array(grad[..., :m])
        dN_dy = np.array(grad[..., m:])
        deltaN = dN_dx - np.einsum("kil,lj->kij", dN_dy, n_val)
        return cls(source, n_val, dN_dy, dN_dx, deltaN, jet)

    @property
    def dim(self) -> int:
        return self.N.shape[0]

    @property
    def R(self) -> np.ndarray:
        """R^k_ij = delta_j N^k_i - delta_i N^k_j."""
        return self.deltaN - self.deltaN.transpose(0, 2, 1)


def canonical_connection(spec: MetricSpec, p: ChartPoint, energy: Jet | None = None
                         ) -> NonlinearConnection:
    """Nonlinear connection of the geodesic spray of F*.

    G^i = 1/4 g^il (F*_{y^l x^k} y^k - F*_{x^l}) and N^i_j = dG^i/dy^j.
    Derivatives of N need fourth derivatives of F*.
    """
    m = spec.dim
    f = energy if energy is not None and energy.order >= 4 else energy_jet(spec, p, 4)
    f = f.truncate(4)
    g = metric_jet(f, m)
    check_nondegenerate(np.array(g.value).reshape(m, m))
    g_inv = ad.inv(g)
    y = ad.stack(ad.seed(p, 2)[m:])
    first_y = [f.diff(m + l) for l in range(m)]
    spray = ad.stack([
        sum((first_y[l].diff(k) * y[k] for k in range(m)), Jet.constant(0.0, 2 * m, 2))
        - f.diff(l)
        for l in range(m)])
    G = 0.25 * ad.matmul(g_inv, spray.expand(-1)).sum(-1)
    N = ad.stack([G.diff(m + j) for j in range(m)], axis=-1)
    return NonlinearConnection.from_jet("canonical", N)


def zero_connection(m: int) -> NonlinearConnection:
    return NonlinearConnection.from_jet("zero", Jet.constant(np.zeros((m, m)), 2 * m, 1))


def expression_connection(exprs: Sequence[Sequence[expr.ExprAst]], p: ChartPoint
                          ) -> NonlinearConnection:
    variables = ad.seed(p, 1)
    rows = [ad.stack([expr.evaluate_on(e, variables) for e in row]) for row in exprs]
    return NonlinearConnection.from_jet("expression", ad.stack(rows))


@dataclass(frozen=True)
class ConnectionSource:
    """How N^i_j is obtained at each point: canonical spray, zero, or expressions."""

    kind: str = "canonical"
    exprs: tuple | None = None  # exprs[i][j] gives N^i_j

    def __post_init__(self):
        if self.kind not in SOURCES:
            raise ValueError(f"connection source must be one of {SOURCES}, got {self.kind!r}")
        if self.kind == "expression" and self.exprs is None:
            raise ValueError("expression connection needs N components")

    @classmethod
    def expression(cls, rows: Sequence[Sequence], dim: int) -> "ConnectionSource":
        if len(rows) != dim or any(len(r) != dim for r in rows):
            raise ValueError(f"connection N must be a {dim}x{dim} array")
        return cls("expression", tuple(tuple(expr.parse(str(e), dim) for e in r)
                                       for r in rows))

    def at(self, spec: MetricSpec, p: ChartPoint, energy: Jet | None = None
           ) -> NonlinearConnection:
        if self.kind == "canonical":
            return canonical_connection(spec, p, energy)
        if self.kind == "zero":
            return zero_connection(spec.dim)
        return expression_connection(self.exprs, p)

    def to_config(self) -> dict:
        out: dict = {"source": self.kind}
        if self.exprs is not None:
            out["N"] = [[e.source or expr.to_text(e) for e in r] for r in self.exprs]
        return out

    @classmethod
    def from_config(cls, cfg: Mapping, dim: int) -> "ConnectionSource":
        kind = cfg.get("source", "canonical")
        if kind == "expression":
            if "N" not in cfg:
                raise ValueError("connection.N is required for source 'expression'")
            return cls.expression(cfg["N"], dim)
        return cls(kind)


# ---------------------------------------------------------------------------
# skew torsion inputs


def _first_skew_violation(arr: np.ndarray, tol: float):
    bad = np.argwhere(np.abs(arr + arr.transpose(0, 2, 1)) > tol)
    if bad.size == 0:
        return None
    return "(" + ",".join(str(int(v) + 1) for v in bad[0]) + ")"


class TorsionField:
    """A skew (1,2) Finsler tensor field, given by constants or expressions.

    ``components[k][i][j]`` is the coefficient ``S^k_ij``.
    """

    def __init__(self, name: str, components, dim: int):
        self.name = name
        self.dim = dim
        arr = np.asarray(components, dtype=object)
        if arr.shape != (dim, dim, dim):
            raise ValueError(f"{name} must have shape ({dim}, {dim}, {dim})")
        if all(isinstance(v, (int, float, np.floating, np.integer)) for v in arr.flat):
            self.constant = np.asarray(arr, dtype=float)
            self.exprs = None
            bad = _first_skew_violation(self.constant, 0.0)
            if bad is not None:
                raise SkewSymmetryError(
                    f"{name} violates skew-symmetry at (k,i,j)={bad}")
        else:
            self.constant = None
            self.exprs = np.vectorize(
                lambda e: expr.ExprAst(expr.Num(float(e)), dim, repr(float(e)))
                if isinstance(e, (int, float)) else expr.parse(str(e), dim),
                otypes=[object])(arr)

    @classmethod
    def zero(cls, name: str, dim: int) -> "TorsionField":
        return cls(name, np.zeros((dim, dim, dim)), dim)

    @classmethod
    def random(cls, name: str, dim: int, scale: float, rng: np.random.Generator
               ) -> "TorsionField":
        raw = rng.normal(scale=scale, size=(dim, dim, dim))
        return cls(name, raw - raw.transpose(0, 2, 1), dim)

    @property
    def is_zero(self) -> bool:
        return self.constant is not None and not np.any(self.constant)

    def at(self, p: ChartPoint) -> np.ndarray:
        if self.constant is not None:
            return self.constant
        return np.vectorize(lambda e: expr.evaluate(e, p.x, p.y), otypes=[float])(self.exprs)

    def validate_at(self, p: ChartPoint) -> None:
        bad = _first_skew_violation(self.at(p), SKEW_TOL)
        if bad is not None:
            raise SkewSymmetryError(
                f"{self.name} violates skew-symmetry at (k,i,j)={bad} at point {p}")

    def to_config(self):
        if self.constant is not None:
            return self.constant.tolist()
        return np.vectorize(lambda e: e.root.value if isinstance(e.root, expr.Num)
                            else (e.source or expr.to_text(e)), otypes=[object])(
            self.exprs).tolist()


def _tensor(S, name: str, m: int, p: ChartPoint) -> np.ndarray:
    if S is None:
        return np.zeros((m, m, m))
    if isinstance(S, TorsionField):
        return S.at(p)
    arr = np.asarray(S, dtype=float)
    bad = _first_skew_violation(arr, SKEW_TOL)
    if bad is not None:
        raise SkewSymmetryError(f"{name} violates skew-symmetry at (k,i,j)={bad}")
    return arr


# ---------------------------------------------------------------------------
# Cartan coefficients


@dataclass(frozen=True, eq=False)
class ConnectionData:
    """Every coefficient array of an (HM', S, T)-Cartan connection at a point."""

    at: ChartPoint
    g: np.ndarray
    g_inv: np.ndarray
    dg_dy: np.ndarray  # [i, j, k] = d g_ij / dy^k
    delta_g: np.ndarray  # [i, j, k] = delta_k g_ij
    nonlinear: NonlinearConnection
    S: np.ndarray
    T: np.ndarray
    C: np.ndarray
    F: np.ndarray

    @property
    def dim(self) -> int:
        return self.g.shape[0]

    @property
    def N(self) -> np.ndarray:
        return self.nonlinear.N

    @property
    def R(self) -> np.ndarray:
        return self.nonlinear.R


def delta_x(f: Jet, N) -> np.ndarray:
    """delta f / delta x^i = df/dx^i - N^j_i df/dy^j, shape (*batch, m)."""
    if isinstance(N, NonlinearConnection):
        N = N.N
    m = N.shape[0]
    grad = f.grad
    return grad[..., :m] - grad[..., m:] @ N


def _christoffel_like(dg: np.ndarray, tors: np.ndarray, g: np.ndarray, g_inv: np.ndarray,
                      sign: float) -> np.ndarray:
    # brace[i, j, l] = d_j g_il + d_i g_lj - d_l g_ji + sign * (tors terms)
    brace = (dg.transpose(0, 2, 1) + dg.transpose(2, 1, 0) - dg.transpose(1, 0, 2)
             + sign * (np.einsum("hjl,ih->ijl", tors, g)
                       + np.einsum("hij,lh->ijl", tors, g)
                       - np.einsum("hli,jh->ijl", tors, g)))
    return 0.5 * np.einsum("ijl,lm->mij", brace, g_inv)


def cartan_coefficients(spec: MetricSpec, p: ChartPoint, N: NonlinearConnection,
                        S=None, T=None, energy: Jet | None = None) -> ConnectionData:
    m = spec.dim
    f = energy if energy is not None else energy_jet(spec, p, 3)
    gj = metric_jet(f.truncate(3), m)
    g = np.array(gj.value).reshape(m, m)
    check_nondegenerate(g)
    g_inv = np.linalg.inv(g)
    dg_dy = np.array(gj.grad[..., m:])
    delta_g = delta_x(gj, N)
    S_arr = _tensor(S, "S", m, p)
    T_arr = _tensor(T, "T", m, p)
    C = _christoffel_like(dg_dy, S_arr, g, g_inv, +1.0)
    F = _christoffel_like(delta_g, T_arr, g, g_inv, -1.0)
    return ConnectionData(p, g, g_inv, dg_dy, delta_g, N, S_arr, T_arr, C, F)


def connection_data(spec: MetricSpec, p: ChartPoint,
                    source: ConnectionSource | NonlinearConnection | None = None,
                    S=None, T=None) -> ConnectionData:
    """Evaluate N, g and the Cartan coefficients at ``p`` in one pass."""
    if isinstance(source, NonlinearConnection):
        return cartan_coefficients(spec, p, source, S, T)
    source = source or ConnectionSource()
    order = 4 if source.kind == "canonical" else 3
    f = energy_jet(spec, p, order)
    N = source.at(spec, p, f)
    return cartan_coefficients(spec, p, N, S, T, f)


# ---------------------------------------------------------------------------
# the linear connection D


def _coordinate(h, v, N: np.ndarray):
    """Coordinate components (d/dx, d/dy) of h^i delta_i + v^i d/dy^i."""
    return np.concatenate([h, v - N @ h], axis=-1)


def _along(X: AdaptedVector, field, N: np.ndarray, size: int) -> np.ndarray:
    """X applied to the component functions of ``field`` (zero for constants)."""
    if not isinstance(field, Jet):
        return np.zeros(size)
    return field.grad @ _coordinate(X.h, X.v, N)


def nabla_vertical(X: AdaptedVector, V, data: ConnectionData) -> np.ndarray:
    """nabla_X (V^i d/dy^i); returns the vertical components."""
    m = data.dim
    values = np.asarray(V.value if isinstance(V, Jet) else V, dtype=float)
    coeff = (np.einsum("kij,j->ki", data.F, X.h) + np.einsum("kij,j->ki", data.C, X.v))
    return _along(X, V, data.N, m) + coeff @ values


def apply_D(X: AdaptedVector, Y, data: ConnectionData) -> AdaptedVector:
    """D_X Y = nabla_X vY - J nabla_X J hY.

    ``Y`` is an :class:`AdaptedVector` (constant adapted components) or a Jet
    of batch shape ``(2m,)`` holding the adapted component functions.
    """
    m = data.dim
    if isinstance(Y, AdaptedVector):
        vY, JhY = Y.v, -Y.h
    else:
        vY, JhY = Y[m:], -Y[:m]
    a = nabla_vertical(X, vY, data)
    b = nabla_vertical(X, JhY, data)
    # J(b^k d/dy^k) = b^k delta_k
    return AdaptedVector(-b, a)


def frame_connection(data: ConnectionData) -> np.ndarray:
    """``D[a, b] = D_{e_a} e_b`` in adapted components, shape (2m, 2m, 2m)."""
    m = data.dim
    frame = [AdaptedVector.from_array(e) for e in np.eye(2 * m)]
    return np.array([[apply_D(ea, eb, data).to_array() for eb in frame] for ea in frame])


# ---------------------------------------------------------------------------
# brackets and torsion


def frame_brackets(N: NonlinearConnection) -> np.ndarray:
    """``B[a, b] = [e_a, e_b]`` in adapted components.

    [delta_i, delta_j] = R^k_ij d/dy^k, [delta_i, d/dy^j] = dN^k_i/dy^j d/dy^k,
    [d/dy^i, d/dy^j] = 0.
    """
    m = N.dim
    B = np.zeros((2 * m, 2 * m, 2 * m))
    B[:m, :m, m:] = N.R.transpose(1, 2, 0)
    B[:m, m:, m:] = N.dN_dy.transpose(1, 2, 0)
    B[m:, :m, m:] = -N.dN_dy.transpose(2, 1, 0)
    return B


def lie_bracket_constant(A, B, N: NonlinearConnection) -> np.ndarray:
    """[A, B] for fields with constant adapted components, from coordinates.

    The coordinate components of h^i delta_i + v^i d/dy^i are (h, v - N h);
    only the y-part varies.  Returns adapted components.
    """
    m = N.dim
    A, B = np.asarray(A, dtype=float), np.asarray(B, dtype=float)
    hA, hB = A[..., :m], B[..., :m]
    grad_n = N.jet.grad  # [k, i, mu] = d N^k_i / d z^mu
    cA = np.concatenate([hA, A[..., m:] - hA @ N.N.T], axis=-1)
    cB = np.concatenate([hB, B[..., m:] - hB @ N.N.T], axis=-1)
    # [A,B]^mu = A(B^mu) - B(A^mu); only y-components of A, B vary
    y_part = (-np.einsum("kiu,...u,...i->...k", grad_n, cA, hB)
              + np.einsum("kiu,...u,...i->...k", grad_n, cB, hA))
    x_part = np.zeros_like(y_part)
    return np.concatenate([x_part, y_part + x_part @ N.N.T], axis=-1)


@dataclass(frozen=True, eq=False)
class TorsionBlocks:
    vv: np.ndarray  # T^D(d_j, d_i) = vv[k, i, j] d_k
    hv_h: np.ndarray  # T^D(d_i, delta_j): horizontal part C^k_ji
    hv_v: np.ndarray  # vertical part dN^k_j/dy^i - F^k_ij
    hh_h: np.ndarray  # T^D(delta_i, delta_j): horizontal part T^k_ij
    hh_v: np.ndarray  # vertical part delta_i N^k_j - delta_j N^k_i

    def blocks(self) -> dict[str, np.ndarray]:
        return {"vv": self.vv, "hv_h": self.hv_h, "hv_v": self.hv_v,
                "hh_h": self.hh_h, "hh_v": self.hh_v}

    def max_abs(self) -> float:
        return max(float(np.abs(b).max()) for b in self.blocks().values())


def torsion_components(data: ConnectionData) -> TorsionBlocks:
    """Torsion of D in the adapted frame, block by block."""
    N = data.nonlinear
    return TorsionBlocks(
        vv=data.S.copy(),
        hv_h=data.C.transpose(0, 2, 1).copy(),
        hv_v=N.dN_dy.transpose(0, 2, 1) - data.F,
        hh_h=data.T.copy(),
        hh_v=-N.R,
    )


def torsion_from_D(data: ConnectionData) -> TorsionBlocks:
    """Same blocks from T^D(X, Y) = D_X Y - D_Y X - [X, Y] on frame fields."""
    m = data.dim
    D = frame_connection(data)
    tors = D - D.transpose(1, 0, 2) - frame_brackets(data.nonlinear)
    h, v = slice(0, m), slice(m, 2 * m)
    # tors[a, b, c]: component c of T^D(e_a, e_b)
    return TorsionBlocks(
        vv=tors[v, v, v].transpose(2, 1, 0),
        hv_h=tors[v, h, h].transpose(2, 0, 1),
        hv_v=tors[v, h, v].transpose(2, 0, 1),
        hh_h=tors[h, h, h].transpose(2, 0, 1),
        hh_v=tors[h, h, v].transpose(2, 0, 1),
    )


# ---------------------------------------------------------------------------
# metricity


def metric_compat_residuals(data: ConnectionData) -> dict[str, Comparison]:
    """d g_jk/dy^i = C^h_ji g_hk + C^h_ki g_jh and its delta/delta x^i counterpart.

    Entries are indexed [i, j, k].
    """
    g = data.g

    def rhs(coeff):
        return np.einsum("hji,hk->ijk", coeff, g) + np.einsum("hki,jh->ijk", coeff, g)

    return {
        "vertical": Comparison(data.dg_dy.transpose(2, 0, 1), rhs(data.C)),
        "horizontal": Comparison(data.delta_g.transpose(2, 0, 1), rhs(data.F)),
    }


# ---------------------------------------------------------------------------
# Koszul-formula oracle


def _probe_inner_derivative(gj: Jet, Y, Z, W_coord) -> np.ndarray:
    """W(g(Y, Z)) for constant-component probes, W given in coordinates."""
    return np.einsum("...i,...j,iju,...u->...", Y, Z, gj.grad, W_coord)


def koszul_values(spec: MetricSpec, p: ChartPoint, N: NonlinearConnection, S, T,
                  X, Y, Z) -> tuple[np.ndarray, np.ndarray]:
    """Right-hand sides of the two defining Koszul-type identities.

    Probes are component arrays of shape (..., m): the vertical identity uses
    vX = X^i d/dy^i etc., the horizontal one hX = X^i delta_i.  Returns
    (2 g(nabla_vX vY, vZ), 2 g(nabla_hX JhY, JhZ)).
    """
    m = spec.dim
    gj = metric_jet(energy_jet(spec, p, 3), m)
    g = np.array(gj.value).reshape(m, m)
    S_arr, T_arr = _tensor(S, "S", m, p), _tensor(T, "T", m, p)
    X, Y, Z = (np.asarray(a, dtype=float) for a in (X, Y, Z))
    zero = np.zeros(np.broadcast_shapes(X.shape, Y.shape, Z.shape))

    def vert(a):
        return np.concatenate([zero, a + zero], axis=-1)

    def horiz(a):
        return np.concatenate([a + zero, zero], axis=-1)

    def coord(adapted):
        return np.concatenate([adapted[..., :m],
                               adapted[..., m:] - adapted[..., :m] @ N.N.T], axis=-1)

    def ip(a, b):
        return np.einsum("...i,ij,...j->...", a, g, b)

    def tens(tt, a, b):
        # t(a^i d_i, b^j d_j) = t^k_ji a^i b^j d_k
        return np.einsum("kji,...i,...j->...k", tt, a, b)

    # vertical: vX(g(vY,vZ)) + vY(g(vZ,vX)) - vZ(g(vX,vY)) + bracket + S terms
    vX, vY, vZ = vert(X), vert(Y), vert(Z)

    def vbr(a, b):
        return lie_bracket_constant(a, b, N)[..., m:]

    eq1 = (_probe_inner_derivative(gj, Y, Z, coord(vX))
           + _probe_inner_derivative(gj, Z, X, coord(vY))
           - _probe_inner_derivative(gj, X, Y, coord(vZ))
           + ip(Y, vbr(vZ, vX)) + ip(Z, vbr(vX, vY)) - ip(X, vbr(vY, vZ))
           + ip(Y, tens(S_arr, Z, X)) + ip(Z, tens(S_arr, X, Y)) - ip(X, tens(S_arr, Y, Z)))

    # horizontal: J h Y = -Y^i d/dy^i, so g(JhY, JhZ) = g(Y, Z)
    hX, hY, hZ = horiz(X), horiz(Y), horiz(Z)

    def Jh_br(a, b):
        return -lie_bracket_constant(a, b, N)[..., :m]

    JX, JY, JZ = -X, -Y, -Z
    eq2 = (_probe_inner_derivative(gj, Y, Z, coord(hX))
           + _probe_inner_derivative(gj, Z, X, coord(hY))
           - _probe_inner_derivative(gj, X, Y, coord(hZ))
           + ip(JY, Jh_br(hZ, hX)) + ip(JZ, Jh_br(hX, hY)) - ip(JX, Jh_br(hY, hZ))
           + ip(JY, tens(T_arr, JZ, JX)) + ip(JZ, tens(T_arr, JX, JY))
           - ip(JX, tens(T_arr, JY, JZ)))
    return eq1, eq2


def reconstruct_nabla(spec: MetricSpec, p: ChartPoint, N: NonlinearConnection,
                      S=None, T=None) -> tuple[np.ndarray, np.ndarray]:
    """Recover (C, F) by solving the Koszul identities on frame probes."""
    m = spec.dim
    eye = np.eye(m)
    X, Y, Z = eye[:, None, None, :], eye[None, :, None, :], eye[None, None, :, :]
    eq1, eq2 = koszul_values(spec, p, N, S, T, X, Y, Z)
    g = fundamental_g(spec, p)
    g_inv = np.linalg.inv(g)
    # eq[j, i, l] = 2 coeff^k_ij g_kl
    C = 0.5 * np.einsum("jil,lm->mij", eq1, g_inv)
    F = 0.5 * np.einsum("jil,lm->mij", eq2, g_inv)
    return C, F


def fundamental_g(spec: MetricSpec, p: ChartPoint) -> np.ndarray:
    m = spec.dim
    g = np.array(metric_jet(energy_jet(spec, p, 2), m).value).reshape(m, m)
    check_nondegenerate(g)
    return g


def nabla_pairing(data: ConnectionData, X, Y, Z) -> tuple[np.ndarray, np.ndarray]:
    """Coefficient-side values 2 g(nabla_vX vY, vZ) and 2 g(nabla_hX JhY, JhZ)."""
    gC = np.einsum("kij,kl->ijl", data.C, data.g)
    gF = np.einsum("kij,kl->ijl", data.F, data.g)
    return (2 * np.einsum("...j,...i,...l,ijl->...", X, Y, Z, gC),
            2 * np.einsum("...j,...i,...l,ijl->...", X, Y, Z, gF))
