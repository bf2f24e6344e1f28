"""Registry of per-point checks run by the batch driver.

Every check returns a :class:`Comparison`; a point passes when both sides
agree under the scenario's mixed tolerance.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import ad
from .connection import (ConnectionData, ConnectionSource, TorsionField, apply_D,
                         connection_data, frame_brackets, frame_connection,
                         lie_bracket_constant, metric_compat_residuals,
                         reconstruct_nabla, torsion_components, torsion_from_D)
from .frame import AdaptedVector, J_matrix, apply_J, sasaki_matrix
from .kahler import dPhi_components, kahler_residuals, nijenhuis, sasaki_inner
from .metric import ChartPoint, MetricSpec, check_signature, energy, energy_jet, metric_jet
from .tolerance import Comparison

SCALINGS = (0.5, 2.0, 10.0)


@dataclass
class PointContext:
    spec: MetricSpec
    point: ChartPoint
    source: ConnectionSource
    S: TorsionField
    T: TorsionField
    rng: np.random.Generator
    _data: ConnectionData | None = field(default=None, repr=False)

    @property
    def data(self) -> ConnectionData:
        if self._data is None:
            self._data = connection_data(self.spec, self.point, self.source, self.S, self.T)
        return self._data


def _concat(*pairs: Comparison) -> Comparison:
    return Comparison(np.concatenate([c.lhs.ravel() for c in pairs]),
                      np.concatenate([c.rhs.ravel() for c in pairs]))


def check_homogeneity(ctx: PointContext) -> Comparison:
    f = energy(ctx.spec, ctx.point)
    lhs = [energy(ctx.spec, ctx.point.scaled(k)) for k in SCALINGS]
    rhs = [k * k * f for k in SCALINGS]
    y = np.asarray(ctx.point.y)
    lhs.append(float(y @ ctx.data.g @ y))
    rhs.append(f)
    return Comparison(np.array(lhs), np.array(rhs))


def check_signature_counts(ctx: PointContext) -> Comparison:
    neg, _ = check_signature(ctx.spec, ctx.point)
    declared = ctx.spec.signature
    return Comparison(np.array([neg], float),
                      np.array([neg if declared is None else declared], float))


def check_fundamental_tensor(ctx: PointContext) -> Comparison:
    d = ctx.data
    m = d.dim
    dgy = d.dg_dy
    return _concat(
        Comparison(d.g, d.g.T),
        Comparison(d.g @ d.g_inv, np.eye(m)),
        Comparison(dgy, dgy.transpose(0, 2, 1)),
        Comparison(dgy, dgy.transpose(2, 1, 0)),
    )


def check_g_zero_homogeneity(ctx: PointContext) -> Comparison:
    m = ctx.spec.dim
    g0 = ctx.data.g
    gk = [np.array(metric_jet(energy_jet(ctx.spec, ctx.point.scaled(k), 2), m).value
                   ).reshape(m, m) for k in SCALINGS]
    return Comparison(np.stack(gk), np.stack([g0] * len(SCALINGS)))


def check_two_path(ctx: PointContext) -> Comparison:
    d = ctx.data
    C, F = reconstruct_nabla(ctx.spec, ctx.point, d.nonlinear, ctx.S, ctx.T)
    return _concat(Comparison(d.C, C), Comparison(d.F, F))


def check_metric_compat(ctx: PointContext) -> Comparison:
    r = metric_compat_residuals(ctx.data)
    return _concat(r["vertical"], r["horizontal"])


def random_field(rng: np.random.Generator, m: int) -> ad.Jet:
    """Adapted component functions with random values and first derivatives."""
    return ad.Jet(rng.normal(size=(2 * m, 1 + 2 * m)), 2 * m, 1)


def _J_field(Y: ad.Jet, m: int) -> ad.Jet:
    return ad.stack([Y[m + i] for i in range(m)] + [-Y[i] for i in range(m)])


def _D_from_table(X: AdaptedVector, Y: ad.Jet, table: np.ndarray, N: np.ndarray) -> np.ndarray:
    """D_X Y = X(Y^b) e_b + X^a Y^b D_{e_a} e_b, using the frame connection table."""
    coord = np.concatenate([X.h, X.v - N @ X.h])
    x = X.to_array()
    return Y.grad @ coord + np.einsum("a,b,abc->c", x, np.asarray(Y.value), table)


def check_DJ(ctx: PointContext) -> Comparison:
    """D_X(JY) from the defining formula against J(D_X Y) from the frame table."""
    d = ctx.data
    m = d.dim
    table = frame_connection(d)
    J = J_matrix(m)
    pairs = []
    for _ in range(3):
        X = AdaptedVector.from_array(ctx.rng.normal(size=2 * m))
        Y = random_field(ctx.rng, m)
        lhs = apply_D(X, _J_field(Y, m), d)
        rhs = J @ _D_from_table(X, Y, table, d.N)
        pairs.append(Comparison(lhs.to_array(), rhs))
    return _concat(*pairs)


def check_torsion_conditions(ctx: PointContext) -> Comparison:
    d = ctx.data
    t = torsion_from_D(d)
    return _concat(Comparison(t.vv, d.S), Comparison(t.hh_h, d.T))


def check_torsion_displays(ctx: PointContext) -> Comparison:
    d = ctx.data
    direct, display = torsion_from_D(d), torsion_components(d)
    return _concat(*(Comparison(a, b) for a, b in
                     zip(direct.blocks().values(), display.blocks().values())))


def check_torsion_free(ctx: PointContext) -> Comparison:
    t = torsion_from_D(ctx.data)
    return _concat(*(Comparison(b, 0.0) for b in t.blocks().values()))


def check_brackets(ctx: PointContext) -> Comparison:
    N = ctx.data.nonlinear
    E = np.eye(2 * N.dim)
    coord = lie_bracket_constant(E[:, None, :], E[None, :, :], N)
    return Comparison(frame_brackets(N), coord)


def check_hermitian(ctx: PointContext) -> Comparison:
    d = ctx.data
    m = d.dim
    pairs = []
    for _ in range(3):
        X = AdaptedVector.from_array(ctx.rng.normal(size=2 * m))
        Y = AdaptedVector.from_array(ctx.rng.normal(size=2 * m))
        JX, JY = apply_J(X), apply_J(Y)
        pairs.append(Comparison(apply_J(JX).to_array(), (-X).to_array()))
        pairs.append(Comparison([sasaki_inner(JX, JY, d.g)], [sasaki_inner(X, Y, d.g)]))
        pairs.append(Comparison([sasaki_inner(X, JY, d.g)], [-sasaki_inner(Y, JX, d.g)]))
        pairs.append(Comparison([sasaki_inner(X, Y, d.g)],
                                [X.to_array() @ sasaki_matrix(d.g) @ Y.to_array()]))
    return _concat(*pairs)


def check_kahler_two_path(ctx: PointContext) -> Comparison:
    d = ctx.data
    dp, kr = dPhi_components(d), kahler_residuals(d)
    return _concat(Comparison(dp.vhh, kr["mixed"].residual),
                   Comparison(dp.hhh, kr["cyclic"].residual),
                   Comparison(dp.vvv, 0.0), Comparison(dp.vvh, 0.0))


def check_mixed(ctx: PointContext) -> Comparison:
    return kahler_residuals(ctx.data)["mixed"]


def check_cyclic(ctx: PointContext) -> Comparison:
    return kahler_residuals(ctx.data)["cyclic"]


def check_dphi_closed(ctx: PointContext) -> Comparison:
    return Comparison(dPhi_components(ctx.data).full, 0.0)


def check_nijenhuis(ctx: PointContext) -> Comparison:
    nj = nijenhuis(ctx.data)
    return _concat(Comparison(nj.hh, 0.0), Comparison(nj.hv, 0.0), Comparison(nj.vv, 0.0))


def check_N_symmetry(ctx: PointContext) -> Comparison:
    nj = nijenhuis(ctx.data)
    return _concat(nj.delta_symmetry, nj.y_symmetry)


def check_N_homogeneity(ctx: PointContext) -> Comparison:
    N0 = ctx.data.N
    lhs, rhs = [], []
    for k in SCALINGS:
        Nk = ctx.source.at(ctx.spec, ctx.point.scaled(k)).N
        lhs.append(Nk)
        rhs.append(k * N0)
    return Comparison(np.stack(lhs), np.stack(rhs))


CHECKS: dict[str, Callable[[PointContext], Comparison]] = {
    "homogeneity": check_homogeneity,
    "signature": check_signature_counts,
    "fundamental_tensor": check_fundamental_tensor,
    "g_homogeneity": check_g_zero_homogeneity,
    "N_homogeneity": check_N_homogeneity,
    "frame_brackets": check_brackets,
    "two_path_equality": check_two_path,
    "metric_compat": check_metric_compat,
    "DJ_parallel": check_DJ,
    "torsion_conditions": check_torsion_conditions,
    "torsion_displays": check_torsion_displays,
    "torsion_free": check_torsion_free,
    "hermitian": check_hermitian,
    "kahler_two_path": check_kahler_two_path,
    "kahler_mixed": check_mixed,
    "kahler_cyclic": check_cyclic,
    "dphi_closed": check_dphi_closed,
    "nijenhuis": check_nijenhuis,
    "N_symmetry": check_N_symmetry,
}
