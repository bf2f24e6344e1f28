import numpy as np
import pytest

from cartanlab import ad
from cartanlab.connection import (ConnectionSource, SkewSymmetryError, TorsionField, apply_D,
                                  canonical_connection, connection_data, delta_x,
                                  frame_brackets, frame_connection, koszul_values,
                                  lie_bracket_constant, metric_compat_residuals,
                                  nabla_pairing, reconstruct_nabla, torsion_components,
                                  torsion_from_D, zero_connection)
from cartanlab.frame import AdaptedVector
from cartanlab.metric import ChartPoint, MetricSpec, energy_jet

import oracles
from witnesses import (ALL, CANONICAL, CURVED, EUCLIDEAN, PULLBACK_FLAT, QUADRATIC_MINKOWSKI,
                       QUARTIC, RANDERS, SPHERE, points, torsion_pair)

CURVED_A = [["1", "0"], ["0", "x1^2 + 1"]]
SPHERE_A = [["1", "0"], ["0", "sin(x1)^2"]]
EXPR_N3 = ConnectionSource.expression(
    [["x2*y1", "0.3*y2", "0"], ["x3*y3", "0", "y1"], ["0", "x1*y2", "0.2*y3"]], 3)


def _data(spec, p, source=CANONICAL, seed=None):
    S, T = torsion_pair(spec.dim, seed)
    return connection_data(spec, p, source, S, T)


# -- nonlinear connection --------------------------------------------------

@pytest.mark.parametrize("spec", [QUARTIC, QUADRATIC_MINKOWSKI, EUCLIDEAN[3]])
def test_x_independent_energy_gives_zero_connection(spec):
    for p in points("euclidean3" if spec.dim == 3 else "quartic_minkowski", 10):
        N = canonical_connection(spec, p)
        assert not np.any(N.N) and not np.any(N.R)


@pytest.mark.parametrize("entries,spec,name", [(CURVED_A, CURVED, "curved"),
                                               (SPHERE_A, SPHERE, "sphere")])
def test_riemannian_canonical_connection_is_christoffel(entries, spec, name):
    for p in points(name, 20):
        gamma = oracles.christoffel(entries, p.x)
        N = canonical_connection(spec, p)
        assert np.allclose(N.N, np.einsum("ijk,k->ij", gamma, p.y), rtol=1e-8, atol=1e-12)
        assert np.allclose(N.R, oracles.nonlinear_curvature_from_riemann(entries, p.x, p.y),
                           rtol=1e-8, atol=1e-12)


@pytest.mark.parametrize("name", list(ALL))
def test_canonical_connection_is_one_homogeneous(name):
    spec, _ = ALL[name]
    for p in points(name, 5):
        base = canonical_connection(spec, p).N
        for k in (0.5, 2.0, 10.0):
            assert np.allclose(canonical_connection(spec, p.scaled(k)).N, k * base,
                               rtol=1e-9, atol=1e-12)


def test_delta_x_reduces_to_partial_x():
    p = ChartPoint([0.2, 0.3], [1.0, -0.5])
    f = energy_jet(CURVED, p, 1)
    assert np.array_equal(delta_x(f, zero_connection(2)), f.grad[:2])
    x1, x2, y1, y2 = ad.seed(p, 1)
    h = ad.sin(x1) * x2  # no y dependence
    N = canonical_connection(CURVED, p)
    assert np.array_equal(delta_x(h, N), h.grad[:2])


@pytest.mark.parametrize("name", ["curved", "sphere", "randers", "randers3", "lorentz4",
                                  "expression3"])
def test_energy_is_horizontally_constant(name):
    spec, _ = ALL[name]
    for p in points(name, 10):
        f = energy_jet(spec, p, 4)
        d = delta_x(f, canonical_connection(spec, p, f))
        assert np.abs(d).max() <= 1e-8 * max(1.0, abs(f.value))


# -- Cartan coefficients ---------------------------------------------------

def test_euclidean_coefficients_vanish():
    d = _data(EUCLIDEAN[2], ChartPoint([0.1, 0.2], [1.0, 2.0]))
    assert not np.any(d.C) and not np.any(d.F) and not np.any(d.R)


def test_riemannian_coefficients():
    for p in points("curved", 20):
        d = _data(CURVED, p)
        assert np.abs(d.C).max() < 1e-14
        assert np.allclose(d.F, oracles.christoffel(CURVED_A, p.x), rtol=1e-8, atol=1e-12)


@pytest.mark.parametrize("name", ["randers", "randers3", "quartic_minkowski", "expression3"])
def test_cartan_tensor_is_totally_symmetric_without_S(name):
    spec, _ = ALL[name]
    for p in points(name, 10):
        d = _data(spec, p)
        direct = 0.5 * np.einsum("ijl,lm->mij", d.dg_dy, d.g_inv)
        assert np.allclose(d.C, direct, rtol=1e-10, atol=1e-12)
        assert np.allclose(d.C, d.C.transpose(0, 2, 1), rtol=1e-10, atol=1e-12)


def test_F_skew_part_tracks_T():
    # F^m_ij - F^m_ji = -T^m_ij follows from the T-terms of the coefficient formula
    for p in points("randers", 10):
        d = _data(RANDERS, p, seed=5)
        assert np.allclose(d.F - d.F.transpose(0, 2, 1), -d.T, atol=1e-12)
        assert np.allclose(d.C - d.C.transpose(0, 2, 1), d.S, atol=1e-12)


# -- Koszul reconstruction -------------------------------------------------

def test_euclidean_koszul_values_vanish():
    p = ChartPoint([0.3, 0.4], [1.0, 1.0])
    eye = np.eye(2)
    e1, e2 = koszul_values(EUCLIDEAN[2], p, zero_connection(2), None, None,
                           eye[:, None, None], eye[None, :, None], eye[None, None, :])
    assert not np.any(e1) and not np.any(e2)


@pytest.mark.parametrize("name,seed", [("curved", None), ("randers", 3), ("randers3", 3),
                                       ("lorentz4", 8), ("quartic_minkowski", 1)])
def test_reconstruction_matches_coefficients(name, seed):
    spec, _ = ALL[name]
    S, T = torsion_pair(spec.dim, seed)
    for p in points(name, 10):
        d = connection_data(spec, p, CANONICAL, S, T)
        C, F = reconstruct_nabla(spec, p, d.nonlinear, S, T)
        assert np.allclose(C, d.C, rtol=1e-8, atol=1e-12)
        assert np.allclose(F, d.F, rtol=1e-8, atol=1e-12)


def test_reconstruction_with_expression_connection():
    S, T = torsion_pair(3, 9)
    for p in points("randers3", 10):
        spec = ALL["randers3"][0]
        d = connection_data(spec, p, EXPR_N3, S, T)
        C, F = reconstruct_nabla(spec, p, d.nonlinear, S, T)
        assert np.allclose(C, d.C, rtol=1e-8, atol=1e-12)
        assert np.allclose(F, d.F, rtol=1e-8, atol=1e-12)


def test_koszul_pairing_on_random_probes():
    rng = np.random.default_rng(0)
    S, T = torsion_pair(2, 2)
    for p in points("randers", 5):
        d = connection_data(RANDERS, p, CANONICAL, S, T)
        X, Y, Z = rng.normal(size=(3, 2))
        eq1, eq2 = koszul_values(RANDERS, p, d.nonlinear, S, T, X, Y, Z)
        c1, c2 = nabla_pairing(d, X, Y, Z)
        assert np.isclose(eq1, c1, rtol=1e-8, atol=1e-12)
        assert np.isclose(eq2, c2, rtol=1e-8, atol=1e-12)


# -- metricity -------------------------------------------------------------

def test_metricity_euclidean_is_exact():
    r = metric_compat_residuals(_data(EUCLIDEAN[2], ChartPoint([0, 0], [1, 2]), seed=1))
    assert r["vertical"].max_abs == 0.0 and r["horizontal"].max_abs == 0.0


@pytest.mark.parametrize("name,seed", [("randers", None), ("curved", 4), ("lorentz4", 4),
                                       ("expression3", 6)])
def test_metricity(name, seed):
    spec, _ = ALL[name]
    for p in points(name, 20):
        r = metric_compat_residuals(_data(spec, p, seed=seed))
        assert r["vertical"].max_abs < 1e-9 and r["horizontal"].max_abs < 1e-9


# -- the connection D ------------------------------------------------------

def test_D_vanishes_on_euclidean_frame():
    d = _data(EUCLIDEAN[3], ChartPoint([0.1, 0.2, 0.3], [1, 0, 0]))
    assert not np.any(frame_connection(d))


def test_D_on_frame_fields_carries_F_and_C():
    d = _data(RANDERS, points("randers", 1)[0], seed=2)
    m = 2
    D = frame_connection(d)
    h, v = slice(0, m), slice(m, 2 * m)
    # D[a, b] = D_{e_a} e_b
    assert np.allclose(D[h, h, h], d.F.transpose(2, 1, 0))  # D_{delta_j} delta_i = F^k_ij delta_k
    assert np.allclose(D[v, h, h], d.C.transpose(2, 1, 0))  # D_{d_j} delta_i = C^k_ij delta_k
    assert np.allclose(D[h, v, v], d.F.transpose(2, 1, 0))
    assert np.allclose(D[v, v, v], d.C.transpose(2, 1, 0))
    assert not np.any(D[:, h, v]) and not np.any(D[:, v, h])


def test_D_leibniz_rule():
    rng = np.random.default_rng(7)
    for p in points("randers", 10):
        d = _data(RANDERS, p, seed=3)
        z = ad.seed(p, 1)
        f = 0.3 + z[0] * z[2] - 0.5 * z[1] ** 2 + z[3] ** 3  # random-ish polynomial
        Y = ad.Jet(rng.normal(size=(4, 5)), 4, 1)
        X = AdaptedVector.from_array(rng.normal(size=4))
        fY = ad.stack([f * Y[i] for i in range(4)])
        Xf = f.grad @ np.concatenate([X.h, X.v - d.N @ X.h])
        lhs = apply_D(X, fY, d).to_array()
        rhs = Xf * np.asarray(Y.value) + f.value * apply_D(X, Y, d).to_array()
        assert np.allclose(lhs, rhs, rtol=1e-10, atol=1e-10)


# -- brackets and torsion --------------------------------------------------

def test_brackets_vanish_without_connection():
    assert not np.any(frame_brackets(zero_connection(3)))


@pytest.mark.parametrize("name", ["sphere", "randers3", "lorentz4"])
def test_bracket_table_matches_coordinate_brackets(name):
    spec, _ = ALL[name]
    m = spec.dim
    E = np.eye(2 * m)
    for p in points(name, 10):
        N = canonical_connection(spec, p)
        B = frame_brackets(N)
        assert np.allclose(B, lie_bracket_constant(E[:, None], E[None, :], N),
                           rtol=1e-8, atol=1e-12)
        assert not np.any(B[m:, m:])


def test_horizontal_bracket_on_sphere_is_curvature():
    # [delta_1, delta_2] = R^k_12 d/dy^k with R^k_ij = delta_j N^k_i - delta_i N^k_j
    for p in points("sphere", 10):
        B = frame_brackets(canonical_connection(SPHERE, p))
        R = oracles.nonlinear_curvature_from_riemann(SPHERE_A, p.x, p.y)
        assert np.allclose(B[0, 1, 2:], R[:, 0, 1], rtol=1e-8, atol=1e-12)
        assert np.abs(R).max() > 1e-3


def test_torsion_euclidean_and_constant_S():
    S, _ = torsion_pair(2, 1)
    d = connection_data(EUCLIDEAN[2], ChartPoint([0, 0], [1, 1]), CANONICAL, S, None)
    t = torsion_components(d)
    assert np.array_equal(t.vv, S.constant)
    for block in ("hv_v", "hh_h", "hh_v"):
        assert not np.any(t.blocks()[block])
    # S feeds C through the coefficient formula, so the mixed block is C^k_ji != 0
    assert np.array_equal(t.hv_h, d.C.transpose(0, 2, 1)) and np.any(d.C)
    zero = torsion_components(_data(EUCLIDEAN[2], ChartPoint([0, 0], [1, 1])))
    assert zero.max_abs() == 0.0


def test_riemannian_torsion_blocks():
    for p in points("curved", 20):
        d = _data(CURVED, p)
        t = torsion_from_D(d)
        assert np.abs(t.hv_v).max() < 1e-12
        assert np.allclose(t.hh_v, -oracles.nonlinear_curvature_from_riemann(CURVED_A, p.x, p.y),
                           rtol=1e-8, atol=1e-12)


@pytest.mark.parametrize("name,source", [("randers", CANONICAL), ("lorentz4", CANONICAL),
                                         ("randers3", EXPR_N3), ("euclidean3", EXPR_N3)])
def test_torsion_displays_match_direct_torsion(name, source):
    spec, _ = ALL[name]
    for p in points(name, 10):
        d = _data(spec, p, source, seed=11)
        direct, display = torsion_from_D(d), torsion_components(d)
        for key in direct.blocks():
            assert np.allclose(direct.blocks()[key], display.blocks()[key],
                               rtol=1e-10, atol=1e-12), key


def test_minkowski_torsion_reduces_to_cartan_tensor():
    # with N = 0 and S = T = 0 only the mixed horizontal block C^k_ji survives
    for p in points("quartic_minkowski", 10):
        d = _data(QUARTIC, p)
        t = torsion_from_D(d)
        for key in ("vv", "hv_v", "hh_h", "hh_v"):
            assert np.abs(t.blocks()[key]).max() < 1e-10
        assert np.allclose(t.hv_h, d.C.transpose(0, 2, 1), rtol=1e-10, atol=1e-12)
        assert np.abs(d.C).max() > 1e-3
    for p in points("quadratic_minkowski", 10):
        assert torsion_from_D(_data(QUADRATIC_MINKOWSKI, p)).max_abs() < 1e-10


def test_pullback_flat_is_torsion_free():
    for p in points("pullback_flat", 20):
        assert torsion_from_D(_data(PULLBACK_FLAT, p)).max_abs() < 1e-10


# -- torsion inputs --------------------------------------------------------

def test_non_skew_constant_is_rejected():
    S = np.zeros((2, 2, 2))
    S[0, 0, 0] = 1.0
    with pytest.raises(SkewSymmetryError, match=r"S violates skew-symmetry at \(k,i,j\)=\(1,1,1\)"):
        TorsionField("S", S, 2)


def test_expression_torsion_checked_at_points():
    ok = TorsionField("T", [[["0", "x1"], ["-x1", "0"]], [["0", "0"], ["0", "0"]]], 2)
    ok.validate_at(ChartPoint([0.5, 0], [1, 0]))
    bad = TorsionField("T", [[["0", "x1"], ["x1", "0"]], [["0", "0"], ["0", "0"]]], 2)
    bad.validate_at(ChartPoint([0.0, 0], [1, 0]))
    with pytest.raises(SkewSymmetryError):
        bad.validate_at(ChartPoint([0.5, 0], [1, 0]))


def test_random_torsion_is_skew():
    S = TorsionField.random("S", 4, 1.0, np.random.default_rng(0))
    assert np.array_equal(S.constant, -S.constant.transpose(0, 2, 1))
    assert not S.is_zero and TorsionField.zero("S", 4).is_zero


def test_connection_source_config():
    cfg = EXPR_N3.to_config()
    again = ConnectionSource.from_config(cfg, 3)
    p = points("randers3", 1)[0]
    assert np.array_equal(again.at(None, p).N, EXPR_N3.at(None, p).N)
    with pytest.raises(ValueError):
        ConnectionSource("spray")
    with pytest.raises(ValueError):
        ConnectionSource.from_config({"source": "expression"}, 2)
    with pytest.raises(ValueError):
        ConnectionSource.expression([["y1"]], 2)
