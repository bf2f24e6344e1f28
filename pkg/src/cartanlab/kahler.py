"""Almost Hermitian structure (J, G) on M', the fundamental 2-form and integrability.

Frame triples for dPhi are indexed like the adapted frame: ``a < m`` is a
horizontal vector delta_a, ``m + a`` is the vertical d/dy^a.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .connection import ConnectionData, frame_brackets
from .frame import AdaptedVector, J_matrix, apply_J, sasaki_matrix
from .tolerance import Comparison

__all__ = ["apply_J", "sasaki_inner", "fundamental_form", "dPhi_components",
           "kahler_residuals", "nijenhuis", "TwoFormComponents", "DPhiBlocks",
           "NijenhuisBlocks"]


def sasaki_inner(X: AdaptedVector, Y: AdaptedVector, g: np.ndarray) -> float:
    """G(X, Y) = g_ij X^i Y^j on horizontal parts plus the same on vertical parts."""
    return float(X.h @ g @ Y.h + X.v @ g @ Y.v)


@dataclass(frozen=True, eq=False)
class TwoFormComponents:
    """Phi(X, Y) = G(X, JY) on frame pairs, by block."""

    phi_hh: np.ndarray  # Phi(delta_i, delta_j)
    phi_hv: np.ndarray  # Phi(delta_i, d/dy^j)
    phi_vh: np.ndarray  # Phi(d/dy^i, delta_j)
    phi_vv: np.ndarray  # Phi(d/dy^i, d/dy^j)

    def matrix(self) -> np.ndarray:
        return np.block([[self.phi_hh, self.phi_hv], [self.phi_vh, self.phi_vv]])


def _phi_matrix(g: np.ndarray) -> np.ndarray:
    return sasaki_matrix(g) @ J_matrix(g.shape[0])


def fundamental_form(g: np.ndarray) -> TwoFormComponents:
    m = g.shape[0]
    phi = _phi_matrix(g)
    return TwoFormComponents(phi[:m, :m], phi[:m, m:], phi[m:, :m], phi[m:, m:])


@dataclass(frozen=True, eq=False)
class DPhiBlocks:
    vvv: np.ndarray  # dPhi(d_i, d_j, d_k)
    vvh: np.ndarray  # dPhi(d_i, d_j, delta_k)
    vhh: np.ndarray  # dPhi(d_i, delta_j, delta_k)
    hhh: np.ndarray  # dPhi(delta_i, delta_j, delta_k)
    full: np.ndarray  # every frame triple, shape (2m, 2m, 2m)

    def max_abs(self) -> float:
        return float(np.abs(self.full).max())


def dPhi_components(data: ConnectionData) -> DPhiBlocks:
    """dPhi on frame triples from the invariant three-argument formula.

    dPhi(X0,X1,X2) = X0 Phi(X1,X2) - X1 Phi(X0,X2) + X2 Phi(X0,X1)
                     - Phi([X0,X1],X2) + Phi([X0,X2],X1) - Phi([X1,X2],X0)
    """
    m = data.dim
    J = J_matrix(m)
    phi = _phi_matrix(data.g)
    # dG[a, b, c] = e_c(G(e_a, e_b)); derivatives of g along delta_c and d/dy^c
    dg = np.concatenate([data.delta_g, data.dg_dy], axis=-1)
    dG = np.zeros((2 * m, 2 * m, 2 * m))
    dG[:m, :m] = dg
    dG[m:, m:] = dg
    dphi = np.einsum("adc,db->abc", dG, J)  # e_c(Phi(e_a, e_b))
    B = frame_brackets(data.nonlinear)
    bphi = np.einsum("abd,dc->abc", B, phi)  # Phi([e_a, e_b], e_c)
    full = (dphi.transpose(2, 0, 1) - dphi.transpose(0, 2, 1) + dphi
            - bphi + bphi.transpose(0, 2, 1) - bphi.transpose(2, 0, 1))
    h, v = slice(0, m), slice(m, 2 * m)
    return DPhiBlocks(full[v, v, v], full[v, v, h], full[v, h, h], full[h, h, h], full)


def kahler_residuals(data: ConnectionData) -> dict[str, Comparison]:
    """The two closedness conditions on Phi, entries indexed [i, j, k].

    mixed: delta_j g_ik + dN^h_k/dy^i g_hj = delta_k g_ij + dN^h_j/dy^i g_hk
    cyclic: R^h_ij g_hk + R^h_jk g_hi = R^h_ik g_hj
    """
    g, dlt = data.g, data.delta_g
    dN = data.nonlinear.dN_dy
    R = data.R
    mixed = Comparison(
        dlt.transpose(0, 2, 1) + np.einsum("hki,hj->ijk", dN, g),
        dlt + np.einsum("hji,hk->ijk", dN, g),
    )
    Rl = np.einsum("hij,hk->ijk", R, g)  # Rl[i, j, k] = R^h_ij g_hk
    cyclic = Comparison(Rl + Rl.transpose(2, 0, 1), Rl.transpose(0, 2, 1))
    return {"mixed": mixed, "cyclic": cyclic}


@dataclass(frozen=True, eq=False)
class NijenhuisBlocks:
    hh: np.ndarray  # N_J(delta_i, delta_j), adapted components on the last axis
    hv: np.ndarray  # N_J(delta_i, d/dy^j)
    vv: np.ndarray  # N_J(d/dy^i, d/dy^j)
    delta_symmetry: Comparison  # delta_i N^k_j vs delta_j N^k_i, [k, i, j]
    y_symmetry: Comparison  # dN^k_j/dy^i vs dN^k_i/dy^j, [k, i, j]

    def max_abs(self) -> float:
        return float(max(np.abs(b).max() for b in (self.hh, self.hv, self.vv)))


def nijenhuis(data: ConnectionData) -> NijenhuisBlocks:
    """N_J(X, Y) = [JX, JY] - J[JX, Y] - J[X, JY] - [X, Y] on frame pairs."""
    m = data.dim
    J = J_matrix(m)
    B = frame_brackets(data.nonlinear)

    def br(U, W):
        # brackets of constant-coefficient combinations of frame fields
        return np.einsum("...a,...b,abc->...c", U, W, B)

    E = np.eye(2 * m)
    X, Y = E[:, None, :], E[None, :, :]
    JX, JY = X @ J.T, Y @ J.T
    NJ = br(JX, JY) - br(JX, Y) @ J.T - br(X, JY) @ J.T - br(X, Y)
    h, v = slice(0, m), slice(m, 2 * m)
    N = data.nonlinear
    return NijenhuisBlocks(
        NJ[h, h], NJ[h, v], NJ[v, v],
        Comparison(N.deltaN.transpose(0, 2, 1), N.deltaN),
        Comparison(N.dN_dy.transpose(0, 2, 1), N.dN_dy),
    )
