"""Vectors in the adapted frame {delta/delta x^i, d/dy^i} and the map J.

Adapted components are ordered horizontal first: index ``a < m`` is
``delta_a = d/dx^a - N^j_a d/dy^j`` and index ``m + a`` is ``d/dy^a``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class AdaptedVector:
    h: np.ndarray  # components on delta/delta x^i
    v: np.ndarray  # components on d/dy^i

    def __post_init__(self):
        object.__setattr__(self, "h", np.asarray(self.h, dtype=float))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float))
        if self.h.shape != self.v.shape:
            raise ValueError("horizontal and vertical parts differ in dimension")

    @property
    def dim(self) -> int:
        return self.h.shape[0]

    @classmethod
    def from_array(cls, arr) -> "AdaptedVector":
        arr = np.asarray(arr, dtype=float)
        m = arr.shape[0] // 2
        return cls(arr[:m], arr[m:])

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.h, self.v])

    @classmethod
    def horizontal(cls, i: int, m: int) -> "AdaptedVector":
        """The frame vector delta/delta x^(i+1)."""
        return cls(np.eye(m)[i], np.zeros(m))

    @classmethod
    def vertical(cls, i: int, m: int) -> "AdaptedVector":
        """The frame vector d/dy^(i+1)."""
        return cls(np.zeros(m), np.eye(m)[i])

    def __add__(self, other: "AdaptedVector") -> "AdaptedVector":
        return AdaptedVector(self.h + other.h, self.v + other.v)

    def __sub__(self, other: "AdaptedVector") -> "AdaptedVector":
        return AdaptedVector(self.h - other.h, self.v - other.v)

    def __neg__(self) -> "AdaptedVector":
        return AdaptedVector(-self.h, -self.v)

    def __mul__(self, c: float) -> "AdaptedVector":
        return AdaptedVector(c * self.h, c * self.v)

    __rmul__ = __mul__


def apply_J(v: AdaptedVector) -> AdaptedVector:
    """J(delta_i) = -d/dy^i, J(d/dy^i) = delta_i, i.e. (h, v) -> (v, -h)."""
    return AdaptedVector(v.v, -v.h)


def J_matrix(m: int) -> np.ndarray:
    """Matrix of J acting on stacked adapted components (h, v)."""
    out = np.zeros((2 * m, 2 * m))
    out[:m, m:] = np.eye(m)
    out[m:, :m] = -np.eye(m)
    return out


def sasaki_matrix(g: np.ndarray) -> np.ndarray:
    """G = g_ij dx^i dx^j + g_ij dy^i dy^j in the adapted frame: diag(g, g)."""
    m = g.shape[0]
    out = np.zeros((2 * m, 2 * m))
    out[:m, :m] = g
    out[m:, m:] = g
    return out
