"""Forward-mode automatic differentiation with truncated multivariate jets.

A :class:`Jet` carries the value and every mixed partial derivative, up to a
fixed total order, of a scalar function of ``nvars`` variables at one point.
Partials are stored as plain derivatives (not Taylor coefficients), densely,
in graded order: index 0 is the value, then the ``nvars`` first partials, then
the second partials over sorted index pairs, and so on.

Jets may also be batched: ``coef`` has shape ``(*batch, ncoef)`` and all
arithmetic broadcasts over the batch axes, which lets matrix- and
tensor-valued fields be handled with numpy idioms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations_with_replacement
from typing import Iterable, Sequence

import numpy as np

MAX_ORDER = 4
SINGULAR_EPS = 1e-14


class DomainError(ValueError):
    """Raised when an elementary function is evaluated outside its domain."""


# ---------------------------------------------------------------------------
# index tables


@dataclass(frozen=True)
class _Basis:
    nvars: int
    order: int
    indices: tuple[tuple[int, ...], ...]  # sorted variable tuples, graded order
    lookup: dict
    # product table, sorted by target index
    a: np.ndarray
    b: np.ndarray
    w: np.ndarray
    starts: np.ndarray


def ncoef(nvars: int, order: int) -> int:
    return math.comb(nvars + order, order)


@lru_cache(maxsize=None)
def _basis(nvars: int, order: int) -> _Basis:
    indices = [idx for d in range(order + 1)
               for idx in combinations_with_replacement(range(nvars), d)]
    lookup = {idx: k for k, idx in enumerate(indices)}

    a_list, b_list, w_list, starts = [], [], [], []
    for c in indices:
        starts.append(len(a_list))
        counts: dict[int, int] = {}
        for v in c:
            counts[v] = counts.get(v, 0) + 1
        vars_ = list(counts)
        # every sub-multiset of c, with its multinomial weight
        for split in _sub_multisets([counts[v] for v in vars_]):
            left = tuple(v for v, k in zip(vars_, split) for _ in range(k))
            right = tuple(v for v, k in zip(vars_, split)
                          for _ in range(counts[v] - k))
            weight = 1
            for v, k in zip(vars_, split):
                weight *= math.comb(counts[v], k)
            a_list.append(lookup[tuple(sorted(left))])
            b_list.append(lookup[tuple(sorted(right))])
            w_list.append(float(weight))
    return _Basis(nvars, order, tuple(indices), lookup,
                  np.array(a_list), np.array(b_list), np.array(w_list),
                  np.array(starts))


def _sub_multisets(counts: list[int]):
    if not counts:
        yield ()
        return
    for k in range(counts[0] + 1):
        for rest in _sub_multisets(counts[1:]):
            yield (k,) + rest


@lru_cache(maxsize=None)
def _shift(nvars: int, order: int, var: int) -> np.ndarray:
    """Map each index of the order-1 basis to the index of idx + {var}."""
    hi = _basis(nvars, order)
    lo = _basis(nvars, order - 1)
    return np.array([hi.lookup[tuple(sorted(idx + (var,)))] for idx in lo.indices])


# ---------------------------------------------------------------------------
# Jet


class Jet:
    """Truncated multivariate Taylor value with plain-derivative storage."""

    __slots__ = ("coef", "nvars", "order")
    __array_ufunc__ = None  # make ndarray * Jet dispatch to Jet.__rmul__

    def __init__(self, coef, nvars: int, order: int):
        coef = np.asarray(coef, dtype=float)
        if coef.shape[-1] != ncoef(nvars, order):
            raise ValueError(
                f"expected {ncoef(nvars, order)} coefficients for nvars={nvars}, "
                f"order={order}, got {coef.shape[-1]}")
        coef.flags.writeable = False
        self.coef = coef
        self.nvars = nvars
        self.order = order

    # -- construction -----------------------------------------------------
    @classmethod
    def constant(cls, value, nvars: int, order: int) -> "Jet":
        value = np.asarray(value, dtype=float)
        coef = np.zeros(value.shape + (ncoef(nvars, order),))
        coef[..., 0] = value
        return cls(coef, nvars, order)

    @classmethod
    def variable(cls, value: float, var: int, nvars: int, order: int) -> "Jet":
        coef = np.zeros(ncoef(nvars, order))
        coef[0] = value
        if order >= 1:
            coef[1 + var] = 1.0
        return cls(coef, nvars, order)

    # -- inspection -------------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.coef.shape[:-1]

    @property
    def value(self):
        v = self.coef[..., 0]
        return float(v) if v.ndim == 0 else v

    @property
    def grad(self) -> np.ndarray:
        """First partials, shape ``(*batch, nvars)``."""
        if self.order < 1:
            raise ValueError("jet of order 0 carries no derivatives")
        return self.coef[..., 1:1 + self.nvars]

    def partial(self, idx: Sequence[int]):
        """Plain mixed partial for the variable multi-index ``idx``."""
        key = tuple(sorted(idx))
        if len(key) > self.order:
            raise ValueError(
                f"derivative of order {len(key)} exceeds jet order {self.order}")
        if any(v < 0 or v >= self.nvars for v in key):
            raise IndexError(f"variable index out of range in {idx}")
        v = self.coef[..., _basis(self.nvars, self.order).lookup[key]]
        return float(v) if v.ndim == 0 else v

    def __repr__(self) -> str:
        return f"Jet(shape={self.shape}, nvars={self.nvars}, order={self.order})"

    # -- structural -------------------------------------------------------
    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise ValueError("cannot raise the order of a jet")
        if order == self.order:
            return self
        return Jet(self.coef[..., :ncoef(self.nvars, order)], self.nvars, order)

    def diff(self, var: int) -> "Jet":
        """Jet of the partial derivative w.r.t. ``var`` (one order lower)."""
        if self.order < 1:
            raise ValueError("cannot differentiate a jet of order 0")
        return Jet(self.coef[..., _shift(self.nvars, self.order, var)],
                   self.nvars, self.order - 1)

    def __getitem__(self, key) -> "Jet":
        if not isinstance(key, tuple):
            key = (key,)
        if any(k is Ellipsis for k in key):
            key = key + (slice(None),)
        return Jet(self.coef[key], self.nvars, self.order)

    def sum(self, axis=None) -> "Jet":
        nb = len(self.shape)
        if axis is None:
            axis = tuple(range(nb))
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        axes = tuple(a % nb for a in axes)
        return Jet(self.coef.sum(axis=axes), self.nvars, self.order)

    def transpose(self, *axes) -> "Jet":
        nb = len(self.shape)
        axes = axes or tuple(reversed(range(nb)))
        return Jet(self.coef.transpose(*axes, nb), self.nvars, self.order)

    def expand(self, axis: int) -> "Jet":
        """Insert a length-1 batch axis (like ``np.expand_dims``)."""
        nb = len(self.shape)
        axis = axis % (nb + 1)
        return Jet(np.expand_dims(self.coef, axis), self.nvars, self.order)

    # -- arithmetic -------------------------------------------------------
    def _align(self, other: "Jet") -> tuple["Jet", "Jet"]:
        if other.nvars != self.nvars:
            raise ValueError("jets over different variable sets")
        k = min(self.order, other.order)
        return self.truncate(k), other.truncate(k)

    def __neg__(self) -> "Jet":
        return Jet(-self.coef, self.nvars, self.order)

    def __pos__(self) -> "Jet":
        return self

    def __add__(self, other) -> "Jet":
        if isinstance(other, Jet):
            f, g = self._align(other)
            return Jet(f.coef + g.coef, f.nvars, f.order)
        c = np.asarray(other, dtype=float)
        coef = np.array(np.broadcast_to(self.coef, np.broadcast_shapes(
            self.coef.shape, c.shape + (1,))))
        coef[..., 0] += c
        return Jet(coef, self.nvars, self.order)

    __radd__ = __add__

    def __sub__(self, other) -> "Jet":
        return self + (-other)

    def __rsub__(self, other) -> "Jet":
        return (-self) + other

    def __mul__(self, other) -> "Jet":
        if isinstance(other, Jet):
            f, g = self._align(other)
            return _product(f, g)
        c = np.asarray(other, dtype=float)
        return Jet(self.coef * c[..., None], self.nvars, self.order)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Jet":
        if isinstance(other, Jet):
            return self * reciprocal(other)
        c = np.asarray(other, dtype=float)
        if np.any(np.abs(c) <= SINGULAR_EPS):
            raise DomainError("division by a value near zero")
        return Jet(self.coef / c[..., None], self.nvars, self.order)

    def __rtruediv__(self, other) -> "Jet":
        return reciprocal(self) * other

    def __pow__(self, p) -> "Jet":
        if isinstance(p, Jet):
            return exp(p * log(self))
        if float(p).is_integer():
            return _int_power(self, int(p))
        return _real_power(self, float(p))

    def __rpow__(self, base) -> "Jet":
        base = float(base)
        if base <= 0.0:
            raise DomainError("non-positive base raised to a variable power")
        return exp(self * math.log(base))


def _product(f: Jet, g: Jet) -> Jet:
    t = _basis(f.nvars, f.order)
    prod = f.coef[..., t.a] * g.coef[..., t.b] * t.w
    return Jet(np.add.reduceat(prod, t.starts, axis=-1), f.nvars, f.order)


def _compose(f: Jet, derivs: Sequence[np.ndarray]) -> Jet:
    """phi(f) from phi^(k)(f0), k = 0..order, via the Taylor series of phi."""
    u_coef = np.array(f.coef)
    u_coef[..., 0] = 0.0
    u = Jet(u_coef, f.nvars, f.order)
    out = Jet.constant(derivs[0], f.nvars, f.order).coef
    out = np.broadcast_to(out, np.broadcast_shapes(out.shape, f.coef.shape)).copy()
    power = u
    for k in range(1, f.order + 1):
        out = out + power.coef * (np.asarray(derivs[k]) / math.factorial(k))[..., None]
        if k < f.order:
            power = _product(power, u)
    return Jet(out, f.nvars, f.order)


def _falling(p: float, k: int) -> float:
    out = 1.0
    for i in range(k):
        out *= p - i
    return out


def _int_power(f: Jet, n: int) -> Jet:
    if n == 0:
        return Jet.constant(np.ones(f.shape), f.nvars, f.order)
    if n < 0:
        return reciprocal(_int_power(f, -n))
    result, base = None, f
    while n:
        if n & 1:
            result = base if result is None else _product(result, base)
        n >>= 1
        if n:
            base = _product(base, base)
    return result


def _real_power(f: Jet, p: float) -> Jet:
    t = np.asarray(f.coef[..., 0])
    if np.any(t <= SINGULAR_EPS):
        raise DomainError(f"non-integer power {p} of a non-positive value")
    return _compose(f, [_falling(p, k) * t ** (p - k) for k in range(f.order + 1)])


def reciprocal(f: Jet) -> Jet:
    t = np.asarray(f.coef[..., 0])
    if np.any(np.abs(t) <= SINGULAR_EPS):
        raise DomainError("division by a value near zero")
    return _compose(f, [_falling(-1.0, k) * t ** (-1.0 - k) for k in range(f.order + 1)])


# ---------------------------------------------------------------------------
# elementary functions (accept Jets or plain numbers)


def sqrt(f):
    if not isinstance(f, Jet):
        if f <= SINGULAR_EPS:
            raise DomainError("sqrt of a value near zero or negative")
        return math.sqrt(f)
    t = np.asarray(f.coef[..., 0])
    if np.any(t <= SINGULAR_EPS):
        raise DomainError("sqrt of a value near zero or negative")
    return _compose(f, [_falling(0.5, k) * t ** (0.5 - k) for k in range(f.order + 1)])


def exp(f):
    if not isinstance(f, Jet):
        return math.exp(f)
    e = np.exp(f.coef[..., 0])
    return _compose(f, [e] * (f.order + 1))


def log(f):
    if not isinstance(f, Jet):
        if f <= 0.0:
            raise DomainError("log of a non-positive value")
        return math.log(f)
    t = np.asarray(f.coef[..., 0])
    if np.any(t <= 0.0):
        raise DomainError("log of a non-positive value")
    derivs = [np.log(t)] + [(-1.0) ** (k - 1) * math.factorial(k - 1) * t ** (-k)
                            for k in range(1, f.order + 1)]
    return _compose(f, derivs)


def sin(f):
    if not isinstance(f, Jet):
        return math.sin(f)
    s, c = np.sin(f.coef[..., 0]), np.cos(f.coef[..., 0])
    return _compose(f, [(s, c, -s, -c)[k % 4] for k in range(f.order + 1)])


def cos(f):
    if not isinstance(f, Jet):
        return math.cos(f)
    s, c = np.sin(f.coef[..., 0]), np.cos(f.coef[..., 0])
    return _compose(f, [(c, -s, -c, s)[k % 4] for k in range(f.order + 1)])


ELEMENTARY = {"sqrt": sqrt, "exp": exp, "log": log, "sin": sin, "cos": cos}


# ---------------------------------------------------------------------------
# seeding and batched helpers


def seed_values(values: Iterable[float], order: int) -> list[Jet]:
    """One variable Jet per entry of ``values``."""
    values = [float(v) for v in values]
    if not 0 <= order <= MAX_ORDER:
        raise ValueError(f"order must be in 0..{MAX_ORDER}, got {order}")
    n = len(values)
    return [Jet.variable(v, i, n, order) for i, v in enumerate(values)]


def seed(point, order: int) -> list[Jet]:
    """Seed Jets for the chart variables (x^1..x^m, y^1..y^m) at ``point``.

    Variable ``i`` is x^(i+1) for i < m and y^(i-m+1) otherwise.
    """
    if not 0 <= order <= MAX_ORDER:
        raise ValueError(f"order must be in 0..{MAX_ORDER}, got {order}")
    y = np.asarray(point.y, dtype=float)
    if not np.any(y):
        raise DomainError("point not in M': fiber vector y is zero")
    return seed_values(np.concatenate([point.x, y]), order)


def partial(f: Jet, idx: Sequence[int]):
    """Plain mixed partial of ``f`` for the variable multi-index ``idx``."""
    return f.partial(idx)


def stack(jets: Sequence[Jet], axis: int = 0) -> Jet:
    order = min(j.order for j in jets)
    nvars = jets[0].nvars
    coefs = [j.truncate(order).coef for j in jets]
    nb = len(jets[0].shape)
    return Jet(np.stack(coefs, axis=axis % (nb + 1)), nvars, order)


def as_jet(value, like: Jet) -> Jet:
    if isinstance(value, Jet):
        return value
    return Jet.constant(value, like.nvars, like.order)


def matmul(a, b) -> Jet:
    """Matrix product over the last two batch axes; either side may be an ndarray."""
    if not isinstance(a, Jet):
        a = np.asarray(a, dtype=float)
        return Jet(np.einsum("...ij,...jkc->...ikc", a, b.coef), b.nvars, b.order)
    if not isinstance(b, Jet):
        b = np.asarray(b, dtype=float)
        return Jet(np.einsum("...ijc,...jk->...ikc", a.coef, b), a.nvars, a.order)
    return (a.expand(-1) * b.expand(-3)).sum(-2)


def inv(a: Jet) -> Jet:
    """Inverse of a matrix-valued Jet (batch shape ``(..., m, m)``).

    With ``a = a0 + e`` and ``e`` nilpotent, the Neumann series
    ``sum_k (-a0^-1 e)^k a0^-1`` terminates after ``order`` terms.
    """
    a0 = a.coef[..., 0]
    a0_inv = np.linalg.inv(a0)
    e_coef = np.array(a.coef)
    e_coef[..., 0] = 0.0
    step = matmul(-a0_inv, Jet(e_coef, a.nvars, a.order))
    result = Jet.constant(a0_inv, a.nvars, a.order)
    term = result
    for _ in range(a.order):
        term = matmul(step, term)
        result = result + term
    return result
