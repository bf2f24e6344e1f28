"""Mixed absolute/relative comparison of the two sides of an identity."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ATOL = 1e-12
RTOL = 1e-8


def close(a, b, atol: float = ATOL, rtol: float = RTOL) -> bool:
    """|a - b| <= atol + rtol * max(|a|, |b|), entrywise."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return bool(np.all(np.abs(a - b) <= atol + rtol * np.maximum(np.abs(a), np.abs(b))))


@dataclass(frozen=True, eq=False)
class Comparison:
    """Left- and right-hand sides of an identity that should hold entrywise."""

    lhs: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        lhs = np.asarray(self.lhs, dtype=float)
        rhs = np.broadcast_to(np.asarray(self.rhs, dtype=float), lhs.shape)
        object.__setattr__(self, "lhs", lhs)
        object.__setattr__(self, "rhs", rhs)

    @property
    def residual(self) -> np.ndarray:
        return self.lhs - self.rhs

    @property
    def max_abs(self) -> float:
        r = self.residual
        return float(np.abs(r).max()) if r.size else 0.0

    def excess(self, atol: float = ATOL, rtol: float = RTOL) -> float:
        """Largest ratio |lhs - rhs| / (atol + rtol * scale); <= 1 means close."""
        if not self.lhs.size:
            return 0.0
        scale = np.maximum(np.abs(self.lhs), np.abs(self.rhs))
        return float((np.abs(self.residual) / (atol + rtol * scale)).max())

    def close(self, atol: float = ATOL, rtol: float = RTOL) -> bool:
        return close(self.lhs, self.rhs, atol, rtol)
