"""Finite-dimensional normed spaces (l1, l2, l-infinity)."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .exact import Surd


class Norm(str, enum.Enum):
    L1 = "l1"
    L2 = "l2"
    LINF = "linf"

    @property
    def code(self) -> int:
        return {"l1": 0, "l2": 1, "linf": 2}[self.value]


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class NormedSpace:
    dimension: int
    norm: Norm = Norm.L2

    def __post_init__(self):
        object.__setattr__(self, "norm", Norm(self.norm))
        if int(self.dimension) < 1:
            raise ValueError("dimension must be positive")

    def point(self, coords) -> np.ndarray:
        """Validated read-only float64 vector of this space."""
        x = np.array(coords, dtype=np.float64).reshape(-1)
        if x.shape[0] != self.dimension:
            raise DimensionMismatch(f"expected {self.dimension} coordinates, got {x.shape[0]}")
        if not np.all(np.isfinite(x)):
            raise ValueError("point has non-finite coordinates")
        x.flags.writeable = False
        return x

    def zero(self) -> np.ndarray:
        return self.point(np.zeros(self.dimension))

    def norm_of(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        if self.norm is Norm.L1:
            return float(np.sum(np.abs(x)))
        if self.norm is Norm.L2:
            return float(np.sqrt(np.dot(x, x)))
        return float(np.max(np.abs(x)))

    def norms(self, X) -> np.ndarray:
        """Row-wise norms of an ``(m, d)`` array."""
        X = np.asarray(X, dtype=np.float64)
        if self.norm is Norm.L1:
            return np.sum(np.abs(X), axis=-1)
        if self.norm is Norm.L2:
            return np.sqrt(np.einsum("ij,ij->i", X, X))
        return np.max(np.abs(X), axis=-1)

    def exact_norm(self, x) -> Surd:
        """Norm of the float vector ``x`` as an exact surd (coordinates read exactly)."""
        q = [Fraction(float(c)) for c in np.asarray(x, dtype=np.float64).reshape(-1)]
        if self.norm is Norm.L1:
            return Surd(sum((abs(c) for c in q), Fraction(0)))
        if self.norm is Norm.L2:
            return Surd(sum((c * c for c in q), Fraction(0)), 2)
        return Surd(max((abs(c) for c in q), default=Fraction(0)))

    def exact_distance(self, x, y) -> Surd:
        qx = [Fraction(float(c)) for c in np.asarray(x).reshape(-1)]
        qy = [Fraction(float(c)) for c in np.asarray(y).reshape(-1)]
        if len(qx) != len(qy):
            raise DimensionMismatch("vectors of different length")
        d = [a - b for a, b in zip(qx, qy)]
        if self.norm is Norm.L1:
            return Surd(sum((abs(c) for c in d), Fraction(0)))
        if self.norm is Norm.L2:
            return Surd(sum((c * c for c in d), Fraction(0)), 2)
        return Surd(max((abs(c) for c in d), default=Fraction(0)))

    def operator_norm(self, A) -> float:
        """Norm of the matrix ``A`` induced by this space's norm."""
        A = np.asarray(A, dtype=np.float64)
        if self.norm is Norm.L1:
            return float(np.max(np.sum(np.abs(A), axis=0)))
        if self.norm is Norm.L2:
            return float(np.linalg.norm(A, 2))
        return float(np.max(np.sum(np.abs(A), axis=1)))
