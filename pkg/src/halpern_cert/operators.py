"""Operator library: nonexpansive maps and contractions on a normed space.

Every built-in operator is an affine map, a coordinate box clip, or a
Euclidean ball projection, which is also how the compiled kernel sees it
(``code`` 0, 1, 2). Lipschitz claims of affine maps are certified from the
induced matrix norm; the rest rely on the standard facts (clipping is
1-Lipschitz in every l_p norm, Euclidean projections only in l2).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .exact import as_fraction
from .spaces import Norm, NormedSpace

AFFINE, BOX, BALL, CUSTOM = 0, 1, 2, -1
CLAIM_SLACK = 1e-12


class InadmissibleOperator(ValueError):
    """Operator cannot be used with the requested norm or claim."""


@dataclass(frozen=True, eq=False)
class Operator:
    kind: str
    dimension: int
    lipschitz: Fraction = Fraction(1)
    code: int = AFFINE
    matrix: np.ndarray | None = field(default=None, repr=False)
    offset: np.ndarray | None = field(default=None, repr=False)
    lower: np.ndarray | None = field(default=None, repr=False)
    upper: np.ndarray | None = field(default=None, repr=False)
    radius: float = 0.0
    func: Callable | None = field(default=None, repr=False)
    params: dict = field(default_factory=dict)
    l2_only: bool = False

    @property
    def rho(self) -> Fraction:
        return self.lipschitz

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.code == AFFINE:
            return self.matrix @ x + self.offset
        if self.code == BOX:
            return np.clip(x, self.lower, self.upper)
        if self.code == BALL:
            d = x - self.offset
            r = math.sqrt(float(d @ d))
            return x.copy() if r <= self.radius else self.offset + d * (self.radius / r)
        return np.asarray(self.func(x), dtype=np.float64)

    def apply_many(self, X) -> np.ndarray:
        """Row-wise application to an ``(m, d)`` array."""
        X = np.asarray(X, dtype=np.float64)
        if self.code == AFFINE:
            return X @ self.matrix.T + self.offset
        if self.code == BOX:
            return np.clip(X, self.lower, self.upper)
        return np.array([self(x) for x in X]).reshape(X.shape)

    def kernel_args(self):
        """Flat arrays for the compiled iteration kernel."""
        d = self.dimension
        z = np.zeros(d)
        if self.code == AFFINE:
            return AFFINE, self.matrix, self.offset, z, z, 0.0
        if self.code == BOX:
            return BOX, np.zeros((d, d)), z, self.lower, self.upper, 0.0
        if self.code == BALL:
            return BALL, np.zeros((d, d)), self.offset, z, z, float(self.radius)
        raise TypeError("custom operators have no kernel form")

    def certify(self, space: NormedSpace) -> bool:
        """Check the Lipschitz claim in ``space``; ``False`` means "unverified".

        Raises :class:`InadmissibleOperator` when the claim is provably false
        or the kind is not admitted for the norm.
        """
        if self.dimension != space.dimension:
            raise InadmissibleOperator(f"{self.kind} acts on R^{self.dimension}, space is R^{space.dimension}")
        if self.l2_only and space.norm is not Norm.L2:
            raise InadmissibleOperator(f"{self.kind} is only admitted with the l2 norm")
        if self.code == AFFINE:
            op_norm = space.operator_norm(self.matrix)
            if op_norm > float(self.lipschitz) + CLAIM_SLACK:
                raise InadmissibleOperator(
                    f"{self.kind}: induced {space.norm.value} norm {op_norm:.17g} exceeds claimed {self.lipschitz}")
            return True
        if self.code in (BOX, BALL):
            if self.lipschitz < 1:
                raise InadmissibleOperator(f"{self.kind} is not a contraction")
            return True
        return False

    def describe(self) -> str:
        args = ", ".join(f"{k}={v}" for k, v in self.params.items())
        return f"{self.kind}({args})"


def _mat(A, d=None) -> np.ndarray:
    A = np.array(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or (d is not None and A.shape[0] != d):
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    A.flags.writeable = False
    return A


def _vec(v, d=None) -> np.ndarray:
    v = np.array(v, dtype=np.float64).reshape(-1)
    if d is not None and v.shape[0] != d:
        raise ValueError(f"expected a vector of length {d}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise ValueError("non-finite vector entry")
    v.flags.writeable = False
    return v


def _affine(kind, A, b, lipschitz, params, l2_only=False) -> Operator:
    A = _mat(A)
    b = _vec(b, A.shape[0])
    return Operator(kind, A.shape[0], as_fraction(lipschitz), AFFINE, A, b,
                    params=params, l2_only=l2_only)


def identity(dimension: int) -> Operator:
    return _affine("identity", np.eye(dimension), np.zeros(dimension), 1, {"dimension": dimension})


def rotation(angle: float, dimension: int = 2, plane=(0, 1)) -> Operator:
    i, j = plane
    if i == j or not (0 <= i < dimension and 0 <= j < dimension):
        raise ValueError(f"bad rotation plane {plane} in R^{dimension}")
    A = np.eye(dimension)
    c, s = math.cos(angle), math.sin(angle)
    A[i, i], A[i, j], A[j, i], A[j, j] = c, -s, s, c
    return _affine("rotation", A, np.zeros(dimension), 1,
                   {"angle": float(angle), "dimension": dimension, "plane": [i, j]}, l2_only=True)


def reflection(normal, offset: float = 0.0) -> Operator:
    """Reflection through the hyperplane ``<normal, x> = offset``."""
    a = _vec(normal)
    aa = float(a @ a)
    if aa == 0.0:
        raise ValueError("hyperplane normal must be nonzero")
    A = np.eye(a.shape[0]) - 2.0 * np.outer(a, a) / aa
    b = 2.0 * float(offset) * a / aa
    return _affine("reflection", A, b, 1,
                   {"normal": a.tolist(), "offset": float(offset)}, l2_only=True)


def averaged_linear(matrix, weight: float) -> Operator:
    """``x -> (1 - w) x + w M x``; nonexpansive when ``M`` is in the norm used."""
    M = _mat(matrix)
    w = float(weight)
    if not 0.0 <= w <= 1.0:
        raise ValueError("weight must lie in [0, 1]")
    A = (1.0 - w) * np.eye(M.shape[0]) + w * M
    return _affine("averaged_linear", A, np.zeros(M.shape[0]), 1,
                   {"matrix": M.tolist(), "weight": w})


def affine_contraction(matrix, offset, rho) -> Operator:
    rho = as_fraction(rho)
    if not 0 <= rho < 1:
        raise InadmissibleOperator(f"contraction factor must lie in [0, 1), got {rho}")
    return _affine("affine_contraction", matrix, offset, rho,
                   {"matrix": _mat(matrix).tolist(), "offset": _vec(offset).tolist(),
                    "rho": str(rho)})


def constant(point) -> Operator:
    u = _vec(point)
    d = u.shape[0]
    return _affine("constant", np.zeros((d, d)), u, 0, {"point": u.tolist()})


def box_projection(lower, upper) -> Operator:
    lo, hi = _vec(lower), _vec(upper, len(lower))
    if np.any(lo > hi):
        raise ValueError("empty box")
    return Operator("box_projection", lo.shape[0], Fraction(1), BOX, lower=lo, upper=hi,
                    params={"lower": lo.tolist(), "upper": hi.tolist()})


def ball_projection(center, radius: float) -> Operator:
    c = _vec(center)
    if radius < 0:
        raise ValueError("negative radius")
    return Operator("ball_projection", c.shape[0], Fraction(1), BALL, offset=c,
                    radius=float(radius),
                    params={"center": c.tolist(), "radius": float(radius)}, l2_only=True)


def custom(func: Callable, dimension: int, lipschitz=1, name: str = "custom") -> Operator:
    """Arbitrary callable; its Lipschitz claim can only be spot-checked."""
    return Operator(name, int(dimension), as_fraction(lipschitz), CUSTOM, func=func,
                    params={"lipschitz": str(as_fraction(lipschitz))})


def sampled_lipschitz(op: Operator, space: NormedSpace, pairs: int = 10_000,
                      seed: int = 0, scale: float = 10.0) -> float:
    """Largest ``|Ax - Ay| / |x - y|`` over random pairs."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(-scale, scale, size=(pairs, space.dimension))
    Y = X + rng.normal(size=X.shape) * rng.choice([1e-3, 1.0, scale], size=(pairs, 1))
    num = space.norms(op.apply_many(X) - op.apply_many(Y))
    den = space.norms(X - Y)
    keep = den > 0
    return float(np.max(num[keep] / den[keep]))
