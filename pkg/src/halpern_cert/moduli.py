"""Rates, Cauchy moduli and rates of divergence as exact integer functions.

A :class:`Modulus` wraps a total function on the naturals. The combinators
below build new moduli from old ones without ever leaving exact integer
arithmetic, and :func:`validate_modulus` checks a modulus against the actual
sequence it claims to govern by brute-force evaluation.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, NamedTuple

import numpy as np

from .exact import EvaluationCeiling, Surd, as_fraction, ceil_frac, ceil_ln, tsub

DEFAULT_TOL = 1e-9
ABS_FLOOR = 1e-15
#: Largest index a validator will touch.
EVAL_CEILING = 10**8
_CHUNK = 1 << 20


class Kind(str, enum.Enum):
    CONVERGENCE_RATE = "convergence_rate"
    CAUCHY_MODULUS = "cauchy_modulus"
    DIVERGENCE_RATE = "divergence_rate"


@dataclass(frozen=True, eq=False)
class Modulus:
    """Total function N -> N tagged with the property it witnesses.

    ``nondecreasing`` may only be set when monotonicity is proved for the
    closed form; it lets :func:`g_plus` return ``g(n)`` directly.
    """

    kind: Kind
    fn: Callable[[int], int] = field(repr=False)
    description: str = ""
    nondecreasing: bool = False

    def __post_init__(self):
        object.__setattr__(self, "_cached", lru_cache(maxsize=8192)(self.fn))

    def __call__(self, k: int) -> int:
        k = int(k)
        if k < 0:
            raise ValueError(f"modulus argument must be natural, got {k}")
        v = self._cached(k)
        if not isinstance(v, int) or v < 0:
            raise ValueError(f"{self.description or 'modulus'} returned non-natural {v!r} at {k}")
        return v

    def retag(self, kind: Kind, description: str | None = None) -> "Modulus":
        return Modulus(kind, self.fn, description or self.description, self.nondecreasing)

    def __str__(self):
        return self.description or "<modulus>"


@dataclass(frozen=True, eq=False)
class ProductModulus:
    """``A(m, k)`` with ``A(m, k) >= m`` and ``prod_{i=m}^{A(m,k)} (1 - a_i) <= 1/(k+1)``."""

    fn: Callable[[int, int], int] = field(repr=False)
    description: str = ""

    def __post_init__(self):
        object.__setattr__(self, "_cached", lru_cache(maxsize=8192)(self.fn))

    def __call__(self, m: int, k: int) -> int:
        m, k = int(m), int(k)
        if m < 0 or k < 0:
            raise ValueError("product modulus arguments must be natural")
        v = self._cached(m, k)
        if not isinstance(v, int) or v < 0:
            raise ValueError(f"{self.description} returned non-natural {v!r} at ({m}, {k})")
        return v

    def __str__(self):
        return self.description or "<product modulus>"


@dataclass(frozen=True, eq=False)
class RealSequence:
    """Nonnegative real sequence; ``fn`` is vectorised over int64 index arrays."""

    fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    description: str = ""

    def __call__(self, n):
        scalar = np.ndim(n) == 0
        out = np.asarray(self.fn(np.asarray(n, dtype=np.int64)), dtype=np.float64)
        out = np.broadcast_to(out, np.shape(n)) if out.shape != np.shape(n) else out
        return float(out) if scalar else out

    def __str__(self):
        return self.description or "<sequence>"


def constant(c: int, kind: Kind = Kind.CAUCHY_MODULUS) -> Modulus:
    c = int(c)
    return Modulus(kind, lambda k: c, str(c), nondecreasing=True)


ZERO = constant(0)


def _scaled_ceil(c, m: int) -> int:
    """``ceil(c * m)`` for rational or :class:`Surd` ``c`` and natural ``m``."""
    if isinstance(c, Surd):
        return (c * m).ceil()
    return ceil_frac(as_fraction(c) * m)


def _positive(name, x):
    if isinstance(x, Surd):
        if x.is_zero():
            raise ValueError(f"{name} must be positive")
        return x
    q = as_fraction(x)
    if q <= 0:
        raise ValueError(f"{name} must be positive, got {x}")
    return q


# -- combinators -----------------------------------------------------------------

def rate_from_cauchy(phi: Modulus) -> Modulus:
    """Rate of convergence of ``a_n -> 0`` from a Cauchy modulus of ``sum a_n``."""
    return Modulus(Kind.CONVERGENCE_RATE, lambda k: phi(k) + 1,
                   f"({phi}) + 1", phi.nondecreasing)


def series_bound(phi: Modulus, partial_sums: RealSequence) -> int:
    """Least natural ``M >= sum_{i <= phi(0)} a_i + 1``; bounds the whole series."""
    s = partial_sums(phi(0))
    if s < 0 or not math.isfinite(s):
        raise ValueError(f"partial sum must be a nonnegative real, got {s}")
    return max(1, math.ceil(s + 1))


def combine_linear(phi1: Modulus, phi2: Modulus, q, r) -> Modulus:
    """Cauchy modulus of ``sum (q a_n + r b_n)`` from moduli of the two series."""
    q, r = _positive("q", q), _positive("r", r)

    def fn(k):
        return max(phi1(_scaled_ceil(2 * q, k + 1) - 1), phi2(_scaled_ceil(2 * r, k + 1) - 1))

    return Modulus(Kind.CAUCHY_MODULUS, fn,
                   f"max{{{phi1}(ceil(2*{q}(k+1))-1), {phi2}(ceil(2*{r}(k+1))-1)}}",
                   phi1.nondecreasing and phi2.nondecreasing)


def max_of(*moduli: Modulus, kind: Kind | None = None) -> Modulus:
    def fn(k):
        return max(m(k) for m in moduli)

    return Modulus(kind or moduli[0].kind, fn,
                   "max{" + ", ".join(str(m) for m in moduli) + "}",
                   all(m.nondecreasing for m in moduli))


class InverseSquareModuli(NamedTuple):
    phi: Modulus
    phi_star: Modulus
    psi: Modulus
    psi_star: Modulus


def inverse_square_moduli(t, L: int) -> InverseSquareModuli:
    """Moduli for ``sum t/(n+L)^2`` and the rates of ``t/(n+L)`` and ``t/(n+L)^2``.

    ``phi``/``phi_star`` are Cauchy moduli of the series (and rates for
    ``t/(n+L) -> 0``); ``psi``/``psi_star`` are rates for ``t/(n+L)^2 -> 0``.
    """
    t = t if isinstance(t, Surd) else as_fraction(t)
    if not isinstance(t, Surd) and t < 0:
        raise ValueError("t must be nonnegative")
    L = int(L)
    if L < 1:
        raise ValueError("L must be a positive natural")
    ts = Surd.of(t)

    def phi(k):
        return (ts * (k + 1)).ceil()

    def psi(k):
        return (ts * (k + 1)).sqrt().ceil()

    return InverseSquareModuli(
        Modulus(Kind.CAUCHY_MODULUS, phi, f"ceil({t}(k+1))", True),
        Modulus(Kind.CAUCHY_MODULUS, lambda k: tsub(phi(k), L), f"ceil({t}(k+1)) -. {L}", True),
        Modulus(Kind.CONVERGENCE_RATE, psi, f"ceil(sqrt({t}(k+1)))", True),
        Modulus(Kind.CONVERGENCE_RATE, lambda k: tsub(psi(k), L),
                f"ceil(sqrt({t}(k+1))) -. {L}", True),
    )


def xu_rate(theta: Modulus, chi: Modulus, L: int) -> Modulus:
    """Rate for ``s_n -> 0`` when ``s_{n+1} <= (1-a_n)s_n + c_n``, ``theta`` a
    rate of divergence of ``sum a_n``, ``chi`` a Cauchy modulus of ``sum c_n``
    and ``L`` a bound on ``(s_n)``."""
    L = int(L)
    if L < 1:
        raise ValueError("L must be a positive natural")

    def fn(k):
        return theta(chi(2 * k + 1) + 1 + ceil_ln(2 * L * (k + 1))) + 1

    return Modulus(Kind.CONVERGENCE_RATE, fn,
                   f"{theta}[n := {chi}(2k+1) + 1 + ceil(ln({2 * L}(k+1)))] + 1",
                   theta.nondecreasing and chi.nondecreasing)


def xu_rate_product(A: ProductModulus, chi: Modulus, L: int) -> Modulus:
    """As :func:`xu_rate`, with a product modulus ``A`` for ``prod (1 - a_i)``."""
    L = int(L)
    if L < 1:
        raise ValueError("L must be a positive natural")

    def fn(k):
        return A(chi(2 * k + 1) + 1, 2 * L * (k + 1) - 1) + 1

    return Modulus(Kind.CONVERGENCE_RATE, fn,
                   f"{A}[m := {chi}(2k+1) + 1, k := {2 * L}(k+1) - 1] + 1")


def g_plus(g: Modulus, n: int, *, ceiling: int = 10**7) -> int:
    """Running maximum ``max_{i <= n} g(i)``."""
    n = int(n)
    if n < 0:
        raise ValueError("n must be natural")
    if g.nondecreasing:
        return g(n)
    if n > ceiling:
        raise EvaluationCeiling(f"running maximum over {n + 1} values of {g}")
    return max(g(i) for i in range(n + 1))


def running_max(g: Modulus) -> Modulus:
    """``g+`` as a modulus of the same kind."""
    if g.nondecreasing:
        return g
    return Modulus(g.kind, lambda n: g_plus(g, n), f"({g})+", True)


# -- empirical validation --------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    k: object  # int, or (m, k) for product moduli
    n: int
    lhs: float
    rhs: float

    def __str__(self):
        return f"k={self.k} n={self.n}: {self.lhs:.17g} vs {self.rhs:.17g}"


@dataclass
class ModulusReport:
    kind: str
    description: str
    checked: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    unverifiable: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self):
        status = "ok" if self.ok else f"{len(self.violations)} violation(s)"
        s = f"{self.kind} {self.description}: {status}, {len(self.checked)} checked"
        if self.unverifiable:
            s += f", {len(self.unverifiable)} unverifiable"
        return s


def _within(lhs: float, rhs: float, tol: float) -> bool:
    return lhs <= rhs + tol * abs(rhs) + ABS_FLOOR


def _window_sum(seq: RealSequence, start: int, stop: int) -> float:
    """``sum_{start <= i < stop} seq(i)`` in chunks with pairwise summation."""
    parts = []
    for lo in range(start, stop, _CHUNK):
        idx = np.arange(lo, min(stop, lo + _CHUNK), dtype=np.int64)
        parts.append(float(np.sum(seq(idx))))
    return math.fsum(parts)


def validate_modulus(m, seq: RealSequence, k_max: int, tail: int, *,
                     tol: float = DEFAULT_TOL, ceiling: int = EVAL_CEILING,
                     m_max: int = 100) -> ModulusReport:
    """Check the defining inequality of ``m`` against ``seq`` by brute force.

    * Cauchy modulus: ``seq`` holds the series terms; every tail sum from
      ``n = m(k)`` of length up to ``tail`` must be ``<= 1/(k+1)``.
    * Rate of convergence: ``seq`` holds ``|a_n - a|``; the values on
      ``[m(k), m(k) + tail]`` must be ``<= 1/(k+1)``.
    * Rate of divergence: ``sum_{i <= m(k)} seq(i) >= k`` for ``k <= k_max``.
    * Product modulus: ``seq`` holds ``a_i``; checked for ``m <= m_max``.

    Indices beyond ``ceiling`` make that ``k`` unverifiable instead of failing.
    """
    if isinstance(m, ProductModulus):
        return _validate_product(m, seq, k_max, m_max, tol, ceiling)
    report = ModulusReport(m.kind.value, str(m))
    if m.kind is Kind.DIVERGENCE_RATE:
        return _validate_divergence(m, seq, k_max, tol, ceiling, report)
    for k in range(k_max + 1):
        try:
            n0 = m(k)
        except EvaluationCeiling as exc:
            report.unverifiable.append((k, str(exc)))
            continue
        if n0 + tail > ceiling:
            report.unverifiable.append((k, f"index {n0} beyond evaluation ceiling"))
            continue
        rhs = 1.0 / (k + 1)
        if m.kind is Kind.CAUCHY_MODULUS:
            terms = seq(np.arange(n0 + 1, n0 + tail + 1, dtype=np.int64))
            sums = np.cumsum(terms)
            j = int(np.argmax(sums)) if len(sums) else 0
            lhs = float(sums[j]) if len(sums) else 0.0
            n_bad = n0 + 1 + j
        else:
            vals = np.abs(seq(np.arange(n0, n0 + tail + 1, dtype=np.int64)))
            j = int(np.argmax(vals))
            lhs, n_bad = float(vals[j]), n0 + j
        report.checked.append(k)
        if not _within(lhs, rhs, tol):
            report.violations.append(Violation(k, n_bad, lhs, rhs))
    return report


def _validate_divergence(m, seq, k_max, tol, ceiling, report):
    targets = []
    for k in range(k_max + 1):
        try:
            idx = m(k)
        except EvaluationCeiling as exc:
            report.unverifiable.append((k, str(exc)))
            continue
        if idx > ceiling:
            report.unverifiable.append((k, f"index {idx} beyond evaluation ceiling"))
            continue
        targets.append((idx, k))
    targets.sort()
    pos, acc = 0, []
    for idx, k in targets:
        acc.append(_window_sum(seq, pos, idx + 1))
        pos = idx + 1
        total = math.fsum(acc)
        acc = [total]
        report.checked.append(k)
        if not total >= k - tol * k - ABS_FLOOR:
            report.violations.append(Violation(k, idx, total, float(k)))
    report.checked.sort()
    return report


def _validate_product(A, seq, k_max, m_max, tol, ceiling):
    report = ModulusReport("product_modulus", str(A))
    pairs = []
    for mm in range(m_max + 1):
        for k in range(k_max + 1):
            try:
                a = A(mm, k)
            except EvaluationCeiling as exc:
                report.unverifiable.append(((mm, k), str(exc)))
                continue
            if a > ceiling:
                report.unverifiable.append(((mm, k), f"index {a} beyond evaluation ceiling"))
                continue
            pairs.append((mm, k, a))
    if not pairs:
        return report
    top = max(a for _, _, a in pairs) + 1
    terms = seq(np.arange(top, dtype=np.int64))
    if np.any((terms < 0) | (terms > 1)):
        raise ValueError("product modulus sequence must lie in [0, 1]")
    zero = terms >= 1.0
    logs = np.where(zero, 0.0, np.log1p(-np.where(zero, 0.0, terms)))
    cum = np.concatenate(([0.0], np.cumsum(logs)))
    zeros = np.concatenate(([0], np.cumsum(zero)))
    for mm, k, a in pairs:
        report.checked.append((mm, k))
        rhs = 1.0 / (k + 1)
        if a < mm:
            report.violations.append(Violation((mm, k), mm, float(a), float(mm)))
            continue
        lhs = 0.0 if zeros[a + 1] > zeros[mm] else math.exp(cum[a + 1] - cum[mm])
        if not _within(lhs, rhs, tol):
            report.violations.append(Violation((mm, k), a, lhs, rhs))
    return report
