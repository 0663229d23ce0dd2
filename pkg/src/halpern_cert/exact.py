"""Exact and outward-rounded arithmetic for rate certificates.

Rates are naturals of unbounded size, so everything here returns Python
``int``. Algebraic quantities (norms, square roots of norms) are carried as
:class:`Surd` values and ceiled exactly with integer roots. Transcendental
ceilings (``ceil(c * e**n)``, ``ceil(ln x)``, ``ceil(c * x**e)``) are computed
from directed-rounding enclosures, refined until the ceiling is determined.
If a fixed working precision is requested and the enclosure straddles an
integer, the upper ceiling is returned: certificates may grow, never shrink.
"""
from __future__ import annotations

import decimal
import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

from mpmath.libmp import (
    from_int,
    from_rational,
    mpf_exp,
    mpf_log,
    mpf_mul,
    round_ceiling,
    round_floor,
    to_rational,
)

#: Refuse to build integers with more decimal digits than this.
MAX_DIGITS = 10**6

_LOG10_E = math.log10(math.e)
_MAX_PREC = 1 << 24


class EvaluationCeiling(ArithmeticError):
    """A value is too large to evaluate at desk scale."""


def as_fraction(x) -> Fraction:
    """Exact rational for a scalar parameter.

    Floats are read through their shortest ``repr`` so that a config value
    ``0.3`` means 3/10, not the nearest binary double.
    """
    if isinstance(x, bool):
        raise TypeError("boolean is not a number")
    if isinstance(x, Fraction):
        return x
    if isinstance(x, Rational):
        return Fraction(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"non-finite parameter {x!r}")
        return Fraction(repr(x))
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"cannot convert {type(x).__name__} to a rational")


def ceil_frac(x) -> int:
    x = Fraction(x)
    return -(-x.numerator // x.denominator)


def tsub(m: int, n: int) -> int:
    """Truncated subtraction ``max(m - n, 0)``."""
    return m - n if m > n else 0


def iroot_floor(n: int, j: int) -> int:
    """Largest ``r`` with ``r**j <= n``."""
    if n < 0:
        raise ValueError("negative radicand")
    if j < 1:
        raise ValueError("root index must be positive")
    if j == 1 or n < 2:
        return n
    if j == 2:
        return math.isqrt(n)
    x = 1 << -(-n.bit_length() // j)
    while True:
        y = ((j - 1) * x + n // x ** (j - 1)) // j
        if y >= x:
            return x
        x = y


def iroot_ceil(q, j: int) -> int:
    """Least natural ``m`` with ``m**j >= q`` for rational ``q``."""
    n = ceil_frac(q)
    if n <= 0:
        return 0
    return iroot_floor(n - 1, j) + 1


@dataclass(frozen=True)
class Surd:
    """Nonnegative real ``radicand ** (1/index)`` with a rational radicand.

    Closed under scaling by nonnegative rationals and under square roots,
    which covers every norm-dependent quantity the certificates need.
    """

    radicand: Fraction
    index: int = 1

    def __post_init__(self):
        object.__setattr__(self, "radicand", Fraction(self.radicand))
        if self.radicand < 0:
            raise ValueError("Surd radicand must be nonnegative")
        if self.index < 1:
            raise ValueError("Surd index must be positive")

    @classmethod
    def of(cls, x) -> "Surd":
        if isinstance(x, Surd):
            return x
        q = as_fraction(x)
        if q < 0:
            raise ValueError(f"negative value {x!r}")
        return cls(q, 1)

    @classmethod
    def sqrt_of(cls, q) -> "Surd":
        return cls(Fraction(q), 2)

    def __mul__(self, c) -> "Surd":
        c = as_fraction(c)
        if c < 0:
            raise ValueError("Surd can only be scaled by a nonnegative rational")
        return Surd(self.radicand * c**self.index, self.index)

    __rmul__ = __mul__

    def __truediv__(self, c) -> "Surd":
        return self * (1 / as_fraction(c))

    def sqrt(self) -> "Surd":
        return Surd(self.radicand, 2 * self.index)

    def ceil(self) -> int:
        return iroot_ceil(self.radicand, self.index)

    def is_zero(self) -> bool:
        return self.radicand == 0

    def _cmp(self, other) -> int:
        other = Surd.of(other)
        lhs = self.radicand**other.index
        rhs = other.radicand**self.index
        return (lhs > rhs) - (lhs < rhs)

    def __lt__(self, other):
        return self._cmp(other) < 0

    def __le__(self, other):
        return self._cmp(other) <= 0

    def __gt__(self, other):
        return self._cmp(other) > 0

    def __ge__(self, other):
        return self._cmp(other) >= 0

    def __eq__(self, other):
        if not isinstance(other, (Surd, Rational, float)):
            return NotImplemented
        return self._cmp(other) == 0

    def __hash__(self):
        return hash((self.radicand, self.index))

    def __float__(self):
        if self.index == 1:
            return float(self.radicand)
        return float(self.radicand) ** (1.0 / self.index)

    def __str__(self):
        if self.index == 1:
            return str(self.radicand)
        if self.index == 2:
            return f"sqrt({self.radicand})"
        return f"({self.radicand})^(1/{self.index})"


def smax(*values) -> Surd:
    return max((Surd.of(v) for v in values), key=_SurdKey)


class _SurdKey:
    __slots__ = ("s",)

    def __init__(self, s):
        self.s = s

    def __lt__(self, other):
        return self.s < other.s


def ceil_sum(q, s: Surd) -> int:
    """``ceil(q + s)`` for a nonnegative rational ``q`` and surd ``s``."""
    q = as_fraction(q)
    if q < 0:
        raise ValueError("ceil_sum expects a nonnegative rational part")
    m = ceil_frac(q) + s.ceil()
    # m - q >= s holds; walk down while it still does
    while m - 1 - q >= 0 and Surd.of(m - 1 - q) >= s:
        m -= 1
    return m


# -- directed-rounding enclosures ---------------------------------------------

def _fr(v) -> Fraction:
    p, q = to_rational(v)
    return Fraction(int(p), int(q))


def _enclose_scaled_exp(n: int, scale: Fraction, prec: int):
    lo = mpf_mul(
        from_rational(scale.numerator, scale.denominator, prec, round_floor),
        mpf_exp(from_int(n), prec, round_floor),
        prec,
        round_floor,
    )
    hi = mpf_mul(
        from_rational(scale.numerator, scale.denominator, prec, round_ceiling),
        mpf_exp(from_int(n), prec, round_ceiling),
        prec,
        round_ceiling,
    )
    return _fr(lo), _fr(hi)


def _enclose_scaled_exp_decimal(n: int, scale: Fraction, digits: int):
    ctx = decimal.Context(prec=digits, Emax=decimal.MAX_EMAX, Emin=decimal.MIN_EMIN)
    # Context.exp is correctly rounded (half-even): one ulp either side encloses
    e = ctx.exp(decimal.Decimal(n))
    e_lo, e_hi = ctx.next_minus(e), ctx.next_plus(e)
    down = ctx.copy()
    down.rounding = decimal.ROUND_FLOOR
    up = ctx.copy()
    up.rounding = decimal.ROUND_CEILING
    num, den = decimal.Decimal(scale.numerator), decimal.Decimal(scale.denominator)
    lo = down.multiply(e_lo, down.divide(num, den))
    hi = up.multiply(e_hi, up.divide(num, den))
    return Fraction(lo), Fraction(hi)


def _digits_of_exp(n: int, scale: Fraction) -> float:
    return n * _LOG10_E + math.log10(scale) if scale > 0 else 0.0


def ceil_exp(n: int, scale=1, *, prec: int | None = None, backend: str = "mpmath",
             max_digits: int = MAX_DIGITS) -> int:
    """``ceil(scale * e**n)`` for natural ``n`` and rational ``scale >= 0``.

    ``prec`` fixes the working precision (bits for mpmath, digits for the
    decimal backend) and returns the ceiling of the upper end of the
    enclosure: always ``>=`` the true value, and equal to it once ``prec``
    covers the result size. By default the precision starts just above the
    result size and doubles until the ceiling is pinned down.
    """
    scale = as_fraction(scale)
    if n < 0:
        raise ValueError("exponent must be natural")
    if scale < 0:
        raise ValueError("scale must be nonnegative")
    if scale == 0:
        return 0
    if n == 0:
        return ceil_frac(scale)
    digits = _digits_of_exp(n, scale)
    if digits > max_digits:
        raise EvaluationCeiling(f"ceil({scale}*e^{n}) has ~{digits:.3g} digits")
    if backend == "mpmath":
        enclose = _enclose_scaled_exp
        start = int(digits / math.log10(2)) + 64
    elif backend == "decimal":
        enclose = _enclose_scaled_exp_decimal
        start = int(digits) + 20
    else:
        raise ValueError(f"unknown backend {backend!r}")
    p = prec if prec is not None else start
    while True:
        lo, hi = enclose(n, scale, p)
        c_lo, c_hi = ceil_frac(lo), ceil_frac(hi)
        if c_lo == c_hi or prec is not None or p > _MAX_PREC:
            return c_hi
        p *= 2


def _exp_at_least(m: int, x: int) -> bool:
    """Decide ``e**m >= x`` exactly (never a tie for m >= 1)."""
    if m == 0:
        return x <= 1
    p = x.bit_length() + 64
    while True:
        lo = _fr(mpf_exp(from_int(m), p, round_floor))
        if lo >= x:
            return True
        hi = _fr(mpf_exp(from_int(m), p, round_ceiling))
        if hi < x:
            return False
        p *= 2


def ceil_ln(x) -> int:
    """``ceil(ln x)`` for a natural ``x >= 1`` (exact integers map exactly)."""
    x = int(x)
    if x < 1:
        raise ValueError("ceil_ln needs x >= 1")
    if x == 1:
        return 0
    m = max(0, math.ceil(math.log(x)))
    while m > 0 and _exp_at_least(m - 1, x):
        m -= 1
    while not _exp_at_least(m, x):
        m += 1
    return m


def ceil_pow(base, exponent, scale=1, *, max_digits: int = MAX_DIGITS) -> int:
    """``ceil(scale * base**exponent)`` for rationals ``base, scale >= 0``,
    ``exponent >= 0``.

    Exact when the exponent has a small denominator (integer powers, square
    roots, ...); otherwise an outward-rounded ``exp(exponent * ln base)``.
    """
    base, exponent, scale = as_fraction(base), as_fraction(exponent), as_fraction(scale)
    if base < 0 or exponent < 0 or scale < 0:
        raise ValueError("ceil_pow expects nonnegative arguments")
    if scale == 0 or (base == 0 and exponent > 0):
        return 0
    if exponent == 0 or base == 1:
        return ceil_frac(scale)
    digits = float(exponent) * math.log10(base) + math.log10(scale)
    if digits > max_digits:
        raise EvaluationCeiling(f"ceil({scale}*{base}^{exponent}) has ~{digits:.3g} digits")
    p, q = exponent.numerator, exponent.denominator
    if q <= 64:
        # scale * base**(p/q) <= m  <=>  base**p * scale**q <= m**q
        target = base**p * scale**q
        return iroot_ceil(target, q)
    prec = max(64, int(max(digits, 0) / math.log10(2)) + 64)
    while True:
        lo, hi = _enclose_scaled_pow(base, exponent, scale, prec)
        c_lo, c_hi = ceil_frac(lo), ceil_frac(hi)
        if c_lo == c_hi or prec > _MAX_PREC:
            return c_hi
        prec *= 2


def _enclose_scaled_pow(base: Fraction, exponent: Fraction, scale: Fraction, prec: int):
    def one(rnd, other):
        b = from_rational(base.numerator, base.denominator, prec, rnd)
        ln_b = mpf_log(b, prec, rnd)
        # ln(base) < 0 flips which end of the exponent bounds the product
        e = from_rational(exponent.numerator, exponent.denominator, prec,
                          rnd if base >= 1 else other)
        t = mpf_mul(e, ln_b, prec, rnd)
        s = from_rational(scale.numerator, scale.denominator, prec, rnd)
        return _fr(mpf_mul(s, mpf_exp(t, prec, rnd), prec, rnd))

    return one(round_floor, round_ceiling), one(round_ceiling, round_floor)
