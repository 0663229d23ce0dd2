from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from halpern_cert.exact import EvaluationCeiling
from halpern_cert.moduli import (ZERO, Kind, Modulus, ProductModulus, RealSequence, combine_linear,
                                 constant, g_plus, inverse_square_moduli, max_of, rate_from_cauchy,
                                 running_max, series_bound, validate_modulus, xu_rate,
                                 xu_rate_product)


def seq(fn):
    return RealSequence(lambda n: fn(np.asarray(n, dtype=np.float64)))


def tail_sum(fn, n0, length=200_000):
    i = np.arange(n0 + 1, n0 + length + 1, dtype=np.float64)
    return float(np.sum(fn(i)))


def test_modulus_rejects_negative_values():
    m = Modulus(Kind.CAUCHY_MODULUS, lambda k: k - 5)
    with pytest.raises(ValueError):
        m(0)


def test_constant_and_zero():
    assert ZERO(17) == 0 and constant(4)(99) == 4 and ZERO.nondecreasing


def test_inverse_square_frozen():
    m = inverse_square_moduli(Fraction(7, 3), 2)
    assert [m.phi(k) for k in range(4)] == [3, 5, 7, 10]
    assert [m.phi_star(k) for k in range(4)] == [1, 3, 5, 8]
    assert [m.psi(k) for k in range(4)] == [2, 3, 3, 4]
    assert [m.psi_star(k) for k in range(4)] == [0, 1, 1, 2]


@given(st.fractions(min_value=0, max_value=50, max_denominator=20), st.integers(1, 20), st.integers(0, 60))
def test_inverse_square_properties(t, L, k):
    m = inverse_square_moduli(t, L)
    tf = float(t)
    f = lambda n: tf / (n + L) ** 2
    eps = 1 / (k + 1) * (1 + 1e-12) + 1e-15
    assert tail_sum(f, m.phi_star(k), 50_000) <= eps
    n = m.psi_star(k)
    assert tf / (n + L) ** 2 <= eps
    assert tf / (m.phi_star(k) + L) <= eps
    # the whole series is at most 2 ceil(t)
    assert float(np.sum(f(np.arange(10**5, dtype=np.float64)))) <= 2 * -(-t.numerator // t.denominator) + 1e-12


def test_rate_from_cauchy_and_series_bound():
    phi = inverse_square_moduli(1, 1).phi
    psi = rate_from_cauchy(phi)
    assert psi(3) == phi(3) + 1
    partial = RealSequence(lambda n: float(np.sum(1.0 / (np.arange(int(n) + 1) + 1.0) ** 2)))
    M = series_bound(phi, partial)
    assert M >= np.pi**2 / 6
    assert M == 3


@given(st.fractions(min_value=Fraction(1, 10), max_value=10, max_denominator=10),
       st.fractions(min_value=Fraction(1, 10), max_value=10, max_denominator=10),
       st.integers(0, 40))
def test_combine_linear_property(q, r, k):
    a, b = inverse_square_moduli(2, 1).phi_star, inverse_square_moduli(1, 3).phi
    m = combine_linear(a, b, q, r)
    f = lambda n: float(q) * 2 / (n + 1) ** 2 + float(r) / (n + 3) ** 2
    assert tail_sum(f, m(k), 100_000) <= 1 / (k + 1) * (1 + 1e-12)


def test_combine_linear_rejects_nonpositive():
    with pytest.raises(ValueError):
        combine_linear(ZERO, ZERO, 0, 1)


def test_max_of_keeps_monotonicity_flag():
    a = Modulus(Kind.CAUCHY_MODULUS, lambda k: k, "k", True)
    b = Modulus(Kind.CAUCHY_MODULUS, lambda k: 10 - k if k < 10 else 0, "bump")
    assert max_of(a, a).nondecreasing and not max_of(a, b).nondecreasing
    assert max_of(a, b)(3) == 7


def test_g_plus_and_running_max():
    bump = Modulus(Kind.DIVERGENCE_RATE, lambda n: [5, 2, 9, 1][n % 4], "bump")
    assert [g_plus(bump, n) for n in range(5)] == [5, 5, 9, 9, 9]
    rm = running_max(bump)
    assert rm.nondecreasing and rm(3) == 9
    with pytest.raises(EvaluationCeiling):
        g_plus(bump, 10**8)


@given(st.lists(st.integers(0, 1000), min_size=1, max_size=40))
def test_g_plus_shortcut_agrees_when_nondecreasing(values):
    values = sorted(values)
    mono = Modulus(Kind.DIVERGENCE_RATE, lambda n: values[n], "", True)
    plain = Modulus(Kind.DIVERGENCE_RATE, lambda n: values[n], "", False)
    for n in range(len(values)):
        assert g_plus(mono, n) == g_plus(plain, n)


def test_xu_rates_frozen():
    chi = Modulus(Kind.CAUCHY_MODULUS, lambda k: k + 1, "k+1", True)
    theta = Modulus(Kind.DIVERGENCE_RATE, lambda n: 2 * n, "2n", True)
    A = ProductModulus(lambda m, k: (m + 2) * (k + 1) - 2)
    # theta(chi(1) + 1 + ceil(ln 6)) + 1 = 2 * (2 + 1 + 2) + 1
    assert xu_rate(theta, chi, 3)(0) == 11
    # A(chi(1) + 1, 5) + 1 = (3 + 2) * 6 - 2 + 1
    assert xu_rate_product(A, chi, 3)(0) == 29


# -- validator sensitivity -------------------------------------------------------

def test_validator_accepts_true_modulus_and_flags_false_one():
    f = seq(lambda n: 1.0 / (n + 1) ** 2)
    good = inverse_square_moduli(1, 1).phi
    bad = Modulus(Kind.CAUCHY_MODULUS, lambda k: k // 4, "k/4")
    assert validate_modulus(good, f, 50, 10_000).ok
    rep = validate_modulus(bad, f, 50, 10_000)
    # k = 1: modulus 0, tail pi^2/6 - 1 > 1/2
    assert not rep.ok and rep.violations[0].k == 1


def test_validator_convergence_rate():
    f = seq(lambda n: 1.0 / (n + 1))
    assert validate_modulus(Modulus(Kind.CONVERGENCE_RATE, lambda k: k), f, 30, 1000).ok
    assert not validate_modulus(Modulus(Kind.CONVERGENCE_RATE, lambda k: k // 2), f, 30, 1000).ok


def test_validator_divergence_rate():
    f = seq(lambda n: 1.0 / (n + 2))
    good = Modulus(Kind.DIVERGENCE_RATE, lambda n: max(0, int(np.ceil(np.exp(n + 1))) - 1))
    bad = Modulus(Kind.DIVERGENCE_RATE, lambda n: 3 * n)
    assert validate_modulus(good, f, 10, 0).ok
    assert not validate_modulus(bad, f, 10, 0).ok


def test_validator_product_modulus():
    f = seq(lambda n: 1.0 / (n + 2))
    good = ProductModulus(lambda m, k: (m + 2) * (k + 1) - 2)
    short = ProductModulus(lambda m, k: m + k)
    below = ProductModulus(lambda m, k: max(0, m - 1))
    assert validate_modulus(good, f, 20, 0, m_max=30).ok
    assert not validate_modulus(short, f, 20, 0, m_max=30).ok
    assert not validate_modulus(below, f, 2, 0, m_max=3).ok


def test_validator_reports_ceiling_as_unverifiable():
    huge = Modulus(Kind.CAUCHY_MODULUS, lambda k: 10**12 * (k + 1))
    rep = validate_modulus(huge, seq(lambda n: 0 * n), 3, 10)
    assert rep.ok and not rep.checked and len(rep.unverifiable) == 4
