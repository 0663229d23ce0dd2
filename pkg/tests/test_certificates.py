from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from halpern_cert.builtins import ex3_linear, rotation_instance
from halpern_cert.certificates import (MissingModulus, Target, certify, format_rate, h1delta_to_theta,
                                       halpern_rates, kanzow_shehu_phi, kanzow_shehu_product_ok,
                                       phi_Q1, phi_Q1star, psi_Q1, sam_bound, sam_rates)
from halpern_cert.exact import Surd
from halpern_cert.iteration import ModuliBundle, kp
from halpern_cert.moduli import (ZERO, Kind, Modulus, RealSequence, constant, validate_modulus)
from halpern_cert.schedules import (Example1Params, Example2Params, example1_schedule,
                                    example2_schedule, example_rates, harmonic_divergence)

EX1 = Example1Params(J=2, P=1, lam=1, r_star=(0, 0))


def by_name(certs):
    return {c.provenance: c for c in certs}


def quadratic_oracle(K, lam, J, k):
    # 4K ceil(12 lam K m) m + 48 K^2 m^2 + 4K(J+2) m - J, m = k + 1
    m = k + 1
    return 4 * K * -(-12 * lam * K * m // 1) * m + 48 * K * K * m * m + 4 * K * (J + 2) * m - J


def test_ex1_quadratic_frozen():
    inst = rotation_instance()
    K = kp(inst, example1_schedule(EX1).bundle)
    closed = example_rates("ex1", EX1, K, constant_anchor=True)
    assert K == 4
    assert closed["Ex1-Phi*"](20) == 678718 == quadratic_oracle(4, 1, 2, 20)
    assert closed["Ex1-Psi*"](20) == 6_100_414 == quadratic_oracle(4, 1, 2, 62)


def test_quadratic_simplification_agrees_on_small_k():
    closed = example_rates("ex1", EX1, 4, constant_anchor=True)
    for k in range(11):
        assert closed["Ex1-Phi~"](k) == closed["Ex1-Phi*"](k)
        assert closed["Ex1-Psi~"](k) == closed["Ex1-Psi*"](k)


def test_generic_certificates_equal_closed_forms_ex1():
    inst = rotation_instance()
    sched = example1_schedule(EX1)
    generic = by_name(certify(inst, sched))
    closed = example_rates("ex1", EX1, kp(inst, sched.bundle), constant_anchor=True)
    for k in range(4):
        assert generic["Thm4.2-Phi*"](k) == closed["Ex1-Phi*"](k)
        assert generic["Thm4.2-Psi*"](k) == closed["Ex1-Psi*"](k)
    for k in range(3):
        assert generic["Thm4.1-Phi"](k) == closed["Ex1-Phi"](k)


def test_exponential_rate_frozen():
    inst = rotation_instance((0.0, 1.0))
    K = kp(inst, example1_schedule(EX1).bundle)
    closed = example_rates("ex1", EX1, K)
    # ceil(2 e^77) - 2
    assert K == 3
    assert closed["Ex1-Phi"](0) == 5517026909046340412572939639805322
    assert "~5.52E+33" in format_rate(closed["Ex1-Phi"](0))


def test_ex2_frozen():
    p = Example2Params(J=3, P=3, r_star=(1.0, 0.0))
    inst = rotation_instance()
    sched = example2_schedule(p)
    K = kp(inst, sched.bundle)
    closed = example_rates("ex2", p, K)
    assert K == 9 and closed["Ex2-Psi*"](10) == 12_708_033
    assert "Ex2-Phi~" not in closed
    generic = by_name(certify(inst, sched))
    for k in range(4):
        assert generic["Thm4.2-Phi*"](k) == closed["Ex2-Phi*"](k)


def test_ex3_generic_frozen():
    sc = ex3_linear(1000)
    certs = by_name(certify(sc.instance, sc.schedule))
    assert certs["Thm4.2-Phi*"](0) == 2396 and certs["Thm4.2-Psi*"](0) == 21020


def test_simplified_outside_hypotheses_raises():
    with pytest.raises(ValueError):
        example_rates("ex1", Example1Params(2, 1, 1, (1, 0)), 4, constant_anchor=True, simplified=True)
    with pytest.raises(ValueError):
        example_rates("ex3", EX1, 4)


def test_format_rate():
    assert format_rate(10**12) == "1000000000000"
    assert format_rate(10**12 + 1) == "1000000000001 (~1.00E+12)"
    assert format_rate(0) == "0"


def test_missing_moduli():
    bare = ModuliBundle(M_abd=0, sigma1_star=lambda m, k: m + k, sigma2=ZERO, theta1=ZERO, gamma1=ZERO)
    with pytest.raises(MissingModulus):
        phi_Q1(bare, 3)
    phi = phi_Q1star(bare, 3)
    with pytest.raises(MissingModulus):
        psi_Q1(phi, bare, 3)
    with pytest.raises(ValueError):
        phi_Q1(example1_schedule(EX1).bundle, 0)


def test_certify_rejects_rho_mismatch():
    sched = example1_schedule(EX1, rho=Fraction(1, 2))
    with pytest.raises(ValueError, match="rho"):
        certify(rotation_instance(), sched)


def test_certificate_render_lists_parameters():
    c = certify(rotation_instance(), example1_schedule(EX1))[0]
    text = c.render([0, 10**9])
    assert "Kp = 4" in text and "k=0:" in text and c.target is Target.STEP


def sam_style_bundle(b):
    return ModuliBundle(M_abd=0, sigma1=b.sigma1, sigma2=b.sigma2, theta1=constant(0), gamma1=b.sigma2,
                        sigma3=b.sigma3, gamma2=b.sigma3)


def test_halpern_form_matches_general_form_at_rho_zero():
    b = example1_schedule(EX1).bundle
    hal = halpern_rates(b, Surd.sqrt_of(2))
    K = sam_bound(Surd.sqrt_of(2))
    assert K == 4
    sb = sam_style_bundle(b)
    for k in range(3):
        assert hal.phi0(k) == phi_Q1(sb, K)(k) == kanzow_shehu_phi(sb, K)(k)


def test_sam_branches():
    b = example1_schedule(EX1).bundle
    star = sam_rates(b, 1)
    plain = sam_rates(b, 1, branch="sigma1")
    assert star.phi0.provenance == plain.phi0.provenance == "SAM-Phi0"
    assert star.phi0(0) < plain.phi0(0)
    with pytest.raises(ValueError):
        sam_rates(b, 1, branch="other")
    with pytest.raises(ValueError):
        kanzow_shehu_phi(b, 4, rho=Fraction(1, 3))


@given(st.integers(0, 30), st.integers(0, 30))
def test_product_modulus_condition(m, k):
    delta = lambda n: Fraction(1, n + 2)
    A = lambda m, k: (m + 2) * (k + 1) - 2
    assert kanzow_shehu_product_ok(delta, A, m, k)
    if k > 0:
        assert not kanzow_shehu_product_ok(delta, lambda m, k: A(m, k) - 2, m, k)


def test_theta_from_divergence_rate():
    lin = Modulus(Kind.DIVERGENCE_RATE, lambda n: n, "n", True)
    theta = h1delta_to_theta(lin, Fraction(1, 2))
    assert [theta(n) for n in range(4)] == [0, 2, 4, 6]
    sigma1 = harmonic_divergence(2)
    theta = h1delta_to_theta(sigma1, Fraction(1, 2))
    # (1 - rho) delta_{n+1} with delta_n = 1/(n + 2)
    f = RealSequence(lambda n: 0.5 / (np.asarray(n, dtype=np.float64) + 3))
    assert validate_modulus(theta, f, 6, 0).ok


@settings(max_examples=25)
@given(st.integers(1, 40), st.integers(0, 6))
def test_rates_grow_with_kp_and_k(K, k):
    b = example1_schedule(EX1).bundle
    phi = phi_Q1star(b, K)
    assert phi(k) <= phi(k + 1) and phi(k) <= phi_Q1star(b, K + 1)(k)
