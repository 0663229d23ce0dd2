from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from halpern_cert import operators as ops
from halpern_cert.builtins import rotation_instance
from halpern_cert.iteration import ProblemInstance, kp, run
from halpern_cert.moduli import RealSequence, validate_modulus
from halpern_cert.schedules import (Example1Params, Example2Params, Example3Params,
                                    InadmissibleParameters, admissible_L, example1_schedule,
                                    example2_schedule, example3_rates, example3_schedule,
                                    harmonic_divergence, harmonic_product, minimal_J,
                                    sabach_shtern_check, sabach_shtern_trials)
from halpern_cert.spaces import NormedSpace


def arr(fn):
    return RealSequence(lambda n: fn(np.asarray(n, dtype=np.float64)))


@pytest.mark.parametrize("rho,J", [(0, 4), (Fraction(1, 2), 6), (Fraction(1, 3), 5), (Fraction(9, 10), 22)])
def test_minimal_J(rho, J):
    assert minimal_J(rho) == J
    assert J > (3 - rho) / (1 - rho) >= J - 1


def test_parameter_validation():
    with pytest.raises(InadmissibleParameters, match="least admissible J is 4"):
        Example3Params(J=3, P=4, rho=0, r_star=(0, 0))
    with pytest.raises(InadmissibleParameters, match="at least J"):
        Example3Params(J=5, P=4, rho=0, r_star=(0, 0))
    with pytest.raises(InadmissibleParameters):
        Example3Params(J=4, P=4, rho=1, r_star=(0, 0))
    with pytest.raises(InadmissibleParameters):
        Example1Params(J=2, P=1, lam=2, r_star=(0, 0))
    with pytest.raises(InadmissibleParameters):
        Example2Params(J=0, P=1, r_star=(0, 0))


def test_admissible_L_and_rejection():
    inst = rotation_instance()
    p = Example3Params(J=4, P=4, rho=0, r_star=(0, 0))
    # Kp(3 - rho) with Kp = 4 dominates |x1 - x0|
    assert admissible_L(p, inst) == 12 and kp(inst, example3_schedule(p, inst).bundle) == 4
    with pytest.raises(InadmissibleParameters, match="least admissible L is 12"):
        example3_schedule(Example3Params(J=4, P=4, rho=0, r_star=(0, 0), L=11), inst)
    with pytest.raises(InadmissibleParameters, match="rho"):
        admissible_L(Example3Params(J=6, P=6, rho=Fraction(1, 2), r_star=(0, 0)), inst)


def test_example3_linear_rates():
    p = Example3Params(J=4, P=4, rho=0, r_star=(0, 0))
    r = example3_rates(p, 4, 5)
    assert [r.phi(k) for k in range(3)] == [20, 40, 60]
    assert [example3_rates(p, 4, 12).psi(k) for k in range(2)] == [72, 144]
    assert r.step_bound(0) == pytest.approx(5.0)
    with pytest.raises(InadmissibleParameters):
        example3_rates(p, 4, 0)


def test_example3_orbit_under_linear_bound_with_contraction():
    sp = NormedSpace(2)
    f = ops.affine_contraction([[0.5, 0], [0, 0.5]], [1, 0], "1/2")
    inst = ProblemInstance(sp, ops.rotation(np.pi / 2), f, [1, 1], [0, 0])
    p = Example3Params(J=6, P=6, rho=Fraction(1, 2), r_star=(0.5, 0.5))
    sched = example3_schedule(p, inst)
    bounds = example3_rates(p, sched.info["Kp"], sched.info["L"])
    tr = run(inst, sched, 20_000)
    for res, bound in ((tr.step_residuals, bounds.step_bound), (tr.fix_residuals, bounds.fix_bound)):
        assert np.all(res <= bound(np.arange(len(res))) * (1 + 1e-9))


def test_residual_moduli_of_inexact_schedule():
    sched = example2_schedule(Example2Params(3, 3, (3.0, 4.0)))
    b = sched.bundle
    assert b.M_r == 10
    # |r_n| = 5 / (n + 3)^2; lambda2 is a rate of convergence for it
    norms = arr(lambda n: 5.0 / (n + 3) ** 2)
    assert validate_modulus(b.lambda2, norms, 30, 0).ok


def test_harmonic_moduli_validate():
    d = arr(lambda n: 1.0 / (n + 3))
    assert validate_modulus(harmonic_divergence(3), d, 9, 0).ok
    assert validate_modulus(harmonic_product(3), arr(lambda n: 1.0 / (n + 3)), 15, 0, m_max=40).ok


def test_example1_coefficients_sum_to_one():
    sched = example1_schedule(Example1Params(3, 2, Fraction(3, 2), (0, 0)))
    a = sched.alpha(np.arange(5))
    assert np.allclose(a + sched.beta(np.arange(5)) + sched.delta(np.arange(5)), 1)


def test_sabach_shtern_trials_hold():
    reps = sabach_shtern_trials(trials=40, n_max=2000, seed=7)
    assert all(r.hypotheses_met for r in reps) and all(r.ok for r in reps)


def test_sabach_shtern_flags_false_conclusion_and_bad_hypotheses():
    J, N, gamma, L = 4, 2, 1.0, 1.0
    a = arr(lambda n: N / (gamma * (n + J)))
    c = arr(lambda n: 0 * n)
    # s_n = L constant breaks the recurrence, so the hypotheses fail
    rep = sabach_shtern_check(L, J, N, gamma, a, c, arr(lambda n: 0 * n + L), 100)
    assert not rep.hypotheses_met and "recurrence" in rep.hypothesis_failures[0]
    rep = sabach_shtern_check(L, 1, N, gamma, a, c, arr(lambda n: 0 * n), 100)
    assert not rep.hypotheses_met
    # with a doubled J the claimed bound is checked against a sequence it does not dominate
    s = arr(lambda n: 2 * J * L / (gamma * (n + J)) * (n > 0) + L * (n == 0))
    rep = sabach_shtern_check(L, J, N, gamma, a, arr(lambda n: 0 * n + L), s, 50, tol=1e-9)
    assert not rep.ok


@settings(max_examples=20)
@given(st.integers(2, 10), st.sampled_from([0.25, 0.5, 1.0]), st.floats(0.1, 10), st.integers(0, 10**6))
def test_extremal_sequences_obey_linear_bound(J, gamma, L, seed):
    from halpern_cert.schedules import extremal_sequence
    rng = np.random.default_rng(seed)
    N = int(rng.integers(2, J + 1))
    n = np.arange(502)
    av = N / (gamma * (n + J))
    cv = rng.uniform(0, L, size=502)
    sv = extremal_sequence(1 - gamma * av[1:], (av[:-1] - av[1:]) * cv[:-1], L)
    assert np.all(sv[:501] <= J * L / (gamma * (n[:501] + J)) * (1 + 1e-12))
