"""Built-in scenarios and the falsified fixtures used to test the checkers."""
from __future__ import annotations

import dataclasses
import math

from . import operators as ops
from .harness import Scenario
from .iteration import ProblemInstance, kp
from .moduli import constant
from .schedules import (Example1Params, Example2Params, Example3Params, example1_schedule,
                        example2_schedule, example3_schedule, example_rates)
from .spaces import NormedSpace

U = (1.0, 0.0)


def rotation_instance(x0=(1.0, 1.0)) -> ProblemInstance:
    """Quarter-turn rotation of the l2 plane (fixed point 0) with constant anchor u = (1, 0)."""
    return ProblemInstance(NormedSpace(2), ops.rotation(math.pi / 2), ops.constant(U), x0, (0.0, 0.0))


def example_certificates(inst, sched, which, params) -> tuple:
    """Generic certificates of the bundle followed by the example's closed forms."""
    from .certificates import certify
    from .schedules import example3_rates
    generic = tuple(certify(inst, sched))
    if which == "ex3":
        lin = example3_rates(params, sched.info["Kp"], sched.info["L"])
        return generic + (lin.phi, lin.psi)
    K = kp(inst, sched.bundle)
    closed = example_rates(which, params, K, inst.rho, space=inst.space,
                           constant_anchor=inst.f.kind == "constant")
    return generic + tuple(closed.values())


def stationary() -> Scenario:
    """Identity operator started at its fixed point u: every residual is 0."""
    inst = ProblemInstance(NormedSpace(2), ops.identity(2), ops.constant(U), U, U)
    sched = example1_schedule(Example1Params(2, 1, 1, (0, 0)))
    return Scenario("stationary", inst, sched, 10_000, k_max=10)


def ex1_quadratic(k_max: int = 20) -> Scenario:
    """Quadratic product-form rates for the lam/(n+J) family, checked up to k = 20."""
    inst = rotation_instance()
    p = Example1Params(J=2, P=1, lam=1, r_star=(0, 0))
    sched = example1_schedule(p)
    certs = example_certificates(inst, sched, "ex1", p)
    n = max(c(k_max) for c in certs if c.provenance.endswith(("Phi*", "Psi*")))
    return Scenario("ex1-quadratic", inst, sched, n, k_max=k_max, certificates=certs)


def ex2_inexact(k_max: int = 10) -> Scenario:
    """Residuals r_n = r*/(n+P)^2 with |r*| = 1, product-form rates up to k = 10."""
    inst = rotation_instance()
    p = Example2Params(J=3, P=3, r_star=(1.0, 0.0))
    sched = example2_schedule(p)
    certs = example_certificates(inst, sched, "ex2", p)
    n = max(c(k_max) for c in certs if c.provenance.endswith(("Phi*", "Psi*")))
    return Scenario("ex2-inexact", inst, sched, n, k_max=k_max, certificates=certs)


def ex3_linear(n: int = 100_000, k_max: int = 50) -> Scenario:
    """Linear rates JL/((1-rho)(n+J)) along a 10^5-step orbit."""
    inst = rotation_instance()
    p = Example3Params(J=4, P=4, rho=0, r_star=(0, 0))
    sched = example3_schedule(p, inst)
    p = dataclasses.replace(p, L=sched.info["L"])
    certs = example_certificates(inst, sched, "ex3", p)
    return Scenario("ex3-linear", inst, sched, n, k_max=k_max, certificates=certs, ex3=p)


def ex1_exponential(k_max: int = 5) -> Scenario:
    """Exponential rates: sound, far beyond any trace. Reported as unverifiable."""
    from .certificates import phi_Q1, psi_Q1
    inst = rotation_instance(x0=(0.0, 1.0))
    p = Example1Params(J=2, P=1, lam=1, r_star=(0, 0))
    sched = example1_schedule(p)
    K = kp(inst, sched.bundle)
    phi = phi_Q1(sched.bundle, K, inst.rho)
    closed = example_rates("ex1", p, K, inst.rho, space=inst.space)
    certs = (phi, psi_Q1(phi, sched.bundle, K), closed["Ex1-Phi"], closed["Ex1-Psi"])
    return Scenario("ex1-exponential", inst, sched, 10_000, k_max=k_max, certificates=certs)


BUILTINS = {
    "stationary": stationary,
    "ex1-quadratic": ex1_quadratic,
    "ex2-inexact": ex2_inexact,
    "ex3-linear": ex3_linear,
    "ex1-exponential": ex1_exponential,
}


def builtin_scenarios(names=None) -> list:
    return [BUILTINS[n]() for n in (names or BUILTINS)]


def lookup(name: str):
    """Factory for a built-in or fault scenario by its name."""
    if name in BUILTINS:
        return BUILTINS[name]
    for f in FAULTS.values():
        if f.__name__.replace("_", "-") == name:
            return f
    raise KeyError(name)


def all_names() -> list:
    return list(BUILTINS) + [f.__name__.replace("_", "-") for f in FAULTS.values()]


# -- falsified fixtures --------------------------------------------------------

def fault_wrong_sigma2() -> Scenario:
    """sigma2 = 0 claimed for a series whose tails are not that small."""
    sc = ex3_linear(n=20_000)
    b = dataclasses.replace(sc.schedule.bundle, sigma2=constant(0))
    sched = dataclasses.replace(sc.schedule, bundle=b)
    return dataclasses.replace(sc, name="fault-wrong-sigma2", schedule=sched)


def fault_perturbed_point() -> Scenario:
    """An outlier written into x_5 after the run."""
    sc = ex3_linear(n=20_000)
    return dataclasses.replace(sc, name="fault-perturbed-point", perturb=(5, (100.0, 100.0)))


def fault_understated_kp() -> Scenario:
    """Certificates built with Kp = 1 for an orbit starting far from the fixed point."""
    inst = rotation_instance(x0=(1e5, 1e5))
    sched = example1_schedule(Example1Params(2, 1, 1, (0, 0)))
    return Scenario("fault-understated-kp", inst, sched, 5_000, k_max=3, kp_override=1)


FAULTS = {
    "moduli": fault_wrong_sigma2,
    "trace": fault_perturbed_point,
    "certificate": fault_understated_kp,
}
