"""Concrete parameter families with their moduli, and the linear-rate lemma.

Three families are provided. Each builder returns a :class:`ParameterSchedule`
whose bundle carries closed-form moduli, all exact on naturals.

* ``example1``: alpha = lam/(n+J), beta = 1 - (lam+1)/(n+J), delta = 1/(n+J)
* ``example2``: alpha = delta = 1/(n+J), beta = 1 - 2/(n+J) - 1/(n+J)^2
* ``example3``: alpha = 1/(n+J), delta = 2/((1-rho)(n+J)), beta = 1 - alpha - delta

Every family uses r_n = r*/(n+P)^2.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from . import _kernels
from .certificates import RateCertificate, Target
from .exact import Surd, as_fraction, ceil_exp, ceil_frac, ceil_ln, ceil_pow, ceil_sum
from .iteration import ModuliBundle, ParameterSchedule, ProblemInstance, kp, step
from .moduli import ZERO, Kind, Modulus, ProductModulus, RealSequence, Violation
from .spaces import NormedSpace


class InadmissibleParameters(ValueError):
    pass


def _rstar(r_star) -> tuple:
    return tuple(float(c) for c in np.asarray(r_star, dtype=np.float64).reshape(-1))


def _space_for(r_star, space):
    return space if space is not None else NormedSpace(len(r_star))


def _residual(r_star: tuple, P: int):
    if not any(r_star):
        return None
    r = np.array(r_star)

    def residual(n):
        w = 1.0 / (np.asarray(n, dtype=np.float64) + P) ** 2
        return np.outer(w, r)

    return residual


def _residual_moduli(r_norm: Surd, P: int):
    """``lambda1, lambda2, M_r`` for r_n = r*/(n+P)^2; zero moduli when r* = 0."""
    if r_norm.is_zero():
        return ZERO, ZERO, 0
    # radicand of a norm is rational for l1/linf and a square for l2
    lam1 = Modulus(Kind.CAUCHY_MODULUS, lambda k: (r_norm * (k + 1)).sqrt().ceil(),
                   f"ceil(sqrt(|r*|(k+1))), |r*| = {r_norm}", True)
    lam2 = Modulus(Kind.CAUCHY_MODULUS, lambda k: (r_norm * (k + 1)).ceil(),
                   f"ceil(|r*|(k+1)), |r*| = {r_norm}", True)
    return lam1, lam2, 2 * r_norm.ceil()


def harmonic_divergence(J: int) -> Modulus:
    """Rate of divergence ``ceil(J e^n) - J`` of ``sum 1/(n+J)``."""
    J = int(J)
    return Modulus(Kind.DIVERGENCE_RATE, lambda n: ceil_exp(n, J) - J,
                   f"ceil({J} exp(n)) - {J}", True)


def harmonic_product(J: int, rho=0) -> ProductModulus:
    """``ceil((m+J+1)(k+1)^(1/(1-rho))) - J - 1`` for ``prod (1 - (1-rho)/(i+J+1))``."""
    J, rho = int(J), as_fraction(rho)
    e = 1 / (1 - rho)
    return ProductModulus(lambda m, k: ceil_pow(k + 1, e, m + J + 1) - J - 1,
                          f"ceil((m+{J + 1})(k+1)^{e}) - {J + 1}")


def _linear(t, desc=None, kind=Kind.CAUCHY_MODULUS) -> Modulus:
    t = as_fraction(t)
    return Modulus(kind, lambda k: ceil_frac(t * (k + 1)), desc or f"ceil({t}(k+1))", True)


def _check_rho(rho) -> Fraction:
    rho = as_fraction(rho)
    if not 0 <= rho < 1:
        raise InadmissibleParameters(f"rho must lie in [0, 1), got {rho}")
    return rho


# -- example 1 -----------------------------------------------------------------

@dataclass(frozen=True)
class Example1Params:
    J: int
    P: int
    lam: Fraction
    r_star: tuple

    def __post_init__(self):
        object.__setattr__(self, "lam", as_fraction(self.lam))
        object.__setattr__(self, "r_star", _rstar(self.r_star))
        if int(self.J) < 1 or int(self.P) < 1:
            raise InadmissibleParameters("J and P must be positive naturals")
        if not 0 <= self.lam <= self.J - 1:
            raise InadmissibleParameters(f"lambda = {self.lam} outside [0, J-1] = [0, {self.J - 1}]")


def example1_schedule(params: Example1Params, *, rho=0, space: NormedSpace | None = None) -> ParameterSchedule:
    J, P, lam = int(params.J), int(params.P), params.lam
    rho = _check_rho(rho)
    sp = _space_for(params.r_star, space)
    r_norm = sp.exact_norm(params.r_star)
    lam1, lam2, M_r = _residual_moduli(r_norm, P)
    lf = float(lam)
    bundle = ModuliBundle(
        M_abd=0,
        sigma1=harmonic_divergence(J),
        sigma1_star=harmonic_product(J, rho),
        sigma2=_linear(1, "k+1"),
        sigma3=_linear(1, "k+1", Kind.CONVERGENCE_RATE),
        theta1=_linear(lam),
        gamma1=_linear(lam + 1),
        gamma2=_linear(lam + 1, kind=Kind.CONVERGENCE_RATE),
        lambda1=lam1,
        lambda2=lam2,
        M_r=M_r,
    )
    return ParameterSchedule(
        alpha=lambda n: lf / (n + J),
        beta=lambda n: 1.0 - (lf + 1.0) / (n + J),
        delta=lambda n: 1.0 / (n + J),
        residual=_residual(params.r_star, P),
        bundle=bundle,
        name="example1",
        info={"J": J, "P": P, "lambda": lam, "r_star": params.r_star, "r_norm": r_norm, "rho": rho},
    )


# -- example 2 -----------------------------------------------------------------

@dataclass(frozen=True)
class Example2Params:
    J: int
    P: int
    r_star: tuple

    def __post_init__(self):
        object.__setattr__(self, "r_star", _rstar(self.r_star))
        if int(self.J) < 3:
            raise InadmissibleParameters(f"J must be at least 3, got {self.J}")
        if int(self.P) < 1:
            raise InadmissibleParameters("P must be a positive natural")


def example2_schedule(params: Example2Params, *, rho=0, space: NormedSpace | None = None) -> ParameterSchedule:
    J, P = int(params.J), int(params.P)
    rho = _check_rho(rho)
    sp = _space_for(params.r_star, space)
    r_norm = sp.exact_norm(params.r_star)
    lam1, lam2, M_r = _residual_moduli(r_norm, P)
    bundle = ModuliBundle(
        M_abd=2,
        sigma1=harmonic_divergence(J),
        sigma1_star=harmonic_product(J, rho),
        sigma2=_linear(1, "k+1"),
        sigma3=_linear(1, "k+1", Kind.CONVERGENCE_RATE),
        theta1=_linear(1, "k+1"),
        gamma1=_linear(3, "3(k+1)"),
        gamma2=_linear(3, "3(k+1)", Kind.CONVERGENCE_RATE),
        lambda1=lam1,
        lambda2=lam2,
        M_r=M_r,
    )

    def beta(n):
        m = np.asarray(n, dtype=np.float64) + J
        return 1.0 - 2.0 / m - 1.0 / (m * m)

    return ParameterSchedule(
        alpha=lambda n: 1.0 / (n + J),
        beta=beta,
        delta=lambda n: 1.0 / (n + J),
        residual=_residual(params.r_star, P),
        bundle=bundle,
        name="example2",
        info={"J": J, "P": P, "r_star": params.r_star, "r_norm": r_norm, "rho": rho},
    )


# -- example 3 -----------------------------------------------------------------

def minimal_J(rho) -> int:
    """Least natural ``J > (3 - rho)/(1 - rho)``."""
    rho = _check_rho(rho)
    return int((3 - rho) / (1 - rho)) + 1


@dataclass(frozen=True)
class Example3Params:
    """``L=None`` asks the builder for the least admissible ``L``."""

    J: int
    P: int
    rho: Fraction
    r_star: tuple
    L: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "rho", _check_rho(self.rho))
        object.__setattr__(self, "r_star", _rstar(self.r_star))
        J, P = int(self.J), int(self.P)
        if not J > (3 - self.rho) / (1 - self.rho):
            raise InadmissibleParameters(
                f"J = {J} must exceed (3-rho)/(1-rho) = {(3 - self.rho) / (1 - self.rho)}; "
                f"least admissible J is {minimal_J(self.rho)}")
        if P < J:
            raise InadmissibleParameters(f"P = {P} must be at least J = {J}")
        if self.L is not None and int(self.L) < 1:
            raise InadmissibleParameters("L must be a positive natural")


def _example3_parts(params: Example3Params, space):
    J, P, rho = int(params.J), int(params.P), params.rho
    g = float(1 - rho)
    sp = _space_for(params.r_star, space)
    r_norm = sp.exact_norm(params.r_star)
    lam1, lam2, M_r = _residual_moduli(r_norm, P)
    c_beta = (3 - rho) / (1 - rho)
    c_delta = 2 / (1 - rho)
    bundle = ModuliBundle(
        M_abd=0,
        # delta_n >= 1/(n+J), so the harmonic moduli with rho = 0 remain valid
        sigma1=harmonic_divergence(J),
        sigma1_star=harmonic_product(J, 0),
        sigma2=_linear(c_delta),
        sigma3=_linear(c_delta, kind=Kind.CONVERGENCE_RATE),
        theta1=_linear(1, "k+1"),
        gamma1=_linear(c_beta),
        gamma2=_linear(c_beta, kind=Kind.CONVERGENCE_RATE),
        lambda1=lam1,
        lambda2=lam2,
        M_r=M_r,
    )
    fb, fd = float(3 - rho) / g, 2.0 / g
    sched = ParameterSchedule(
        alpha=lambda n: 1.0 / (n + J),
        beta=lambda n: 1.0 - fb / (n + J),
        delta=lambda n: fd / (n + J),
        residual=_residual(params.r_star, P),
        bundle=bundle,
        name="example3",
        info={"J": J, "P": P, "rho": rho, "r_star": params.r_star, "r_norm": r_norm},
    )
    return sched, r_norm


def admissible_L(params: Example3Params, inst: ProblemInstance) -> int:
    """Least natural ``L >= max{|x1 - x0|, Kp(3-rho) + ((1-rho)|r*|/2)(2P+1)/(P(P+1))}``."""
    sched, r_norm = _example3_parts(params, inst.space)
    rho, P = params.rho, int(params.P)
    if inst.rho != rho:
        raise InadmissibleParameters(f"instance has rho = {inst.rho}, parameters say {rho}")
    x1 = step(inst, sched, inst.x0, 0)
    first = inst.space.exact_distance(x1, inst.x0).ceil()
    K = kp(inst, sched.bundle)
    coef = (1 - rho) / 2 * Fraction(2 * P + 1, P * (P + 1))
    second = ceil_sum(K * (3 - rho), r_norm * coef)
    return max(1, first, second)


def example3_schedule(params: Example3Params, inst: ProblemInstance) -> ParameterSchedule:
    L_min = admissible_L(params, inst)
    L = L_min if params.L is None else int(params.L)
    if L < L_min:
        raise InadmissibleParameters(f"L = {L} is too small; least admissible L is {L_min}")
    sched, _ = _example3_parts(params, inst.space)
    sched.info["L"] = L
    sched.info["Kp"] = kp(inst, sched.bundle)
    return sched


class Example3Rates(NamedTuple):
    phi: RateCertificate
    psi: RateCertificate
    step_bound: RealSequence
    fix_bound: RealSequence


def example3_rates(params: Example3Params, Kp: int, L: int | None = None) -> Example3Rates:
    """Linear certificates and the pointwise bounds they come from."""
    L = int(L if L is not None else params.L)
    if L < 1:
        raise InadmissibleParameters("L must be a positive natural")
    J, rho = int(params.J), params.rho
    a = Fraction(J * L) / (1 - rho)
    b = Fraction((J + 2) * L) / (1 - rho)
    base = {"J": J, "L": L, "rho": str(rho), "Kp": Kp}
    phi = RateCertificate(_linear(a, f"ceil({a}(k+1))", Kind.CONVERGENCE_RATE),
                          Target.STEP, "Ex3-linear-Phi", dict(base))
    psi = RateCertificate(_linear(b, f"ceil({b}(k+1))", Kind.CONVERGENCE_RATE),
                          Target.FIX, "Ex3-linear-Psi", dict(base))
    fa, fb = float(a), float(b)
    return Example3Rates(
        phi, psi,
        RealSequence(lambda n: fa / (n + J), f"{a}/(n+{J})"),
        RealSequence(lambda n: fb / (n + J), f"{b}/(n+{J})"),
    )


# -- closed-form rates of examples 1 and 2 ---------------------------------------

def _rate(fn, desc, target, prov, params) -> RateCertificate:
    return RateCertificate(Modulus(Kind.CONVERGENCE_RATE, fn, desc, True), target, prov, params)


def example_rates(which: str, params, Kp: int, rho=0, *, space: NormedSpace | None = None,
                  constant_anchor: bool = False, simplified: bool | None = None) -> dict:
    """Closed-form certificates ``{provenance: certificate}`` for examples 1 and 2.

    The simplified quadratic forms are included when ``r* = 0``, ``rho = 0``
    and the anchor is constant; ``simplified=True`` demands them and raises
    outside those hypotheses.
    """
    which = which.lower().replace("example", "ex")
    if which not in ("ex1", "ex2"):
        raise ValueError(f"closed forms exist for ex1 and ex2, not {which!r}")
    K = int(Kp)
    rho = _check_rho(rho)
    J = int(params.J)
    sp = _space_for(params.r_star, space)
    r_norm = sp.exact_norm(params.r_star)
    two_r = r_norm * 2
    lam = params.lam if which == "ex1" else None

    if which == "ex1":
        def chi(k):
            m = 6 * K * (k + 1)
            return max(ceil_frac(lam * m) + m, (two_r * (k + 1)).sqrt().ceil())
        chi_desc = f"max{{ceil({6 * lam * K}(k+1)) + {6 * K}(k+1), ceil(sqrt(2|r*|(k+1)))}}"
    else:
        # with gamma1 = 3(k+1) the general chi gives 18 Kp(k+1)
        def chi(k):
            return max(18 * K * (k + 1), (two_r * (k + 1)).sqrt().ceil())
        chi_desc = f"max{{{18 * K}(k+1), ceil(sqrt(2|r*|(k+1)))}}"

    e = 1 / (1 - rho)
    tag = "Ex1" if which == "ex1" else "Ex2"
    base = {"Kp": K, "J": J, "rho": str(rho), "|r*|": str(r_norm), "chi": chi_desc}
    if lam is not None:
        base["lambda"] = str(lam)

    def phi(k):
        n = ceil_frac(Fraction(chi(2 * k + 1) + 1 + ceil_ln(4 * K * (k + 1))) / (1 - rho)) + 1
        return ceil_exp(n, J) - J

    def phi_star(k):
        return ceil_pow(4 * K * (k + 1), e, chi(2 * k + 1) + J + 2) - J

    def tail(k):
        return (r_norm * (3 * (k + 1))).ceil() + 1

    out = {
        f"{tag}-Phi": _rate(phi, f"ceil({J} exp(ceil((chi(2k+1)+1+ceil(ln({4 * K}(k+1))))/(1-{rho}))+1)) - {J}",
                            Target.STEP, f"{tag}-Phi", dict(base)),
        f"{tag}-Phi*": _rate(phi_star, f"ceil((chi(2k+1)+{J + 2}) ({4 * K}(k+1))^{e}) - {J}",
                             Target.STEP, f"{tag}-Phi*", dict(base)),
    }
    out[f"{tag}-Psi"] = _rate(lambda k: max(phi(3 * k + 2), tail(k)),
                              "max{Phi(3k+2), ceil(3|r*|(k+1)) + 1}", Target.FIX, f"{tag}-Psi", dict(base))
    out[f"{tag}-Psi*"] = _rate(lambda k: max(phi_star(3 * k + 2), tail(k)),
                               "max{Phi*(3k+2), ceil(3|r*|(k+1)) + 1}", Target.FIX, f"{tag}-Psi*", dict(base))

    applicable = r_norm.is_zero() and rho == 0 and constant_anchor
    if simplified and not applicable:
        raise InadmissibleParameters("simplified quadratic rates need r* = 0, rho = 0 and a constant anchor")
    if applicable and simplified is not False:
        if which == "ex1":
            def tilde(k):
                m = k + 1
                return 4 * K * ceil_frac(12 * lam * K * m) * m + 48 * K * K * m * m + 4 * K * (J + 2) * m - J
            desc = f"4Kp ceil(12 lam Kp (k+1))(k+1) + 48Kp^2(k+1)^2 + 4Kp(J+2)(k+1) - J"
        else:
            def tilde(k):
                m = k + 1
                return 144 * K * K * m * m + 4 * (J + 2) * K * m - J
            desc = "144Kp^2(k+1)^2 + 4(J+2)Kp(k+1) - J"
        out[f"{tag}-Phi~"] = _rate(tilde, desc, Target.STEP, f"{tag}-Phi~", dict(base))
        out[f"{tag}-Psi~"] = _rate(lambda k: tilde(3 * k + 2), "Phi~(3k+2)", Target.FIX,
                                   f"{tag}-Psi~", dict(base))
    return out


# -- linear-rate lemma ----------------------------------------------------------

@dataclass
class SabachShternReport:
    L: float
    J: int
    N: int
    gamma: float
    n_max: int
    seed: int | None = None
    hypothesis_failures: list = field(default_factory=list)
    violations: list = field(default_factory=list)

    @property
    def hypotheses_met(self) -> bool:
        return not self.hypothesis_failures

    @property
    def ok(self) -> bool:
        return self.hypotheses_met and not self.violations

    def __str__(self):
        if not self.hypotheses_met:
            return f"hypotheses unmet: {self.hypothesis_failures[0]}"
        return "ok" if self.ok else f"{len(self.violations)} violation(s), first {self.violations[0]}"


def _close(x, y, tol):
    return abs(x - y) <= tol * max(abs(x), abs(y)) + 1e-15


def sabach_shtern_check(L, J: int, N: int, gamma, a: RealSequence, c: RealSequence,
                        s: RealSequence, n_max: int, *, tol: float = 1e-9,
                        seed: int | None = None) -> SabachShternReport:
    """Check the hypotheses of the linear-rate lemma on ``[0, n_max]`` and its
    conclusion ``s_n <= J L / (gamma (n + J))``."""
    L, gamma, J, N = float(L), float(gamma), int(J), int(N)
    rep = SabachShternReport(L, J, N, gamma, n_max, seed)
    fails = rep.hypothesis_failures
    if not L > 0:
        fails.append(f"L = {L} must be positive")
    if not J >= N >= 2:
        fails.append(f"need J >= N >= 2, got J={J}, N={N}")
    if not 0 < gamma <= 1:
        fails.append(f"gamma = {gamma} outside (0, 1]")
    if fails:
        return rep
    n = np.arange(n_max + 2, dtype=np.int64)
    av, cv, sv = a(n), c(n), s(n)
    expected = N / (gamma * (n + J))
    bad = np.flatnonzero(np.abs(av - expected) > tol * expected + 1e-15)
    if bad.size:
        fails.append(f"a_{bad[0]} = {av[bad[0]]!r} differs from N/(gamma(n+J)) = {expected[bad[0]]!r}")
    bad = np.flatnonzero(cv[: n_max + 1] > L * (1 + tol))
    if bad.size:
        fails.append(f"c_{bad[0]} = {cv[bad[0]]!r} exceeds L")
    if sv[0] > L * (1 + tol):
        fails.append(f"s_0 = {sv[0]!r} exceeds L")
    if np.any(sv < 0):
        fails.append("s has a negative term")
    rhs = (1 - gamma * av[1:n_max + 1]) * sv[:n_max] + (av[:n_max] - av[1:n_max + 1]) * cv[:n_max]
    lhs = sv[1:n_max + 1]
    bad = np.flatnonzero(lhs > rhs + tol * np.abs(rhs) + 1e-15)
    if bad.size:
        fails.append(f"recurrence fails at n = {bad[0]}: {lhs[bad[0]]!r} > {rhs[bad[0]]!r}")
    if fails:
        return rep
    bound = J * L / (gamma * (n[: n_max + 1] + J))
    sn = sv[: n_max + 1]
    for i in np.flatnonzero(sn > bound + tol * bound + 1e-15):
        rep.violations.append(Violation(None, int(i), float(sn[i]), float(bound[i])))
    return rep


def extremal_sequence(coef, add, s0: float) -> np.ndarray:
    """``s_{n+1} = coef_n s_n + add_n`` driven with equality."""
    return _kernels.linear_recurrence(np.ascontiguousarray(coef, dtype=np.float64),
                                      np.ascontiguousarray(add, dtype=np.float64), float(s0))


def sabach_shtern_trial(rng: np.random.Generator, n_max: int):
    """One random instance: ``(L, J, N, gamma, a, c, s)`` with ``s`` extremal."""
    J = int(rng.integers(2, 11))
    N = int(rng.integers(2, J + 1))
    gamma = float(rng.choice([0.25, 0.5, 1.0]))
    L = float(rng.uniform(0.1, 10.0))
    n = np.arange(n_max + 2)
    av = N / (gamma * (n + J))
    cv = rng.uniform(0.0, L, size=n_max + 2)
    s0 = float(rng.uniform(0.0, L))
    sv = extremal_sequence(1 - gamma * av[1:], (av[:-1] - av[1:]) * cv[:-1], s0)
    seq = lambda arr: (lambda i: arr[np.asarray(i)])
    return L, J, N, gamma, RealSequence(seq(av), "a"), RealSequence(seq(cv), "c"), \
        RealSequence(seq(np.concatenate([sv, [0.0]])), "s")


def sabach_shtern_trials(trials: int = 1000, n_max: int = 10_000, seed: int = 0) -> list:
    """Seeded randomized trials of the lemma with extremal ``s``."""
    out = []
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        L, J, N, gamma, a, c, s = sabach_shtern_trial(rng, n_max)
        out.append(sabach_shtern_check(L, J, N, gamma, a, c, s, n_max, seed=seed))
    return out
