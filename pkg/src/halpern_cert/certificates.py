"""Explicit rates of (T-)asymptotic regularity assembled from a moduli bundle.

All rates are exact Python integers. ``Kp`` is an argument to the low-level
builders so they can be tabulated for any value; :func:`certify` always
recomputes it from the instance.
"""
from __future__ import annotations

import decimal
import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

from .exact import EvaluationCeiling, as_fraction, ceil_frac, ceil_ln, tsub
from .iteration import ModuliBundle, ParameterSchedule, ProblemInstance, kp
from .moduli import Kind, Modulus, g_plus

SCI_THRESHOLD = 10**12


class Target(str, enum.Enum):
    STEP = "step"  # |x_{n+1} - x_n|
    FIX = "fix"    # |x_n - T x_n|


class MissingModulus(ValueError):
    """The bundle lacks a modulus the requested certificate needs."""


@dataclass(frozen=True, eq=False)
class RateCertificate:
    rate: Modulus
    target: Target
    provenance: str
    parameters: dict = field(default_factory=dict)

    def __call__(self, k: int) -> int:
        return self.rate(k)

    def table(self, ks) -> list:
        """``[(k, value or None, note)]``; ``None`` when the value is too large to build."""
        rows = []
        for k in ks:
            try:
                rows.append((k, self.rate(k), ""))
            except EvaluationCeiling as exc:
                rows.append((k, None, str(exc)))
        return rows

    def render(self, ks=()) -> str:
        lines = [f"certificate {self.provenance} ({self.target.value} residual)",
                 f"  formula: {self.rate.description}"]
        for key in sorted(self.parameters):
            lines.append(f"  {key} = {self.parameters[key]}")
        for k, v, note in self.table(ks):
            lines.append(f"  k={k}: {format_rate(v) if v is not None else 'not evaluated: ' + note}")
        return "\n".join(lines)


def format_rate(v: int) -> str:
    """Exact integer, with a 3-digit scientific annotation past 10^12."""
    if v <= SCI_THRESHOLD:
        return str(v)
    approx = decimal.Context(prec=3).create_decimal(v)
    return f"{v} (~{approx:.2E})"


def _rho(rho) -> Fraction:
    rho = as_fraction(rho)
    if not 0 <= rho < 1:
        raise ValueError(f"rho must lie in [0, 1), got {rho}")
    return rho


def _kp(Kp) -> int:
    Kp = int(Kp)
    if Kp < 1:
        raise ValueError("Kp must be a positive natural")
    return Kp


def _params(bundle: ModuliBundle, Kp, **extra) -> dict:
    out = {"Kp": Kp, "M_abd": bundle.M_abd, "M_r": bundle.M_r}
    for name in ("sigma1", "sigma1_star", "sigma2", "sigma3", "theta1", "gamma1", "gamma2",
                 "lambda1", "lambda2"):
        m = getattr(bundle, name)
        if m is not None:
            out[name] = str(m)
    out.update({k: str(v) for k, v in extra.items()})
    return out


def chi(bundle: ModuliBundle, Kp: int) -> Modulus:
    """Cauchy modulus of ``sum (Kp d_n + |r_{n+1} - r_n|)``.

    The ``lambda1`` term is dropped when the residuals vanish.
    """
    K = _kp(Kp)
    s2, t1, g1, l1 = bundle.sigma2, bundle.theta1, bundle.gamma1, bundle.lambda1

    def fn(k):
        j = 6 * K * (k + 1) - 1
        v = max(s2(j), t1(j), g1(j))
        return v if l1 is None else max(v, l1(2 * k + 1))

    desc = f"max{{sigma2, theta1, gamma1 at {6 * K}(k+1)-1"
    desc += "}" if l1 is None else ", lambda1(2k+1)}"
    mono = s2.nondecreasing and t1.nondecreasing and g1.nondecreasing and (l1 is None or l1.nondecreasing)
    return Modulus(Kind.CAUCHY_MODULUS, fn, desc, mono)


def _exp_log_term(K: int, k: int) -> int:
    return ceil_ln(4 * K * (k + 1))


def _phi_fn(sigma1: Modulus, ch: Modulus, K: int, rho: Fraction):
    def fn(k):
        num = ch(2 * k + 1) + 1 + _exp_log_term(K, k)
        return g_plus(sigma1, ceil_frac(Fraction(num) / (1 - rho)) + 1)
    return fn


def _phi_star_fn(sigma1_star, ch: Modulus, K: int):
    def fn(k):
        return sigma1_star(ch(2 * k + 1) + 1, 4 * K * (k + 1) - 1) + 1
    return fn


def _psi_fn(phi, gamma2: Modulus, lambda2: Modulus | None, K: int):
    def fn(k):
        v = max(phi(3 * k + 2), gamma2(6 * K * (k + 1) - 1))
        return v if lambda2 is None else max(v, lambda2(3 * k + 2) + 1)
    return fn


def phi_Q1(bundle: ModuliBundle, Kp: int, rho=0, *, provenance="Thm4.1-Phi") -> RateCertificate:
    """Rate for ``|x_{n+1} - x_n|`` from a rate of divergence ``sigma1``."""
    if bundle.sigma1 is None:
        raise MissingModulus("sigma1 is required")
    K, rho = _kp(Kp), _rho(rho)
    ch = chi(bundle, K)
    rate = Modulus(Kind.CONVERGENCE_RATE, _phi_fn(bundle.sigma1, ch, K, rho),
                   f"sigma1+(ceil((chi(2k+1) + 1 + ceil(ln({4 * K}(k+1)))) / (1 - {rho})) + 1)",
                   ch.nondecreasing)
    return RateCertificate(rate, Target.STEP, provenance, _params(bundle, K, rho=rho))


def psi_Q1(phi: RateCertificate, bundle: ModuliBundle, Kp: int, *,
           provenance="Thm4.1-Psi") -> RateCertificate:
    """Rate for ``|x_n - T x_n|`` built on a step-residual rate ``phi``."""
    if bundle.gamma2 is None:
        raise MissingModulus("gamma2 is required")
    K = _kp(Kp)
    desc = f"max{{Phi(3k+2), gamma2({6 * K}(k+1)-1)"
    desc += "}" if bundle.lambda2 is None else ", lambda2(3k+2)+1}"
    rate = Modulus(Kind.CONVERGENCE_RATE, _psi_fn(phi.rate, bundle.gamma2, bundle.lambda2, K), desc)
    params = dict(phi.parameters)
    params["built_on"] = phi.provenance
    return RateCertificate(rate, Target.FIX, provenance, params)


def phi_Q1star(bundle: ModuliBundle, Kp: int, *, provenance="Thm4.2-Phi*") -> RateCertificate:
    if bundle.sigma1_star is None:
        raise MissingModulus("sigma1_star is required")
    K = _kp(Kp)
    ch = chi(bundle, K)
    rate = Modulus(Kind.CONVERGENCE_RATE, _phi_star_fn(bundle.sigma1_star, ch, K),
                   f"sigma1*(chi(2k+1) + 1, {4 * K}(k+1) - 1) + 1")
    return RateCertificate(rate, Target.STEP, provenance, _params(bundle, K))


def psi_Q1star(phi_star: RateCertificate, bundle: ModuliBundle, Kp: int, *,
               provenance="Thm4.2-Psi*") -> RateCertificate:
    return psi_Q1(phi_star, bundle, Kp, provenance=provenance)


def kanzow_shehu_phi(bundle: ModuliBundle, Kp: int, rho=0) -> RateCertificate:
    """The ``rho = 0`` form ``sigma1+(chi(2k+1) + ceil(ln(4Kp(k+1))) + 2)``."""
    if _rho(rho) != 0:
        raise ValueError("the constant-anchor form needs rho = 0")
    if bundle.sigma1 is None:
        raise MissingModulus("sigma1 is required")
    K = _kp(Kp)
    ch = chi(bundle, K)
    s1 = bundle.sigma1

    def fn(k):
        return g_plus(s1, ch(2 * k + 1) + _exp_log_term(K, k) + 2)

    rate = Modulus(Kind.CONVERGENCE_RATE, fn,
                   f"sigma1+(chi(2k+1) + ceil(ln({4 * K}(k+1))) + 2)", ch.nondecreasing)
    return RateCertificate(rate, Target.STEP, "KanzowShehu-Phi", _params(bundle, K, rho=0))


def kanzow_shehu_product_ok(delta, A, m: int, k: int) -> bool:
    """Whether ``A(m,k) >= m`` and ``prod_{i=m}^{A(m,k)} (1 - delta_{i+1}) <= 1/(k+1)``
    (exact rational product; ``delta`` maps a natural to a rational)."""
    top = A(m, k)
    if top < m:
        return False
    prod = Fraction(1)
    for i in range(m, top + 1):
        prod *= 1 - as_fraction(delta(i + 1))
    return prod <= Fraction(1, k + 1)


class SamRates(NamedTuple):
    phi0: RateCertificate
    psi0: RateCertificate


def sam_bound(kp0_value) -> int:
    """``ceil(2 Kp0) + 1``."""
    from .exact import Surd
    return (2 * Surd.of(kp0_value)).ceil() + 1


def _sam_bundle(bundle: ModuliBundle) -> ModuliBundle:
    if bundle.sigma3 is None:
        raise MissingModulus("sigma3 is required")
    zero = Modulus(Kind.CAUCHY_MODULUS, lambda k: 0, "0", True)
    return ModuliBundle(M_abd=0, sigma2=bundle.sigma2, theta1=zero, gamma1=bundle.sigma2,
                        sigma1=bundle.sigma1, sigma1_star=bundle.sigma1_star,
                        sigma3=bundle.sigma3, gamma2=bundle.sigma3)


def sam_rates(bundle: ModuliBundle, Kp0, rho=0, *, branch: str = "auto") -> SamRates:
    """Rates for ``x_{n+1} = delta_n f(x_n) + (1 - delta_n) T x_n``.

    ``branch`` is ``"sigma1"``, ``"sigma1_star"`` or ``"auto"`` (product
    modulus when available).
    """
    sb = _sam_bundle(bundle)
    K = sam_bound(Kp0)
    if branch == "auto":
        branch = "sigma1_star" if bundle.sigma1_star is not None else "sigma1"
    if branch == "sigma1_star":
        phi = phi_Q1star(sb, K, provenance="SAM-Phi0")
    elif branch == "sigma1":
        phi = phi_Q1(sb, K, rho, provenance="SAM-Phi0")
    else:
        raise ValueError(f"unknown branch {branch!r}")
    psi = psi_Q1(phi, sb, K, provenance="SAM-Psi0")
    return SamRates(phi, psi)


def halpern_rates(bundle: ModuliBundle, Kp0) -> SamRates:
    """Plain Halpern iteration (constant anchor, ``rho = 0``) via ``sigma1``."""
    sb = _sam_bundle(bundle)
    K = sam_bound(Kp0)
    ks = kanzow_shehu_phi(sb, K)
    phi = RateCertificate(ks.rate, Target.STEP, "Halpern-Phi0", ks.parameters)
    return SamRates(phi, psi_Q1(phi, sb, K, provenance="Halpern-Psi0"))


def h1delta_to_theta(sigma1: Modulus, rho=0) -> Modulus:
    """Rate of divergence of ``sum (1 - rho) delta_{n+1}`` from one of ``sum delta_n``."""
    rho = _rho(rho)

    def fn(n):
        return tsub(g_plus(sigma1, ceil_frac(Fraction(n) / (1 - rho)) + 1), 1)

    return Modulus(Kind.DIVERGENCE_RATE, fn,
                   f"sigma1+(ceil(n / (1 - {rho})) + 1) -. 1", True)


def certify(inst: ProblemInstance, sched: ParameterSchedule) -> list:
    """Every general certificate the schedule's bundle supports.

    ``Kp`` is computed from the instance, never taken from the caller.
    """
    b = sched.bundle
    if b is None:
        raise MissingModulus("schedule carries no moduli bundle")
    srho = sched.info.get("rho")
    if srho is not None and as_fraction(srho) != inst.rho:
        raise ValueError(f"schedule moduli were built for rho = {srho}, instance has rho = {inst.rho}")
    K = kp(inst, b)
    out = []
    if b.sigma1 is not None:
        phi = phi_Q1(b, K, inst.rho)
        out.append(phi)
        if b.gamma2 is not None:
            out.append(psi_Q1(phi, b, K))
    if b.sigma1_star is not None:
        ph = phi_Q1star(b, K)
        out.append(ph)
        if b.gamma2 is not None:
            out.append(psi_Q1star(ph, b, K))
    return out
