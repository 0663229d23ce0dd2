"""End-to-end verification: run a scenario, check every bound, report.

Three classes of check are kept apart so an injected fault can be traced to
the class that caught it:

``moduli``       each bundle modulus against the sequence it governs
``trace``        the pointwise a-priori bounds along the computed orbit
``certificate``  each rate against the residual it certifies
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .certificates import RateCertificate, certify, phi_Q1, phi_Q1star, psi_Q1, psi_Q1star
from .exact import EvaluationCeiling
from .iteration import (IterationAbort, ParameterSchedule, ProblemInstance, ScheduleError,
                        kp, run)
from .moduli import (ABS_FLOOR, DEFAULT_TOL, Kind, Modulus, ModulusReport, RealSequence, Violation,
                     validate_modulus)

CLASSES = ("moduli", "trace", "certificate")
CHUNK = 1 << 20


@dataclass(frozen=True, eq=False)
class Scenario:
    """One verification unit.

    ``certificates=None`` means "everything the bundle supports", built with
    ``K_p`` computed from the instance. ``kp_override`` replaces that ``K_p``
    in the certificates only (a fault-injection hook; the trace checks always
    use the true value).
    """

    name: str
    instance: ProblemInstance
    schedule: ParameterSchedule
    trace_length: int
    k_max: int = 10
    tolerance: float = DEFAULT_TOL
    seed: int = 0
    certificates: tuple | None = None
    kp_override: int | None = None
    ex3: object = None  # Example3Params with L set, enables the linear-rate checks
    moduli_k_max: int = 50
    moduli_tail: int = 10_000
    divergence_k_max: int = 12
    product_m_max: int = 100
    perturb: tuple | None = None  # (n, point): replace x_n after the run

    def __post_init__(self):
        if int(self.trace_length) < 2:
            raise ValueError("trace_length must be at least 2")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")


@dataclass
class Check:
    cls: str
    name: str
    checked: int = 0
    violations: list = field(default_factory=list)
    unverifiable: list = field(default_factory=list)
    note: str = ""

    @property
    def ok(self) -> bool:
        return not self.violations

    def status(self) -> str:
        if self.violations:
            return "violated"
        if self.unverifiable and not self.checked:
            return "unverifiable"
        return "verified"


@dataclass
class VerificationReport:
    scenario: str
    checks: list = field(default_factory=list)
    error: str | None = None
    wall_clock: float = 0.0

    @property
    def passed(self) -> bool:
        return self.error is None and all(c.ok for c in self.checks)

    def failed_classes(self) -> set:
        return {c.cls for c in self.checks if not c.ok}

    def by_class(self, cls: str) -> list:
        return [c for c in self.checks if c.cls == cls]

    def render(self) -> str:
        """Deterministic text (no timing)."""
        lines = [f"scenario {self.scenario}: {'PASS' if self.passed else 'FAIL'}"]
        if self.error:
            lines.append(f"  error: {self.error}")
        for c in self.checks:
            s = f"  [{c.cls}] {c.name}: {c.status()} ({c.checked} checked"
            if c.unverifiable:
                s += f", {len(c.unverifiable)} unverifiable"
            s += ")"
            if c.note:
                s += f" {c.note}"
            lines.append(s)
            for v in c.violations[:5]:
                lines.append(f"      violation {v}")
            if len(c.violations) > 5:
                lines.append(f"      ... {len(c.violations) - 5} more")
            if c.unverifiable and c.cls == "certificate":
                ks = [u[0] for u in c.unverifiable]
                lines.append(f"      unverifiable at desk scale for k in {_ranges(ks)}: {c.unverifiable[0][1]}")
        return "\n".join(lines)

    def rows(self) -> list:
        """Machine-readable rows ``(scenario, class, check, status, k, n, lhs, rhs)``."""
        out = []
        for c in self.checks:
            out.append((self.scenario, c.cls, c.name, c.status(), "", "", "", ""))
            for v in c.violations:
                out.append((self.scenario, c.cls, c.name, "violation", str(v.k), str(v.n),
                            repr(float(v.lhs)), repr(float(v.rhs))))
        return out


def _ranges(ks) -> str:
    ks = list(ks)
    if not ks:
        return "{}"
    parts, start, prev = [], ks[0], ks[0]
    for k in ks[1:] + [None]:
        if k is not None and isinstance(k, int) and k == prev + 1:
            prev = k
            continue
        parts.append(str(start) if start == prev else f"{start}..{prev}")
        if k is not None:
            start = prev = k
    return "{" + ", ".join(parts) + "}"


def _le(lhs, rhs, tol):
    """``lhs <= rhs`` up to ``tol`` relative to ``max(|rhs|, |lhs|)`` plus an absolute floor."""
    return lhs <= rhs + tol * np.maximum(np.abs(rhs), np.abs(lhs)) + ABS_FLOOR


# -- certificates ----------------------------------------------------------------

def verify_certificate(trace, cert: RateCertificate, k_max: int, tol: float = DEFAULT_TOL) -> Check:
    """Check ``residual[n] <= 1/(k+1)`` for every ``n >= cert(k)`` in the trace.

    Every index from ``cert(k)`` to the end of the trace is covered (via the
    suffix maximum), not a sample.
    """
    chk = Check("certificate", cert.provenance)
    res = trace.residuals(cert.target.value)
    last = len(res) - 1
    smax = trace.suffix_max(cert.target.value)
    for k in range(k_max + 1):
        try:
            n0 = cert(k)
        except EvaluationCeiling as exc:
            chk.unverifiable.append((k, f"rate value too large to build ({exc})"))
            continue
        if n0 > last:
            chk.unverifiable.append((k, f"rate({k}) = {_short(n0)} beyond trace length {last}"))
            continue
        rhs = 1.0 / (k + 1)
        chk.checked += 1
        worst = float(smax[n0])
        if not _le(worst, rhs, tol):
            n_bad = n0 + int(np.argmax(res[n0:] > rhs))
            chk.violations.append(Violation(k, n_bad, float(res[n_bad]), rhs))
    return chk


def _short(v: int) -> str:
    if v.bit_length() <= 64:
        return str(v)
    return f"~1e{int(v.bit_length() * math.log10(2))}"


# -- trace inequalities ------------------------------------------------------------

def _first_bad(name, lhs, rhs, offset, tol, chk):
    ok = _le(lhs, rhs, tol)
    chk.checked += len(lhs)
    if not np.all(ok):
        bad = np.flatnonzero(~ok)
        for i in bad[:10]:
            chk.violations.append(Violation(name, int(offset + i), float(lhs[i]), float(np.broadcast_to(rhs, lhs.shape)[i])))
        if len(bad) > 10:
            chk.note = f"({len(bad)} indices fail)"


def verify_trace_inequalities(trace, inst: ProblemInstance, sched: ParameterSchedule, Kp: int,
                              tol: float = DEFAULT_TOL) -> list:
    """Pointwise bounds along the orbit, one :class:`Check` per inequality."""
    K = float(Kp)
    N = trace.length
    sp = inst.space
    rho = float(inst.rho)
    names = ["|x_n - p| <= Kp^n", "|f(x_n) - p| <= Kp^n", "Kp^n <= Kp",
             "|x_n|, |Tx_n|, |f(x_n)| <= Kp", "|x_{n+1} - x_n|, |x_n - f(x_n)| <= 2Kp",
             "step recursion", "fix residual via step residual"]
    checks = {n: Check("trace", n) for n in names}
    for start in range(0, N + 1, CHUNK):
        stop = min(N + 1, start + CHUNK)
        sl = slice(start, stop)
        kpn = trace.kp_path[sl]
        _first_bad("x", trace.dist_p[sl], kpn, start, tol, checks[names[0]])
        _first_bad("f", trace.f_dist_p[sl], kpn, start, tol, checks[names[1]])
        _first_bad("Kp^n", kpn, K, start, tol, checks[names[2]])
        for col, lab in ((trace.x_norm, "x"), (trace.tx_norm, "Tx"), (trace.fx_norm, "fx")):
            _first_bad(lab, col[sl], K, start, tol, checks[names[3]])
        _first_bad("x-fx", trace.x_minus_fx[sl], 2 * K, start, tol, checks[names[4]])
        s_stop = min(N, stop)
        if s_stop > start:
            s = trace.step_residuals[start:s_stop]
            _first_bad("step", s, 2 * K, start, tol, checks[names[4]])
            # coefficients for n in [start, s_stop], one past for the differences
            a, b, d, R = sched.coefficients(start, s_stop + 1, inst.dimension)
            rn = sp.norms(R)
            fix = trace.fix_residuals[start:s_stop]
            rhs8 = s + 2 * K * (1 - b[:-1]) + rn[:-1]
            _first_bad("fix-via-step", fix, rhs8, start, tol, checks[names[6]])
            # s_{n+1} <= (1 - (1-rho) delta_{n+1}) s_n + Kp d_n + |r_{n+1} - r_n|
            m = len(s) - 1 if s_stop == N else len(s)
            if m > 0:
                s_next = trace.step_residuals[start + 1:start + 1 + m]
                dn = np.abs(np.diff(a))[:m] + np.abs(np.diff(b))[:m] + np.abs(np.diff(d))[:m]
                dr = sp.norms(R[1:m + 1] - R[:m])
                rhs7 = (1 - (1 - rho) * d[1:m + 1]) * s[:m] + K * dn + dr
                _first_bad("step-recursion", s_next, rhs7, start, tol, checks[names[5]])
    return list(checks.values())


def example3_checks(trace, inst, sched, params, L: int, tol: float = DEFAULT_TOL) -> list:
    """Linear pointwise bounds of example 3 and the recursion they rest on."""
    from .schedules import example3_rates
    K = kp(inst, sched.bundle)
    rates = example3_rates(params, K, L)
    J, P, rho = int(params.J), int(params.P), float(params.rho)
    r_norm = float(sched.info["r_norm"])
    N = trace.length
    c_step = Check("trace", "example 3 step bound JL/((1-rho)(n+J))")
    c_fix = Check("trace", "example 3 fix bound (J+2)L/((1-rho)(n+J))")
    c_rec = Check("trace", "example 3 recursion with theta_n <= L")
    c_theta = Check("trace", "example 3 theta_n <= L")
    for start in range(0, N + 1, CHUNK):
        stop = min(N + 1, start + CHUNK)
        n = np.arange(start, stop, dtype=np.int64)
        _first_bad("fix", trace.fix_residuals[start:stop], rates.fix_bound(n), start, tol, c_fix)
        s_stop = min(N, stop)
        if s_stop <= start:
            continue
        ns = n[: s_stop - start]
        s = trace.step_residuals[start:s_stop]
        _first_bad("step", s, rates.step_bound(ns), start, tol, c_step)
        nf = ns.astype(np.float64)
        theta = (3 - rho) * K + (1 - rho) * r_norm * (nf + J) * (nf + J + 1) * (2 * nf + 2 * P + 1) \
            / (2 * (nf + P) ** 2 * (nf + P + 1) ** 2)
        _first_bad("theta", theta, float(L), start, tol, c_theta)
        m = len(s) - 1 if s_stop == N else len(s)
        if m > 0:
            _, _, d, _ = sched.coefficients(start, start + m + 1, inst.dimension)
            rhs = (1 - (1 - rho) * d[1:]) * s[:m] + (d[:-1] - d[1:]) * theta[:m]
            _first_bad("ex3-recursion", trace.step_residuals[start + 1:start + 1 + m], rhs, start, tol, c_rec)
    return [c_step, c_fix, c_rec, c_theta]


# -- moduli ---------------------------------------------------------------------

def bundle_sequences(inst: ProblemInstance, sched: ParameterSchedule) -> dict:
    """The sequence each bundle modulus speaks about, as :class:`RealSequence` objects."""
    d = inst.dimension
    sp = inst.space
    rho = float(inst.rho)

    def coef(i):
        return lambda n: _at(sched, n, d)[i]

    def diff(i):
        def f(n):
            n = np.asarray(n, dtype=np.int64)
            return np.abs(_at(sched, n, d)[i] - _at(sched, n + 1, d)[i])
        return f

    def r_norm(n):
        return sp.norms(_at(sched, np.asarray(n, dtype=np.int64), d)[3])

    def r_diff(n):
        n = np.asarray(n, dtype=np.int64)
        return sp.norms(_at(sched, n, d)[3] - _at(sched, n + 1, d)[3])

    return {
        "sigma1": RealSequence(coef(2), "delta_n"),
        "sigma1_star": RealSequence(lambda n: (1 - rho) * _at(sched, np.asarray(n) + 1, d)[2],
                                    "(1-rho) delta_{n+1}"),
        "sigma2": RealSequence(diff(2), "|delta_n - delta_{n+1}|"),
        "sigma3": RealSequence(coef(2), "delta_n"),
        "theta1": RealSequence(diff(0), "|alpha_n - alpha_{n+1}|"),
        "gamma1": RealSequence(diff(1), "|beta_n - beta_{n+1}|"),
        "gamma2": RealSequence(lambda n: 1 - _at(sched, np.asarray(n), d)[1], "1 - beta_n"),
        "lambda1": RealSequence(r_diff, "|r_n - r_{n+1}|"),
        "lambda2": RealSequence(r_norm, "|r_n|"),
        "M_abd": RealSequence(lambda n: np.clip(1 - sum(_at(sched, np.asarray(n), d)[:3]), 0, None),
                              "1 - alpha_n - beta_n - delta_n"),
    }


def _at(sched, n, d):
    """Coefficients at arbitrary index arrays (schedules are functions of n)."""
    n = np.asarray(n, dtype=np.int64).reshape(-1)
    a = np.broadcast_to(np.asarray(sched.alpha(n), dtype=np.float64), n.shape)
    b = np.broadcast_to(np.asarray(sched.beta(n), dtype=np.float64), n.shape)
    dl = np.broadcast_to(np.asarray(sched.delta(n), dtype=np.float64), n.shape)
    R = np.zeros((len(n), d)) if sched.residual is None else \
        np.asarray(sched.residual(n), dtype=np.float64).reshape(len(n), d)
    return a, b, dl, R


def validate_bundle(inst: ProblemInstance, sched: ParameterSchedule, *, k_max: int = 50,
                    tail: int = 10_000, divergence_k_max: int = 12, m_max: int = 100,
                    tol: float = DEFAULT_TOL) -> list:
    """Validate every modulus and bound of the schedule's bundle by brute force."""
    b = sched.bundle
    seqs = bundle_sequences(inst, sched)
    out = []
    for name in ("sigma2", "sigma3", "theta1", "gamma1", "gamma2", "lambda1", "lambda2",
                 "sigma1", "sigma1_star"):
        m = getattr(b, name)
        if m is None:
            continue
        if name == "sigma1":
            rep = validate_modulus(m.retag(Kind.DIVERGENCE_RATE), seqs[name], divergence_k_max, 0, tol=tol)
        elif name == "sigma1_star":
            rep = validate_modulus(m, seqs[name], k_max, 0, tol=tol, m_max=m_max)
        else:
            rep = validate_modulus(m, seqs[name], k_max, tail, tol=tol)
        out.append(_from_report(f"{name}: {m}", rep))
    mono = _monotonicity_check(b, k_max, divergence_k_max)
    if mono is not None:
        out.append(mono)
    for name, bound, seq in (("M_abd", b.M_abd, seqs["M_abd"]), ("M_r", b.M_r, seqs["lambda2"])):
        chk = Check("moduli", f"{name} = {bound} bounds the series")
        n_terms = max(tail, 10**6)
        total = math.fsum(float(np.sum(seq(np.arange(lo, min(n_terms, lo + CHUNK)))))
                          for lo in range(0, n_terms, CHUNK))
        chk.checked = 1
        chk.note = f"(partial sum of {n_terms} terms)"
        # each float term carries a few ulps of rounding from 1 - a - b - d
        slack = 4 * n_terms * np.finfo(float).eps
        if not _le(total, float(bound) + slack, tol):
            chk.violations.append(Violation(name, n_terms, total, float(bound)))
        out.append(chk)
    return out


def _monotonicity_check(b, k_max: int, divergence_k_max: int) -> Check | None:
    """A ``nondecreasing`` flag lets ``g_plus`` skip the running maximum; test the claim."""
    flagged = [(name, m) for name in ("sigma1", "sigma2", "sigma3", "theta1", "gamma1", "gamma2",
                                      "lambda1", "lambda2")
               if isinstance(m := getattr(b, name), Modulus) and m.nondecreasing]
    if not flagged:
        return None
    chk = Check("moduli", "moduli flagged nondecreasing are nondecreasing")
    for name, m in flagged:
        prev = None
        for k in range((divergence_k_max if name == "sigma1" else k_max) + 1):
            try:
                v = m(k)
            except EvaluationCeiling:
                break
            chk.checked += 1
            if prev is not None and v < prev:
                chk.violations.append(Violation(name, k, float(v), float(prev)))
                break
            prev = v
    return chk


def _from_report(name, rep: ModulusReport) -> Check:
    return Check("moduli", name, len(rep.checked), list(rep.violations), list(rep.unverifiable))


# -- driver ---------------------------------------------------------------------

def scenario_certificates(sc: Scenario) -> list:
    if sc.certificates is not None:
        return list(sc.certificates)
    K = sc.kp_override if sc.kp_override is not None else kp(sc.instance, sc.schedule.bundle)
    if sc.kp_override is None:
        return certify(sc.instance, sc.schedule)
    b, out = sc.schedule.bundle, []
    if b.sigma1 is not None:
        ph = phi_Q1(b, K, sc.instance.rho)
        out += [ph] + ([psi_Q1(ph, b, K)] if b.gamma2 is not None else [])
    if b.sigma1_star is not None:
        ph = phi_Q1star(b, K)
        out += [ph] + ([psi_Q1star(ph, b, K)] if b.gamma2 is not None else [])
    return out


def run_scenario(sc: Scenario) -> VerificationReport:
    t0 = time.perf_counter()
    rep = VerificationReport(sc.name)
    inst, sched = sc.instance, sc.schedule
    try:
        if sched.bundle is not None:
            rep.checks += validate_bundle(inst, sched, k_max=sc.moduli_k_max, tail=sc.moduli_tail,
                                          divergence_k_max=sc.divergence_k_max,
                                          m_max=sc.product_m_max, tol=sc.tolerance)
        keep = sc.perturb is not None
        trace = run(inst, sched, sc.trace_length, keep_points=keep)
        if sc.perturb is not None:
            n, x = sc.perturb
            trace = trace.with_point(int(n), x, inst, sched)
        K = kp(inst, sched.bundle)
        rep.checks += verify_trace_inequalities(trace, inst, sched, K, sc.tolerance)
        if sc.ex3 is not None:
            rep.checks += example3_checks(trace, inst, sched, sc.ex3, sc.ex3.L, sc.tolerance)
        for cert in scenario_certificates(sc):
            rep.checks.append(verify_certificate(trace, cert, sc.k_max, sc.tolerance))
        del trace
    except (IterationAbort, ScheduleError, EvaluationCeiling, MemoryError) as exc:
        rep.error = f"{type(exc).__name__}: {exc}"
    rep.wall_clock = time.perf_counter() - t0
    return rep


def run_suite(scenarios) -> list:
    """Run scenarios one after another; each is deterministic and self-contained."""
    return [run_scenario(sc) for sc in scenarios]


def suite_exit_code(reports) -> int:
    return 0 if all(r.passed for r in reports) else 1
