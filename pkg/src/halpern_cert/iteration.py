"""The inexact generalized Halpern iteration and its a-priori bounds.

    x_{n+1} = delta_n f(x_n) + alpha_n x_n + beta_n T x_n + r_n

with ``T`` nonexpansive, ``f`` a rho-contraction and
``alpha_n + beta_n + delta_n <= 1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from . import _kernels
from ._accel import USE_NUMBA
from .exact import Surd, ceil_frac, smax
from .moduli import Modulus, ProductModulus
from .operators import CUSTOM, InadmissibleOperator, Operator
from .spaces import DimensionMismatch, NormedSpace

FIX_TOL = 1e-12
SUM_SLACK = 1e-12
CHUNK = 1 << 16


class ScheduleError(ValueError):
    pass


class IterationAbort(RuntimeError):
    """The iteration produced a non-finite coordinate."""


@dataclass(frozen=True)
class ModuliBundle:
    """Moduli witnessing the quantitative hypotheses on the parameters.

    ``lambda1``/``lambda2`` are ``None`` exactly when ``r_n = 0`` for all n.
    """

    M_abd: int
    sigma2: Modulus
    theta1: Modulus
    gamma1: Modulus
    sigma1: Modulus | None = None
    sigma1_star: ProductModulus | None = None
    sigma3: Modulus | None = None
    gamma2: Modulus | None = None
    lambda1: Modulus | None = None
    lambda2: Modulus | None = None
    M_r: int = 0

    def __post_init__(self):
        if self.sigma1 is None and self.sigma1_star is None:
            raise ValueError("bundle needs sigma1 or sigma1_star")
        if int(self.M_abd) < 0 or int(self.M_r) < 0:
            raise ValueError("M_abd and M_r must be natural")
        if (self.lambda1 is None) != (self.lambda2 is None):
            raise ValueError("lambda1 and lambda2 must both be given or both omitted")
        if self.lambda1 is None and self.M_r != 0:
            raise ValueError("M_r must be 0 when the residuals vanish")

    @property
    def residual_free(self) -> bool:
        return self.lambda1 is None


Vectorised = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class ParameterSchedule:
    """Lazily evaluated parameter sequences.

    ``alpha``, ``beta``, ``delta`` map an int64 index array to values in
    [0, 1]; ``residual`` maps it to an ``(m, d)`` array, ``None`` meaning
    ``r_n = 0``.
    """

    alpha: Vectorised
    beta: Vectorised
    delta: Vectorised
    residual: Vectorised | None = None
    bundle: ModuliBundle | None = None
    name: str = "custom"
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.residual is None and self.bundle is not None and self.bundle.M_r != 0:
            raise ValueError("M_r must be 0 when the residuals vanish")

    def coefficients(self, start: int, stop: int, dimension: int):
        n = np.arange(start, stop, dtype=np.int64)
        a = _as_array(self.alpha(n), n)
        b = _as_array(self.beta(n), n)
        d = _as_array(self.delta(n), n)
        if self.residual is None:
            R = np.zeros((len(n), dimension))
        else:
            R = np.asarray(self.residual(n), dtype=np.float64).reshape(len(n), -1)
            if R.shape[1] != dimension:
                raise DimensionMismatch(f"residual has {R.shape[1]} coordinates, space has {dimension}")
        return a, b, d, R

    def check(self, start: int, stop: int, dimension: int):
        """Validate ranges and ``alpha + beta + delta <= 1`` on an index window."""
        a, b, d, R = self.coefficients(start, stop, dimension)
        for name, v in (("alpha", a), ("beta", b), ("delta", d)):
            bad = np.flatnonzero(~((v >= 0) & (v <= 1)))
            if bad.size:
                n = start + int(bad[0])
                raise ScheduleError(f"{name}_{n} = {v[bad[0]]!r} outside [0, 1]")
        bad = np.flatnonzero(a + b + d > 1 + SUM_SLACK)
        if bad.size:
            n = start + int(bad[0])
            raise ScheduleError(f"alpha_{n} + beta_{n} + delta_{n} = {a[bad[0]] + b[bad[0]] + d[bad[0]]!r} > 1")
        if not np.all(np.isfinite(R)):
            raise ScheduleError("non-finite residual")
        return a, b, d, R

    def at(self, n: int, dimension: int):
        a, b, d, R = self.coefficients(n, n + 1, dimension)
        return float(a[0]), float(b[0]), float(d[0]), R[0]


def _as_array(v, n):
    v = np.asarray(v, dtype=np.float64)
    return np.broadcast_to(v, n.shape).copy() if v.shape != n.shape else v


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """Normed space, nonexpansive ``T``, contraction ``f``, start ``x0`` and
    a designated fixed point ``p`` of ``T``."""

    space: NormedSpace
    T: Operator
    f: Operator
    x0: np.ndarray
    p: np.ndarray
    verified: bool = field(init=False, default=False)

    def __post_init__(self):
        object.__setattr__(self, "x0", self.space.point(self.x0))
        object.__setattr__(self, "p", self.space.point(self.p))
        if self.T.lipschitz > 1:
            raise InadmissibleOperator("T must be nonexpansive")
        if self.f.lipschitz >= 1:
            raise InadmissibleOperator(f"f must be a contraction with rho < 1, got rho = {self.f.lipschitz}")
        ok_t = self.T.certify(self.space)
        ok_f = self.f.certify(self.space)
        object.__setattr__(self, "verified", ok_t and ok_f)
        gap = self.space.norm_of(self.T(self.p) - self.p)
        if not gap <= FIX_TOL:
            raise ValueError(f"p is not a fixed point of T: |Tp - p| = {gap:.3g}")

    @property
    def rho(self) -> Fraction:
        return self.f.lipschitz

    @property
    def dimension(self) -> int:
        return self.space.dimension


def step(inst: ProblemInstance, sched: ParameterSchedule, x, n: int) -> np.ndarray:
    """One step of the iteration from ``x`` at index ``n``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (inst.dimension,):
        raise DimensionMismatch(f"point of shape {x.shape} in R^{inst.dimension}")
    a, b, d, R = sched.coefficients(n, n + 1, inst.dimension)
    return d[0] * inst.f(x) + a[0] * x + b[0] * inst.T(x) + R[0]


@dataclass(eq=False)
class IterationTrace:
    """Residual sequences of one run of length ``N`` (points ``x_0..x_N``).

    ``step_residuals[n] = |x_{n+1} - x_n|`` for ``n < N``; every other column
    is indexed by the point, ``n <= N``.
    """

    step_residuals: np.ndarray
    fix_residuals: np.ndarray
    kp_path: np.ndarray
    dist_p: np.ndarray
    f_dist_p: np.ndarray
    x_norm: np.ndarray
    tx_norm: np.ndarray
    fx_norm: np.ndarray
    x_minus_fx: np.ndarray
    last_point: np.ndarray
    points: np.ndarray | None = None
    _suffix: dict = field(default_factory=dict, repr=False)

    @property
    def length(self) -> int:
        return len(self.step_residuals)

    def residuals(self, target: str) -> np.ndarray:
        return self.step_residuals if target == "step" else self.fix_residuals

    def suffix_max(self, target: str) -> np.ndarray:
        """``out[n] = max_{m >= n} residual[m]``."""
        if target not in self._suffix:
            r = self.residuals(target)
            self._suffix[target] = np.maximum.accumulate(r[::-1])[::-1]
        return self._suffix[target]

    def with_point(self, n: int, x, inst: ProblemInstance, sched: ParameterSchedule) -> "IterationTrace":
        """Copy with ``x_n`` replaced by ``x``; the affected columns are recomputed."""
        if self.points is None:
            raise ValueError("trace was run without keep_points")
        pts = self.points.copy()
        pts[n] = x
        return trace_from_points(inst, sched, pts)


def _kernel_ops(inst):
    return inst.T.kernel_args() + inst.f.kernel_args()


def run(inst: ProblemInstance, sched: ParameterSchedule, N: int, *,
        keep_points: bool = False, use_kernel: bool | None = None) -> IterationTrace:
    """Iterate ``N`` steps from ``inst.x0``.

    The compiled kernel is used for built-in operators unless disabled; custom
    operators always take the numpy path.
    """
    N = int(N)
    if N < 1:
        raise ValueError("N must be at least 1")
    d = inst.dimension
    custom = inst.T.code == CUSTOM or inst.f.code == CUSTOM
    if use_kernel is None:
        use_kernel = USE_NUMBA
    use_kernel = use_kernel and not custom
    cols = np.empty((_kernels.N_COLS, N + 1))
    points = np.empty((N + 1, d)) if keep_points else np.empty((0, d))
    x = np.array(inst.x0, dtype=np.float64)
    state = np.array([float(kp0(inst))])
    p = np.array(inst.p)
    p_norm = inst.space.norm_of(p)
    ops = _kernel_ops(inst) if use_kernel else None
    for start in range(0, N, CHUNK):
        stop = min(N, start + CHUNK)
        a, b, dl, R = sched.check(start, stop, d)
        sl = cols[:, start:stop]
        pts = points[start:stop] if keep_points else points
        if use_kernel:
            bad = _kernels.iterate_chunk(x, state, a, b, dl, R, *ops, p, p_norm,
                                         inst.space.norm.code, sl, pts, keep_points)
        else:
            bad = _kernels.iterate_numpy(x, state, a, b, dl, R, inst.T, inst.f, p, p_norm,
                                         inst.space, sl, pts, keep_points)
        if bad >= 0:
            raise IterationAbort(f"non-finite iterate at step {start + bad + 1}")
    # observation of the final point x_N
    if use_kernel:
        _kernels.observe_point(x, *ops, p, inst.space.norm.code, cols, N)
    else:
        _observe_numpy(inst, x, cols, N)
    cols[_kernels.KP, N] = state[0]
    if keep_points:
        points[N] = x
    return _trace_from_cols(cols, x, points if keep_points else None)


def _observe_numpy(inst, x, cols, i):
    norm = inst.space.norm_of
    tx, fx = inst.T(x), inst.f(x)
    K = _kernels
    cols[K.FIX, i] = norm(x - tx)
    cols[K.DIST_P, i] = norm(x - inst.p)
    cols[K.FDIST_P, i] = norm(fx - inst.p)
    cols[K.X_NORM, i] = norm(x)
    cols[K.TX_NORM, i] = norm(tx)
    cols[K.FX_NORM, i] = norm(fx)
    cols[K.X_FX, i] = norm(x - fx)


def _trace_from_cols(cols, last, points):
    K = _kernels
    return IterationTrace(
        step_residuals=cols[K.STEP, :-1],
        fix_residuals=cols[K.FIX],
        kp_path=cols[K.KP],
        dist_p=cols[K.DIST_P],
        f_dist_p=cols[K.FDIST_P],
        x_norm=cols[K.X_NORM],
        tx_norm=cols[K.TX_NORM],
        fx_norm=cols[K.FX_NORM],
        x_minus_fx=cols[K.X_FX],
        last_point=np.array(last),
        points=points,
    )


def trace_from_points(inst: ProblemInstance, sched: ParameterSchedule, points) -> IterationTrace:
    """Rebuild every trace column from stored points (vectorised, no iteration)."""
    X = np.asarray(points, dtype=np.float64)
    N = X.shape[0] - 1
    sp = inst.space
    TX, FX = inst.T.apply_many(X), inst.f.apply_many(X)
    K = _kernels
    cols = np.empty((K.N_COLS, N + 1))
    cols[K.STEP, :N] = sp.norms(X[1:] - X[:-1])
    cols[K.STEP, N] = np.nan
    cols[K.FIX] = sp.norms(X - TX)
    cols[K.DIST_P] = sp.norms(X - inst.p)
    cols[K.FDIST_P] = sp.norms(FX - inst.p)
    cols[K.X_NORM] = sp.norms(X)
    cols[K.TX_NORM] = sp.norms(TX)
    cols[K.FX_NORM] = sp.norms(FX)
    cols[K.X_FX] = sp.norms(X - FX)
    cols[K.KP] = kp_path(inst, sched, N)
    return _trace_from_cols(cols, X[-1], X)


# -- a-priori bounds -------------------------------------------------------------

def kp0(inst: ProblemInstance) -> Surd:
    """``max{|x0 - p|, |f(p) - p| / (1 - rho), |p|}`` as an exact surd."""
    sp = inst.space
    rho = inst.rho
    if rho >= 1:
        raise ValueError("rho must be < 1")
    fp = inst.f(inst.p)
    return smax(sp.exact_distance(inst.x0, inst.p),
                sp.exact_distance(fp, inst.p) / (1 - rho),
                sp.exact_norm(inst.p))


def kp_path(inst: ProblemInstance, sched: ParameterSchedule, n):
    """The path ``K_p^0, ..., K_p^n`` as a float array (``[-1]`` is ``K_p^n``)."""
    N = int(n)
    p_norm = inst.space.norm_of(inst.p)
    out = np.empty(N + 1)
    out[0] = float(kp0(inst))
    acc = out[0]
    for start in range(0, N, CHUNK):
        stop = min(N, start + CHUNK)
        a, b, d, R = sched.coefficients(start, stop, inst.dimension)
        inc = (1.0 - a - b - d) * p_norm + inst.space.norms(R)
        # sequential accumulation, matching the kernel's order of operations
        for i, v in enumerate(inc):
            acc = acc + v
            out[start + i + 1] = acc
    return out


def kp(inst: ProblemInstance, bundle: ModuliBundle) -> int:
    """``ceil((2 + M_abd) K_p^0) + M_r + 1``."""
    return ((2 + int(bundle.M_abd)) * kp0(inst)).ceil() + int(bundle.M_r) + 1
