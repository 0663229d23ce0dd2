"""Hot loops: the iteration itself and scalar linear recurrences.

Each kernel is plain Python over numpy arrays, compiled by numba unless
``HALPERN_CERT_NUMBA=0``. ``iterate_numpy`` is an independent per-step numpy
implementation used for custom operators and as a cross-check.
"""
import numpy as np

from ._accel import njit

# column layout of the per-point observation block
STEP, FIX, DIST_P, FDIST_P, X_NORM, TX_NORM, FX_NORM, X_FX, KP = range(9)
N_COLS = 9


@njit
def _norm(v, code):
    s = 0.0
    if code == 0:
        for i in range(v.shape[0]):
            s += abs(v[i])
        return s
    if code == 1:
        for i in range(v.shape[0]):
            s += v[i] * v[i]
        return np.sqrt(s)
    for i in range(v.shape[0]):
        a = abs(v[i])
        if a > s:
            s = a
    return s


@njit
def _apply(code, A, b, lo, hi, radius, x, out):
    d = x.shape[0]
    if code == 0:
        for i in range(d):
            s = b[i]
            for j in range(d):
                s += A[i, j] * x[j]
            out[i] = s
    elif code == 1:
        for i in range(d):
            out[i] = min(max(x[i], lo[i]), hi[i])
    else:
        r2 = 0.0
        for i in range(d):
            r2 += (x[i] - b[i]) ** 2
        r = np.sqrt(r2)
        if r <= radius:
            for i in range(d):
                out[i] = x[i]
        else:
            t = radius / r
            for i in range(d):
                out[i] = b[i] + (x[i] - b[i]) * t


@njit
def _observe(x, tx, fx, p, norm_code, tmp, cols, i):
    for j in range(x.shape[0]):
        tmp[j] = x[j] - tx[j]
    cols[FIX, i] = _norm(tmp, norm_code)
    for j in range(x.shape[0]):
        tmp[j] = x[j] - p[j]
    cols[DIST_P, i] = _norm(tmp, norm_code)
    for j in range(x.shape[0]):
        tmp[j] = fx[j] - p[j]
    cols[FDIST_P, i] = _norm(tmp, norm_code)
    cols[X_NORM, i] = _norm(x, norm_code)
    cols[TX_NORM, i] = _norm(tx, norm_code)
    cols[FX_NORM, i] = _norm(fx, norm_code)
    for j in range(x.shape[0]):
        tmp[j] = x[j] - fx[j]
    cols[X_FX, i] = _norm(tmp, norm_code)


@njit
def iterate_chunk(x, state, alpha, beta, delta, R,
                  tcode, tA, tb, tlo, thi, trad,
                  fcode, fA, fb, flo, fhi, frad,
                  p, p_norm, norm_code, cols, points, keep):
    """Advance ``x`` in place by ``len(alpha)`` steps.

    ``state[0]`` carries the K_p^n recursion. Column ``i`` of ``cols``
    describes the point entering step ``i``. Returns the index of the first
    non-finite step, or -1.
    """
    d = x.shape[0]
    tx = np.empty(d)
    fx = np.empty(d)
    xn = np.empty(d)
    tmp = np.empty(d)
    kp = state[0]
    for i in range(alpha.shape[0]):
        if keep:
            for j in range(d):
                points[i, j] = x[j]
        _apply(tcode, tA, tb, tlo, thi, trad, x, tx)
        _apply(fcode, fA, fb, flo, fhi, frad, x, fx)
        _observe(x, tx, fx, p, norm_code, tmp, cols, i)
        cols[KP, i] = kp
        a, b, dl = alpha[i], beta[i], delta[i]
        finite = True
        for j in range(d):
            xn[j] = dl * fx[j] + a * x[j] + b * tx[j] + R[i, j]
            tmp[j] = xn[j] - x[j]
            if not np.isfinite(xn[j]):
                finite = False
        cols[STEP, i] = _norm(tmp, norm_code)
        for j in range(d):
            tmp[j] = R[i, j]
        kp = kp + (1.0 - a - b - dl) * p_norm + _norm(tmp, norm_code)
        if not finite:
            state[0] = kp
            return i
        for j in range(d):
            x[j] = xn[j]
    state[0] = kp
    return -1


@njit
def observe_point(x, tcode, tA, tb, tlo, thi, trad, fcode, fA, fb, flo, fhi, frad,
                  p, norm_code, cols, i):
    d = x.shape[0]
    tx = np.empty(d)
    fx = np.empty(d)
    tmp = np.empty(d)
    _apply(tcode, tA, tb, tlo, thi, trad, x, tx)
    _apply(fcode, fA, fb, flo, fhi, frad, x, fx)
    _observe(x, tx, fx, p, norm_code, tmp, cols, i)


@njit
def linear_recurrence(coef, add, s0):
    """``s[n+1] = coef[n] * s[n] + add[n]``, returns ``s[0..len(coef)]``."""
    n = coef.shape[0]
    s = np.empty(n + 1)
    s[0] = s0
    for i in range(n):
        s[i + 1] = coef[i] * s[i] + add[i]
    return s


def iterate_numpy(x, state, alpha, beta, delta, R, T, f, p, p_norm, space, cols, points, keep):
    """Per-step numpy path with the same contract as :func:`iterate_chunk`,
    but taking operator objects (so custom callables work)."""
    norm = space.norm_of
    kp = state[0]
    for i in range(alpha.shape[0]):
        if keep:
            points[i] = x
        tx, fx = T(x), f(x)
        cols[FIX, i] = norm(x - tx)
        cols[DIST_P, i] = norm(x - p)
        cols[FDIST_P, i] = norm(fx - p)
        cols[X_NORM, i] = norm(x)
        cols[TX_NORM, i] = norm(tx)
        cols[FX_NORM, i] = norm(fx)
        cols[X_FX, i] = norm(x - fx)
        cols[KP, i] = kp
        a, b, dl = alpha[i], beta[i], delta[i]
        xn = dl * fx + a * x + b * tx + R[i]
        cols[STEP, i] = norm(xn - x)
        kp = kp + (1.0 - a - b - dl) * p_norm + norm(R[i])
        if not np.all(np.isfinite(xn)):
            state[0] = kp
            return i
        x[:] = xn
    state[0] = kp
    return -1
