# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: Lambert W series sums and the Metropolis chain.

Each function mirrors one in ``_fallback.py`` operation for operation, so the
two backends agree to rounding (bit for bit in the Metropolis chain).
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, log1p, sqrt, fabs, isinf, M_E, NAN

cnp.import_array()

cdef double EM1_HI = 0.36787944117144233
cdef double EM1_LO = -1.2428753672788363e-17
cdef double BRANCH_SLACK = 4.0e-16
cdef double SERIES_ONLY_P = 1.0e-3
cdef double[8] BRANCH_SERIES = [
    -1.0, 1.0, -1.0 / 3.0, 11.0 / 72.0, -43.0 / 540.0,
    769.0 / 17280.0, -221.0 / 8505.0, 680863.0 / 43545600.0]


cdef inline double _branch_offset(double x) nogil:
    return (x + EM1_HI) + EM1_LO


cdef inline double _branch_series(double p) nogil:
    cdef double acc = 0.0
    cdef int i
    for i in range(7, -1, -1):
        acc = acc * p + BRANCH_SERIES[i]
    return acc


cdef inline double _halley(double x, double w) nogil:
    cdef double ew, f, wp1, dw
    cdef int i
    for i in range(100):
        ew = exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        dw = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w -= dw
        if fabs(dw) <= 2.0e-16 * (1.0 + fabs(w)):
            break
    return w


cdef inline double _newton_log(double logx, double w) nogil:
    cdef double f, dw
    cdef int i
    for i in range(100):
        f = w + log(fabs(w)) - logx
        dw = f / (1.0 + 1.0 / w)
        w -= dw
        if fabs(dw) <= 2.0e-16 * fabs(w):
            break
    return w


cdef double c_w0(double x) nogil:
    cdef double off, p, guess, l1, l2
    if x == 0.0:
        return 0.0
    if isinf(x):
        return x
    off = _branch_offset(x)
    if off <= 0.0:
        return -1.0
    if x < -0.25:
        p = sqrt(2.0 * M_E * off)
        guess = _branch_series(p)
        if p < SERIES_ONLY_P:
            return guess
        return _halley(x, guess)
    if x < 3.0:
        return _halley(x, log1p(x))
    l1 = log(x)
    l2 = log(l1)
    guess = l1 - l2 + l2 / l1
    if x > 1.0e20:
        return _newton_log(l1, guess)
    return _halley(x, guess)


cdef double c_wm1(double x) nogil:
    cdef double off, p, guess, l1, l2
    off = _branch_offset(x)
    if off <= 0.0:
        return -1.0
    if x < -0.25:
        p = -sqrt(2.0 * M_E * off)
        guess = _branch_series(p)
        if -p < SERIES_ONLY_P:
            return guess
        return _halley(x, guess)
    l1 = log(-x)
    l2 = log(-l1)
    guess = l1 - l2 + l2 / l1
    if x > -1.0e-20:
        return _newton_log(l1, guess)
    return _halley(x, guess)


def lambert_w_array(double[::1] x, int branch):
    """Elementwise W on an array; NaN marks arguments outside the domain."""
    cdef Py_ssize_t i, n = x.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef double xi
    with nogil:
        for i in range(n):
            xi = x[i]
            if xi != xi or _branch_offset(xi) < -BRANCH_SLACK:
                o[i] = NAN
            elif branch == 0:
                o[i] = c_w0(xi)
            elif xi >= 0.0:
                o[i] = NAN
            else:
                o[i] = c_wm1(xi)
    return out


def lambert_sums(double log_a, double c1, double c2, long k_lo, long k_hi,
                 long lower_index):
    """Sums of -W/k, -W/k^2 and W^2/k^2 over k_lo <= k <= k_hi.

    W is evaluated at z_k = -exp(log_a + c1 log k + c2 k) on the principal
    branch, except at k == lower_index where the lower branch is used.
    Returns (ok, t1, t2, t3); ok is False when some z_k < -1/e.
    """
    cdef long k
    cdef double kd, z, w, t1 = 0.0, t2 = 0.0, t3 = 0.0
    cdef bint ok = True
    with nogil:
        for k in range(k_lo, k_hi + 1):
            kd = <double> k
            z = -exp(log_a + c1 * log(kd) + c2 * kd)
            if _branch_offset(z) < -BRANCH_SLACK:
                ok = False
                break
            if k == lower_index:
                w = c_wm1(z)
            else:
                w = c_w0(z)
            t1 += -w / kd
            t2 += -w / (kd * kd)
            t3 += w * w / (kd * kd)
    return ok, t1, t2, t3


def metropolis_run(cnp.int64_t[::1] state, double[::1] loglam, double volume,
                   double beta, double mu, double a_d, double a_c, double b,
                   long cap, cnp.int64_t[::1] sums, cnp.int64_t[::1] counters,
                   cnp.int64_t[::1] kidx, cnp.uint8_t[::1] up, double[::1] logu,
                   long thin, long phase, cnp.int64_t[:, ::1] out):
    """Advance the chain len(kidx) steps; record the state every `thin` steps.

    ``sums`` holds (S0, S1, S2) = (sum N_k, sum k N_k, sum k^2 N_k^2) and is
    updated in place, ``counters`` holds (accepted, rejected at a boundary).
    ``phase`` is the number of steps already taken modulo ``thin``.
    Returns (rows written to ``out``, updated phase).
    """
    cdef Py_ssize_t i, n_steps = kidx.shape[0]
    cdef long j, rows = 0, kk, n, sigma
    cdef double kd, vol2 = volume * volume, bv = beta * volume
    cdef double ds0, ds1, ds2, dh, log_acc
    cdef long kdim = state.shape[0]
    with nogil:
        for i in range(n_steps):
            kk = kidx[i]
            n = state[kk]
            kd = <double> (kk + 1)
            if up[i]:
                sigma = 1
            else:
                sigma = -1
            if (sigma < 0 and n == 0) or (sigma > 0 and cap >= 0 and n + 1 > cap):
                counters[1] += 1
            else:
                ds0 = <double> sigma
                ds1 = <double> sigma * kd
                ds2 = kd * kd * (2.0 * <double> n * <double> sigma + 1.0)
                dh = (-mu * ds1 / volume
                      + 0.5 * a_d * (2.0 * <double> sums[1] * ds1 + ds1 * ds1) / vol2
                      + 0.5 * a_c * (2.0 * <double> sums[0] * ds0 + 1.0) / vol2
                      - 0.5 * b * ds2 / vol2)
                if sigma > 0:
                    log_acc = loglam[kk] - log(<double> (n + 1)) - bv * dh
                else:
                    log_acc = log(<double> n) - loglam[kk] - bv * dh
                if logu[i] < log_acc:
                    state[kk] = n + sigma
                    sums[0] += sigma
                    sums[1] += sigma * (kk + 1)
                    sums[2] += (kk + 1) * (kk + 1) * (2 * n * sigma + 1)
                    counters[0] += 1
            phase += 1
            if phase == thin:
                phase = 0
                for j in range(kdim):
                    out[rows, j] = state[j]
                rows += 1
    return rows, phase
