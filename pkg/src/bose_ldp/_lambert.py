"""Scalar real Lambert W, pure Python.

This is the reference implementation. The compiled kernel mirrors the same
algorithm so both backends agree to rounding.
"""

import math

# 1/e split into a double and its rounding error, for accurate x + 1/e.
EM1_HI = 0.36787944117144233
EM1_LO = -1.2428753672788363e-17

# Inputs below -1/e by at most this much are treated as the branch point.
BRANCH_SLACK = 4.0e-16

# Coefficients of W = -1 + p - p^2/3 + ... with p = +-sqrt(2(e x + 1)).
_BRANCH_SERIES = (
    -1.0,
    1.0,
    -1.0 / 3.0,
    11.0 / 72.0,
    -43.0 / 540.0,
    769.0 / 17280.0,
    -221.0 / 8505.0,
    680863.0 / 43545600.0,
)

_SERIES_ONLY_P = 1.0e-3


def branch_offset(x):
    """Return x + 1/e with the rounding error of 1/e restored."""
    return (x + EM1_HI) + EM1_LO


def _branch_series(p):
    acc = 0.0
    for c in reversed(_BRANCH_SERIES):
        acc = acc * p + c
    return acc


def _halley(x, w):
    for _ in range(100):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        dw = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w -= dw
        if abs(dw) <= 2.0e-16 * (1.0 + abs(w)):
            break
    return w


def _newton_log(logx, w):
    # Solves w + log|w| = log|x|; used where exp(w) would over- or underflow.
    for _ in range(100):
        f = w + math.log(abs(w)) - logx
        dw = f / (1.0 + 1.0 / w)
        w -= dw
        if abs(dw) <= 2.0e-16 * abs(w):
            break
    return w


def w0(x):
    """Principal branch. Caller guarantees x >= -1/e up to BRANCH_SLACK."""
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return math.inf
    off = branch_offset(x)
    if off <= 0.0:
        return -1.0
    if x < -0.25:
        p = math.sqrt(2.0 * math.e * off)
        guess = _branch_series(p)
        if p < _SERIES_ONLY_P:
            return guess
        return _halley(x, guess)
    if x < 3.0:
        return _halley(x, math.log1p(x))
    l1 = math.log(x)
    l2 = math.log(l1)
    guess = l1 - l2 + l2 / l1
    if x > 1.0e20:
        return _newton_log(l1, guess)
    return _halley(x, guess)


def wm1(x):
    """Lower branch. Caller guarantees -1/e <= x < 0 up to BRANCH_SLACK."""
    off = branch_offset(x)
    if off <= 0.0:
        return -1.0
    if x < -0.25:
        p = -math.sqrt(2.0 * math.e * off)
        guess = _branch_series(p)
        if -p < _SERIES_ONLY_P:
            return guess
        return _halley(x, guess)
    l1 = math.log(-x)
    l2 = math.log(-l1)
    guess = l1 - l2 + l2 / l1
    if x > -1.0e-20:
        return _newton_log(l1, guess)
    return _halley(x, guess)
