"""Lambert-W series of the HYL stationarity equations.

For an exponent shift s <= 0 the candidate minimiser is

    xi_k = -W(z_k) / (b beta k^2),   z_k = -b beta k^2 q_k exp(beta k s)
         = -A k^{c1} exp(c2 k),

with A = b beta (4 pi beta)^{-d/2}, c1 = 1 - d/2 and c2 = beta (alpha + s).
This module returns the three sums that everything else is built from:
sum k xi_k (density), sum xi_k and sum k^2 xi_k^2.

Terms with k <= Ks go through the compiled kernel. Beyond the split index
Ks every |z_k| is small, and the tail is summed exactly by expanding W in
powers of z and exchanging the order of summation, which turns each power
into a Bose-function tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend, _lambert
from .errors import RegimeError
from .model import CycleWeightTable, ModelParams
from .special_functions import bose_g, bose_tail

__all__ = ["LambertSums", "series_constants", "lambert_sums", "lambert_xi"]

_Y_SPLIT = 5.0e-3
_KS_MAX = 10_000_000
_N_MAX = 80


@dataclass(frozen=True)
class LambertSums:
    """Sums over the candidate minimiser at one exponent shift."""

    density: float
    total: float
    square: float


def series_constants(params: ModelParams, s_exp: float) -> tuple[float, float, float]:
    """Return (log A, c1, c2) for the exponent shift ``s_exp``."""
    d = params.d
    log_a = math.log(params.b * params.beta) - 0.5 * d * math.log(4.0 * math.pi * params.beta)
    return log_a, 1.0 - 0.5 * d, params.beta * (params.alpha + s_exp)


def _log_y(log_a, c1, c2, k):
    return log_a + c1 * math.log(k) + c2 * k


def _split_index(log_a, c1, c2):
    # Smallest Ks beyond the peak of y_k with y_k <= _Y_SPLIT for all k > Ks.
    target = math.log(_Y_SPLIT)
    start = 1
    if c1 > 0.0:
        start = max(1, int(math.ceil(c1 / -c2)))
    if _log_y(log_a, c1, c2, start) <= target:
        return start - 1
    lo, hi = start, 2 * start
    while _log_y(log_a, c1, c2, hi) > target:
        lo, hi = hi, 2 * hi
        if hi > 4 * _KS_MAX:
            raise RegimeError("Lambert series decays too slowly to be summed")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _log_y(log_a, c1, c2, mid) > target:
            lo = mid
        else:
            hi = mid
    return lo


def _tail(order, t, ks):
    # Only absolute accuracy relative to g(order, t) is needed here, since
    # every tail enters multiplied by a small power of A.
    if t == 0.0 or ks == 0:
        return bose_tail(order, t, ks)
    span = max(0.0, -order / t - ks) + 45.0 / t
    if span <= 4 * ks + 2000 or ks > 200_000:
        return bose_tail(order, t, ks)
    k = np.arange(1, ks + 1, dtype=float)
    return bose_g(order, t) - float(np.exp(-t * k - order * np.log(k)).sum())


def _tail_power(log_a, c1, c2, ks, p, square):
    # sum_{k > ks} k^{-p} F(y_k), F(y) = -W(-y) or W(-y)^2, as a power series in y.
    total = 0.0
    n0 = 2 if square else 1
    for n in range(n0, _N_MAX):
        if square:
            log_c = math.log(2.0) + (n - 3) * math.log(n) - math.lgamma(n - 1)
        else:
            log_c = (n - 1) * math.log(n) - math.lgamma(n + 1)
        order = p - n * c1
        t = -n * c2
        tail = _tail(order, t, ks)
        term = math.exp(log_c + n * log_a) * tail
        total += term
        if n > n0 and term <= 1.0e-17 * total:
            return total
    return total


def lambert_sums(params: ModelParams, w: CycleWeightTable, s_exp: float,
                 lower_index: int | None = None) -> LambertSums | None:
    """Density, total and square sums of the candidate minimiser.

    Parameters
    ----------
    params, w
        Model parameters (b > 0) and weight table. With an exactly truncated
        table only k <= K contribute.
    s_exp : float
        Exponent shift s <= 0.
    lower_index : int, optional
        Index k whose Lambert branch is the lower one; all others are principal.

    Returns
    -------
    LambertSums or None
        None when some Lambert argument lies below -1/e. Divergent sums
        are returned as +inf.
    """
    log_a, c1, c2 = series_constants(params, s_exp)
    li = int(lower_index) if lower_index else 0
    bb = params.b * params.beta
    kern = _backend.lambert_sums

    if not w.closed_tail:
        ok, t1, t2, t3 = kern(log_a, c1, c2, 1, w.K, li)
        if not ok:
            return None
        return LambertSums(t1 / bb, t2 / bb, t3 / (bb * bb))

    if c2 == 0.0 and c1 >= 0.0:
        # d <= 2 at zero effective chemical potential: y_k does not decay.
        if c1 > 0.0 or _lambert.branch_offset(-math.exp(log_a)) < -_lambert.BRANCH_SLACK:
            return None
        wk = _lambert.w0(-math.exp(log_a))
        zeta2 = math.pi ** 2 / 6.0
        return LambertSums(math.inf, -wk * zeta2 / bb, wk * wk * zeta2 / (bb * bb))

    ks = _split_index(log_a, c1, c2)
    ok, t1, t2, t3 = kern(log_a, c1, c2, 1, ks, li)
    if not ok:
        return None
    t1 += _tail_power(log_a, c1, c2, ks, 1.0, False)
    t2 += _tail_power(log_a, c1, c2, ks, 2.0, False)
    t3 += _tail_power(log_a, c1, c2, ks, 2.0, True)
    if li > ks:
        z = -math.exp(_log_y(log_a, c1, c2, li))
        w0, wl = _lambert.w0(z), _lambert.wm1(z)
        t1 += (w0 - wl) / li
        t2 += (w0 - wl) / li ** 2
        t3 += (wl * wl - w0 * w0) / li ** 2
    return LambertSums(t1 / bb, t2 / bb, t3 / (bb * bb))


def lambert_xi(params: ModelParams, w: CycleWeightTable, s_exp: float,
               lower_index: int | None = None) -> np.ndarray | None:
    """Entries xi_1..xi_K of the candidate minimiser, or None on a domain violation."""
    log_a, c1, c2 = series_constants(params, s_exp)
    k = w.k
    z = -np.exp(log_a + c1 * np.log(k) + c2 * k)
    wk = _backend.lambert_w_array(z, 0)
    if lower_index and 1 <= lower_index <= w.K:
        wk[lower_index - 1] = _backend.lambert_w_array(z[lower_index - 1:lower_index], -1)[0]
    if np.any(np.isnan(wk)):
        return None
    return -wk / (params.b * params.beta * k * k)
