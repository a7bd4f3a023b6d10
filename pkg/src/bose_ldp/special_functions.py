"""Bose functions, Riemann zeta and the two real branches of Lambert W.

The Bose function is the polylogarithm evaluated on the real axis,

    g(n, t) = sum_{k>=1} k^{-n} exp(-t k),   t >= 0,

so that g(n, 0) = zeta(n) for n > 1. All functions here are pure and
thread safe.
"""

from __future__ import annotations

import enum
import functools
import math

import numpy as np
from scipy import special as _sp

from . import _lambert
from .errors import DivergenceError, DomainError, SingularityError

__all__ = [
    "Branch",
    "bose_g",
    "bose_tail",
    "riemann_zeta",
    "lambert_w",
    "lambert_w_prime",
    "T_SWITCH",
]

#: Below this t the small-t expansion replaces the direct series.
T_SWITCH = 0.5

_NEAR_INTEGER = 1.0e-6
_CHUNK = 256


class Branch(enum.Enum):
    """Real branch of the Lambert W function."""

    PRINCIPAL = 0
    LOWER = -1

    @classmethod
    def parse(cls, value) -> "Branch":
        """Accept a Branch, the integers 0 / -1, or the names 'principal' / 'lower'."""
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            key = value.strip().lower()
            if key in ("principal", "0", "w0"):
                return cls.PRINCIPAL
            if key in ("lower", "-1", "wm1"):
                return cls.LOWER
            raise ValueError(f"unknown Lambert W branch {value!r}")
        return cls(int(value))


# ---------------------------------------------------------------------------
# zeta

def riemann_zeta(n: float) -> float:
    """Riemann zeta function for real n > 1.

    Parameters
    ----------
    n : float
        Order, strictly greater than one.

    Returns
    -------
    float
        zeta(n) to about machine precision.

    Raises
    ------
    DomainError
        If ``n <= 1``.
    """
    n = float(n)
    if not n > 1.0:
        raise DomainError(f"riemann_zeta requires n > 1, got {n}")
    return float(_sp.zeta(n))


def _zeta_any(s: float) -> float:
    # Analytic continuation, s != 1; used by the small-t expansion.
    return float(_sp.zeta(s))


# ---------------------------------------------------------------------------
# Bose functions

def _bose_direct(n: float, t: float) -> float:
    k_peak = max(1.0, -n / t)
    total = 0.0
    start = 1
    while True:
        k = np.arange(start, start + _CHUNK, dtype=float)
        terms = np.exp(-t * k - n * np.log(k))
        total += float(terms.sum())
        start += _CHUNK
        if k[-1] > k_peak and terms[-1] <= 1.0e-18 * total:
            return total


@functools.lru_cache(maxsize=512)
def _zeta_shifts(n: float) -> tuple:
    # zeta(n - j) for j = 0..199, with the pole (if any) set to zero.
    return tuple(0.0 if n - j == 1.0 else _zeta_any(n - j) for j in range(200))


def _bose_small_t(n: float, t: float) -> float:
    m = round(n)
    pole_index = None
    if m == n and m >= 1:
        pole_index = int(m) - 1
        lead = (-t) ** pole_index / math.factorial(pole_index)
        lead *= _harmonic(pole_index) - math.log(t)
    else:
        lead = math.gamma(1.0 - n) * t ** (n - 1.0)

    zs = _zeta_shifts(n)
    total = lead
    term_scale = 1.0
    quiet = 0
    for j in range(0, 200):
        if j > 0:
            term_scale *= -t / j
        if j == pole_index:
            continue
        term = zs[j] * term_scale
        total += term
        if j > n + 1.0:
            if abs(term) <= 1.0e-17 * abs(total):
                quiet += 1
                if quiet >= 2:
                    break
            else:
                quiet = 0
    return total


def _harmonic(m: int) -> float:
    return math.fsum(1.0 / i for i in range(1, m + 1))


def _bose_near_integer(n: float, t: float) -> float:
    # The expansion loses digits when n sits next to a positive integer pole.
    import mpmath

    with mpmath.workdps(30):
        return float(mpmath.polylog(n, mpmath.exp(-mpmath.mpf(t))))


def bose_g(n: float, t: float) -> float:
    """Bose function g(n, t) = sum_k k^{-n} e^{-t k}.

    Parameters
    ----------
    n : float
        Order (any real).
    t : float
        Nonnegative decay parameter. In the models t = -beta * alpha.

    Returns
    -------
    float
        The series value with relative error around 1e-14.

    Raises
    ------
    DomainError
        If ``t < 0`` or an argument is not finite.
    DivergenceError
        If ``t == 0`` and ``n <= 1``.

    Notes
    -----
    For ``t >= T_SWITCH`` the series is summed directly. For smaller t the
    expansion about t = 0 is used,

        g(n, t) = Gamma(1 - n) t^{n-1} + sum_j zeta(n - j) (-t)^j / j!,

    with the logarithmic form of the singular term when n is a positive
    integer.
    """
    n = float(n)
    t = float(t)
    if not (math.isfinite(n) and math.isfinite(t)):
        raise DomainError("bose_g requires finite arguments")
    if t < 0.0:
        raise DomainError(f"bose_g requires t >= 0, got {t}")
    if t == 0.0:
        if n <= 1.0:
            raise DivergenceError(f"g({n}, 0) diverges for n <= 1")
        return riemann_zeta(n)
    if t >= T_SWITCH:
        return _bose_direct(n, t)
    m = round(n)
    if m >= 1 and 0.0 < abs(n - m) < _NEAR_INTEGER:
        return _bose_near_integer(n, t)
    return _bose_small_t(n, t)


def _direct_from(n: float, t: float, start: int) -> float:
    k_peak = max(float(start), -n / t) if t > 0 else float(start)
    total = 0.0
    while True:
        k = np.arange(start, start + 4 * _CHUNK, dtype=float)
        terms = np.exp(-t * k - n * np.log(k))
        total += float(terms.sum())
        start += 4 * _CHUNK
        if k[-1] > k_peak and terms[-1] <= 1.0e-18 * total:
            return total


def _partial(n: float, t: float, k0: int) -> float:
    total = 0.0
    for lo in range(1, k0 + 1, 1 << 16):
        k = np.arange(lo, min(k0, lo + (1 << 16) - 1) + 1, dtype=float)
        total += float(np.exp(-t * k - n * np.log(k)).sum())
    return total


_DIRECT_TAIL_TERMS = 50_000


def bose_tail(n: float, t: float, k0: int) -> float:
    """Tail sum_{k > k0} k^{-n} e^{-t k} of the Bose series.

    Uses the Hurwitz zeta function at t = 0, a direct sum when the tail
    decays within a few ten thousand terms, and g(n, t) minus the head
    otherwise.

    Raises
    ------
    DivergenceError
        If ``t == 0`` and ``n <= 1``.
    """
    n = float(n)
    t = float(t)
    k0 = int(k0)
    if t < 0.0:
        raise DomainError(f"bose_tail requires t >= 0, got {t}")
    if k0 <= 0:
        return bose_g(n, t)
    if t == 0.0:
        if n <= 1.0:
            raise DivergenceError(f"tail of g({n}, 0) diverges")
        return float(_sp.zeta(n, k0 + 1.0))
    if n * math.log(k0 + 1.0) + t * (k0 + 1.0) > 745.0 and n >= 0.0:
        # Leading term underflows; the sum is below the smallest double.
        return 0.0
    span = max(0.0, -n / t - k0) + 45.0 / t
    if span <= _DIRECT_TAIL_TERMS:
        return _direct_from(n, t, k0 + 1)
    return bose_g(n, t) - _partial(n, t, k0)


# ---------------------------------------------------------------------------
# Lambert W

def _check_w_domain(branch: Branch, x: float) -> None:
    if math.isnan(x):
        raise DomainError("Lambert W of NaN")
    if _lambert.branch_offset(x) < -_lambert.BRANCH_SLACK:
        raise DomainError(f"Lambert W requires x >= -1/e, got {x!r}")
    if branch is Branch.LOWER and not x < 0.0:
        raise DomainError(f"lower Lambert branch requires x < 0, got {x!r}")


def lambert_w(branch, x: float) -> float:
    """Real Lambert W, the inverse of w -> w e^w.

    Parameters
    ----------
    branch : Branch or {'principal', 'lower', 0, -1}
        ``principal`` gives W_0 >= -1, ``lower`` gives W_{-1} <= -1.
    x : float
        Argument; principal needs x >= -1/e, lower needs -1/e <= x < 0.

    Returns
    -------
    float

    Raises
    ------
    DomainError
        Outside the branch domain. Inputs a few ulps below -1/e (as produced
        by rounding ``-exp(-1)``) are accepted and return -1.

    Notes
    -----
    Halley iteration from asymptotic starting values. Close to the branch
    point the expansion in p = sqrt(2(e x + 1)) is used, directly once p is
    tiny, since Halley stalls where W' diverges.
    """
    b = Branch.parse(branch)
    x = float(x)
    _check_w_domain(b, x)
    if b is Branch.PRINCIPAL:
        return _lambert.w0(x)
    return _lambert.wm1(x)


def lambert_w_prime(branch, x: float) -> float:
    """Derivative W'(x) = W / (x (1 + W)) on the given branch.

    Returns 1 at x = 0 on the principal branch.

    Raises
    ------
    SingularityError
        At the branch point x = -1/e, where W' is infinite.
    DomainError
        Outside the branch domain.
    """
    b = Branch.parse(branch)
    x = float(x)
    _check_w_domain(b, x)
    if _lambert.branch_offset(x) <= _lambert.BRANCH_SLACK:
        raise SingularityError("W' diverges at x = -1/e")
    if x == 0.0:
        return 1.0
    w = lambert_w(b, x)
    return w / (x * (1.0 + w))
