"""Zeros of the rate functions and the HYL critical parameters.

Ideal and CMF zeros are explicit. The PMF zero is fixed by the scalar
consistency equation delta = h(delta). The HYL zeros are candidate
minimisers built from Lambert W and parametrised by u = mu - a delta:

    xi_k(u) = -W_0(-b beta k^2 q_k exp(beta k s(u))) / (b beta k^2),
    s(u) = u            for u <= 0  (density above mu/a),
    s(u) = -b u/(a - b) for u > 0   (density below mu/a).

Writing G(u) = sum_k k xi_k(u), the consistency equation delta = g0(delta)
becomes Phi(u) := u + a G(u) = mu. Phi does not depend on mu, which makes
mu_p = Phi(0) and mu_tang = min_{u >= 0} Phi(u) cheap to share between
many values of mu.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import _series
from .errors import ParameterError, RegimeError
from .model import CycleWeightTable, ModelParams, OccupationVector, rho_closed
from .special_functions import lambert_w

_TINY = np.finfo(float).tiny

__all__ = [
    "Regime",
    "FixedPointSolution",
    "HylBranchSolution",
    "CriticalParams",
    "ideal_minimizer",
    "cmf_gamma",
    "cmf_scale",
    "cmf_minimizer",
    "cmf_stationarity_residual",
    "pmf_h",
    "pmf_delta_star",
    "pmf_minimizer",
    "pmf_stationarity_residual",
    "hyl_g",
    "htilde",
    "hyl_solve_branch0",
    "hyl_minimizer",
    "hyl_objective_closed",
    "hyl_stationarity_residual",
    "hyl_exclusion_bound",
    "critical_params",
]


class Regime(str, enum.Enum):
    """Position of the PMF fixed point relative to mu/a."""

    BELOW = "below_mu_over_a"
    ABOVE = "above_mu_over_a"
    SATURATED = "saturated"


@dataclass(frozen=True)
class FixedPointSolution:
    """Solution of the scalar consistency equation delta = h(delta)."""

    delta_star: float
    regime: Regime
    residual: float
    iterations: int


@dataclass(frozen=True, eq=False)
class HylBranchSolution:
    """One stationary point of the HYL objective.

    Attributes
    ----------
    delta_star : float
        Particle density of the candidate (including the analytic tail).
    chi : int
        0 when every Lambert branch is principal, else the index k whose
        branch is the lower one.
    xi : OccupationVector
        Entries 1..K of the candidate.
    objective : float
        Closed-form value of F at the candidate.
    label : str
        'xi0' if delta_star > mu/a, else 'xi1' / 'xi2' by decreasing density.
    u : float
        mu - a delta_star.
    residual : float
        |delta_star - g0(delta_star)|.
    slope : float
        d/dmu of the pressure along this branch, D + (mu - aD)_+ / (a - b).
    """

    delta_star: float
    chi: int
    xi: OccupationVector
    objective: float
    label: str
    u: float
    residual: float
    slope: float


@dataclass(frozen=True)
class CriticalParams:
    """HYL critical chemical potentials and the thresholds beta*, b*."""

    mu_p: float
    mu_tang: float
    mu_star: float | None
    beta_star: float
    b_star: float
    dge5_condition_holds: bool
    u_tang: float = 0.0
    dge5_slope: float = math.nan
    exclusion_bound: float = math.nan


# ---------------------------------------------------------------------------
# ideal and CMF

def ideal_minimizer(w: CycleWeightTable) -> OccupationVector:
    """Zero of the ideal rate function, xi_k = q_k."""
    return OccupationVector(w.q)


def cmf_gamma(w: CycleWeightTable, a: float) -> float:
    """Total cycle density Gamma = W_0(a beta qbar) / (a beta) of the CMF zero."""
    if a < 0.0:
        raise ParameterError(f"coupling a must be >= 0, got {a}")
    if a == 0.0:
        return w.qbar
    ab = a * w.params.beta
    return lambert_w(0, ab * w.qbar) / ab


def cmf_scale(w: CycleWeightTable, a: float) -> float:
    """Ratio Gamma / qbar = W_0(a beta qbar) / (a beta qbar), equal to 1 at a = 0."""
    if a == 0.0:
        return 1.0
    x = a * w.params.beta * w.qbar
    if x < 1.0e-8:
        # W(x)/x = 1 - x + 3x^2/2 - ...; avoids 0/0 cancellation.
        return 1.0 - x + 1.5 * x * x - (8.0 / 3.0) * x ** 3
    return lambert_w(0, x) / x


def cmf_minimizer(w: CycleWeightTable, a: float) -> OccupationVector:
    """Zero of the CMF rate function, xi_k = (Gamma/qbar) q_k."""
    return OccupationVector(cmf_scale(w, a) * w.q)


def cmf_stationarity_residual(w: CycleWeightTable, a: float) -> float:
    """Largest violation of log(x_k/q_k) + a beta Gamma = 0 and Gamma = exp(-a beta Gamma) qbar."""
    xi = cmf_minimizer(w, a).x
    gamma = cmf_gamma(w, a)
    ab = a * w.params.beta
    live = xi > _TINY
    per_k = np.abs(np.log(xi[live] / w.q[live]) + ab * gamma)
    total = abs(gamma - math.exp(-ab * gamma) * w.qbar) / max(gamma, 1e-300)
    return float(max(per_k.max(initial=0.0), total))


# ---------------------------------------------------------------------------
# PMF

def _rho_shifted(params: ModelParams, w: CycleWeightTable, shift: float) -> float:
    # rho(alpha + shift) for shift <= 0, consistent with the table's tail mode.
    if w.closed_tail:
        return rho_closed(params, params.alpha + shift)
    return float(np.dot(w.k * w.q, np.exp(params.beta * w.k * shift)))


def pmf_h(delta: float, params: ModelParams, w: CycleWeightTable) -> float:
    """Right-hand side h(delta) = rho(alpha + min(mu - a delta, 0))."""
    return _rho_shifted(params, w, min(params.mu - params.a * delta, 0.0))


def pmf_delta_star(params: ModelParams, w: CycleWeightTable) -> FixedPointSolution:
    """Solve delta = h(delta) for the PMF model.

    Parameters
    ----------
    params : ModelParams
        Requires a > 0.
    w : CycleWeightTable

    Returns
    -------
    FixedPointSolution
        ``saturated`` with delta* = rho(alpha) exactly when mu >= a rho(alpha).
        Otherwise the root of delta - h(delta), which lies above mu/a.
    """
    if params.a <= 0.0:
        raise ParameterError("the PMF fixed point needs a > 0")
    a, mu = params.a, params.mu
    rho = w.rho
    if math.isfinite(rho) and mu >= a * rho:
        return FixedPointSolution(rho, Regime.SATURATED, 0.0, 0)

    def f(delta):
        return delta - pmf_h(delta, params, w)

    lo = max(mu / a, 0.0)
    if not math.isfinite(f(lo)):
        # h is infinite at lo (d <= 2, alpha = 0); step inside the feasible side.
        step = max(abs(lo), 1.0) * 1.0e-15
        while not math.isfinite(f(lo + step)):
            step *= 10.0
        lo += step
    if f(lo) >= 0.0:
        return FixedPointSolution(lo, Regime.ABOVE if lo > mu / a else Regime.BELOW, abs(f(lo)), 0)
    if math.isfinite(rho):
        hi = rho
    else:
        hi = max(2.0 * lo, 1.0)
        while f(hi) <= 0.0:
            hi *= 2.0
    root, info = optimize.brentq(f, lo, hi, xtol=1.0e-15, rtol=4.0 * np.finfo(float).eps,
                                 maxiter=500, full_output=True)
    regime = Regime.ABOVE if root > mu / a else Regime.BELOW
    return FixedPointSolution(float(root), regime, abs(f(root)), int(info.iterations))


def pmf_minimizer(params: ModelParams, w: CycleWeightTable,
                  solution: FixedPointSolution | None = None) -> OccupationVector:
    """Zero of the PMF rate function, xi_k = q_k exp(beta k (mu - a delta*)_-)."""
    sol = solution or pmf_delta_star(params, w)
    shift = min(params.mu - params.a * sol.delta_star, 0.0)
    return OccupationVector(w.q * np.exp(params.beta * w.k * shift))


def pmf_stationarity_residual(x, params: ModelParams, w: CycleWeightTable, delta: float) -> float:
    """max_k |log(x_k/q_k)/beta + k (a delta - mu)_+|."""
    v = OccupationVector.of(x).x
    k, q = w.k[: v.size], w.q[: v.size]
    live = v > _TINY  # subnormal entries carry no relative precision
    r = np.log(v[live] / q[live]) / params.beta + k[live] * max(params.a * delta - params.mu, 0.0)
    return float(np.max(np.abs(r), initial=0.0))


# ---------------------------------------------------------------------------
# HYL: the u-parametrised curve

def _kappa(params: ModelParams) -> float:
    return params.b / (params.a - params.b)


def _s_of_u(params: ModelParams, u: float) -> float:
    return u if u <= 0.0 else -_kappa(params) * u


class _HylCurve:
    """Phi(u) = u + a G(u) and the quantities derived from it for fixed (d, beta, alpha, a, b)."""

    def __init__(self, params: ModelParams, w: CycleWeightTable):
        params.require_hyl()
        if params.b <= 0.0:
            raise ParameterError("the HYL Lambert solution needs b > 0")
        self.params = params
        self.w = w
        self._cache: dict = {}
        self._tang = None

    def sums(self, u: float, lower: int = 0):
        key = (float(u), int(lower))
        hit = self._cache.get(key, False)
        if hit is False:
            hit = _series.lambert_sums(self.params, self.w, _s_of_u(self.params, u), lower or None)
            if len(self._cache) > 200_000:
                self._cache.clear()
            self._cache[key] = hit
        return hit

    def G(self, u: float) -> float:
        s = self.sums(u)
        return math.nan if s is None else s.density

    def phi(self, u: float) -> float:
        return u + self.params.a * self.G(u)

    @functools.cached_property
    def mu_p(self) -> float:
        val = self.phi(0.0)
        if math.isnan(val):
            raise RegimeError("a Lambert argument leaves [-1/e, 0] at delta = mu/a; "
                              "b exceeds the admissible range for these parameters")
        return val

    def tangency(self) -> tuple[float, float]:
        """(u_tang, mu_tang) with mu_tang = min_{u >= 0} Phi(u)."""
        if self._tang is not None:
            return self._tang
        mu_p = self.mu_p
        upper = mu_p if math.isfinite(mu_p) else 1.0
        if not math.isfinite(mu_p):
            while self.phi(2.0 * upper) < self.phi(upper):
                upper *= 2.0
            upper *= 2.0
        grid = np.concatenate([[0.0], upper * np.logspace(-14.0, 0.0, 281)])
        vals = np.array([self.phi(u) for u in grid])
        vals[np.isnan(vals)] = np.inf
        j = int(np.argmin(vals))
        if j == 0 or not math.isfinite(vals[j]):
            self._tang = (0.0, float(vals[0]))
            return self._tang
        lo, hi = grid[j - 1], grid[min(j + 1, grid.size - 1)]
        res = optimize.minimize_scalar(self.phi, bracket=(lo, grid[j], hi), method="golden",
                                       tol=1.0e-10)
        u_t, m_t = float(res.x), float(res.fun)
        if not (m_t <= vals[j]):
            u_t, m_t = float(grid[j]), float(vals[j])
        self._tang = (u_t, m_t)
        return self._tang

    def roots(self, mu: float) -> list[float]:
        """Solutions u of Phi(u) = mu, in increasing order of u (decreasing density).

        Phi increases on u <= 0, decreases on (0, u_tang) and increases
        again on (u_tang, inf), so each piece holds at most one root.
        """
        mu_p = self.mu_p
        u_t, mu_t = self.tangency()

        def g(u):
            return self.phi(u) - mu

        out = []
        if mu < mu_p:
            if math.isfinite(mu_p):
                lo, hi = min(mu - mu_p, -1.0e-300), 0.0
            else:
                lo, hi = -1.0, -1.0e-12
                if not g(hi) > 0.0:
                    out.append(hi)
                    lo = None
            if lo is not None:
                while g(lo) > 0.0:
                    lo *= 2.0
                out.append(_brent(g, lo, hi))
        elif mu == mu_p:
            out.append(0.0)
        if u_t > 0.0 and mu_t < mu < mu_p:
            out.append(_brent(g, 0.0, u_t))
        if mu > mu_t and not (u_t == 0.0 and mu <= mu_p):
            hi = max(mu, u_t)
            while g(hi) < 0.0:
                hi = 2.0 * hi + 1.0
            out.append(_brent(g, u_t, hi))
        elif mu == mu_t and u_t > 0.0:
            out.append(u_t)
        return sorted(out)


def _brent(f, lo, hi):
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return float(lo)
    if fhi == 0.0:
        return float(hi)
    return float(optimize.brentq(f, lo, hi, xtol=1.0e-16, rtol=4.0 * np.finfo(float).eps,
                                 maxiter=500))


@functools.lru_cache(maxsize=64)
def _curve(base: ModelParams, w: CycleWeightTable) -> _HylCurve:
    return _HylCurve(base, w)


def _curve_for(params: ModelParams, w: CycleWeightTable) -> _HylCurve:
    return _curve(params.replace(mu=0.0), w)


# ---------------------------------------------------------------------------
# HYL: public evaluation of the consistency map

def hyl_g(delta: float, chi, params: ModelParams, w: CycleWeightTable) -> float | None:
    """Right-hand side g^chi(delta) of the HYL consistency equation.

    Parameters
    ----------
    delta : float
        Trial density, delta >= 0.
    chi : int or None
        None or 0 for all principal branches, or k >= 1 for the lower
        branch at index k.
    params, w
        Model parameters (0 < b < a) and weights.

    Returns
    -------
    float or None
        None signals a domain violation: some Lambert argument is below -1/e,
        so there is no stationary point with this delta.
    """
    params.require_hyl()
    u = params.mu - params.a * float(delta)
    s = _series.lambert_sums(params, w, _s_of_u(params, u), int(chi or 0) or None)
    return None if s is None else s.density


def htilde(x: float, params: ModelParams, w: CycleWeightTable) -> float | None:
    """h~(x) = g0(mu/a + x) for x <= 0 (principal branch everywhere)."""
    if x > 0.0:
        raise ParameterError(f"htilde is defined for x <= 0, got {x}")
    curve = _curve_for(params, w)
    u = -params.a * float(x)
    return None if curve.sums(u) is None else curve.G(u)


def hyl_objective_closed(params: ModelParams, w: CycleWeightTable, u: float, sums) -> float:
    """F at a stationary point with u = mu - a D, from the three Lambert sums.

    F = (b/2) Q - S/beta + qbar/beta - (a/2) D^2                    for u <= 0,
    F = (b/2) Q - S/beta + qbar/beta + (a b D^2 - mu^2)/(2(a - b))  for u > 0,
    with D = sum k xi_k, S = sum xi_k, Q = sum k^2 xi_k^2.
    """
    a, b, beta, mu = params.a, params.b, params.beta, params.mu
    dens = sums.density
    base = 0.5 * b * sums.square - sums.total / beta + w.qbar / beta
    if u <= 0.0:
        return base - 0.5 * a * dens * dens
    return base + (a * b * dens * dens - mu * mu) / (2.0 * (a - b))


def _slope(params: ModelParams, dens: float) -> float:
    return dens + max(params.mu - params.a * dens, 0.0) / (params.a - params.b)


def hyl_stationarity_residual(xi, params: ModelParams, w: CycleWeightTable, delta: float) -> float:
    """max_k |log(x_k/q_k) - b beta k^2 x_k - beta k s|, s the exponent shift at delta."""
    v = OccupationVector.of(xi).x
    k, q = w.k[: v.size], w.q[: v.size]
    live = v > _TINY
    k, q, v = k[live], q[live], v[live]
    s = _s_of_u(params, params.mu - params.a * delta)
    r = np.log(v / q) - params.b * params.beta * k * k * v - params.beta * k * s
    return float(np.max(np.abs(r), initial=0.0))


def _make_solution(params, w, curve, u, label) -> HylBranchSolution:
    sums = curve.sums(u)
    dens = sums.density
    xi = _series.lambert_xi(params, w, _s_of_u(params, u))
    delta = (params.mu - u) / params.a
    g0 = curve.G(params.mu - params.a * delta)
    return HylBranchSolution(
        delta_star=float(dens),
        chi=0,
        xi=OccupationVector(xi),
        objective=hyl_objective_closed(params, w, u, sums),
        label=label,
        u=float(u),
        residual=abs(delta - g0),
        slope=_slope(params, dens),
    )


def _label_roots(params, us):
    # us sorted increasing in u, i.e. decreasing density.
    labels = []
    above = [u for u in us if u < 0.0]
    below = [u for u in us if u >= 0.0]
    labels += [("xi0", u) for u in above]
    if len(below) >= 2:
        labels += [("xi1", below[0]), ("xi2", below[1])] + [("xi2", u) for u in below[2:]]
    elif len(below) == 1:
        labels.append(("xi1" if above else "xi2", below[0]))
    return labels


def _delta_upper(params: ModelParams, w: CycleWeightTable) -> float:
    # Roots satisfy delta <= e rho(alpha + min(mu - a delta, 0)) since -W_0(-y) <= e y.
    m = params.mu / params.a
    hi = max(4.0 * w.rho if math.isfinite(w.rho) else 0.0, 4.0 * m, 1.0e-8)
    while math.e * _rho_shifted(params, w, min(params.mu - params.a * hi, 0.0)) > hi:
        hi *= 2.0
    return hi


def _hybrid_grid(lo: float, hi: float, n: int) -> np.ndarray:
    # Linear points plus points clustered geometrically at both ends.
    n_lin = n - 2 * (3 * n // 10)
    n_geo = 3 * n // 10
    width = hi - lo
    geo = width * np.logspace(-14.0, 0.0, n_geo)
    pts = np.concatenate([np.linspace(lo, hi, n_lin), lo + geo, hi - geo])
    pts = pts[(pts >= lo) & (pts <= hi)]
    return np.unique(pts)


def _roots_by_scan(params: ModelParams, w: CycleWeightTable, curve: _HylCurve) -> list[float]:
    a, mu = params.a, params.mu
    m = mu / a
    top = _delta_upper(params, w)
    if 0.0 < m < top:
        grid = np.unique(np.concatenate([_hybrid_grid(0.0, m, 1000), _hybrid_grid(m, top, 1000)]))
    else:
        grid = _hybrid_grid(0.0, top, 2000)

    def f(delta):
        return delta - curve.G(mu - a * delta)

    vals = np.array([f(x) for x in grid])
    roots = []
    for i in range(grid.size - 1):
        f0, f1 = vals[i], vals[i + 1]
        if not (np.isfinite(f0) and np.isfinite(f1)):
            continue
        if f0 == 0.0:
            roots.append(grid[i])
        elif f0 * f1 < 0.0:
            roots.append(optimize.brentq(f, grid[i], grid[i + 1], xtol=1.0e-15,
                                         rtol=4.0 * np.finfo(float).eps, maxiter=500))
    if vals.size and vals[-1] == 0.0:
        roots.append(grid[-1])
    us = sorted({float(mu - a * r) for r in roots})
    merged = []
    for u in us:
        if not merged or abs(u - merged[-1]) > 1.0e-12 * max(1.0, abs(u)):
            merged.append(u)
    return merged


def hyl_solve_branch0(params: ModelParams, w: CycleWeightTable, method: str = "scan") -> list[HylBranchSolution]:
    """All all-principal stationary points of the HYL objective.

    Parameters
    ----------
    params : ModelParams
        Requires 0 < b < a.
    w : CycleWeightTable
    method : {'scan', 'bracket'}
        ``scan`` evaluates delta - g0(delta) on a 2000-point hybrid grid,
        split at mu/a, and refines every sign change. ``bracket`` uses the
        monotone pieces of Phi(u) = u + a G(u) to bracket each root directly,
        which is much faster and is what the thermodynamic functions use.

    Returns
    -------
    list of HylBranchSolution
        Sorted by decreasing density and labelled xi0 / xi1 / xi2. Empty if
        no root exists.
    """
    curve = _curve_for(params, w)
    if method == "scan":
        us = _roots_by_scan(params, w, curve)
    elif method == "bracket":
        us = curve.roots(params.mu)
    else:
        raise ValueError(f"unknown method {method!r}")
    return [_make_solution(params, w, curve, u, lab) for lab, u in _label_roots(params, us)]


def hyl_exclusion_bound(params: ModelParams, w: CycleWeightTable) -> float:
    """min{a, exp(-beta mu_p / a) / (beta q_1)}: below it only all-principal patterns matter."""
    curve = _curve_for(params, w)
    return min(params.a, math.exp(-params.beta * curve.mu_p / params.a) / (params.beta * w.q[0]))


def hyl_minimizer(params: ModelParams, w: CycleWeightTable, method: str = "scan") -> HylBranchSolution:
    """Global minimiser of the HYL objective among the all-principal stationary points.

    Raises
    ------
    RegimeError
        If b is not below min{a, exp(-beta mu_p/a)/(beta q_1)}, where patterns
        with a lower Lambert branch cannot be ruled out, or if no root exists.
    """
    bound = hyl_exclusion_bound(params, w)
    if not params.b < bound:
        raise RegimeError(
            f"b = {params.b} is not below min(a, exp(-beta mu_p/a)/(beta q_1)) = {bound:.6g}; "
            "stationary points using the lower Lambert branch are not excluded there"
        )
    sols = hyl_solve_branch0(params, w, method=method)
    if not sols:
        raise RegimeError("no all-principal stationary point found")
    return min(sols, key=lambda s: s.objective)


# ---------------------------------------------------------------------------
# HYL critical parameters

def _beta_star(d: int, b: float) -> float:
    if d == 2:
        return math.nan
    return ((math.e * b) ** 2 / (4.0 * math.pi) ** d) ** (1.0 / (d - 2))


def _pressure_gap(curve: _HylCurve, params: ModelParams, mu: float) -> float:
    # P2 - P0 = F0 - F2 at chemical potential mu.
    p = params.replace(mu=mu)
    us = curve.roots(mu)
    u0 = min(us)
    u2 = max(us)
    f0 = hyl_objective_closed(p, curve.w, u0, curve.sums(u0))
    f2 = hyl_objective_closed(p, curve.w, u2, curve.sums(u2))
    return f0 - f2


def critical_params(params: ModelParams, w: CycleWeightTable, mu_tol: float = 1.0e-10) -> CriticalParams:
    """mu_p, mu_tang, mu*, beta*, b* and the one-sided slope condition.

    mu* is the chemical potential in (mu_tang, mu_p) where the dense (xi0)
    and dilute (xi2) branches have equal pressure, located by bisection to
    ``mu_tol``. It is None when d < 3, when mu_tang = mu_p, when d >= 5 and
    the slope condition fails, when b is outside the exclusion bound, or
    when the pressure difference does not change sign.
    """
    curve = _curve_for(params, w)
    a = params.a
    mu_p = curve.mu_p
    u_t, mu_t = curve.tangency()
    b_star = params.thermal_volume / (math.e * params.beta)
    beta_star = _beta_star(params.d, params.b)

    h = 1.0e-9 * max(mu_p / a, 1.0e-300) if math.isfinite(mu_p) else 1.0e-9
    g_top = curve.G(0.0)
    g_step = curve.G(a * h)
    slope = (g_top - g_step) / h if math.isfinite(g_top) else math.inf
    dge5 = bool(slope > 1.0)
    bound = hyl_exclusion_bound(params, w) if math.isfinite(mu_p) else 0.0

    mu_star = None
    eligible = (params.d >= 3 and math.isfinite(mu_p) and mu_t < mu_p
                and (params.d < 5 or dge5) and params.b < bound)
    if eligible:
        lo, hi = mu_t, mu_p
        g_lo = _pressure_gap(curve, params, lo)
        g_hi = _pressure_gap(curve, params, hi)
        if g_lo < 0.0 < g_hi:
            while hi - lo > mu_tol:
                mid = 0.5 * (lo + hi)
                g_mid = _pressure_gap(curve, params, mid)
                if g_mid < 0.0:
                    lo = mid
                elif g_mid > 0.0:
                    hi = mid
                else:
                    lo = hi = mid
            mu_star = 0.5 * (lo + hi)
    return CriticalParams(mu_p=mu_p, mu_tang=mu_t, mu_star=mu_star, beta_star=beta_star,
                          b_star=b_star, dge5_condition_holds=dge5, u_tang=u_t,
                          dge5_slope=slope, exclusion_bound=bound)
