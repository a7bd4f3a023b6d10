"""Pressures, free energies, densities and condensates of the four models.

Every pressure is p = qbar/beta - min(rate + regularised energy), so the
ideal gas has p = qbar/beta and the mean-field pressures reduce to it when
the couplings vanish. Functions accept an optional weight table ``w``; by
default a cached table with the analytic tail is used, which makes the
results those of the untruncated model.

+inf is a legitimate return value (divergent densities, rate functions
outside their effective domain) and is never raised as an error.
"""

from __future__ import annotations

import functools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import solvers
from .errors import BoseLDPError, ParameterError, RegimeError
from .model import DEFAULT_K, MODELS, CycleWeightTable, ModelParams, make_weights, qbar_closed, rho_closed
from .special_functions import lambert_w, riemann_zeta

__all__ = [
    "PhaseScanRow",
    "HylState",
    "weights_for",
    "pressure_ideal",
    "density_ideal",
    "free_energy_ideal",
    "rho_critical",
    "pressure_cmf",
    "density_cmf",
    "rho_critical_cmf",
    "free_energy_cmf",
    "pressure_pmf",
    "density_pmf",
    "free_energy_pmf",
    "hyl_state",
    "pressure_hyl",
    "density_hyl",
    "log_mgf",
    "density_rate_J",
    "density_rate_J_pmf",
    "condensate_ideal",
    "condensate_cmf",
    "condensate_pmf",
    "condensate_hyl",
    "phase_scan",
    "worker_count",
]

GAMMA_LOWER = -1.0e3
GAMMA_TOL = 1.0e-12


@functools.lru_cache(maxsize=64)
def _cached_weights(d: int, beta: float, alpha: float, K: int, closed_tail: bool) -> CycleWeightTable:
    return make_weights(ModelParams(d=d, beta=beta, alpha=alpha), K=K, closed_tail=closed_tail)


def weights_for(params: ModelParams, K: int = DEFAULT_K, closed_tail: bool = True) -> CycleWeightTable:
    """Cycle-weight table for (d, beta, alpha), shared between calls.

    The table does not depend on mu, a or b, so scans over those reuse it
    together with every cache keyed on it.
    """
    return _cached_weights(params.d, params.beta, params.alpha, int(K), bool(closed_tail))


def _table(params: ModelParams, w: CycleWeightTable | None) -> CycleWeightTable:
    return weights_for(params) if w is None else w


def _qbar_shifted(params: ModelParams, w: CycleWeightTable, shift: float) -> float:
    if w.closed_tail:
        return qbar_closed(params, params.alpha + shift)
    return float(np.dot(w.q, np.exp(params.beta * w.k * shift)))


def _check_density(rho: float) -> float:
    rho = float(rho)
    if math.isnan(rho) or rho < 0.0:
        raise ParameterError(f"density must be >= 0, got {rho}")
    return rho


def _solve_increasing(fn, target: float, lo: float = GAMMA_LOWER) -> float:
    # Root of fn(g) = target for an increasing fn on (-inf, 0], bracketed in [lo, 0].
    while fn(lo) > target:
        lo *= 2.0
        if lo < -1.0e12:
            raise ParameterError(f"density {target} is too small to invert")
    return optimize.brentq(lambda g: fn(g) - target, lo, 0.0, xtol=GAMMA_TOL, rtol=4.0 * np.finfo(float).eps,
                           maxiter=500)


# ---------------------------------------------------------------------------
# ideal gas

def pressure_ideal(params: ModelParams, w: CycleWeightTable | None = None) -> float:
    """p(beta, alpha) = qbar/beta."""
    return _table(params, w).qbar / params.beta


def density_ideal(params: ModelParams, w: CycleWeightTable | None = None) -> float:
    """dp/dalpha = rho(alpha); +inf at alpha = 0 for d <= 2."""
    return _table(params, w).rho


def rho_critical(params: ModelParams) -> float:
    """Critical density zeta(d/2) / (4 pi beta)^{d/2}, +inf for d <= 2."""
    if params.d <= 2:
        return math.inf
    return riemann_zeta(params.d / 2.0) / params.thermal_volume


def free_energy_ideal(params: ModelParams, rho: float) -> float:
    """Legendre transform f(beta, rho) = sup_{gamma <= 0} {gamma rho - p(beta, gamma)}.

    Below the critical density the supremum is attained where
    rho(gamma) = rho, found by bracketed root finding on gamma in
    [-1e3, 0] (the bracket widens for tiny rho). At or above the critical
    density f = -p(beta, 0). Does not depend on alpha.
    """
    rho = _check_density(rho)
    if rho == 0.0:
        return 0.0
    if rho >= rho_critical(params):
        return -qbar_closed(params, 0.0) / params.beta
    gamma = _solve_increasing(lambda g: rho_closed(params, g), rho)
    return gamma * rho - qbar_closed(params, gamma) / params.beta


# ---------------------------------------------------------------------------
# CMF

def _cmf_pressure_from_qbar(qbar: float, beta: float, a: float) -> float:
    if a == 0.0:
        return qbar / beta
    x = a * beta * qbar
    if x < 1.0e-8:
        # W(x)(1 + W(x)/2)/x = 1 - x/2 + 2x^2/3 - ...
        return qbar / beta * (1.0 - 0.5 * x + (2.0 / 3.0) * x * x)
    wx = lambert_w(0, x)
    return wx * (1.0 + 0.5 * wx) / (a * beta * beta)


def _cmf_ratio(qbar: float, beta: float, a: float) -> float:
    x = a * beta * qbar
    if x < 1.0e-8:
        return 1.0 - x + 1.5 * x * x
    return lambert_w(0, x) / x


def pressure_cmf(params: ModelParams, w: CycleWeightTable | None = None) -> float:
    """p^CMF = W_0(a beta qbar)(1 + W_0(a beta qbar)/2) / (a beta^2), qbar/beta at a = 0."""
    return _cmf_pressure_from_qbar(_table(params, w).qbar, params.beta, params.a)


def density_cmf(params: ModelParams, w: CycleWeightTable | None = None) -> float:
    """dp^CMF/dalpha = (W_0(a beta qbar)/(a beta qbar)) rho(alpha)."""
    w = _table(params, w)
    return solvers.cmf_scale(w, params.a) * w.rho


def rho_critical_cmf(params: ModelParams) -> float:
    """CMF critical density (W_0(a beta qbar0)/(a beta qbar0)) rho_c, qbar0 at alpha = 0."""
    rc = rho_critical(params)
    if not math.isfinite(rc) or params.a == 0.0:
        return rc
    return _cmf_ratio(qbar_closed(params, 0.0), params.beta, params.a) * rc


def free_energy_cmf(params: ModelParams, rho: float) -> float:
    """sup_{alpha' <= 0} {alpha' rho - p^CMF(beta, alpha')}."""
    rho = _check_density(rho)
    if params.a == 0.0:
        return free_energy_ideal(params, rho)
    if rho == 0.0:
        return 0.0
    beta, a = params.beta, params.a
    if rho >= rho_critical_cmf(params):
        return -_cmf_pressure_from_qbar(qbar_closed(params, 0.0), beta, a)

    def dens(al):
        return _cmf_ratio(qbar_closed(params, al), beta, a) * rho_closed(params, al)

    al = _solve_increasing(dens, rho)
    return al * rho - _cmf_pressure_from_qbar(qbar_closed(params, al), beta, a)


# ---------------------------------------------------------------------------
# PMF

def pressure_pmf(params: ModelParams, w: CycleWeightTable | None = None,
                 solution: solvers.FixedPointSolution | None = None) -> float:
    """p^PMF from the fixed point delta*.

    p(beta, alpha) + mu^2/(2a) when mu >= a rho(alpha), otherwise
    (a/2) delta*^2 + p(beta, alpha + mu - a delta*).
    """
    w = _table(params, w)
    sol = solution or solvers.pmf_delta_star(params, w)
    if sol.regime is solvers.Regime.SATURATED:
        return w.qbar / params.beta + params.mu ** 2 / (2.0 * params.a)
    shift = min(params.mu - params.a * sol.delta_star, 0.0)
    return 0.5 * params.a * sol.delta_star ** 2 + _qbar_shifted(params, w, shift) / params.beta


def density_pmf(params: ModelParams, w: CycleWeightTable | None = None,
                solution: solvers.FixedPointSolution | None = None) -> float:
    """dp^PMF/dmu: rho(alpha + mu - a delta*) = delta* below saturation, mu/a at or above."""
    sol = solution or solvers.pmf_delta_star(params, _table(params, w))
    if sol.regime is solvers.Regime.SATURATED:
        return params.mu / params.a
    return sol.delta_star


def free_energy_pmf(params: ModelParams, rho: float) -> float:
    """f^PMF(beta, rho) = f(beta, rho) + (a/2) rho^2."""
    return free_energy_ideal(params, rho) + 0.5 * params.a * float(rho) ** 2


# ---------------------------------------------------------------------------
# HYL

@dataclass(frozen=True)
class HylState:
    """HYL thermodynamics at one chemical potential.

    Attributes
    ----------
    roots : list of HylBranchSolution
        Every all-principal stationary point, by decreasing density.
    minimizers : list of HylBranchSolution
        Global minimisers; two (dense first) when mu is within the bisection
        tolerance of mu*.
    pressure : float
    slope_left, slope_right : float
        One-sided dp/dmu; equal away from mu*.
    mu_star : float or None
    """

    roots: list
    minimizers: list
    pressure: float
    slope_left: float
    slope_right: float
    mu_star: float | None

    @property
    def at_coexistence(self) -> bool:
        return len(self.minimizers) > 1


@functools.lru_cache(maxsize=256)
def _hyl_critical(base: ModelParams, w: CycleWeightTable):
    try:
        return solvers.critical_params(base, w)
    except RegimeError:
        return None


def _mu_star_tol(mu_star: float) -> float:
    return 1.0e-10 * max(1.0, abs(mu_star))


def hyl_state(params: ModelParams, w: CycleWeightTable | None = None) -> HylState:
    """Solve the HYL model at ``params.mu`` and classify the minimiser.

    Raises
    ------
    RegimeError
        Outside the exclusion bound on b, or when no stationary point exists.
    """
    w = _table(params, w)
    params.require_hyl()
    bound = solvers.hyl_exclusion_bound(params, w)
    if not params.b < bound:
        raise RegimeError(
            f"b = {params.b} is not below min(a, exp(-beta mu_p/a)/(beta q_1)) = {bound:.6g}; "
            "stationary points using the lower Lambert branch are not excluded there"
        )
    roots = solvers.hyl_solve_branch0(params, w, method="bracket")
    if not roots:
        raise RegimeError("no all-principal stationary point found")
    crit = _hyl_critical(params.replace(mu=0.0), w) if params.d >= 3 else None
    mu_star = crit.mu_star if crit is not None else None
    p0 = w.qbar / params.beta
    if mu_star is not None and len(roots) >= 2 and abs(params.mu - mu_star) <= _mu_star_tol(mu_star):
        dense, dilute = roots[0], roots[-1]
        pressure = p0 - 0.5 * (dense.objective + dilute.objective)
        return HylState(roots, [dense, dilute], pressure, dense.slope, dilute.slope, mu_star)
    best = min(roots, key=lambda s: s.objective)
    return HylState(roots, [best], p0 - best.objective, best.slope, best.slope, mu_star)


def pressure_hyl(params: ModelParams, w: CycleWeightTable | None = None) -> float:
    """p^HYL = qbar/beta - min F, F the regularised HYL objective."""
    return hyl_state(params, w).pressure


def _pick_side(state: HylState, side: str | None, what: str) -> int:
    if not state.at_coexistence:
        return 0
    if side == "left":
        return 0
    if side == "right":
        return 1
    if side is None:
        raise RegimeError(
            f"{what} is not defined at mu* = {state.mu_star:.12g}: one-sided values are "
            f"left {state.slope_left:.12g}, right {state.slope_right:.12g}; pass side='left' or 'right'"
        )
    raise ValueError(f"side must be 'left', 'right' or None, got {side!r}")


def density_hyl(params: ModelParams, w: CycleWeightTable | None = None, side: str | None = None) -> float:
    """dp^HYL/dmu = D + (mu - a D)_+/(a - b) at the minimiser.

    Parameters
    ----------
    side : {'left', 'right'}, optional
        Which one-sided derivative to report at mu*.

    Raises
    ------
    RegimeError
        At mu* without ``side``; the message carries both one-sided values.
    """
    state = hyl_state(params, w)
    i = _pick_side(state, side, "dp/dmu")
    return (state.slope_left, state.slope_right)[i]


# ---------------------------------------------------------------------------
# density large deviations

def log_mgf(params: ModelParams, t: float, w: CycleWeightTable | None = None) -> float:
    """Logarithmic moment generating function of the density, sum_k (q_k/beta)(e^{beta t k} - 1).

    +inf when alpha + t > 0.
    """
    t = float(t)
    if math.isnan(t):
        raise ParameterError("t must be a number")
    if params.alpha + t > 0.0:
        return math.inf
    if t == 0.0:
        return 0.0
    if w is not None and not w.closed_tail:
        return float(np.dot(w.q, np.expm1(params.beta * t * w.k))) / params.beta
    return (qbar_closed(params, params.alpha + t) - qbar_closed(params)) / params.beta


def _require_negative_alpha(params: ModelParams) -> None:
    if not params.alpha < 0.0:
        raise ParameterError(f"the density rate functions need alpha < 0, got {params.alpha}")


def density_rate_J(params: ModelParams, x: float) -> float:
    """J_alpha(x) = p(beta, alpha) + f(beta, x) - alpha x on [0, rho_c], +inf elsewhere."""
    _require_negative_alpha(params)
    x = float(x)
    if math.isnan(x):
        raise ParameterError("x must be a number")
    if x < 0.0 or x > rho_critical(params):
        return math.inf
    return qbar_closed(params) / params.beta + free_energy_ideal(params, x) - params.alpha * x


def _pmf_rate_unshifted(params: ModelParams, y: float) -> float:
    return density_rate_J(params, y) - params.mu * y + 0.5 * params.a * y * y


def _pmf_rate_floor(params: ModelParams) -> float:
    hi = rho_critical(params)
    if not math.isfinite(hi):
        rho = rho_closed(params)
        hi = 2.0 * max(rho, params.mu / params.a if params.a > 0.0 else 0.0, 0.0) + 1.0
    res = optimize.minimize_scalar(lambda y: _pmf_rate_unshifted(params, y), bounds=(0.0, hi),
                                   method="bounded", options={"xatol": 1.0e-12 * max(1.0, hi)})
    cands = [float(res.fun), _pmf_rate_unshifted(params, 0.0), _pmf_rate_unshifted(params, hi)]
    return min(cands)


def density_rate_J_pmf(params: ModelParams, x: float) -> float:
    """Density rate function under the PMF tilt.

    J^PMF(x) = J_alpha(x) - mu x + (a/2) x^2 - N, with N the infimum of the
    first three terms over [0, rho_c], found by bounded 1-D minimisation.
    """
    if params.a <= 0.0:
        raise ParameterError("the PMF rate function needs a > 0")
    val = _pmf_rate_unshifted(params, x)
    if not math.isfinite(val):
        return val
    return val - _pmf_rate_floor(params)


# ---------------------------------------------------------------------------
# condensates

def condensate_ideal(params: ModelParams) -> float:
    """0 for alpha < 0; at alpha = 0, +inf for d <= 2 and 0 for d >= 3."""
    if params.alpha == 0.0 and params.d <= 2:
        return math.inf
    return 0.0


def condensate_cmf(params: ModelParams) -> float:
    """Same case table as the ideal gas."""
    return condensate_ideal(params)


def condensate_pmf(params: ModelParams, w: CycleWeightTable | None = None) -> float:
    """(mu/a - rho(alpha))_+."""
    if params.a <= 0.0:
        raise ParameterError("the PMF condensate needs a > 0")
    rho = _table(params, w).rho
    return max(params.mu / params.a - rho, 0.0)


def condensate_hyl(params: ModelParams, w: CycleWeightTable | None = None, side: str | None = None) -> float:
    """(a/(a - b)) (mu/a - D(xi))_+ at the minimiser xi.

    Raises
    ------
    RegimeError
        At mu*, where the pressure is not differentiable, unless ``side`` is given.
    """
    state = hyl_state(params, w)
    i = _pick_side(state, side, "the condensate")
    dens = state.minimizers[i].delta_star
    return params.a / (params.a - params.b) * max(params.mu / params.a - dens, 0.0)


# ---------------------------------------------------------------------------
# phase scans

@dataclass(frozen=True)
class PhaseScanRow:
    """One grid point of a phase scan.

    ``dpressure`` is the derivative along the swept variable; at a kink it
    is the average of the one-sided values. ``n_roots`` is the number of
    stationary points (HYL), ``n_minimizers`` the number of global ones.
    ``residual`` is the solver residual behind the row (0 for closed forms).
    """

    sweep_value: float
    pressure: float
    dpressure: float
    density_at_zero: float
    condensate: float
    n_minimizers: int
    regime_label: str
    n_roots: int = 1
    residual: float = 0.0


def worker_count(requested: int | None = None) -> int:
    """Thread count: ``requested`` or the CPU count, capped by BOSE_LDP_THREADS."""
    n = requested or os.cpu_count() or 1
    cap = os.environ.get("BOSE_LDP_THREADS", "").strip()
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ParameterError(f"BOSE_LDP_THREADS must be an integer, got {cap!r}") from None
    return max(1, int(n))


def _row_ideal_like(model, p, variable, w):
    if model == "ideal":
        pressure, dens = pressure_ideal(p, w), w.rho
        cond, res = condensate_ideal(p), 0.0
    else:
        pressure, dens = pressure_cmf(p, w), density_cmf(p, w)
        cond, res = condensate_cmf(p), solvers.cmf_stationarity_residual(w, p.a)
    if p.alpha < 0.0:
        label = "subcritical"
    else:
        label = "critical" if p.d >= 3 else "divergent"
    dp = dens if variable == "alpha" else 0.0
    return pressure, dp, dens, cond, 1, label, 1, res


def _row_pmf(p, variable, w):
    sol = solvers.pmf_delta_star(p, w)
    pressure = pressure_pmf(p, w, sol)
    cond = condensate_pmf(p, w)
    if variable == "alpha":
        dp = sol.delta_star
    else:
        dp = density_pmf(p, w, sol)
    edge = p.a * w.rho
    if math.isfinite(edge) and abs(p.mu - edge) <= 1.0e-12 * max(1.0, abs(edge)):
        label = "saturation_kink"
    else:
        label = "saturated" if sol.regime is solvers.Regime.SATURATED else "unsaturated"
    return pressure, dp, sol.delta_star, cond, 1, label, 1, sol.residual


def _row_hyl(p, variable, w):
    st = hyl_state(p, w)
    if st.at_coexistence:
        dens = 0.5 * sum(m.delta_star for m in st.minimizers)
        conds = [p.a / (p.a - p.b) * max(p.mu / p.a - m.delta_star, 0.0) for m in st.minimizers]
        cond = 0.5 * sum(conds)
        if variable == "alpha":
            dp = dens
        else:
            dp = 0.5 * (st.slope_left + st.slope_right)
        label = "coexistence_kink"
    else:
        m = st.minimizers[0]
        dens = m.delta_star
        cond = p.a / (p.a - p.b) * max(p.mu / p.a - dens, 0.0)
        dp = dens if variable == "alpha" else m.slope
        label = "dense" if m.u < 0.0 else "dilute"
    res = max(m.residual for m in st.minimizers)
    return st.pressure, dp, dens, cond, len(st.minimizers), label, len(st.roots), res


def _scan_row(model, template, variable, value, K):
    try:
        p = template.replace(**{variable: value})
        w = weights_for(p, K=K)
        if model in ("ideal", "cmf"):
            vals = _row_ideal_like(model, p, variable, w)
        elif model == "pmf":
            vals = _row_pmf(p, variable, w)
        else:
            vals = _row_hyl(p, variable, w)
        return PhaseScanRow(float(value), *vals)
    except (BoseLDPError, ArithmeticError, ValueError) as exc:
        nan = math.nan
        return PhaseScanRow(float(value), nan, nan, nan, nan, 0, f"error: {exc}", 0, nan)


def phase_scan(model: str, params_template: ModelParams, variable: str, grid,
               K: int = DEFAULT_K, workers: int | None = None) -> list[PhaseScanRow]:
    """Evaluate one model along a grid of mu or alpha values.

    Parameters
    ----------
    model : {'ideal', 'cmf', 'pmf', 'hyl'}
    params_template : ModelParams
        Fixed parameters; the swept field is overwritten per row.
    variable : {'mu', 'alpha'}
    grid : sequence of float
        Finite and strictly increasing.
    K : int
        Explicit weights per table.
    workers : int, optional
        Thread count, capped by BOSE_LDP_THREADS.

    Returns
    -------
    list of PhaseScanRow
        In grid order. A row whose evaluation fails carries NaNs and the
        error text in ``regime_label``; the scan itself never aborts.
    """
    if model not in MODELS:
        raise ParameterError(f"unknown model {model!r}; expected one of {MODELS}")
    if variable not in ("mu", "alpha"):
        raise ParameterError(f"sweep variable must be 'mu' or 'alpha', got {variable!r}")
    values = np.asarray(grid, dtype=float).ravel()
    if values.size == 0:
        return []
    if not np.all(np.isfinite(values)):
        raise ParameterError("sweep grid must be finite")
    if values.size > 1 and not np.all(np.diff(values) > 0.0):
        raise ParameterError("sweep grid must be strictly increasing")
    n = min(worker_count(workers), values.size)

    def run(v):
        return _scan_row(model, params_template, variable, float(v), K)

    if n == 1:
        return [run(v) for v in values]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(run, values))
