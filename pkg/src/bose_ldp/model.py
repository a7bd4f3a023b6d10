"""Model parameters, cycle weights, occupation vectors and rate functionals.

Conventions
-----------
Occupation vectors are truncated: entries beyond their length K are zero.
The cycle weights are

    q_k = exp(beta k alpha) / ((4 pi beta)^{d/2} k^{1 + d/2}),

and the closed-form totals are qbar = sum_k q_k and rho = sum_k k q_k.
``(x)_+`` is max(x, 0) and ``(x)_-`` is min(x, 0).
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import xlogy

from .errors import DivergenceError, ParameterError
from .special_functions import bose_g, bose_tail

__all__ = [
    "MODELS",
    "DEFAULT_K",
    "ModelParams",
    "CycleWeightTable",
    "OccupationVector",
    "make_weights",
    "qbar_closed",
    "rho_closed",
    "total_density",
    "partial_density",
    "ideal_rate",
    "energy_cmf",
    "energy_pmf",
    "energy_pmf_lsc",
    "energy_hyl",
    "energy_hyl_lsc",
    "objective_F",
    "model_objective",
]

MODELS = ("ideal", "cmf", "pmf", "hyl")

#: Default truncation index for weight tables.
DEFAULT_K = 10_000


def _finite(name: str, value) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ParameterError(f"{name} must be a real number, got {value!r}") from None
    if not math.isfinite(v):
        raise ParameterError(f"{name} must be finite, got {v}")
    return v


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters shared by all four models.

    Parameters
    ----------
    d : int
        Spatial dimension, at least 1.
    beta : float
        Inverse temperature, strictly positive.
    alpha : float
        Reference chemical potential, alpha <= 0.
    mu : float
        Tilt chemical potential (PMF and HYL).
    a : float
        Mean-field coupling, a >= 0.
    b : float
        Counter-term coupling (HYL), 0 <= b, and b < a whenever HYL
        quantities are evaluated.
    """

    d: int
    beta: float
    alpha: float = 0.0
    mu: float = 0.0
    a: float = 0.0
    b: float = 0.0

    def __post_init__(self):
        if isinstance(self.d, bool) or int(self.d) != self.d or int(self.d) < 1:
            raise ParameterError(f"dimension d must be a positive integer, got {self.d!r}")
        object.__setattr__(self, "d", int(self.d))
        for name in ("beta", "alpha", "mu", "a", "b"):
            object.__setattr__(self, name, _finite(name, getattr(self, name)))
        if self.beta <= 0.0:
            raise ParameterError(f"beta must be > 0, got {self.beta}")
        if self.alpha > 0.0:
            raise ParameterError(
                f"alpha must satisfy alpha <= 0 (the cycle weights are only summable "
                f"for alpha <= 0), got {self.alpha}"
            )
        if self.a < 0.0:
            raise ParameterError(f"coupling a must be >= 0, got {self.a}")
        if self.b < 0.0:
            raise ParameterError(f"coupling b must be >= 0, got {self.b}")

    def replace(self, **changes) -> "ModelParams":
        """Copy with some fields changed (validated again)."""
        return dataclasses.replace(self, **changes)

    @property
    def thermal_volume(self) -> float:
        """(4 pi beta)^{d/2}, the normalisation of the cycle weights."""
        return (4.0 * math.pi * self.beta) ** (self.d / 2.0)

    def require_hyl(self) -> None:
        """Raise ParameterError unless 0 <= b < a."""
        if not self.b < self.a:
            raise ParameterError(f"the HYL model needs 0 <= b < a, got a={self.a}, b={self.b}")


def qbar_closed(params: ModelParams, alpha: float | None = None) -> float:
    """Closed-form total weight (4 pi beta)^{-d/2} g(1 + d/2, -beta alpha)."""
    al = params.alpha if alpha is None else float(alpha)
    return bose_g(1.0 + params.d / 2.0, -params.beta * al) / params.thermal_volume


def rho_closed(params: ModelParams, alpha: float | None = None) -> float:
    """Closed-form density (4 pi beta)^{-d/2} g(d/2, -beta alpha); +inf when divergent."""
    al = params.alpha if alpha is None else float(alpha)
    try:
        return bose_g(params.d / 2.0, -params.beta * al) / params.thermal_volume
    except DivergenceError:
        return math.inf


def _log_weights(params: ModelParams, k: np.ndarray) -> np.ndarray:
    return (params.beta * params.alpha * k
            - 0.5 * params.d * math.log(4.0 * math.pi * params.beta)
            - (1.0 + 0.5 * params.d) * np.log(k))


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class CycleWeightTable:
    """Per-k cycle weights q_1..q_K together with their closed-form totals.

    With ``closed_tail=True`` (default) the table describes the full model
    and ``qbar``/``rho`` are the infinite sums. With ``closed_tail=False`` it
    describes the exactly truncated model with cycles of length at most K,
    so ``qbar`` and ``rho`` are finite sums and all tails vanish.

    Attributes
    ----------
    q_tail, rho_tail : float
        sum_{k>K} q_k and sum_{k>K} k q_k (zero for a truncated table).
    """

    params: ModelParams
    K: int
    q: np.ndarray
    qbar: float
    rho: float
    rho_K: float
    q_tail: float
    rho_tail: float
    closed_tail: bool = True
    k: np.ndarray = field(repr=False, default=None)

    @property
    def log_q(self) -> np.ndarray:
        return np.log(self.q)


def make_weights(params: ModelParams, K: int = DEFAULT_K, closed_tail: bool = True) -> CycleWeightTable:
    """Build the cycle-weight table for ``params`` truncated at ``K``.

    Parameters
    ----------
    params : ModelParams
    K : int
        Number of explicit weights, K >= 1.
    closed_tail : bool
        Include the analytic tail beyond K (full model) or not (truncated model).

    Returns
    -------
    CycleWeightTable
    """
    K = int(K)
    if K < 1:
        raise ParameterError(f"truncation K must be >= 1, got {K}")
    k = np.arange(1, K + 1, dtype=np.float64)
    q = np.exp(_log_weights(params, k))
    rho_K = float(np.dot(k, q))
    if closed_tail:
        t = -params.beta * params.alpha
        q_tail = bose_tail(1.0 + params.d / 2.0, t, K) / params.thermal_volume
        try:
            rho_tail = bose_tail(params.d / 2.0, t, K) / params.thermal_volume
        except DivergenceError:
            rho_tail = math.inf
        qbar = qbar_closed(params)
        rho = rho_closed(params)
    else:
        q_tail = rho_tail = 0.0
        qbar = float(q.sum())
        rho = rho_K
    return CycleWeightTable(params=params, K=K, q=_readonly(q), qbar=qbar, rho=rho,
                            rho_K=rho_K, q_tail=q_tail, rho_tail=rho_tail,
                            closed_tail=closed_tail, k=_readonly(k))


@dataclass(frozen=True, eq=False)
class OccupationVector:
    """Nonnegative truncated sequence (x_1, ..., x_K), zero beyond K."""

    x: np.ndarray

    def __post_init__(self):
        arr = np.array(self.x, dtype=np.float64, copy=True).reshape(-1)
        if arr.size == 0:
            raise ParameterError("an occupation vector needs at least one entry")
        if not np.all(np.isfinite(arr)):
            raise ParameterError("occupation entries must be finite")
        if np.any(arr < 0.0):
            raise ParameterError("occupation entries must be nonnegative")
        arr.setflags(write=False)
        object.__setattr__(self, "x", arr)

    @property
    def K(self) -> int:
        return int(self.x.size)

    def __len__(self) -> int:
        return self.K

    @classmethod
    def of(cls, values: "OccupationVector | Sequence[float] | np.ndarray") -> "OccupationVector":
        return values if isinstance(values, cls) else cls(values)


def _vec(x) -> np.ndarray:
    return OccupationVector.of(x).x


def total_density(x) -> float:
    """Particle density D(x) = sum_k k x_k."""
    v = _vec(x)
    return float(np.dot(np.arange(1, v.size + 1, dtype=np.float64), v))


def partial_density(x, k_max: int) -> float:
    """Partial density D_{K'}(x) = sum_{k <= K'} k x_k."""
    v = _vec(x)[: max(0, int(k_max))]
    return float(np.dot(np.arange(1, v.size + 1, dtype=np.float64), v))


def ideal_rate(x, w: CycleWeightTable) -> float:
    """Rate function of the reference Poisson law.

    I(x) = sum_k (x_k/beta)(log(x_k/q_k) - 1) + qbar/beta, with 0 log 0 = 0.
    Entries beyond the length of ``x`` are zero and contribute q_k/beta each,
    which is summed in closed form.

    Raises
    ------
    ParameterError
        If ``x`` is longer than the weight table.
    """
    v = _vec(x)
    n = v.size
    if n > w.K:
        raise ParameterError(f"vector length {n} exceeds table truncation {w.K}")
    beta = w.params.beta
    q = w.q[:n]
    head = xlogy(v, v) - v * w.log_q[:n] - v + q
    rest = float(w.q[n:].sum()) + w.q_tail
    return float(head.sum() + rest) / beta


def energy_cmf(x, params: ModelParams) -> float:
    """Cycle mean-field energy (a/2) (sum_k x_k)^2."""
    s = float(_vec(x).sum())
    return 0.5 * params.a * s * s


def energy_pmf(x, params: ModelParams) -> float:
    """Particle mean-field energy -mu D + (a/2) D^2."""
    dens = total_density(x)
    return -params.mu * dens + 0.5 * params.a * dens * dens


def energy_pmf_lsc(x, params: ModelParams) -> float:
    """Lower semicontinuous regularisation -mu D + (a/2) D^2 - (mu - a D)_+^2 / (2a).

    Equals -mu^2/(2a) whenever D < mu/a, and the plain energy otherwise.
    """
    if params.a <= 0.0:
        raise ParameterError("the regularised PMF energy needs a > 0")
    dens = total_density(x)
    gap = max(params.mu - params.a * dens, 0.0)
    if gap > 0.0:
        return -params.mu ** 2 / (2.0 * params.a)
    return energy_pmf(x, params)


def energy_hyl(x, params: ModelParams, form: str = "squares") -> float:
    """HYL energy.

    ``form='squares'``: -mu D + (a/2) D^2 - (b/2) sum_k k^2 x_k^2.
    ``form='pairs'``: -mu D + ((a-b)/2) D^2 + (b/2) sum_{j != k} j k x_j x_k,
    evaluated literally with an O(K^2) double sum.
    """
    v = _vec(x)
    kx = np.arange(1, v.size + 1, dtype=np.float64) * v
    dens = float(kx.sum())
    if form == "squares":
        return -params.mu * dens + 0.5 * params.a * dens ** 2 - 0.5 * params.b * float(np.dot(kx, kx))
    if form == "pairs":
        cross = float(np.outer(kx, kx).sum() - np.dot(kx, kx))
        return -params.mu * dens + 0.5 * (params.a - params.b) * dens ** 2 + 0.5 * params.b * cross
    raise ValueError(f"unknown form {form!r}")


def energy_hyl_lsc(x, params: ModelParams) -> float:
    """Regularised HYL energy H - (mu - a D)_+^2 / (2 (a - b))."""
    params.require_hyl()
    dens = total_density(x)
    gap = max(params.mu - params.a * dens, 0.0)
    return energy_hyl(x, params) - gap * gap / (2.0 * (params.a - params.b))


def objective_F(x, params: ModelParams, w: CycleWeightTable) -> float:
    """HYL objective F(x) = I(x) + regularised HYL energy."""
    return ideal_rate(x, w) + energy_hyl_lsc(x, params)


def model_objective(model: str, x, params: ModelParams, w: CycleWeightTable) -> float:
    """Rate plus regularised energy for ``model`` in {'ideal','cmf','pmf','hyl'}."""
    if model == "ideal":
        return ideal_rate(x, w)
    if model == "cmf":
        return ideal_rate(x, w) + energy_cmf(x, params)
    if model == "pmf":
        return ideal_rate(x, w) + energy_pmf_lsc(x, params)
    if model == "hyl":
        return objective_F(x, params, w)
    raise ParameterError(f"unknown model {model!r}; expected one of {MODELS}")
