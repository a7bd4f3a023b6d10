"""Quick self-checks against independent oracles, used by ``bose-ldp verify``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import sampler, solvers, thermo
from .model import ModelParams, make_weights
from .special_functions import bose_g, lambert_w, riemann_zeta

__all__ = ["Check", "run_checks"]


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: float
    tolerance: float

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.name}: {self.value:.3g} (tol {self.tolerance:.3g})"


def _check(name, value, tol):
    return Check(name, bool(value <= tol), float(value), float(tol))


def _lambert_roundtrip():
    rng = np.random.default_rng(0)
    xs = np.concatenate([-math.exp(-1) * rng.random(200), rng.exponential(10.0, 200)])
    worst = 0.0
    for x in xs:
        wv = lambert_w(0, x)
        worst = max(worst, abs(wv * math.exp(wv) - x) / max(abs(x), 1e-300))
        if x < 0.0:
            wl = lambert_w(-1, x)
            worst = max(worst, abs(wl * math.exp(wl) - x) / abs(x))
    return worst


def _bose_direct(n, t):
    k = np.arange(1, 200_000, dtype=float)
    return math.fsum(np.exp(-t * k - n * np.log(k)))


def run_checks() -> list[Check]:
    """Run the quick oracle comparisons; a few seconds in total."""
    out = [_check("lambert roundtrip", _lambert_roundtrip(), 1e-11)]
    err = max(abs(bose_g(n, t) / _bose_direct(n, t) - 1.0) for n in (1.5, 2.5) for t in (0.1, 1.0))
    out.append(_check("bose_g vs direct series", err, 1e-10))

    p3 = ModelParams(d=3, beta=1.0 / (4.0 * math.pi))
    out.append(_check("critical density zeta(3/2)", abs(thermo.rho_critical(p3) - riemann_zeta(1.5)), 1e-10))

    pc = ModelParams(d=3, beta=1.0, alpha=-0.3, a=2.0)
    out.append(_check("CMF stationarity", solvers.cmf_stationarity_residual(thermo.weights_for(pc), 2.0), 1e-10))

    pp = ModelParams(d=3, beta=1.0, alpha=-0.3, mu=0.02, a=1.0)
    out.append(_check("PMF fixed point", solvers.pmf_delta_star(pp, thermo.weights_for(pp)).residual, 1e-10))

    ph = ModelParams(d=3, beta=1.0, alpha=-0.2, mu=0.03, a=1.0, b=1e-9)
    gap = abs(thermo.pressure_hyl(ph) - thermo.pressure_pmf(ph.replace(b=0.0)))
    out.append(_check("HYL pressure as b -> 0", gap, 1e-8))

    hc = ModelParams(d=3, beta=1.0, alpha=0.0, a=1.0, b=0.1)
    cp = solvers.critical_params(hc, thermo.weights_for(hc))
    ordered = cp.mu_star is not None and cp.mu_tang < cp.mu_star < cp.mu_p
    out.append(Check("HYL mu_tang < mu* < mu_p", ordered, float(not ordered), 0.0))

    pr = ModelParams(d=3, beta=1.0, alpha=-0.2)
    cfg = sampler.SamplerConfig(volume=1e3, K=10, chain_length=20_000, seed=7)
    s = sampler.sample_reference(pr, cfg)
    q = make_weights(pr, 10, closed_tail=False).q
    z = np.abs(s.mean(axis=0) / cfg.volume - q) / np.sqrt(q / cfg.volume / cfg.chain_length)
    out.append(_check("reference Poisson means (max z)", float(z.max()), 5.0))
    return out
