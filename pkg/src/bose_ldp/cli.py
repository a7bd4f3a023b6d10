"""Command-line front end.

Exit status is 0 on success, 1 for invalid parameters or arguments, 2 when a
solver reports a regime error, and 3 when ``verify`` finds a failing check.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from typing import Sequence

import numpy as np

from . import sampler, solvers, thermo
from .errors import BoseLDPError, ParameterError, RegimeError, StateSpaceError
from .model import DEFAULT_K, MODELS, ModelParams

EXIT_OK, EXIT_PARAM, EXIT_REGIME, EXIT_VERIFY = 0, 1, 2, 3
SCAN_HEADER = ["sweep_value", "pressure", "dpressure", "density", "condensate", "n_minimizers", "regime"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ParameterError(message)


def _num(x):
    # JSON has no infinities; write them as strings so the output stays valid.
    if x is None:
        return None
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    x = float(x)
    if math.isfinite(x):
        return x
    return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return repr(float(x))


def _common(p: argparse.ArgumentParser, model_default: str | None = "ideal") -> None:
    p.add_argument("--config", help="JSON file with default values for these options; flags win")
    p.add_argument("--model", default=model_default,
                   help=f"one of {', '.join(MODELS)}" + (", a comma list, or 'all'" if model_default == "all" else ""))
    p.add_argument("-d", "--dimension", dest="d", type=int, default=3)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("-a", type=float, default=0.0, help="mean-field coupling")
    p.add_argument("-b", type=float, default=0.0, help="HYL counter-term coupling")
    p.add_argument("--alpha", type=float, default=0.0, help="reference chemical potential, alpha <= 0")
    p.add_argument("--mu", type=float, default=0.0, help="tilt chemical potential")
    p.add_argument("--K", type=int, default=DEFAULT_K, help="explicit cycle weights before the analytic tail")
    p.add_argument("--format", choices=("json", "csv"), default=None)
    p.add_argument("-o", "--output", default="-", help="output path, '-' for stdout")


def _sampler_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--volume", type=float, default=1000.0)
    p.add_argument("--sample-K", dest="sample_K", type=int, default=10)
    p.add_argument("--steps", type=int, default=100_000, help="chain length (or draws for the ideal model)")
    p.add_argument("--burn-in", dest="burn_in", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--thinning", type=int, default=1)
    p.add_argument("--chains", type=int, default=1)
    p.add_argument("--cap", type=int, default=None)


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = _Parser(prog="bose-ldp", description="Thermodynamics of random cycle-count models.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    subs = {}

    s = sub.add_parser("pressure", help="pressure and its derivative at one point")
    _common(s, model_default="all")
    subs["pressure"] = s

    s = sub.add_parser("minimizer", help="zero of the rate function with stationarity residuals")
    _common(s)
    s.add_argument("--entries", type=int, default=5, help="leading entries of the minimiser to print")
    subs["minimizer"] = s

    s = sub.add_parser("phase-scan", help="CSV of pressure, density and condensate along mu or alpha")
    _common(s)
    s.add_argument("--sweep", required=True, help="variable:start:stop:step with variable mu or alpha")
    s.add_argument("--threads", type=int, default=None)
    subs["phase-scan"] = s

    s = sub.add_parser("critical", help="critical densities and the HYL critical chemical potentials")
    _common(s)
    subs["critical"] = s

    s = sub.add_parser("condensate", help="closed-form condensate density, optionally a Monte Carlo matrix")
    _common(s)
    _sampler_opts(s)
    s.add_argument("--mc", action="store_true", help="also estimate E[D - D_K'] by sampling")
    s.add_argument("--K-grid", dest="K_grid", default=None, help="comma-separated cutoffs K'")
    s.add_argument("--volumes", default=None, help="comma-separated volumes for the matrix")
    subs["condensate"] = s

    s = sub.add_parser("sample", help="Monte Carlo samples and statistics")
    _common(s)
    _sampler_opts(s)
    s.add_argument("--csv", dest="csv_path", default=None, help="write the recorded states here")
    s.add_argument("--csv-format", dest="csv_format", choices=("wide", "long"), default="wide")
    subs["sample"] = s

    s = sub.add_parser("verify", help="run quick oracle comparisons")
    s.add_argument("--config", help=argparse.SUPPRESS)
    subs["verify"] = s
    return parser, subs


def _parse(argv: Sequence[str]) -> argparse.Namespace:
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    path = getattr(args, "config", None)
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ParameterError(f"cannot read config {path!r}: {exc}") from None
        if not isinstance(cfg, dict):
            raise ParameterError("config file must hold a JSON object")
        sp = subs[args.command]
        known = {a.dest for a in sp._actions}
        unknown = sorted(set(cfg) - known)
        if unknown:
            raise ParameterError(f"unknown config keys: {', '.join(unknown)}")
        # Config values become defaults, so explicit flags still win.
        sp.set_defaults(**cfg)
        args = parser.parse_args(argv)
    return args


def _params(args) -> ModelParams:
    return ModelParams(d=args.d, beta=args.beta, alpha=args.alpha, mu=args.mu, a=args.a, b=args.b)


def _model(args, allow_all=False) -> list[str]:
    m = str(args.model).lower()
    if allow_all and m == "all":
        return list(MODELS)
    names = [x.strip() for x in m.split(",")] if allow_all else [m]
    for n in names:
        if n not in MODELS:
            raise ParameterError(f"unknown model {n!r}; expected one of {', '.join(MODELS)}")
    return names


class _Out:
    def __init__(self, path):
        self.path = path
        self.fh = None

    def __enter__(self):
        self.fh = sys.stdout if self.path in (None, "-") else open(self.path, "w", newline="", encoding="utf-8")
        return self.fh

    def __exit__(self, *exc):
        if self.fh is not sys.stdout:
            self.fh.close()


def _emit(args, records: list[dict], default="json") -> None:
    fmt = args.format or default
    with _Out(args.output) as fh:
        if fmt == "json":
            payload = records[0] if len(records) == 1 else records
            json.dump(payload, fh, indent=2, ensure_ascii=False, default=_num)
            fh.write("\n")
        else:
            keys = list(dict.fromkeys(k for r in records for k in r))
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(keys)
            for r in records:
                wr.writerow([_cell(r.get(k, "")) for k in keys])


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _clean(rec: dict) -> dict:
    return {k: (_clean(v) if isinstance(v, dict) else _num(v) if isinstance(v, (float, int, np.number)) else v)
            for k, v in rec.items()}


# ---------------------------------------------------------------------------
# subcommands

def _point(model: str, p: ModelParams, K: int) -> dict:
    w = thermo.weights_for(p, K=K)
    if model == "ideal":
        return {"pressure": thermo.pressure_ideal(p, w), "dpressure_dalpha": w.rho, "residual": 0.0}
    if model == "cmf":
        return {"pressure": thermo.pressure_cmf(p, w), "dpressure_dalpha": thermo.density_cmf(p, w),
                "residual": solvers.cmf_stationarity_residual(w, p.a)}
    if model == "pmf":
        sol = solvers.pmf_delta_star(p, w)
        return {"pressure": thermo.pressure_pmf(p, w, sol), "dpressure_dmu": thermo.density_pmf(p, w, sol),
                "residual": sol.residual, "regime": sol.regime.value}
    st = thermo.hyl_state(p, w)
    rec = {"pressure": st.pressure, "residual": max(m.residual for m in st.minimizers)}
    if st.at_coexistence:
        rec.update(dpressure_dmu_left=st.slope_left, dpressure_dmu_right=st.slope_right, regime="coexistence")
    else:
        rec.update(dpressure_dmu=st.slope_left, regime=st.minimizers[0].label)
    return rec


def cmd_pressure(args) -> int:
    p = _params(args)
    recs = []
    for m in _model(args, allow_all=True):
        if m == "pmf" and p.a <= 0.0 or m == "hyl" and not (0.0 < p.b < p.a):
            if args.model == "all":
                continue
        recs.append({"model": m, **_point(m, p, args.K)})
    _emit(args, [_clean(r) for r in recs])
    return EXIT_OK


def cmd_minimizer(args) -> int:
    (m,) = _model(args)
    p = _params(args)
    w = thermo.weights_for(p, K=args.K)
    n = max(0, int(args.entries))
    if m == "ideal":
        x, res, extra, dens = solvers.ideal_minimizer(w), 0.0, {}, w.rho
    elif m == "cmf":
        x, res, extra = solvers.cmf_minimizer(w, p.a), solvers.cmf_stationarity_residual(w, p.a), {}
        dens = thermo.density_cmf(p, w)
    elif m == "pmf":
        sol = solvers.pmf_delta_star(p, w)
        x = solvers.pmf_minimizer(p, w, sol)
        res = solvers.pmf_stationarity_residual(x, p, w, sol.delta_star)
        extra = {"fixed_point_residual": sol.residual, "regime": sol.regime.value}
        dens = sol.delta_star
    else:
        st = thermo.hyl_state(p, w)
        best = st.minimizers[0]
        x = best.xi
        res = solvers.hyl_stationarity_residual(x, p, w, best.delta_star)
        dens = best.delta_star
        extra = {"fixed_point_residual": best.residual, "label": best.label,
                 "n_minimizers": len(st.minimizers),
                 "roots": [{"label": r.label, "delta_star": _num(r.delta_star), "objective": _num(r.objective),
                            "residual": _num(r.residual)} for r in st.roots]}
    rec = {"model": m, "density": dens, "stationarity_residual": res, **extra,
           "entries": [_num(v) for v in x.x[:n]]}
    if args.format == "csv":
        rec.pop("roots", None)
        rec["entries"] = " ".join(repr(float(v)) for v in x.x[:n])
    _emit(args, [_clean(rec)])
    return EXIT_OK


def _sweep(spec: str) -> tuple[str, np.ndarray]:
    parts = spec.split(":")
    if len(parts) != 4:
        raise ParameterError(f"--sweep must be variable:start:stop:step, got {spec!r}")
    var = parts[0].strip().lower()
    if var not in ("mu", "alpha"):
        raise ParameterError(f"sweep variable must be mu or alpha, got {parts[0]!r}")
    try:
        start, stop, step = (float(x) for x in parts[1:])
    except ValueError:
        raise ParameterError(f"sweep bounds must be numbers, got {spec!r}") from None
    if not (step > 0.0 and math.isfinite(start) and math.isfinite(stop)) or stop < start:
        raise ParameterError("sweep needs step > 0 and start <= stop")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    if n > 10 ** 6:
        raise ParameterError(f"sweep has {n} points; at most 1e6 are allowed")
    return var, start + step * np.arange(n)


def cmd_phase_scan(args) -> int:
    (m,) = _model(args)
    var, grid = _sweep(args.sweep)
    p = _params(args)
    if var == "alpha" and grid.size and grid[-1] > 0.0:
        raise ParameterError("the alpha sweep must stay in alpha <= 0")
    rows = thermo.phase_scan(m, p, var, grid, K=args.K, workers=args.threads)
    fmt = args.format or "csv"
    with _Out(args.output) as fh:
        if fmt == "csv":
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(SCAN_HEADER)
            for r in rows:
                wr.writerow([_fmt(r.sweep_value), _fmt(r.pressure), _fmt(r.dpressure), _fmt(r.density_at_zero),
                             _fmt(r.condensate), r.n_minimizers, r.regime_label])
        else:
            json.dump([_clean(vars(r)) for r in rows], fh, indent=2, ensure_ascii=False)
            fh.write("\n")
    return EXIT_OK


def cmd_critical(args) -> int:
    p = _params(args)
    rec = {"rho_c": thermo.rho_critical(p), "rho_c_cmf": thermo.rho_critical_cmf(p)}
    if p.b > 0.0:
        w = thermo.weights_for(p, K=args.K)
        cp = solvers.critical_params(p, w)
        rec.update(mu_p=cp.mu_p, mu_tang=cp.mu_tang, mu_star=cp.mu_star, beta_star=cp.beta_star,
                   b_star=cp.b_star, dge5_condition_holds=cp.dge5_condition_holds,
                   exclusion_bound=cp.exclusion_bound)
        if cp.mu_star is not None:
            rec["mu_star_tolerance"] = 1e-10
            lo = thermo.hyl_state(p.replace(mu=cp.mu_star), w)
            rec["pressure_gap_at_mu_star"] = abs(lo.minimizers[0].objective - lo.minimizers[-1].objective)
    _emit(args, [_clean(rec)])
    return EXIT_OK


def _sampler_cfg(args) -> sampler.SamplerConfig:
    return sampler.SamplerConfig(volume=args.volume, K=args.sample_K, chain_length=args.steps,
                                 burn_in=args.burn_in, seed=args.seed, thinning=args.thinning,
                                 n_chains=args.chains, cap=args.cap)


def _ints(text: str | None, default: list) -> list:
    if not text:
        return default
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ParameterError(f"expected comma-separated integers, got {text!r}") from None


def cmd_condensate(args) -> int:
    p = _params(args)
    recs = []
    for m in _model(args, allow_all=True):
        res = 0.0
        if m == "ideal":
            val = thermo.condensate_ideal(p)
        elif m == "cmf":
            val = thermo.condensate_cmf(p)
        elif m == "pmf":
            w = thermo.weights_for(p, K=args.K)
            val = thermo.condensate_pmf(p, w)
            res = solvers.pmf_delta_star(p, w).residual
        else:
            w = thermo.weights_for(p, K=args.K)
            val = thermo.condensate_hyl(p, w)
            res = max(s.residual for s in thermo.hyl_state(p, w).minimizers)
        rec = {"model": m, "condensate": val, "residual": res}
        if args.mc:
            cfg = _sampler_cfg(args)
            grid = _ints(args.K_grid, [cfg.K])
            vols = [float(v) for v in args.volumes.split(",")] if args.volumes else [cfg.volume]
            mat = sampler.condensate_matrix(m, p, cfg, vols, grid)
            rec["monte_carlo"] = [{"volume": v, "K_prime": e.K_prime, "value": _num(e.value),
                                   "std_error": _num(e.std_error), "tail_bias": _num(e.tail_bias)}
                                  for v, est in mat.items() for e in est]
        recs.append(rec)
    if args.format == "csv":
        for r in recs:
            r.pop("monte_carlo", None)
    _emit(args, [_clean(r) for r in recs])
    return EXIT_OK


def cmd_sample(args) -> int:
    (m,) = _model(args)
    p = _params(args)
    cfg = _sampler_cfg(args)
    if m == "ideal":
        draws = [sampler.sample_reference(p, cfg, c) for c in range(cfg.n_chains)]
        steps = [np.arange(1, cfg.n_samples + 1)] * cfg.n_chains
        acc = math.nan
    else:
        res = sampler.run_chains(m, p, cfg)
        draws = [r.samples for r in res]
        steps = [r.steps for r in res]
        acc = float(np.mean([r.acceptance_rate for r in res]))
    k = np.arange(1, cfg.K + 1, dtype=float)
    obs = [np.column_stack([d @ k / cfg.volume, d / cfg.volume]) for d in draws]
    st = sampler.summarize(obs, acc, sampler._tail_bias(p, cfg.K))
    if args.csv_path:
        both = np.concatenate(draws, axis=0)
        sampler.write_samples_csv(args.csv_path, both, np.concatenate(steps), fmt=args.csv_format)
    rec = {"model": m, "density": st.mean[0], "density_std_error": st.std_error[0], "density_ess": st.ess[0],
           "acceptance_rate": st.acceptance_rate, "tail_bias": st.tail_bias,
           "mean_occupation": [_num(v) for v in st.mean[1:]],
           "mean_occupation_std_error": [_num(v) for v in st.std_error[1:]]}
    if args.format == "csv":
        rec["mean_occupation"] = " ".join(repr(float(v)) for v in st.mean[1:])
        rec["mean_occupation_std_error"] = " ".join(repr(float(v)) for v in st.std_error[1:])
    _emit(args, [_clean(rec)])
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_checks

    checks = run_checks()
    for c in checks:
        print(c.line())
    return EXIT_OK if all(c.passed for c in checks) else EXIT_VERIFY


COMMANDS = {
    "pressure": cmd_pressure,
    "minimizer": cmd_minimizer,
    "phase-scan": cmd_phase_scan,
    "critical": cmd_critical,
    "condensate": cmd_condensate,
    "sample": cmd_sample,
    "verify": cmd_verify,
}


def run(argv: Sequence[str] | None = None) -> int:
    """Parse ``argv`` and execute; returns the exit status."""
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _parse(argv)
        return COMMANDS[args.command](args)
    except RegimeError as exc:
        print(f"regime error: {exc}", file=sys.stderr)
        return EXIT_REGIME
    except (ParameterError, StateSpaceError) as exc:
        print(f"parameter error: {exc}", file=sys.stderr)
        return EXIT_PARAM
    except BoseLDPError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REGIME
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAM


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
