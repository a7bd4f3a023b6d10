"""Time the compiled kernels against the pure-Python fallback.

Run with ``python benchmarks/bench_kernels.py``. Each kernel is called
with identical inputs on both backends; outputs are checked to be
bit-identical before timings are reported.
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from bose_ldp import _backend
from bose_ldp._series import series_constants
from bose_ldp.model import ModelParams


def _best(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def _cases(n_w, n_sum, n_steps):
    rng = np.random.default_rng(0)
    x = np.concatenate([-math.exp(-1.0) * rng.random(n_w // 2), rng.exponential(5.0, n_w - n_w // 2)])
    p = ModelParams(d=3, beta=1.0, alpha=0.0, a=1.0, b=0.1)
    log_a, c1, c2 = series_constants(p, -1.0e-4)

    def w_array(k):
        return lambda: k.lambert_w_array(x, 0)

    def sums(k):
        return lambda: k.lambert_sums(log_a, c1, c2, 1, n_sum, 0)

    K = 3
    loglam = np.log(5.0 * np.array([0.0224, 0.004, 0.0015]))
    kidx = rng.integers(0, K, n_steps)
    up = rng.integers(0, 2, n_steps, dtype=np.uint8)
    logu = np.log1p(-rng.random(n_steps))

    def chain(k):
        def run():
            state = np.zeros(K, dtype=np.int64)
            sums_ = np.zeros(3, dtype=np.int64)
            counters = np.zeros(2, dtype=np.int64)
            out = np.empty((n_steps, K), dtype=np.int64)
            k.metropolis_run(state, loglam, 5.0, 1.0, 0.5, 1.0, 0.0, 0.3, 30, sums_, counters,
                             kidx, up, logu, 1, 0, out)
            return out
        return run

    return [("lambert_w_array", w_array, n_w), ("lambert_sums", sums, n_sum), ("metropolis_run", chain, n_steps)]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--size", type=int, default=200_000, help="elements / terms / steps per call")
    args = ap.parse_args(argv)
    if _backend.compiled is None:
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation`")
    n = args.size
    print(f"{'kernel':<18}{'n':>10}{'cython [s]':>13}{'python [s]':>13}{'speedup':>10}  identical")
    for name, make, size in _cases(n, n, n):
        fast_fn = make(_backend.compiled)
        slow_fn = make(_backend.fallback)
        t_fast, out_fast = _best(fast_fn, args.repeat)
        t_slow, out_slow = _best(slow_fn, args.repeat)
        same = np.array_equal(np.asarray(out_fast), np.asarray(out_slow), equal_nan=True)
        print(f"{name:<18}{size:>10}{t_fast:>13.4f}{t_slow:>13.4f}{t_slow / t_fast:>10.1f}  {same}")


if __name__ == "__main__":
    main()
