"""Pure-Python versions of the compiled kernels in ``_kernels.pyx``.

Used when the extension is unavailable or ``BOSE_LDP_BACKEND=python``.
The arithmetic follows the compiled code step by step.
"""

import math

import numpy as np

from . import _lambert


def lambert_w_array(x, branch):
    """Elementwise W on an array; NaN marks arguments outside the domain."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    out = np.empty_like(x)
    for i, xi in enumerate(x.tolist()):
        if xi != xi or _lambert.branch_offset(xi) < -_lambert.BRANCH_SLACK:
            out[i] = math.nan
        elif branch == 0:
            out[i] = _lambert.w0(xi)
        elif xi >= 0.0:
            out[i] = math.nan
        else:
            out[i] = _lambert.wm1(xi)
    return out


def lambert_sums(log_a, c1, c2, k_lo, k_hi, lower_index):
    """Sums of -W/k, -W/k^2 and W^2/k^2 over k_lo <= k <= k_hi."""
    t1 = t2 = t3 = 0.0
    for k in range(k_lo, k_hi + 1):
        kd = float(k)
        z = -math.exp(log_a + c1 * math.log(kd) + c2 * kd)
        if _lambert.branch_offset(z) < -_lambert.BRANCH_SLACK:
            return False, t1, t2, t3
        w = _lambert.wm1(z) if k == lower_index else _lambert.w0(z)
        t1 += -w / kd
        t2 += -w / (kd * kd)
        t3 += w * w / (kd * kd)
    return True, t1, t2, t3


def metropolis_run(state, loglam, volume, beta, mu, a_d, a_c, b, cap, sums,
                   counters, kidx, up, logu, thin, phase, out):
    """Advance the chain len(kidx) steps; see the compiled version."""
    st = state.tolist()
    ll = loglam.tolist()
    s0, s1, s2 = (int(v) for v in sums)
    acc, rej = (int(v) for v in counters)
    vol2 = volume * volume
    bv = beta * volume
    rows = 0
    kdim = len(st)
    for kk, u, lu in zip(kidx.tolist(), up.tolist(), logu.tolist()):
        n = st[kk]
        kd = float(kk + 1)
        sigma = 1 if u else -1
        if (sigma < 0 and n == 0) or (sigma > 0 and cap >= 0 and n + 1 > cap):
            rej += 1
        else:
            ds0 = float(sigma)
            ds1 = float(sigma) * kd
            ds2 = kd * kd * (2.0 * float(n) * float(sigma) + 1.0)
            dh = (-mu * ds1 / volume
                  + 0.5 * a_d * (2.0 * float(s1) * ds1 + ds1 * ds1) / vol2
                  + 0.5 * a_c * (2.0 * float(s0) * ds0 + 1.0) / vol2
                  - 0.5 * b * ds2 / vol2)
            if sigma > 0:
                log_acc = ll[kk] - math.log(float(n + 1)) - bv * dh
            else:
                log_acc = math.log(float(n)) - ll[kk] - bv * dh
            if lu < log_acc:
                st[kk] = n + sigma
                s0 += sigma
                s1 += sigma * (kk + 1)
                s2 += (kk + 1) * (kk + 1) * (2 * n * sigma + 1)
                acc += 1
        phase += 1
        if phase == thin:
            phase = 0
            out[rows, :kdim] = st
            rows += 1
    state[:] = st
    sums[:] = (s0, s1, s2)
    counters[:] = (acc, rej)
    return rows, phase
