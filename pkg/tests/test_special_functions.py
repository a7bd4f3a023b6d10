import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bose_ldp.errors import DivergenceError, DomainError, SingularityError
from bose_ldp.special_functions import (
    Branch,
    bose_g,
    bose_tail,
    lambert_w,
    lambert_w_prime,
    riemann_zeta,
)
from oracles import bose_direct, lambert_w_ref, polylog_ref

INV_E = math.exp(-1.0)


# ---------------------------------------------------------------------------
# Lambert W

@settings(max_examples=300, deadline=None)
@given(st.floats(-1.0, 20.0))
def test_principal_roundtrip(x):
    x = max(x, -INV_E)
    w = lambert_w(0, x)
    assert abs(w * math.exp(w) - x) <= 1e-11 * max(1.0, abs(x))


@settings(max_examples=300, deadline=None)
@given(st.floats(-20.0, -1.0))
def test_lower_branch_roundtrip(w):
    # Image of [-20, -1] under w e^w; the check is in x since w is ill-conditioned near -1/e.
    x = max(w * math.exp(w), -INV_E)
    v = lambert_w(-1, x)
    assert v <= -1.0
    assert abs(v * math.exp(v) - x) <= 1e-10 * abs(x)


@settings(max_examples=300, deadline=None)
@given(st.floats(-INV_E, 0.0, exclude_min=True, exclude_max=True))
def test_branch_ordering(x):
    assert lambert_w(-1, x) <= -1.0 <= lambert_w(0, x)


@pytest.mark.parametrize("x", [-0.3678, -0.3, -0.2, -0.05, -1e-8, 1e-12, 0.5, 1.0, math.e, 10.0, 1e3, 1e10])
def test_principal_matches_reference(x):
    assert lambert_w(0, x) == pytest.approx(lambert_w_ref(0, x), rel=1e-14, abs=1e-300)


@pytest.mark.parametrize("x", [-0.3678, -0.3, -0.2, -0.05, -1e-4, -1e-12, -1e-200])
def test_lower_matches_reference(x):
    assert lambert_w(-1, x) == pytest.approx(lambert_w_ref(-1, x), rel=1e-14)


def test_known_values():
    assert lambert_w(0, 0.0) == 0.0
    assert lambert_w(0, -INV_E) == pytest.approx(-1.0, abs=1e-7)
    assert lambert_w(-1, -INV_E) == pytest.approx(-1.0, abs=1e-7)
    assert lambert_w("lower", -0.2) == pytest.approx(-2.5426413577735265, rel=1e-13)
    assert lambert_w(0, math.e) == pytest.approx(1.0, rel=1e-15)
    assert lambert_w(Branch.PRINCIPAL, 1.0) == pytest.approx(0.5671432904097838, rel=1e-15)


def test_near_branch_point():
    for eps in (1e-16, 1e-13, 1e-10, 1e-6):
        x = -INV_E + eps
        for b in (0, -1):
            w = lambert_w(b, x)
            assert abs(w * math.exp(w) - x) <= 1e-15
            assert w == pytest.approx(float(mpmath.lambertw(mpmath.mpf(x), b).real), abs=1e-7)


def test_derivative_values():
    assert lambert_w_prime(0, 0.0) == 1.0
    assert lambert_w_prime(0, math.e) == pytest.approx(1.0 / (2.0 * math.e), rel=1e-14)
    assert lambert_w_prime(0, 1.0) == pytest.approx(0.36189, abs=1e-5)


@pytest.mark.parametrize("branch,x", [(0, -0.3), (0, -0.1), (0, 0.7), (0, 5.0), (0, 100.0),
                                      (-1, -0.3), (-1, -0.1), (-1, -1e-3)])
def test_derivative_matches_finite_differences(branch, x):
    h = 1e-6 * max(1.0, abs(x))
    fd = (lambert_w(branch, x + h) - lambert_w(branch, x - h)) / (2.0 * h)
    assert lambert_w_prime(branch, x) == pytest.approx(fd, rel=1e-6)


def test_domain_errors():
    with pytest.raises(DomainError):
        lambert_w(0, -0.5)
    with pytest.raises(DomainError):
        lambert_w(-1, 0.0)
    with pytest.raises(DomainError):
        lambert_w(-1, 1.0)
    with pytest.raises(DomainError):
        lambert_w(0, math.nan)
    with pytest.raises(SingularityError):
        lambert_w_prime(0, -INV_E)
    with pytest.raises(ValueError):
        Branch.parse("sideways")


def test_branch_parse_aliases():
    assert Branch.parse("principal") is Branch.PRINCIPAL
    assert Branch.parse(-1) is Branch.LOWER
    assert Branch.parse(Branch.LOWER) is Branch.LOWER


# ---------------------------------------------------------------------------
# zeta and Bose functions

@pytest.mark.parametrize("n", [0.5, 1.5, 2.5, 3.5])
@pytest.mark.parametrize("t", [0.01, 0.1, 1.0, 10.0])
def test_bose_g_matches_direct_series(n, t):
    assert bose_g(n, t) == pytest.approx(bose_direct(n, t), rel=1e-10)


def test_bose_g_known_values():
    assert bose_g(2.5, 1.0) == pytest.approx(0.39573, abs=5e-6)
    assert bose_g(1.5, 0.0) == pytest.approx(riemann_zeta(1.5), rel=1e-15)
    assert bose_g(3.0, 50.0) == pytest.approx(math.exp(-50.0) * (1 + math.exp(-50.0) / 8), rel=1e-14)


@pytest.mark.parametrize("n", [2.0, 1.0 + 1e-9, 2.0 - 1e-8, 3.0, 0.0, -1.0, -2.5])
@pytest.mark.parametrize("t", [1e-4, 0.3, 0.5, 2.0])
def test_bose_g_matches_polylog(n, t):
    assert bose_g(n, t) == pytest.approx(polylog_ref(n, t), rel=1e-11)


def test_bose_g_domain():
    with pytest.raises(DomainError):
        bose_g(2.5, -0.1)
    with pytest.raises(DivergenceError):
        bose_g(1.0, 0.0)
    with pytest.raises(DivergenceError):
        bose_g(0.5, 0.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(-3.0, 5.0), st.floats(1e-3, 30.0), st.floats(1.01, 2.0))
def test_bose_g_positive_and_decreasing_in_t(n, t, factor):
    g1, g2 = bose_g(n, t), bose_g(n, t * factor)
    assert g1 > 0.0 and g2 > 0.0
    assert g2 < g1


@pytest.mark.parametrize("n,t,k0", [(2.5, 0.0, 10), (1.5, 0.0, 1000), (1.5, 1e-3, 100),
                                    (2.5, 0.5, 7), (0.5, 1e-5, 10 ** 4), (2.5, 1.0, 800)])
def test_bose_tail_matches_difference(n, t, k0):
    k = np.arange(1, k0 + 1, dtype=float)
    head = math.fsum(np.exp(-t * k - n * np.log(k)))
    full = float(mpmath.zeta(n)) if t == 0.0 else polylog_ref(n, t)
    tail = bose_tail(n, t, k0)
    assert tail == pytest.approx(full - head, rel=1e-8, abs=1e-15 * full)


def test_bose_tail_divergence():
    with pytest.raises(DivergenceError):
        bose_tail(1.0, 0.0, 5)


def test_riemann_zeta_values():
    assert riemann_zeta(2.0) == pytest.approx(math.pi ** 2 / 6.0, rel=1e-15)
    assert riemann_zeta(1.5) == pytest.approx(2.6123753486854883, rel=1e-14)
    assert riemann_zeta(2.5) == pytest.approx(1.3414872572509171, rel=1e-14)
    with pytest.raises(DomainError):
        riemann_zeta(1.0)
    with pytest.raises(DomainError):
        riemann_zeta(0.5)
