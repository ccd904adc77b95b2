import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pshlab.errors import DomainError
from pshlab.special import (GainFunction, cusp_graph, cusp_profile, gain, gain_table,
                            lambert_w, omega_ratio)

INV_E = math.exp(-1.0)


def bisect_lower(x, lo=-10.0, hi=-1.0, tol=1e-13):
    # w e^w is decreasing on (-inf, -1], so bisect on the sign of w e^w - x
    g = lambda w: w * math.exp(w) - x
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def test_principal_simple_values():
    assert lambert_w(0, 0.0) == 0.0
    assert lambert_w(0, math.e) == pytest.approx(1.0, abs=1e-15)


def test_branch_point_both_branches():
    assert lambert_w(0, -INV_E) == pytest.approx(-1.0, abs=1e-8)
    assert lambert_w(-1, -INV_E) == pytest.approx(-1.0, abs=1e-8)


def test_lower_branch_matches_bisection():
    ref = bisect_lower(-0.1)
    assert abs(lambert_w(-1, -0.1) - ref) <= 1e-12
    assert ref < -1


def test_domain_errors():
    with pytest.raises(DomainError):
        lambert_w(0, -0.5)
    with pytest.raises(DomainError):
        lambert_w(-1, 0.0)
    with pytest.raises(DomainError):
        lambert_w(-1, 0.5)
    with pytest.raises(DomainError):
        lambert_w(2, 1.0)
    with pytest.raises(DomainError):
        lambert_w(0, float("nan"))


def test_shape_is_preserved():
    x = np.linspace(0.1, 3.0, 12).reshape(3, 4)
    w = lambert_w(0, x)
    assert w.shape == (3, 4)
    np.testing.assert_allclose(w * np.exp(w), x, rtol=1e-14)
    assert isinstance(lambert_w(0, 1.0), float)


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=-300, max_value=300))
def test_principal_round_trip(logx):
    x = 10.0 ** logx
    w = lambert_w(0, x)
    assert w >= -1
    err = abs(w * math.exp(w) - x)
    assert err <= 1e-12 * max(1.0, abs(x))


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=1e-300, max_value=1.0))
def test_lower_round_trip(frac):
    x = -INV_E * frac
    w = lambert_w(-1, x)
    assert w <= -1
    assert abs(w * math.exp(w) - x) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(st.floats(min_value=-0.36, max_value=50.0), st.floats(min_value=1e-3, max_value=1.0))
def test_principal_is_increasing(x, dx):
    assert lambert_w(0, x + dx) > lambert_w(0, x)


def test_gain_examples():
    f = GainFunction("loglip", C=1.0, C_tilde=1.0, eps1=0.99)
    assert gain(f, INV_E) == pytest.approx(INV_E, abs=1e-8)
    assert gain(GainFunction("lipschitz", C=2.0, eps1=0.5), 0.1) == pytest.approx(0.05)


def test_gain_rejects_eps_outside_interval():
    f = GainFunction("loglip", eps1=0.1)
    for bad in (0.0, -1e-3, 0.1, 0.2):
        with pytest.raises(DomainError):
            f(bad)


def test_omega_examples():
    f = GainFunction("loglip_simplified", C_tilde=1.0, eps1=0.5)
    eps = math.exp(-math.e)
    assert omega_ratio(f, eps) == pytest.approx(INV_E, rel=1e-14)
    lip = GainFunction("lipschitz", C=2.0, eps1=0.5)
    e = np.logspace(-2, -12, 11)
    np.testing.assert_allclose(omega_ratio(lip, e), math.log(2.0) / np.log(1 / e), rtol=1e-14)


def test_loglip_omega_decays():
    f = GainFunction("loglip", C=1.0, C_tilde=1.0, eps1=0.1)
    om = omega_ratio(f, 10.0 ** -np.arange(2, 11))
    assert np.all(om > 0)
    assert np.all(np.diff(om) < 0)
    assert om[-1] < 0.25


def test_log_ratio_matches_direct_quotient():
    for form, kw in [("lipschitz", {"C": 3.0}), ("hoelder", {"C": 2.0, "exponent": 0.5}),
                     ("loglip", {"C": 1.0, "C_tilde": 1.5}), ("loglip_simplified", {"C_tilde": 2.0})]:
        f = GainFunction(form, eps1=0.09, **kw)
        e = np.logspace(-8, -1.1, 30)
        np.testing.assert_allclose(f.log_ratio(e), np.log(e / f(e)), rtol=1e-12, atol=1e-13)


@pytest.mark.parametrize("form,kw", [("lipschitz", {"C": 3.0}),
                                     ("hoelder", {"C": 2.0, "exponent": 0.5}),
                                     ("loglip", {"C": 1.0, "C_tilde": 1.0}),
                                     ("loglip_simplified", {"C_tilde": 2.0})])
def test_derivative_against_central_difference(form, kw):
    f = GainFunction(form, eps1=0.09, **kw)
    e = np.logspace(-6, -1.3, 15)
    h = 1e-4 * e
    fd = (f(e + h) - f(e - h)) / (2 * h)
    np.testing.assert_allclose(f.derivative(e), fd, rtol=1e-6)


def test_scaled_gain():
    for f in (GainFunction("lipschitz", C=2.0, eps1=0.1),
              GainFunction("hoelder", C=1.5, exponent=0.5, eps1=0.1),
              GainFunction("loglip", C=1.0, C_tilde=2.0, eps1=0.1)):
        e = np.logspace(-6, -1.5, 8)
        np.testing.assert_allclose(f.scaled(0.3)(e), 0.3 * f(e), rtol=1e-12)


def test_gain_table_columns():
    f = GainFunction("loglip", eps1=0.1)
    e = np.logspace(-10, -2, 5)
    t = gain_table(f, e)
    assert t.shape == (5, 3)
    np.testing.assert_array_equal(t[:, 0], e)


def test_cusp_profile_values():
    assert cusp_profile(1e-8) == pytest.approx(1.0, abs=1e-6)
    assert cusp_profile(0.0) == 1.0
    assert cusp_profile(INV_E) == pytest.approx(1 + INV_E, abs=1e-15)
    x = np.linspace(-0.5, 0.5, 101)
    np.testing.assert_array_equal(cusp_profile(x), cusp_profile(-x))


def test_cusp_graph_loglip_modulus(rng):
    # pairwise sampling in B(0, 1/10): |g(x) - g(y)| / (r log 1/r) stays bounded
    x = rng.uniform(-0.1, 0.1, 10 ** 4)
    y = np.clip(x + rng.standard_normal(x.size) * 10.0 ** rng.uniform(-8, -2, x.size), -0.1, 0.1)
    r = np.abs(x - y)
    ok = r > 0
    ratio = np.abs(cusp_graph(x[ok]) - cusp_graph(y[ok])) / (r[ok] * np.log(1 / r[ok]))
    assert np.isfinite(ratio).all()
    assert ratio.max() < 3.0


def test_loglip_derivative_identity(rng):
    # the closed form -1/(C~ (1 + W_-1(-eps/C))) against central differences on (0, C/e)
    f = GainFunction("loglip", C=1.0, C_tilde=1.0, eps1=0.99)
    e = np.sort(10.0 ** rng.uniform(-8, np.log10(0.3), 100))
    h = 1e-5 * e
    fd = (f(e + h) - f(e - h)) / (2 * h)
    d = f.derivative(e)
    assert np.all(d > 0)
    np.testing.assert_allclose(d, fd, rtol=1e-6)
