import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pshlab.catalog import unit_ball
from pshlab.errors import RegionViolation
from pshlab.geometry import sample_interior
from pshlab.psh import (ScalarField, catalog_field, check_psh, circle_mean, constant_field,
                        everywhere, kernel_second_moment, levi_convergence, levi_form,
                        log_modulus_field, max_field, modulus_of_continuity, mollify,
                        neg_log_distance_field, norm_squared_field, real_part_field, times_i)


def poly_field(fn, n=2, label="poly"):
    def ev(p):
        z = p[:, 0::2] + 1j * p[:, 1::2]
        return fn(z)
    return ScalarField(ev, everywhere, label, n)


coords = st.floats(-2, 2, allow_nan=False)


@settings(max_examples=50, deadline=None)
@given(st.lists(coords, min_size=4, max_size=4), st.lists(coords, min_size=4, max_size=4),
       st.floats(1e-3, 1.0))
def test_circle_mean_norm_squared(c, d, r):
    d = np.array(d)
    if np.linalg.norm(d) < 1e-3:
        d = np.array([1.0, 0, 0, 0])
    d /= np.linalg.norm(d)
    c = np.array(c)
    m = circle_mean(norm_squared_field(2), c, d, r)
    assert m == pytest.approx(c @ c + r * r, abs=1e-13 * (1 + c @ c))


@settings(max_examples=50, deadline=None)
@given(st.lists(coords, min_size=4, max_size=4), st.floats(1e-3, 1.0))
def test_circle_mean_pluriharmonic(c, r):
    c = np.array(c)
    d = np.array([0.6, 0.0, 0.0, 0.8])
    assert circle_mean(real_part_field(2), c, d, r) == pytest.approx(c[0], abs=1e-14)


def test_circle_mean_log_modulus_off_singularity():
    c = np.array([0.5, 0.2])
    assert circle_mean(log_modulus_field(1), c, np.array([1.0, 0.0]), 0.3) == \
        pytest.approx(np.log(np.hypot(0.5, 0.2)), abs=1e-13)


def test_times_i():
    v = np.array([1.0, 2.0, 3.0, 4.0])
    np.testing.assert_array_equal(times_i(v), [-2.0, 1.0, -4.0, 3.0])


def test_check_psh_strict_and_concave(rng):
    pts = rng.uniform(-1, 1, (50, 4))
    good = check_psh(norm_squared_field(2), pts, radii=(1e-3, 1e-2), rng=rng)
    assert good["verdict"]
    assert good["worst_defect"] >= 1e-6 - 1e-12
    neg = ScalarField(lambda p: -np.sum(p * p, axis=1), everywhere, "-|z|^2", 2)
    bad = check_psh(neg, pts, rng=rng)
    assert not bad["verdict"] and bad["witnesses"]


def test_neg_log_distance_on_ball_is_psh(rng):
    b = unit_ball(n=2)
    pts = sample_interior(b, 100, rng) * 0.8
    rep = check_psh(neg_log_distance_field(b), pts, radii=(1e-3, 1e-2), rng=rng)
    assert rep["verdict"], rep["worst_defect"]


def test_max_field_is_psh(rng):
    u = max_field([real_part_field(2, 0), real_part_field(2, 1), constant_field(2, 0.1)])
    pts = rng.uniform(-1, 1, (100, 4))
    assert check_psh(u, pts, radii=(0.05, 0.2), rng=rng)["verdict"]


def test_levi_norm_squared_identity():
    rep = levi_form(norm_squared_field(2), np.array([0.3, -0.1, 0.2, 0.5]), step=1e-3)
    np.testing.assert_allclose(rep.hessian, np.eye(2), atol=1e-8)
    assert rep.min_eigenvalue == pytest.approx(1.0, abs=1e-8)


def test_levi_pluriharmonic_zero():
    u = poly_field(lambda z: (z[:, 0] ** 2).real)
    rep = levi_form(u, np.array([0.4, 0.3, -0.2, 0.1]), step=1e-3)
    np.testing.assert_allclose(rep.hessian, 0, atol=1e-8)


def test_levi_mixed_term():
    # |z1 + 2 z2|^2 has complex Hessian [[1, 2], [2, 4]]
    u = poly_field(lambda z: np.abs(z[:, 0] + 2 * z[:, 1]) ** 2)
    rep = levi_form(u, np.array([0.1, 0.2, 0.3, 0.4]), step=1e-3)
    np.testing.assert_allclose(rep.hessian, [[1, 2], [2, 4]], atol=1e-7)
    assert rep.min_eigenvalue == pytest.approx(0.0, abs=1e-7)


def test_levi_order_on_quartic():
    # the quartic term makes the h^2 truncation error visible
    u = poly_field(lambda z: np.abs(z[:, 0]) ** 2 + np.abs(z[:, 1]) ** 2 + np.abs(z[:, 0]) ** 4)
    p = np.array([0.5, 0.3, 0.2, -0.1])
    z1 = complex(p[0], p[1])
    exact = np.eye(2, dtype=complex)
    exact[0, 0] += 4 * abs(z1) ** 2
    rep = levi_convergence(u, p, exact, steps=(2e-2, 1e-2, 5e-3))
    assert rep["second_order"], rep
    for r in rep["ratios"]:
        assert 4 / 1.5 <= r <= 6


def test_levi_cubic_has_no_truncation_error():
    # central differences are exact on cubics, so only roundoff is left
    u = poly_field(lambda z: np.abs(z[:, 0]) ** 2 + np.abs(z[:, 1]) ** 2 + (z[:, 0] ** 3).real)
    rep = levi_convergence(u, np.array([0.5, 0.3, 0.2, -0.1]), np.eye(2))
    assert max(rep["errors"]) < 1e-9


def test_levi_stencil_outside_region():
    u = ScalarField(lambda p: np.sum(p * p, axis=1), lambda p: np.linalg.norm(p, axis=1) < 1,
                    "|z|^2 on ball", 1)
    with pytest.raises(RegionViolation):
        levi_form(u, np.array([0.999, 0.0]), step=1e-2)


def test_modulus_examples(rng):
    b = unit_ball()
    zero = modulus_of_continuity(constant_field(1, 3.0), b, rng=rng)
    assert np.all(zero.omega == 0)
    re = modulus_of_continuity(real_part_field(1), b, rng=rng)
    r = re.r[(re.r > 1e-6) & (re.r < 1.0)]
    assert np.all(re.omega[(re.r > 1e-6) & (re.r < 1.0)] <= r * (1 + 1e-9))
    assert np.all(re(r) >= 0.95 * r)
    sq = modulus_of_continuity(norm_squared_field(1), b, rng=rng)
    assert np.all(sq.omega <= 2 * sq.r + 1e-9)
    assert np.all(np.diff(sq.omega) >= 0)


def test_modulus_needs_enough_pairs(ball):
    with pytest.raises(ValueError):
        modulus_of_continuity(constant_field(1), ball, pair_samples=10)


def test_catalog_field_moduli(loglip):
    assert catalog_field("re_z1", loglip).modulus(0.1) == pytest.approx(0.1)
    assert catalog_field("const", loglip).modulus(0.1) == 0
    with pytest.raises(ValueError):
        catalog_field("sin", loglip)


def test_mollify_affine_and_quadratic(rng):
    aff = poly_field(lambda z: (0.3 * z[:, 0] - 0.7j * z[:, 1]).real + 2.0)
    pts = rng.uniform(-1, 1, (10, 4))
    np.testing.assert_allclose(mollify(aff, 0.05)(pts), aff(pts), atol=1e-6)
    c = kernel_second_moment(4)
    sq = norm_squared_field(2)
    # self-calibration at the origin, then the same constant elsewhere
    assert mollify(sq, 0.1)(np.zeros((1, 4)))[0] == pytest.approx(c * 0.01, rel=1e-12)
    np.testing.assert_allclose(mollify(sq, 0.1)(pts), sq(pts) + c * 0.01, atol=1e-10)


def test_mollify_shrinks_region():
    u = ScalarField(lambda p: np.sum(p * p, axis=1), lambda p: np.linalg.norm(p, axis=1) < 1,
                    "|z|^2 on ball", 1)
    m = mollify(u, 0.1)
    with pytest.raises(RegionViolation):
        m(np.array([[0.95, 0.0]]))
    assert np.isfinite(m(np.array([[0.5, 0.0]]))).all()


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=4, max_size=4), st.floats(1e-3, 0.5), st.floats(1.01, 3))
def test_circle_means_grow_with_radius(c, r, scale):
    u = max_field([real_part_field(2, 0), norm_squared_field(2), log_modulus_field(2, 1)])
    d = np.array([0.0, 0.6, 0.8, 0.0])
    c = np.array(c)
    assert circle_mean(u, c, d, r) <= circle_mean(u, c, d, r * scale) + 1e-12


def test_mollified_psh_stays_psh(rng):
    u = max_field([real_part_field(2, 0), norm_squared_field(2), constant_field(2, 0.3)])
    m = mollify(u, 0.1)
    pts = rng.uniform(-1, 1, (40, 4))
    assert check_psh(m, pts, radii=(0.05, 0.2), rng=rng)["verdict"]
