import math

import numpy as np
import pytest

from pshlab.catalog import get_domain
from pshlab.errors import (AttainmentViolation, NonSmoothPoint, OmegaRatioViolation,
                           TranslateEscapes)
from pshlab.exhaustion import (ExhaustionConfig, _attainment_report, build_bump,
                               build_exhaustion, bump_levi_bound, check_bounds, check_ray,
                               check_sandwich, check_sup_attainment, exhaustion_psh_check,
                               levi_at, lower_bound, upper_bound, v_eps, v_eps_j)
from pshlab.geometry import sample_interior
from pshlab.psh import ScalarField, everywhere, levi_form


@pytest.fixture(scope="module")
def cone_exhaustion(cone):
    return build_exhaustion(cone, rng=np.random.default_rng(0))


def plateau_point(art, j, depth):
    """Point x_j + t w_j with delta close to ``depth``."""
    x, w = art.centers[j], art.directions[j]
    lo, hi = 0.0, art.radii[j] / 4
    for _ in range(200):
        t = 0.5 * (lo + hi)
        p = x + t * w
        if art.domain.contains(p[None])[0] and art.domain.raw_distance(p[None])[0] >= depth:
            hi = t
        else:
            lo = t
    return x + hi * w


def test_grid_shape_and_validation():
    cfg = ExhaustionConfig()
    g = cfg.eps_grid(0.03)
    assert g[0] == 0.03 and g[-1] == 1e-10
    assert np.all(np.diff(g) < 0)
    with pytest.raises(ValueError):
        ExhaustionConfig(grid_floor=0.5).eps_grid(0.03)
    with pytest.raises(ValueError):
        ExhaustionConfig(rho=1.0).eps_grid(0.03)


def test_eps0_stays_inside_gain_interval(loglip_exhaustion):
    art = loglip_exhaustion
    assert 0 < art.eps0 < art.domain.eps1
    assert art.eps0 == pytest.approx(art.domain.eps_w / 2, rel=1e-12)


def test_bump_plateau_and_support(loglip_exhaustion):
    art = loglip_exhaustion
    j, eps = 5, 1e-4
    psi, lam = build_bump(art, j, eps)
    L = art.gain.log_ratio(eps)
    r = art.radii[j]
    u = np.array([0.6, 0.8])
    inside = art.centers[j] + np.outer([0.0, 0.1, 0.3], r * u)
    outside = art.centers[j] + np.outer([0.51, 0.7, 2.0], r * u)
    assert np.all(psi(inside) == L)
    assert np.all(psi(outside) == 0.0)
    assert lam == pytest.approx(art.lambda_constant * L)


def test_lipschitz_plateau_is_log_C(cone_exhaustion):
    art = cone_exhaustion
    C = art.gain.C
    for eps in (1e-8, 1e-5, 1e-3):
        psi, _ = build_bump(art, 0, eps)
        assert psi(art.centers[0][None])[0] == pytest.approx(math.log(C), rel=1e-14)


def test_bump_levi_bound_against_finite_differences(loglip_exhaustion, rng):
    art = loglip_exhaustion
    j, eps = 3, 1e-5
    psi, lam = build_bump(art, j, eps)
    L = art.gain.log_ratio(eps)
    r = art.radii[j]
    K = bump_levi_bound(r)
    ang = rng.uniform(0, 2 * np.pi, 200)
    rad = rng.uniform(r / 3, r / 2, 200)
    worst = np.inf
    for a, s in zip(ang, rad):
        p = art.centers[j] + s * np.array([math.cos(a), math.sin(a)])
        worst = min(worst, levi_form(psi, p, step=1e-5).min_eigenvalue)
    assert worst >= -K * L * (1 + 1e-3)
    # the bound is not wildly loose either
    assert worst <= -0.05 * K * L


def test_v_eps_j_sandwich_and_limit(cone_exhaustion, rng):
    art = cone_exhaustion
    j = 4
    c, r = art.centers[j], art.radii[j]
    z = c + r / 2 * rng.uniform(-0.7, 0.7, (200, 2))
    z = z[art.domain.contains(z)]
    delta = art.domain.raw_distance(z)
    for eps in (1e-6, 1e-4, 1e-2):
        v = v_eps_j(art, j, eps)(z)
        assert np.all(v >= np.log(1 / (delta + eps)) - 1e-12)
        assert np.all(v <= np.log(1 / delta) + 1e-12)
    v = v_eps_j(art, j, 1e-12)(z)
    np.testing.assert_allclose(v, np.log(1 / delta), atol=1e-9 / delta.min())


def test_v_eps_j_region_and_range(cone_exhaustion):
    art = cone_exhaustion
    with pytest.raises(ValueError):
        v_eps_j(art, 0, 2 * art.eps0)
    u = v_eps_j(art, 0, 1e-3)
    far = art.centers[0] + np.array([art.radii[0], 0.0])
    assert not u.region(far[None])[0]


def test_translate_escapes(loglip_exhaustion):
    art = loglip_exhaustion
    p = art.centers[:1] + 1e-3 * art.directions[:1]
    with pytest.raises(TranslateEscapes):
        art.translated_log(p, np.array([0]), np.array([[-0.01]]))


def test_fallback_far_from_patches(loglip_exhaustion):
    art = loglip_exhaustion
    z = art.anchor[None]
    assert len(art.pairs(z)[0]) == 0
    eps = 1e-4
    v = v_eps(art, eps, check_gamma=False)(z)[0]
    assert v == pytest.approx(-art.lam(eps), rel=1e-14)


def test_v_eps_gamma_check_passes_at_calibrated_gamma(loglip_exhaustion):
    art = loglip_exhaustion
    v_eps(art, 1e-3)
    assert art.gamma >= art.stats["gamma_required"]


def test_patched_branch_direction(loglip):
    # with a small bump constant a patched candidate wins deep in a plateau
    # (neighbouring plateaus overlap, so any patch may be the winner); raising
    # gamma a hundredfold hands the point back to the fallback
    art = build_exhaustion(loglip, ExhaustionConfig(lambda_constant=1.1),
                           rng=np.random.default_rng(0))
    j = len(art.centers) // 2
    z = plateau_point(art, j, 1e-12)[None]
    eps = np.array([[1e-12]])
    _, br = art.v_family(z, eps)
    assert br[0, 0] >= 0
    assert np.linalg.norm(z[0] - art.centers[br[0, 0]]) < art.radii[j] / 3
    _, br = art.v_family(z, eps, gamma=100 * art.gamma)
    assert br[0, 0] == -1


def test_default_constants_leave_fallback_everywhere(loglip_exhaustion, rng):
    # the bump constant forces lam far above log(1/delta) for every reachable delta
    art = loglip_exhaustion
    pts = sample_interior(art.domain, 500, rng)
    E, W, B, _ = art.trace(pts)
    assert np.all(B == -1)


def test_sandwich_constants(loglip_exhaustion, rng):
    art = loglip_exhaustion
    pts = sample_interior(art.domain, 300, rng)
    rep = check_sandwich(art, pts)
    assert np.isfinite(rep["C1_hat"]) and np.isfinite(rep["C2_hat"])
    assert rep["C1_hat"] >= rep["C2_hat"]


def test_negativity_and_bounds(loglip_exhaustion, rng):
    art = loglip_exhaustion
    pts = sample_interior(art.domain, 2000, rng)
    rep = check_bounds(art, pts)
    assert rep["negative"]
    assert rep["C1"] > 0
    assert rep["lower_ok"]
    assert rep["gain_increasing"] and rep["upper_ok"]
    assert len(art.bound_records) == len(pts)


def test_upper_bound_is_negative(loglip_exhaustion):
    art = loglip_exhaustion
    d = np.logspace(-12, math.log10(art.eps0) - 1e-6, 50)
    assert np.all(upper_bound(art, d) < 0)
    assert np.isnan(upper_bound(art, np.array([art.eps0]))[0])
    assert np.isnan(lower_bound(art, np.array([2 * art.eps0]), 1.0)[0])


def test_w_vanishes_outside(loglip_exhaustion):
    art = loglip_exhaustion
    assert art.evaluate(np.array([[5.0, 5.0]]))[0] == 0.0


def test_nested_grid_refinement_never_lowers_w(loglip, rng):
    coarse = build_exhaustion(loglip, ExhaustionConfig(rho=0.81), rng=np.random.default_rng(0))
    fine = build_exhaustion(loglip, ExhaustionConfig(rho=0.9), rng=np.random.default_rng(0))
    assert set(np.round(np.log(coarse.grid[:-1]), 9)) <= set(np.round(np.log(fine.grid), 9))
    pts = sample_interior(loglip, 200, rng)
    assert np.all(fine.evaluate(pts) >= coarse.evaluate(pts) - 1e-12)


def test_grid_refinement_stability(loglip, loglip_exhaustion, rng):
    fine = build_exhaustion(loglip, ExhaustionConfig(rho=0.95), rng=np.random.default_rng(0))
    pts = sample_interior(loglip, 200, rng)
    assert np.max(np.abs(fine.evaluate(pts) - loglip_exhaustion.evaluate(pts))) <= 1e-3


def test_upper_bound_member_monotone_in_eps(loglip_exhaustion):
    art = loglip_exhaustion
    eps = art.grid[::-1]
    f = art.gain(eps)
    for delta in (1e-8, 1e-4, 1e-2):
        assert np.all(np.diff(np.log(f / (delta + f))) >= 0)


def test_ray_is_monotone(loglip_exhaustion):
    rep = check_ray(loglip_exhaustion, C1=1.0)
    np.testing.assert_allclose(rep["delta"], 2.0 ** -np.arange(3, 21), rtol=1e-9)
    assert rep["increasing"]


def test_psh_of_w(loglip_exhaustion, rng):
    assert exhaustion_psh_check(loglip_exhaustion, m=100, rng=rng)["verdict"]


def test_attainment_report_logic(loglip_exhaustion):
    art = loglip_exhaustion
    E = np.array([0.03, 0.01, 1e-3, 1e-4])
    W = np.array([-0.5, -0.2, -0.3, -0.4])
    rep = _attainment_report(art, E, W, np.full(4, -1), 1e-3, c_hat=1.0)
    assert rep["attained_at"] == 0.01 and rep["lower_fraction"] == pytest.approx(10.0)
    with pytest.raises(AttainmentViolation) as exc:
        _attainment_report(art, E, W, np.full(4, -1), 1e-3, c_hat=20.0)
    assert len(exc.value.trace) == 4


def test_floor_hit_is_a_violation(loglip_exhaustion):
    art = loglip_exhaustion
    z = plateau_point(art, 3, 1e-3)
    with pytest.raises(AttainmentViolation) as exc:
        check_sup_attainment(art, z, 0.1)
    assert exc.value.trace[0][0] == art.grid[-1]


def test_levi_fallback_identity(loglip_exhaustion):
    art = loglip_exhaustion
    eps = 1e-3
    u = v_eps(art, eps, check_gamma=False)
    rep = levi_form(u, art.anchor, step=1e-3)
    assert rep.min_eigenvalue == pytest.approx(1.0, abs=1e-6)
    rep = levi_at(art, art.anchor, eps, 1e-3)
    assert rep.min_eigenvalue == pytest.approx(1 / math.log(1 / eps), rel=1e-5)


def test_levi_large_step_is_nonsmooth(loglip_exhaustion):
    art = loglip_exhaustion
    z = plateau_point(art, 3, 1e-3)
    with pytest.raises(NonSmoothPoint):
        levi_at(art, z, 1e-3, h=1e-2)


def test_omega_violation_on_hoelder_unit_constant():
    # with C = 1 the Hoelder omega is constant in eps, so it cannot decay
    with pytest.raises(OmegaRatioViolation):
        build_exhaustion(get_domain("hoelder"), rng=np.random.default_rng(0))
