import numpy as np
import pytest

from pshlab.catalog import get_domain, unit_ball
from pshlab.checks import (build_cover, check_segment_property, check_translation_estimate,
                           covering_patch, verify_domain)
from pshlab.errors import CoverDegenerate, NoCoveringPatch
from pshlab.geometry import BoundedDomain, sample_boundary


@pytest.mark.parametrize("name", ["ball", "polydisc", "cone", "hoelder", "loglip"])
def test_verify_domain(name, rng):
    rep = verify_domain(get_domain(name), rng, boundary_samples=2000)
    assert rep["verdict"], rep


@pytest.mark.parametrize("name", ["ball", "cone", "loglip"])
def test_segment_property_holds(name, rng):
    rep = check_segment_property(get_domain(name), boundary_samples=50, rng=rng)
    assert rep["passes"], rep["witnesses"][:3]


def test_hartogs_probe_fails_every_direction(rng):
    rep = check_segment_property(get_domain("hartogs"), rng=rng, directions=64)
    assert rep["mode"] == "probe"
    assert rep["failed_directions"] == 64
    assert not rep["passes"]


def test_translation_upper_bound_is_triangle_inequality(cone, rng):
    patch = cone.atlas[3]
    z = patch.center + 0.01 * rng.standard_normal((10, 2))
    z = z[cone.contains(z) & (np.linalg.norm(z - patch.center, axis=1) < patch.radius / 2)]
    eps = np.logspace(-6, np.log10(0.9 * cone.eps1), 10)
    rep = check_translation_estimate(cone, 3, z, eps)
    assert rep["holds"]
    gainv = rep["delta_moved"] - rep["delta"][:, None]
    assert np.all(gainv <= eps[None, :] + 1e-12)
    assert rep["fitted_constant"] > 0


def test_translation_rejects_far_samples(cone):
    patch = cone.atlas[0]
    far = patch.center + np.array([patch.radius, patch.radius])
    with pytest.raises(ValueError):
        check_translation_estimate(cone, 0, far[None], [1e-3])


def test_covering_patch_outside_atlas(ball):
    with pytest.raises(NoCoveringPatch):
        covering_patch(ball, np.array([0.0, 0.0]))


def test_cover_interior_piece_holds_origin(rng):
    # six balls covering the circle need r > 1/2, so every B(x_j, 4 r_j) reaches 0 too
    six = build_cover(unit_ball(patches=6, radius=0.6), rng, samples=2000)
    assert six.depth_B(0, np.zeros((1, 2)), np.array([1.0]))[0] > 0
    cover = build_cover(unit_ball(), rng, samples=2000)
    assert cover.depth_B(0, np.zeros((1, 2)), np.array([1.0]))[0] > 0
    for j in range(1, cover.size):
        assert cover.depth_B(j, np.zeros((1, 2)), np.array([1.0]))[0] < 0


def test_cover_reaches_every_sample(cone, rng):
    cover = build_cover(cone, rng, samples=10 ** 4)
    pts = sample_boundary(cone, 500, rng)
    best = np.full(len(pts), -np.inf)
    for j in range(cover.size):
        best = np.maximum(best, cover.depth_Bminus(j, pts, np.zeros(len(pts))))
    assert np.all(best > 0)


def test_single_patch_cover_is_degenerate(rng):
    b = unit_ball(patches=16, radius=0.2)
    one = BoundedDomain(name="ball1", dimension=1, atlas=b.atlas[:1], membership=b.membership,
                        diameter=b.diameter, pieces=b.pieces, bbox=b.bbox, regularity=b.regularity)
    with pytest.raises(CoverDegenerate):
        build_cover(one, rng, samples=2000)
