import numpy as np
import pytest

from piecewise_net import geometry as geo
from piecewise_net import problems
from piecewise_net.errors import DegenerateNormalError, GeometryConfigError, OutOfDomainError

MAPS = {
    "five": problems.five_region_map,
    "heart": problems.heart_map,
    "chess": problems.chessboard_map,
    "spheres": problems.spheres_map,
    "pieces5": lambda: geo.IntervalPartition(0.0, 2 * np.pi, 5),
}


@pytest.fixture(params=sorted(MAPS))
def rmap(request):
    return MAPS[request.param]()


def test_chessboard_point_classifies_inside():
    x = np.array([[0.05, 0.05]])
    phi = (np.sin(0.25 * np.pi) - 0.05) * (-np.sin(0.25 * np.pi) - 0.05)
    assert phi < 0
    assert problems.chessboard_map().classify(x)[0] == 1


@pytest.mark.parametrize("ell, center", list(enumerate(problems.SPHERE_CENTERS, start=1)))
def test_sphere_centers_classify_into_their_region(ell, center):
    assert problems.spheres_map().classify(np.array([center]))[0] == ell


def test_interval_partition_classification():
    part = geo.IntervalPartition(0.0, 2 * np.pi, 5)
    assert part.classify(np.array([[np.pi]]))[0] == 2
    # breakpoints belong to the piece on their right
    assert part.classify(part.breaks[:, None]).tolist() == [1, 2, 3, 4]
    assert part.interface_regions(2) == (1, 2)
    assert part.normal_at(2, part.breaks[1:2, None]).tolist() == [[1.0]]


def test_outside_point_rejected():
    with pytest.raises(OutOfDomainError):
        problems.heart_map().classify(np.array([[1.5, 0.0]]))
    with pytest.raises(OutOfDomainError):
        geo.IntervalPartition(0, 1, 3).classify(np.array([[-0.1]]))


def test_on_interface_points_go_to_region_zero():
    rmap = problems.spheres_map()
    x = np.array([problems.SPHERE_CENTERS[0]]) + np.array([[0.4, 0.0, 0.0]])
    assert rmap.on_interface(x)[0]
    assert rmap.classify(x)[0] == 0


def test_one_hot_vectors():
    rmap = problems.five_region_map()
    x = rmap.sample_interior(200, 3)
    oh = rmap.one_hot(x)
    assert oh.shape == (200, 5)
    assert np.all(oh.sum(axis=1) == 1)
    assert np.array_equal(oh.argmax(axis=1), rmap.classify(x))
    assert rmap.one_hot(np.array([[0.0, 0.0]])).tolist() == [[1, 0, 0, 0, 0]]
    heart = problems.heart_map()
    assert heart.one_hot(np.array([[0.0, 0.0]])).tolist() == [[0, 1]]


def test_sphere_normal_is_radial():
    rmap = problems.spheres_map()
    c = np.array(problems.SPHERE_CENTERS[2])
    n = rmap.normal_at(3, (c + [0.4, 0, 0])[None])
    assert np.allclose(n, [[1.0, 0.0, 0.0]], atol=1e-15)


def test_heart_normal_sign_probe():
    heart = problems.heart_map()
    curve = heart.interfaces[0]
    x = curve.point(np.array([np.pi / 2]))
    assert np.allclose(x, [[-0.25, 1.0 / 3.0]])
    n = heart.normal_at(1, x)
    assert abs(np.linalg.norm(n) - 1) < 1e-12
    assert heart.classify(x + 1e-6 * n)[0] == 0
    assert heart.classify(x - 1e-6 * n)[0] == 1


def test_heart_cusp_has_no_normal():
    heart = problems.heart_map()
    cusp = heart.interfaces[0].point(np.array([np.pi]))
    near_cusp = heart.interfaces[0].point(np.array([np.pi - 1e-2]))
    with pytest.raises(DegenerateNormalError):
        heart.normal_at(1, near_cusp)
    s = heart.sample_interface(1, 5000, 0)
    near = np.linalg.norm(s.points - cusp, axis=1) <= 1e-3
    assert np.array_equal(~s.valid, near)
    assert np.all(s.normals[~s.valid] == 0)


def test_interface_samples_lie_on_interface_with_unit_normals(rmap):
    for ell in range(1, rmap.n_interfaces + 1):
        s = rmap.sample_interface(ell, 100, ell)
        assert len(s) == 100
        n = s.normals[s.valid]
        assert np.allclose(np.linalg.norm(n, axis=1), 1.0, atol=1e-12)
        if isinstance(rmap, geo.IntervalPartition):
            assert np.all(s.points == rmap.breaks[ell - 1])
            continue
        assert np.abs(rmap.interfaces[ell - 1].level(s.points)).max() <= 1e-12


def test_interface_probe_consistency(rmap):
    eps = 1e-6
    for ell in range(1, rmap.n_interfaces + 1):
        inner, outer = rmap.interface_regions(ell)
        s = rmap.sample_interface(ell, 200, 10 + ell)
        x, n = s.points[s.valid], s.normals[s.valid]
        assert np.all(rmap.classify(x + eps * n) == outer)
        assert np.all(rmap.classify(x - eps * n) == inner)


def test_level_set_normals_match_finite_differences():
    rmap = problems.chessboard_map()
    itf = rmap.interfaces[0]
    s = rmap.sample_interface(1, 200, 4)
    x = s.points[s.valid]
    h = 1e-6
    g = np.column_stack(
        [(itf.phi(x + h * e) - itf.phi(x - h * e)) / (2 * h) for e in np.eye(2)]
    )
    n_fd = g / np.linalg.norm(g, axis=1, keepdims=True)
    assert np.max(np.linalg.norm(n_fd - s.normals[s.valid], axis=1)) <= 1e-6


def test_samplers_are_deterministic_and_closed(rmap):
    a = rmap.sample_interior(300, 7)
    b = rmap.sample_interior(300, 7)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, rmap.sample_interior(300, 8))
    regions = rmap.classify(a)
    assert regions.min() >= 0 and regions.max() < rmap.n_regions
    assert not rmap.on_interface(a).any()
    xb = rmap.sample_boundary(50, 1)
    assert np.array_equal(xb, rmap.sample_boundary(50, 1))
    assert rmap.contains(xb).all()
    assert rmap.check_disjoint()


def test_boundary_points_on_outer_boundary(rmap):
    xb = rmap.sample_boundary(64, 2)
    assert np.abs(rmap.domain.level(xb)).max() <= 1e-12


def test_heart_point_counts():
    rmap = problems.heart_map()
    assert rmap.sample_interior(324, 0).shape == (324, 2)
    assert rmap.sample_boundary(72, 0).shape == (72, 2)
    assert len(rmap.sample_interface(1, 72, 0)) == 72


def test_bad_counts_rejected():
    rmap = problems.heart_map()
    with pytest.raises(ValueError):
        rmap.sample_interior(0, 0)
    with pytest.raises(ValueError):
        rmap.sample_interface(2, 5, 0)


def test_low_acceptance_raises():
    # a level set with no zero crossing never projects
    never = geo.LevelSet(lambda x: 1.0 + 0 * x[:, 0], lambda x: np.zeros_like(x))
    rmap = geo.RegionMap(geo.Box([-1, -1], [1, 1]), [never])
    with pytest.raises(GeometryConfigError):
        rmap.sample_interface(1, 10, 0)
