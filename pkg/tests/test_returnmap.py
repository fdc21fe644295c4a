import numpy as np
import pytest

from boundary2d import EllipseSupportCurve, FourierSupportCurve
from returnmap import PlanarReturnMap, SphereReturnMap
from sphere3d import SphericalHarmonicField, fibonacci_sphere, from_spherical
from thickness import FourierThickness, SphericalHarmonicThickness


def test_concentric_circles_return_map_is_identity(concentric_planar_system) -> None:
    samples = concentric_planar_system.sample(360)

    moved = max(concentric_planar_system.displacement(c) for c in samples)

    assert moved <= 1e-9
    for c in samples[::36]:
        assert concentric_planar_system.return_jacobian(c).matrix[0, 0] == pytest.approx(1.0, abs=1e-7)


def test_concentric_spheres_return_map_is_identity(concentric_sphere_system) -> None:
    samples = concentric_sphere_system.sample(500)

    moved = max(concentric_sphere_system.displacement(c) for c in samples)

    assert moved <= 1e-7
    for c in samples[::50]:
        np.testing.assert_allclose(concentric_sphere_system.return_jacobian(c).matrix, np.eye(2), atol=1e-7)


def test_sphere_inward_normal_of_concentric_sphere(concentric_sphere_system) -> None:
    normal = concentric_sphere_system.inward_normal_outer(np.array([0.0, 0.0, 2.0]))

    np.testing.assert_allclose(normal, [0.0, 0.0, -1.0], atol=1e-15)
    np.testing.assert_allclose(concentric_sphere_system.radial_map(np.array([0.0, 1.0, 0.0])), [0.0, 2.0, 0.0])


def test_circle_in_ellipse_axes_are_fixed(circle_in_ellipse_system) -> None:
    for theta in (0.0, 0.5 * np.pi, -0.5 * np.pi):
        assert circle_in_ellipse_system.displacement(theta) <= 1e-10


def test_circle_in_ellipse_return_jacobian_at_axes(circle_in_ellipse_system) -> None:
    # DF = 1 + d d'' / (1 + d) for a radial graph over the unit circle.
    at_major = circle_in_ellipse_system.return_jacobian(0.0).matrix[0, 0]
    at_minor = circle_in_ellipse_system.return_jacobian(0.5 * np.pi).matrix[0, 0]

    assert at_major == pytest.approx(1.0 - 14.0 / 18.0, abs=1e-5)
    assert at_minor == pytest.approx(1.21875, abs=1e-5)


def test_return_map_moves_off_axis_points_toward_major_axis(circle_in_ellipse_system) -> None:
    image = circle_in_ellipse_system.return_map(0.25 * np.pi)

    assert 0.0 < image < 0.25 * np.pi


def test_planar_radial_differential_matches_finite_differences(circle_in_ellipse_system) -> None:
    core = EllipseSupportCurve(2.0, 1.5)
    system = PlanarReturnMap(core, FourierThickness(core, ((0.5, 0.0), (0.0, 0.0), (0.1, 0.05))))
    for target in (system, circle_in_ellipse_system):
        for theta in (-2.0, 0.7, 2.5):
            exact = target.radial_differential(theta, np.array([1.0]))
            approx = target.radial_differential_fd(theta, np.array([1.0]))
            np.testing.assert_allclose(approx, exact, atol=1e-6)


def test_sphere_radial_differential_matches_finite_differences(mixed_sphere_field) -> None:
    system = SphereReturnMap(SphericalHarmonicThickness(mixed_sphere_field))
    point = from_spherical(1.1, 0.4)
    for v in np.eye(2):
        np.testing.assert_allclose(system.radial_differential_fd(point, v), system.radial_differential(point, v), atol=1e-6)


def test_range_residual_is_at_rounding_level(circle_in_ellipse_system, mixed_sphere_field) -> None:
    for theta in circle_in_ellipse_system.sample(16):
        assert circle_in_ellipse_system.range_residual(theta) <= 1e-12

    sphere = SphereReturnMap(SphericalHarmonicThickness(mixed_sphere_field))
    for point in fibonacci_sphere(16):
        assert sphere.range_residual(point) <= 1e-12


def test_noncircular_core_uses_ray_cast_reciprocal() -> None:
    core = EllipseSupportCurve(2.0, 1.5)
    system = PlanarReturnMap(core, FourierThickness(core, ((0.5, 0.0),)))
    # Constant thickness over any convex core gives a parallel curve: F is the identity.
    for theta in system.sample(24):
        assert system.displacement(theta) <= 1e-9


def test_chart_exp_log_round_trip(circle_in_ellipse_system, mixed_sphere_field) -> None:
    assert circle_in_ellipse_system.log(0.3, circle_in_ellipse_system.exp(0.3, np.array([0.05])))[0] == pytest.approx(0.05)

    sphere = SphereReturnMap(SphericalHarmonicThickness(mixed_sphere_field))
    c = from_spherical(0.9, -0.3)
    np.testing.assert_allclose(sphere.log(c, sphere.exp(c, np.array([0.02, -0.01]))), [0.02, -0.01], atol=1e-12)


def test_sample_sizes_and_params(concentric_planar_system, concentric_sphere_system) -> None:
    planar = concentric_planar_system.sample(8)

    assert len(planar) == 8
    assert all(-np.pi <= t < np.pi for t in planar)
    assert concentric_planar_system.params(0.5) == (0.5,)
    assert len(concentric_sphere_system.sample(10)) == 10
    assert concentric_sphere_system.params(np.array([0.0, 0.0, 1.0]))[0] == 0.0
    assert FourierSupportCurve.circle().is_circle


def _turn(a: float, b: float) -> float:
    return float(np.angle(np.exp(1j * (a - b))))


def test_circle_in_ellipse_return_map_respects_axis_reflections(circle_in_ellipse_system) -> None:
    for theta in np.random.default_rng(17).uniform(-np.pi, np.pi, 20):
        image = circle_in_ellipse_system.return_map(theta)

        assert _turn(circle_in_ellipse_system.return_map(-theta), -image) == pytest.approx(0.0, abs=1e-9)
        assert _turn(circle_in_ellipse_system.return_map(np.pi - theta), np.pi - image) == pytest.approx(0.0, abs=1e-9)


def test_sphere_return_map_commutes_with_field_symmetries(mixed_sphere_field) -> None:
    system = SphereReturnMap(SphericalHarmonicThickness(mixed_sphere_field))
    symmetries = [np.diag([1.0, -1.0, 1.0]), np.diag([1.0, 1.0, -1.0]), np.diag([-1.0, -1.0, 1.0])]
    points = np.random.default_rng(29).normal(size=(20, 3))
    for c in points / np.linalg.norm(points, axis=1, keepdims=True):
        image = system.return_map(c)
        for s in symmetries:
            np.testing.assert_allclose(system.return_map(s @ c), s @ image, atol=1e-9)


def test_zonal_sphere_return_map_commutes_with_rotations_about_the_axis() -> None:
    field = SphericalHarmonicField(((0, 0, 1.0), (2, 0, 0.2)), normalization="unnormalized")
    system = SphereReturnMap(SphericalHarmonicThickness(field))
    for k, c in enumerate(fibonacci_sphere(12)):
        angle = 0.4 + 0.5 * k
        rotation = np.array([[np.cos(angle), -np.sin(angle), 0.0], [np.sin(angle), np.cos(angle), 0.0], [0.0, 0.0, 1.0]])

        np.testing.assert_allclose(system.return_map(rotation @ c), rotation @ system.return_map(c), atol=1e-9)
