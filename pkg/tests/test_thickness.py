import numpy as np
import pytest

from boundary2d import EllipseCurve, EllipseSupportCurve, FourierSupportCurve
from errors import OCViolationError
from returnmap import PlanarReturnMap, SphereReturnMap
from sphere3d import SphericalHarmonicField
from thickness import (
    FourierThickness,
    RayCastThickness,
    SphericalHarmonicThickness,
    admissibility_audit,
    thickness_jet,
)


def _planar(core, coefficients) -> PlanarReturnMap:
    return PlanarReturnMap(core, FourierThickness(core, coefficients))


def test_fourier_jet_on_unit_circle() -> None:
    field = FourierThickness(FourierSupportCurve.circle(), ((1.0, 0.0), (0.0, 0.0), (0.1, 0.0)))

    jet = thickness_jet(field, 0.0)

    assert jet.value == pytest.approx(1.1)
    assert jet.gradient[0] == pytest.approx(0.0, abs=1e-15)
    assert jet.hessian[0, 0] == pytest.approx(-0.4)
    assert field.value(0.5 * np.pi) == pytest.approx(0.9)


def test_fourier_jet_is_arclength_on_ellipse_core() -> None:
    core = EllipseSupportCurve(2.0, 1.5)
    field = FourierThickness(core, ((0.5, 0.0), (0.0, 0.0), (0.1, 0.05)))
    for theta in np.random.default_rng(5).uniform(-np.pi, np.pi, 200):
        exact = field.jet(theta)
        approx = field.fd_jet(theta)

        assert approx.value == pytest.approx(exact.value, abs=1e-14)
        np.testing.assert_allclose(approx.gradient, exact.gradient, atol=1e-9)
        np.testing.assert_allclose(approx.hessian, exact.hessian, atol=1e-6)

    # d_s = d_theta / (h + h'') at theta = pi/2, where h + h'' = a^2 / b.
    d_theta = field.theta_slope(0.5 * np.pi)
    assert field.jet(0.5 * np.pi).gradient[0] == pytest.approx(d_theta / (4.0 / 1.5))


def test_constant_fourier_thickness() -> None:
    core = FourierSupportCurve.circle()

    assert FourierThickness(core, ((1.0, 0.0),)).is_constant
    assert not FourierThickness(core, ((1.0, 0.0), (0.0, 0.1))).is_constant
    assert FourierThickness(core, ((1.0, 0.0),)).to_json() == {"fourier": [[1.0, 0.0]]}


def test_ray_cast_thickness_circle_in_ellipse() -> None:
    core = FourierSupportCurve.circle()
    field = RayCastThickness(core, EllipseCurve(2.0, 1.5))

    assert field.value(0.0) == pytest.approx(1.0, abs=1e-12)
    assert field.value(0.5 * np.pi) == pytest.approx(0.5, abs=1e-12)
    np.testing.assert_allclose(field.value(np.array([0.0, np.pi])), [1.0, 1.0], atol=1e-12)

    d, d1, d2 = field.theta_derivatives(0.0)
    assert d1 == pytest.approx(0.0, abs=1e-9)
    assert d2 == pytest.approx(-14.0 / 9.0, abs=1e-6)

    _, _, d2 = field.theta_derivatives(0.5 * np.pi)
    assert d2 == pytest.approx(0.65625, abs=1e-6)
    assert not field.is_constant
    assert field.to_json() == {"outer": {"ellipse": {"a": 2.0, "b": 1.5}}}


def test_ray_cast_outer_inside_core_violates_normal_condition() -> None:
    field = RayCastThickness(FourierSupportCurve.circle(), EllipseCurve(0.5, 0.5))

    with pytest.raises(OCViolationError) as excinfo:
        field.value(0.0)

    np.testing.assert_allclose(excinfo.value.point, [1.0, 0.0])
    np.testing.assert_allclose(excinfo.value.normal, [1.0, 0.0])


def test_spherical_harmonic_thickness_jets(mixed_sphere_field) -> None:
    field = SphericalHarmonicThickness(mixed_sphere_field)
    point = np.array([0.6, 0.0, 0.8])

    exact = field.jet(point)
    approx = field.fd_jet(point)

    np.testing.assert_allclose(approx.gradient, exact.gradient, atol=1e-8)
    np.testing.assert_allclose(approx.hessian, exact.hessian, atol=1e-6)
    assert field.dimension == 3
    assert not field.is_constant


def test_admissibility_of_concentric_circles() -> None:
    report = admissibility_audit(_planar(FourierSupportCurve.circle(), ((1.0, 0.0),)))

    assert report.passed
    assert report.min_thickness == pytest.approx(1.0)
    assert report.min_det == pytest.approx(2.0)
    assert report.min_outer_turning == pytest.approx(0.5)
    assert report.oc_pass_rate == 1.0


def test_admissibility_fails_positivity() -> None:
    report = admissibility_audit(_planar(FourierSupportCurve.circle(), ((0.2, 0.0), (0.5, 0.0))))

    assert not report.passed
    assert not report.positivity_ok
    assert report.min_thickness == pytest.approx(-0.3, abs=1e-6)


def test_admissibility_fails_inward_normal_condition() -> None:
    report = admissibility_audit(_planar(FourierSupportCurve.circle(), ((1.0, 0.0), (0.0, 0.0), (0.0, 0.0), (0.0, 0.0), (0.95, 0.0))))

    assert not report.passed
    assert report.positivity_ok
    assert not report.oc_ok
    assert report.oc_pass_rate < 1.0
    assert not report.immersion_ok
    assert report.min_outer_turning < 0.0


def test_admissibility_of_concentric_spheres() -> None:
    system = SphereReturnMap(SphericalHarmonicThickness(SphericalHarmonicField.constant(1.0)))

    report = admissibility_audit(system, samples=200)

    assert report.passed
    assert report.samples == 200
    assert report.min_det == pytest.approx(4.0)
    assert report.min_outer_turning == pytest.approx(0.5)


def test_admissibility_reports_outer_turning_of_ray_cast_ellipse() -> None:
    core = FourierSupportCurve.circle()
    report = admissibility_audit(PlanarReturnMap(core, RayCastThickness(core, EllipseCurve(2.0, 1.5))), samples=256)

    assert report.immersion_ok
    assert report.min_outer_turning == pytest.approx(1.5 / 4.0, abs=1e-6)


def test_outer_fold_fails_immersion() -> None:
    system = _planar(FourierSupportCurve.circle(), ((1.0, 0.0), (0.0, 0.0), (0.0, 0.0), (0.0, 0.0), (0.95, 0.0)))
    turning = system.outer_turning(0.25 * np.pi)

    report = admissibility_audit(system)

    # r = 1.05, r' = 0, r'' = 15.2 at the folded tips of the outer curve.
    assert turning == pytest.approx((1.05**2 - 1.05 * 15.2) / 1.05**3)
    assert not report.immersion_ok
    assert report.min_outer_turning <= turning + 1e-9
    assert report.min_det > 0.0
