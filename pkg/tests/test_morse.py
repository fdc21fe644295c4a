import numpy as np
import pytest

from boundary2d import FourierSupportCurve
from models import TopologyDescriptor
from morse import _tangent_bases, degeneracy_threshold, fixed_point_crosscheck, locate_equilibria, morse_catalog, topology_audit
from returnmap import PlanarReturnMap, SphereReturnMap
from sphere3d import SphericalHarmonicField, frame_sphere
from thickness import FourierThickness, SphericalHarmonicThickness, admissibility_audit


def _angles(records) -> list[float]:
    return [r.params[0] for r in records]


def test_circle_in_ellipse_has_four_axis_equilibria(ellipse_catalog) -> None:
    records = ellipse_catalog.records

    assert len(records) == 4
    np.testing.assert_allclose(_angles(records), [-np.pi, -0.5 * np.pi, 0.0, 0.5 * np.pi], atol=1e-6)
    assert [r.identifier for r in records] == [0, 1, 2, 3]
    assert ellipse_catalog.morse_assumption_holds
    assert not ellipse_catalog.degenerate_sets


def test_major_axis_is_maximum_and_minor_axis_is_minimum(ellipse_catalog) -> None:
    by_index = {r.identifier: r for r in ellipse_catalog.records}

    assert [by_index[i].morse_index for i in range(4)] == [1, 0, 1, 0]
    assert by_index[2].d == pytest.approx(1.0, abs=1e-10)
    assert by_index[1].d == pytest.approx(0.5, abs=1e-10)
    assert by_index[2].hessian_eigenvalues[0] == pytest.approx(-14.0 / 9.0, abs=1e-5)
    assert by_index[3].hessian_eigenvalues[0] == pytest.approx(0.65625, abs=1e-5)


def test_topology_of_circle_in_ellipse_balances(ellipse_catalog) -> None:
    report = topology_audit(ellipse_catalog.records, TopologyDescriptor.sphere(2))

    assert report.applicable
    assert report.passed
    assert report.index_sum == 0
    assert report.euler_characteristic == 0
    assert report.betti_sum == 2


def test_fixed_points_and_critical_points_agree(circle_in_ellipse_system, ellipse_catalog) -> None:
    result = fixed_point_crosscheck(circle_in_ellipse_system, ellipse_catalog.records, samples=64)

    assert result["max_record_residual"] <= 1e-8
    assert result["sample_mismatches"] == 0


def test_cos_two_theta_thickness_on_unit_circle() -> None:
    core = FourierSupportCurve.circle()
    system = PlanarReturnMap(core, FourierThickness(core, ((1.0, 0.0), (0.0, 0.0), (0.1, 0.0))))

    catalog = morse_catalog(locate_equilibria(system))

    assert len(catalog.records) == 4
    maxima = [r for r in catalog.records if r.morse_index == 1]
    assert sorted(round(abs(r.params[0]), 6) for r in maxima) == [0.0, round(np.pi, 6)]
    for record in maxima:
        assert record.hessian_eigenvalues[0] == pytest.approx(-0.4, abs=1e-8)
        assert record.d == pytest.approx(1.1)


def test_morse_bott_sphere_field() -> None:
    # 1 + 0.1 (3 z^2 - 1): isolated maxima at the poles, a circle of minima on the equator.
    field = SphericalHarmonicField(((0, 0, 1.0), (2, 0, 0.2)), normalization="unnormalized")
    system = SphereReturnMap(SphericalHarmonicThickness(field))

    catalog = morse_catalog(locate_equilibria(system))

    poles = [r for r in catalog.records if abs(r.point[2]) > 0.999]
    assert len(poles) == 2
    for pole in poles:
        assert pole.morse_index == 2
        assert not pole.degenerate
        np.testing.assert_allclose(pole.hessian_eigenvalues, [-0.6, -0.6], atol=1e-8)

    flat = [r for r in catalog.records if r.degenerate]
    assert flat
    assert all(abs(r.point[2]) < 1e-6 for r in flat)
    assert not catalog.morse_assumption_holds
    assert catalog.degenerate_sets
    assert all(s.tangent_directions == 1 for s in catalog.degenerate_sets)
    assert all(s.transverse_spectrum == pytest.approx([0.6], abs=1e-8) for s in catalog.degenerate_sets)

    report = topology_audit(catalog.records, TopologyDescriptor.sphere(3))
    assert not report.applicable
    assert report.reason == "not applicable: Morse-Bott"


def test_mixed_sphere_field_balances_euler_characteristic(mixed_sphere_field) -> None:
    system = SphereReturnMap(SphericalHarmonicThickness(mixed_sphere_field))

    catalog = morse_catalog(locate_equilibria(system))
    report = topology_audit(catalog.records, TopologyDescriptor.sphere(3))

    assert catalog.morse_assumption_holds
    assert report.equilibria >= 2
    assert report.index_sum == 2
    assert report.passed
    for record in catalog.records:
        # Critical points of this field sit on the coordinate axes.
        assert np.max(np.abs(record.point)) == pytest.approx(1.0, abs=1e-6)


def test_empty_catalog_edge_cases() -> None:
    assert degeneracy_threshold([]) == 0.0

    catalog = morse_catalog([])
    report = topology_audit([], TopologyDescriptor.sphere(2))

    assert not catalog.morse_assumption_holds
    assert not report.applicable
    assert report.reason == "not applicable: no equilibria"


def test_sphere_topology_descriptor() -> None:
    assert TopologyDescriptor.sphere(3).betti == (1, 0, 1)
    assert TopologyDescriptor.sphere(3).euler_characteristic == 2
    assert TopologyDescriptor.sphere(2).betti == (1, 1)
    assert TopologyDescriptor.sphere(2).euler_characteristic == 0


def _random_fourier(rng) -> tuple[tuple[float, float], ...]:
    orders = np.arange(1, 6)
    raw = rng.uniform(-1.0, 1.0, size=(5, 2)) / orders[:, None] ** 2
    raw *= rng.uniform(0.3, 1.0) * 0.3 / np.sum(np.abs(raw))
    return ((1.0, 0.0), *((float(a), float(b)) for a, b in raw))


def _no_dropped_candidates(caplog) -> bool:
    return not any(r.getMessage().startswith("candidate") for r in caplog.records)


def test_random_circle_fields_balance_euler_characteristic(caplog) -> None:
    rng = np.random.default_rng(2024)
    core = FourierSupportCurve.circle()
    admissible = []
    for _ in range(60):
        system = PlanarReturnMap(core, FourierThickness(core, _random_fourier(rng)))
        if admissibility_audit(system, samples=512).passed:
            admissible.append(system)
        if len(admissible) == 20:
            break
    assert len(admissible) == 20

    checked, discarded = 0, 0
    for system in admissible:
        catalog = morse_catalog(locate_equilibria(system))
        if not catalog.morse_assumption_holds:
            discarded += 1
            continue
        report = topology_audit(catalog.records, TopologyDescriptor.sphere(2))

        assert report.equilibria >= 2
        assert report.equilibria % 2 == 0
        assert report.index_sum == 0
        assert report.passed
        assert fixed_point_crosscheck(system, catalog.records, samples=64)["sample_mismatches"] == 0
        checked += 1

    assert checked + discarded == 20
    assert checked >= 18
    assert _no_dropped_candidates(caplog)


@pytest.mark.slow
def test_random_sphere_fields_balance_euler_characteristic(caplog) -> None:
    rng = np.random.default_rng(77)
    constant = 2.0 * np.sqrt(np.pi)
    checked = 0
    for _ in range(10):
        coeffs = [(0, 0, constant)]
        for degree in range(1, 4):
            coeffs += [(degree, order, float(rng.normal(scale=0.08))) for order in range(-degree, degree + 1)]
        system = SphereReturnMap(SphericalHarmonicThickness(SphericalHarmonicField(tuple(coeffs))))

        catalog = morse_catalog(locate_equilibria(system))
        if not catalog.morse_assumption_holds:
            continue
        report = topology_audit(catalog.records, TopologyDescriptor.sphere(3))

        assert report.equilibria >= 2
        assert report.index_sum == 2
        assert report.passed
        checked += 1

    assert checked >= 8
    assert _no_dropped_candidates(caplog)


def test_stacked_tangent_bases_match_single_point_frames() -> None:
    points = np.random.default_rng(5).normal(size=(30, 3))
    points /= np.linalg.norm(points, axis=1, keepdims=True)

    bases = _tangent_bases(points)

    for point, basis in zip(points, bases):
        np.testing.assert_allclose(basis, frame_sphere(point).basis, atol=1e-14)
