import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from boundary2d import EllipseCurve, FourierSupportCurve  # noqa: E402
from morse import locate_equilibria, morse_catalog  # noqa: E402
from returnmap import PlanarReturnMap, SphereReturnMap  # noqa: E402
from scenario import parse_scenario  # noqa: E402
from sphere3d import SphericalHarmonicField  # noqa: E402
from thickness import FourierThickness, RayCastThickness, SphericalHarmonicThickness  # noqa: E402

FIXTURES = ROOT / "tests" / "fixtures"


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: seeded suites over many random fields or orbits")


def _fixture_path(name: str) -> Path:
    return FIXTURES / name


@pytest.fixture
def fixture_path():
    return _fixture_path


@pytest.fixture
def circle_in_ellipse_scenario():
    return parse_scenario(_fixture_path("circle_in_ellipse.json").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def circle_in_ellipse_system():
    core = FourierSupportCurve.circle()
    return PlanarReturnMap(core, RayCastThickness(core, EllipseCurve(2.0, 1.5)))


@pytest.fixture(scope="session")
def ellipse_catalog(circle_in_ellipse_system):
    return morse_catalog(locate_equilibria(circle_in_ellipse_system))


@pytest.fixture
def concentric_planar_system():
    core = FourierSupportCurve.circle()
    return PlanarReturnMap(core, FourierThickness(core, ((1.0, 0.0),)))


@pytest.fixture
def concentric_sphere_system():
    return SphereReturnMap(SphericalHarmonicThickness(SphericalHarmonicField.constant(1.0)))


@pytest.fixture
def mixed_sphere_field():
    return SphericalHarmonicField(((0, 0, 1.0), (2, 0, 0.1), (2, 2, 0.05)), normalization="orthonormal")
