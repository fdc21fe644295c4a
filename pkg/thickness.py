"""
Thickness fields on the core boundary.

Three variants share one interface:

* `FourierThickness`: d(theta) as a truncated Fourier series in the normal
  angle of a planar support curve; the outer boundary is the image of the core
  under the radial map.
* `RayCastThickness`: an explicit planar outer curve is given and d(theta) is
  the distance along the outward core normal to its first transversal hit.
* `SphericalHarmonicThickness`: d on the unit sphere as a real harmonic
  expansion.

Planar jets are returned in arclength: with sigma = h + h'' the radius of
curvature of the core, d_s = d_theta / sigma and
d_ss = (d_thetatheta * sigma - d_theta * sigma') / sigma^3.
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from logging import getLogger

import numpy as np

import config
from boundary2d import (
    OuterCurve2D,
    SupportCurve2D,
    ThicknessDefinedCurve,
    fourier_jet,
    ray_first_hit_2d,
    unit,
)
from errors import GeometryDegenerateError, OCViolationError, RayMissError
from finitediff import derivatives_1d, first_derivative
from models import AdmissibilityReport, ThicknessJet
from sphere3d import SphericalHarmonicField, sh_jet
from workers import parallel_map

_LOGGER = getLogger(__name__)

__all__ = [
    "ThicknessField",
    "PlanarThickness",
    "FourierThickness",
    "RayCastThickness",
    "SphericalHarmonicThickness",
    "thickness_jet",
    "admissibility_audit",
]


class ThicknessField(ABC):
    dimension: int = 0
    kind: str = ""

    @abstractmethod
    def value(self, c):
        ...

    @abstractmethod
    def jet(self, c, chart=None) -> ThicknessJet:
        ...

    @abstractmethod
    def fd_jet(self, c, chart=None) -> ThicknessJet:
        """Jet by finite differences, used to cross-check `jet`."""

    @property
    @abstractmethod
    def is_constant(self) -> bool:
        ...

    @abstractmethod
    def to_json(self) -> dict:
        ...


class PlanarThickness(ThicknessField):
    dimension = 2
    core: SupportCurve2D

    @abstractmethod
    def theta_derivatives(self, theta: float) -> tuple[float, float, float]:
        """(d, d_theta, d_thetatheta) at the normal angle theta."""

    @abstractmethod
    def outer_curve(self) -> OuterCurve2D:
        ...

    def theta_slope(self, theta: float) -> float:
        """d_theta alone; its sign is the sign of the arclength gradient."""
        return self.theta_derivatives(theta)[1]

    def _arclength_jet(self, theta: float, d: float, d1: float, d2: float) -> ThicknessJet:
        h, h1, h2, h3 = (float(v) for v in self.core.support_jet(theta))
        sigma, dsigma = h + h2, h1 + h3
        if sigma <= 0.0:
            raise GeometryDegenerateError(f"core curve is not strictly convex at theta={theta:.6g}")
        grad = d1 / sigma
        hess = (d2 * sigma - d1 * dsigma) / sigma**3
        return ThicknessJet(value=float(d), gradient=np.array([grad]), hessian=np.array([[hess]]))

    def jet(self, c, chart=None) -> ThicknessJet:
        theta = float(c)
        return self._arclength_jet(theta, *self.theta_derivatives(theta))

    def fd_jet(self, c, chart=None) -> ThicknessJet:
        theta = float(c)
        d0, d1, _, _, _ = derivatives_1d(lambda s: self.value(theta + s), config.FD_STEP)
        _, _, d2, _, _ = derivatives_1d(lambda s: self.value(theta + s), config.HESS_STEP, f0=d0)
        return self._arclength_jet(theta, float(d0), float(d1), float(d2))


@dataclass(frozen=True)
class FourierThickness(PlanarThickness):
    core: SupportCurve2D
    coefficients: tuple[tuple[float, float], ...]
    positivity_floor: float = config.POSITIVITY_FLOOR
    kind = "fourier"

    def value(self, c):
        return fourier_jet(self.coefficients, c)[0]

    def theta_derivatives(self, theta: float) -> tuple[float, float, float]:
        d, d1, d2, _ = fourier_jet(self.coefficients, float(theta))
        return float(d), float(d1), float(d2)

    def outer_curve(self) -> OuterCurve2D:
        return ThicknessDefinedCurve(self.core, self.coefficients)

    @property
    def is_constant(self) -> bool:
        return all(a == 0.0 and b == 0.0 for k, (a, b) in enumerate(self.coefficients) if k >= 1)

    def to_json(self) -> dict:
        return {"fourier": [[float(a), float(b)] for a, b in self.coefficients]}


@dataclass(frozen=True)
class RayCastThickness(PlanarThickness):
    core: SupportCurve2D
    outer: OuterCurve2D
    fd_step: float = config.FD_STEP
    hess_step: float = config.HESS_STEP
    positivity_floor: float = config.POSITIVITY_FLOOR
    kind = "ray-cast"

    def _cast(self, theta: float) -> float:
        origin = self.core.point(theta)
        normal = unit(theta)
        try:
            t, _ = ray_first_hit_2d(self.outer, origin, normal)
        except RayMissError as exc:
            raise OCViolationError(
                f"outward normal ray at theta={theta:.6g} misses the outer boundary",
                point=origin,
                normal=normal,
                tangential=exc.tangential,
            ) from exc
        return t

    def value(self, c):
        theta = np.asarray(c, dtype=float)
        if theta.ndim == 0:
            return self._cast(float(theta))
        return np.array([self._cast(float(t)) for t in theta])

    def theta_derivatives(self, theta: float) -> tuple[float, float, float]:
        theta = float(theta)
        d0, d1, _, disc1, _ = derivatives_1d(lambda s: self._cast(theta + s), self.fd_step)
        _, _, d2, _, disc2 = derivatives_1d(lambda s: self._cast(theta + s), self.hess_step, f0=d0)
        if max(disc1, disc2) > config.FD_WARN_DISCREPANCY:
            _LOGGER.warning("ray-cast derivatives poorly converged at theta=%.6g (%.3g, %.3g)", theta, disc1, disc2)
        return float(d0), float(d1), float(d2)

    def theta_slope(self, theta: float) -> float:
        theta = float(theta)
        slope, _ = first_derivative(lambda s: self._cast(theta + s), self.fd_step)
        return float(slope)

    def outer_curve(self) -> OuterCurve2D:
        return self.outer

    @property
    def is_constant(self) -> bool:
        return False

    def to_json(self) -> dict:
        return {"outer": self.outer.to_json()}


@dataclass(frozen=True)
class SphericalHarmonicThickness(ThicknessField):
    harmonics: SphericalHarmonicField
    positivity_floor: float = config.POSITIVITY_FLOOR
    dimension = 3
    kind = "sphere_harmonics"

    def value(self, c):
        return self.harmonics.value(c)

    def jet(self, c, chart=None) -> ThicknessJet:
        return self.harmonics.tangential_jet(c, chart)

    def fd_jet(self, c, chart=None) -> ThicknessJet:
        return sh_jet(self.harmonics, c, chart)

    @property
    def is_constant(self) -> bool:
        return self.harmonics.is_constant

    def to_json(self) -> dict:
        return self.harmonics.to_json()


def thickness_jet(field: ThicknessField, c, chart=None) -> ThicknessJet:
    """Value, tangential gradient and tangential Hessian of d at c."""
    return field.jet(c, chart)


def _sample_point(system, c):
    try:
        d = float(system.field.value(c))
    except RayMissError as exc:
        return np.nan, np.nan, np.nan, False, str(exc)
    det = system.radial_determinant(c, d)
    turning = system.outer_turning(c)
    try:
        system.reciprocal_map(system.radial_map(c))
        reached = True
    except (RayMissError, GeometryDegenerateError):
        reached = False
    return d, det, turning, reached, None


def admissibility_audit(system, samples: int | None = None) -> AdmissibilityReport:
    """Sample positivity of d, orientation of the radial map, folds of the outer boundary and the inward-normal condition.

    `system` bundles the core boundary with its thickness field (see returnmap).
    """
    n = samples or (config.AUDIT_SAMPLES_2D if system.dimension == 2 else config.AUDIT_SAMPLES_3D)
    points = system.sample(n)
    results = parallel_map(lambda c: _sample_point(system, c), points)

    values = np.array([r[0] for r in results])
    dets = np.array([r[1] for r in results])
    turnings = np.array([r[2] for r in results])
    reached = np.array([r[3] for r in results])
    notes = sorted({r[4] for r in results if r[4]})

    finite = np.isfinite(values)
    min_d = float(np.min(values[finite])) if finite.any() else float("nan")
    min_det = float(np.min(dets[np.isfinite(dets)])) if np.isfinite(dets).any() else float("nan")
    # -inf marks a cusp, so only nan is dropped.
    min_turning = float(np.min(turnings[~np.isnan(turnings)])) if (~np.isnan(turnings)).any() else float("nan")
    report = AdmissibilityReport(
        samples=n,
        min_thickness=min_d,
        min_det=min_det,
        min_outer_turning=min_turning,
        oc_pass_rate=float(np.mean(reached)),
        positivity_ok=bool(finite.all() and min_d > system.field.positivity_floor),
        immersion_ok=bool(np.isfinite(min_det) and min_det > config.DET_FLOOR and min_turning > 0.0),
        oc_ok=bool(reached.all()),
        notes=notes[:5],
    )
    if not report.passed:
        _LOGGER.warning(
            "admissibility failed: min d=%.6g, min det=%.6g, min outer turning=%.6g, inward-normal pass rate=%.4f",
            report.min_thickness,
            report.min_det,
            report.min_outer_turning,
            report.oc_pass_rate,
        )
    return report
