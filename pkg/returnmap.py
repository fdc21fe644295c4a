"""
The round trip F = pi o Phi between the core boundary and the outer boundary.

Phi(c) = c + d(c) nu(c) pushes a core point out along its normal; pi follows
the inward normal of the outer boundary back to its first hit on the core.
DF is measured by finite differences in a tangent chart of the core and is
the ground truth every closed-form expression is compared against.

Core points are the support angle theta (a float in [-pi, pi)) in the plane
and unit 3-vectors on the sphere.
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from logging import getLogger

import numpy as np

import config
from boundary2d import (
    FourierSupportCurve,
    SupportCurve2D,
    ThicknessDefinedCurve,
    cross2,
    ray_first_hit_2d,
    unit,
    unit_perp,
    wrap_angle,
)
from errors import GeometryDegenerateError, OCViolationError, RayMissError
from finitediff import first_derivative, jacobian
from models import JacobianEstimate, ThicknessJet
from sphere3d import (
    exp_map,
    fibonacci_sphere,
    frame_sphere,
    log_map,
    ray_first_hit_sphere,
    to_spherical,
    transport_chart,
)
from thickness import PlanarThickness, SphericalHarmonicThickness

_LOGGER = getLogger(__name__)

__all__ = ["ReturnMapSystem", "PlanarReturnMap", "SphereReturnMap"]


def _ray_circle(origin, direction, center, radius: float):
    """Smallest t >= 0 where the ray meets the circle, or None."""
    m = np.asarray(origin, dtype=float) - center
    b = 2.0 * float(np.dot(direction, m))
    norm_m = float(np.linalg.norm(m))
    c = (norm_m + radius) * (norm_m - radius)
    disc = b * b - 4.0 * c
    if disc < 0.0:
        return None
    q = -0.5 * (b + np.copysign(np.sqrt(disc), b))
    roots = [r for r in (q, c / q if q != 0.0 else np.inf) if r >= 0.0]
    return min(roots) if roots else None


class ReturnMapSystem(ABC):
    """Core boundary, thickness field and solver steps of one scenario."""

    dimension: int = 0

    def __init__(self, field, jacobian_step: float = config.JACOBIAN_STEP) -> None:
        self.field = field
        self.jacobian_step = jacobian_step

    @abstractmethod
    def point(self, c) -> np.ndarray:
        ...

    def chart(self, c):
        """Tangent chart used at c; None when the chart is the arclength coordinate."""
        return None

    @abstractmethod
    def exp(self, c, v, chart=None):
        """Move from c by the chart vector v."""

    @abstractmethod
    def log(self, c, other, chart=None) -> np.ndarray:
        """Chart vector at c pointing at `other`."""

    @abstractmethod
    def jet(self, c, chart=None) -> ThicknessJet:
        ...

    @abstractmethod
    def radial_map(self, c) -> np.ndarray:
        ...

    @abstractmethod
    def radial_determinant(self, c, d: float) -> float:
        """Determinant of the tangential part of DPhi on the collar between the boundaries."""

    @abstractmethod
    def outer_turning(self, c) -> float:
        """Signed turning of the outer boundary at Phi(c); negative where it folds back toward the core."""

    @abstractmethod
    def radial_differential(self, c, v) -> np.ndarray:
        ...

    @abstractmethod
    def inward_normal_outer(self, x) -> np.ndarray:
        ...

    @abstractmethod
    def reciprocal_hit(self, x):
        """(core point, ambient hit point) of the inward normal ray from x."""

    @abstractmethod
    def return_jacobian(self, c, chart=None) -> JacobianEstimate:
        ...

    @abstractmethod
    def sample(self, n: int) -> list:
        ...

    @abstractmethod
    def params(self, c) -> tuple[float, ...]:
        ...

    @abstractmethod
    def core_curvatures(self, c) -> np.ndarray:
        ...

    @abstractmethod
    def core_json(self) -> dict:
        ...

    def reciprocal_map(self, x):
        return self.reciprocal_hit(x)[0]

    def return_map(self, c):
        return self.reciprocal_map(self.radial_map(c))

    def displacement(self, c) -> float:
        return self.distance(self.return_map(c), c)

    def distance(self, a, b) -> float:
        return float(np.linalg.norm(self.point(a) - self.point(b)))

    def radial_differential_fd(self, c, v) -> np.ndarray:
        """DPhi(v) by central differences of Phi along the chart direction v."""
        v = np.atleast_1d(np.asarray(v, dtype=float))
        d1, _ = first_derivative(lambda s: self.radial_map(self.exp(c, s * v)), config.NORMAL_FD_STEP)
        return d1

    def range_residual(self, c) -> float:
        """Distance from the inward-normal hit point to the core point it is reported as."""
        target, hit = self.reciprocal_hit(self.radial_map(c))
        return float(np.linalg.norm(hit - self.point(target)))

    def _warn_discrepancy(self, c, discrepancy: float) -> None:
        if discrepancy > config.FD_WARN_DISCREPANCY:
            _LOGGER.warning("return-map Jacobian not converged at %s: step-halving discrepancy %.3g", self.params(c), discrepancy)


class PlanarReturnMap(ReturnMapSystem):
    dimension = 2

    def __init__(self, core: SupportCurve2D, field: PlanarThickness, jacobian_step: float = config.JACOBIAN_STEP) -> None:
        super().__init__(field, jacobian_step)
        self.core = core
        self.outer = field.outer_curve()
        self._circle = isinstance(core, FourierSupportCurve) and core.is_circle

    def point(self, c) -> np.ndarray:
        return self.core.point(float(c))

    def sigma(self, c) -> float:
        return float(self.core.radius_of_curvature(float(c)))

    def exp(self, c, v, chart=None):
        # Arclength step to first order; exact on circular cores.
        return float(wrap_angle(float(c) + float(np.ravel(v)[0]) / self.sigma(c)))

    def log(self, c, other, chart=None) -> np.ndarray:
        return np.array([self.sigma(c) * float(wrap_angle(float(other) - float(c)))])

    def jet(self, c, chart=None) -> ThicknessJet:
        return self.field.jet(float(c))

    def radial_map(self, c) -> np.ndarray:
        theta = float(c)
        return self.core.point(theta) + float(self.field.value(theta)) * unit(theta)

    def radial_determinant(self, c, d: float) -> float:
        return 1.0 + d / self.sigma(c)

    def outer_turning(self, c) -> float:
        theta = float(c)
        if isinstance(self.outer, ThicknessDefinedCurve):
            param = theta
        else:
            param = self.outer.param_of(self.radial_map(theta))
        _, dp, ddp = self.outer.point_jet(param)
        speed = float(np.linalg.norm(dp))
        if speed < config.DET_FLOOR:
            return float("-inf")
        return float(cross2(dp, ddp)) / speed**3

    def radial_differential(self, c, v) -> np.ndarray:
        theta = float(c)
        v = float(np.ravel(v)[0])
        jet = self.jet(theta)
        stretch = 1.0 + jet.value / self.sigma(theta)
        return stretch * v * unit_perp(theta) + float(jet.gradient[0]) * v * unit(theta)

    def inward_normal_outer(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        frame = self.outer.frame(self.outer.param_of(x))
        normal = -frame.normal
        if np.dot(normal, x - self.core.centroid) > 0.0:
            normal = -normal
        return normal

    def reciprocal_hit(self, x):
        x = np.asarray(x, dtype=float)
        normal = self.inward_normal_outer(x)
        if self._circle:
            center = self.core.centroid
            t = _ray_circle(x, normal, center, float(self.core.coefficients[0][0]))
            if t is None:
                raise OCViolationError(f"inward normal ray from {x} misses the core", point=x, normal=normal)
            hit = x + t * normal
            return float(wrap_angle(np.arctan2(hit[1] - center[1], hit[0] - center[0]))), hit
        try:
            t, phi = ray_first_hit_2d(self.core, x, normal)
        except RayMissError as exc:
            raise OCViolationError(
                f"inward normal ray from {x} misses the core", point=x, normal=normal, tangential=exc.tangential
            ) from exc
        return float(phi), x + t * normal

    def return_jacobian(self, c, chart=None) -> JacobianEstimate:
        theta = float(c)
        image = self.return_map(theta)
        slope, discrepancy = first_derivative(
            lambda s: float(wrap_angle(self.return_map(theta + s) - image)), self.jacobian_step
        )
        self._warn_discrepancy(theta, discrepancy)
        # Chart coordinates are arclength at c and at F(c).
        matrix = np.array([[float(slope) * self.sigma(image) / self.sigma(theta)]])
        return JacobianEstimate(matrix=matrix, discrepancy=discrepancy, step=self.jacobian_step)

    def sample(self, n: int) -> list:
        return [float(t) for t in wrap_angle(np.linspace(0.0, 2.0 * np.pi, n, endpoint=False))]

    def params(self, c) -> tuple[float, ...]:
        return (float(c),)

    def core_curvatures(self, c) -> np.ndarray:
        return np.array([1.0 / self.sigma(c)])

    def outer_curvatures(self, c, hessian_eigenvalues=None) -> np.ndarray:
        x = self.radial_map(c)
        return np.array([abs(self.outer.frame(self.outer.param_of(x)).curvature)])

    def core_json(self) -> dict:
        return self.core.to_json()


class SphereReturnMap(ReturnMapSystem):
    """Unit-sphere core with a spherical-harmonic thickness."""

    dimension = 3

    def __init__(self, field: SphericalHarmonicThickness, jacobian_step: float = config.JACOBIAN_STEP) -> None:
        super().__init__(field, jacobian_step)
        self.core = None

    def point(self, c) -> np.ndarray:
        return np.asarray(c, dtype=float)

    def chart(self, c):
        return frame_sphere(c)

    def exp(self, c, v, chart=None):
        chart = chart or frame_sphere(c)
        return exp_map(c, chart.basis @ np.asarray(v, dtype=float))

    def log(self, c, other, chart=None) -> np.ndarray:
        chart = chart or frame_sphere(c)
        return chart.basis.T @ log_map(c, other)

    def jet(self, c, chart=None) -> ThicknessJet:
        return self.field.jet(np.asarray(c, dtype=float), chart or frame_sphere(c))

    def radial_map(self, c) -> np.ndarray:
        c = np.asarray(c, dtype=float)
        return (1.0 + float(self.field.value(c))) * c

    def radial_determinant(self, c, d: float) -> float:
        return (1.0 + d) ** 2

    def outer_turning(self, c) -> float:
        # Radial graph rho = 1 + d: the second fundamental form is proportional to
        # rho^2 g + 2 drho drho - rho Hess(rho); only the sign of its smallest eigenvalue matters.
        c = np.asarray(c, dtype=float)
        jet = self.jet(c, frame_sphere(c))
        rho = 1.0 + jet.value
        g = np.asarray(jet.gradient, dtype=float)
        form = rho**2 * np.eye(2) + 2.0 * np.outer(g, g) - rho * np.asarray(jet.hessian, dtype=float)
        return float(np.linalg.eigvalsh(form)[0]) / float(rho**2 + g @ g) ** 1.5

    def radial_differential(self, c, v) -> np.ndarray:
        c = np.asarray(c, dtype=float)
        chart = frame_sphere(c)
        v = np.asarray(v, dtype=float)
        jet = self.jet(c, chart)
        return (1.0 + jet.value) * (chart.basis @ v) + float(jet.gradient @ v) * c

    def inward_normal_outer(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        c = x / np.linalg.norm(x)
        chart = frame_sphere(c)
        jet = self.jet(c, chart)
        t1 = (1.0 + jet.value) * chart.e1 + jet.gradient[0] * c
        t2 = (1.0 + jet.value) * chart.e2 + jet.gradient[1] * c
        normal = np.cross(t1, t2)
        size = float(np.linalg.norm(normal))
        if size < config.DET_FLOOR:
            raise GeometryDegenerateError(f"outer boundary tangent plane degenerates at {x}")
        normal /= size
        if np.dot(normal, x) > 0.0:
            normal = -normal
        return normal

    def reciprocal_hit(self, x):
        x = np.asarray(x, dtype=float)
        normal = self.inward_normal_outer(x)
        try:
            hit = ray_first_hit_sphere(x, normal)
        except RayMissError as exc:
            raise OCViolationError(f"inward normal ray from {x} misses the core", point=x, normal=normal) from exc
        return hit / np.linalg.norm(hit), hit

    def return_jacobian(self, c, chart=None) -> JacobianEstimate:
        c = np.asarray(c, dtype=float)
        chart = chart or frame_sphere(c)
        image = self.return_map(c)
        target = transport_chart(chart, image)

        def moved(v):
            return target.basis.T @ log_map(image, self.return_map(exp_map(c, chart.basis @ v)))

        matrix, discrepancy = jacobian(moved, 2, self.jacobian_step)
        self._warn_discrepancy(c, discrepancy)
        return JacobianEstimate(matrix=matrix, discrepancy=discrepancy, step=self.jacobian_step)

    def sample(self, n: int) -> list:
        return list(fibonacci_sphere(n))

    def params(self, c) -> tuple[float, ...]:
        return to_spherical(c)

    def core_curvatures(self, c) -> np.ndarray:
        return np.ones(2)

    def outer_curvatures(self, c, hessian_eigenvalues) -> np.ndarray:
        """Principal curvatures of the radial graph rho = 1 + d at a critical point of d."""
        rho = 1.0 + float(self.field.value(np.asarray(c, dtype=float)))
        return (rho - np.asarray(hessian_eigenvalues, dtype=float)) / rho**2

    def core_json(self) -> dict:
        return {"unit_sphere": {}}
