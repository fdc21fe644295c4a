"""
Plane curves for the core boundary and the outer boundary.

Core boundaries are convex curves encoded by their support function h(theta):
the point with outward normal u(theta) = (cos theta, sin theta) is
c(theta) = h u + h' u_perp, the radius of curvature is h + h'' and the
curvature is 1 / (h + h''). Outer boundaries are arbitrary closed
counter-clockwise parametric curves (ellipse, radial Fourier graph, or the
image of the core under the radial map for a Fourier thickness).

All curves are 2*pi periodic and immutable.
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from logging import getLogger

import numpy as np
from scipy.optimize import brentq, minimize_scalar

import config
from errors import GeometryDegenerateError, RayMissError
from models import ConvexityReport, Frame2D

_LOGGER = getLogger(__name__)

TWO_PI = 2.0 * np.pi

__all__ = [
    "Curve2D",
    "SupportCurve2D",
    "FourierSupportCurve",
    "EllipseSupportCurve",
    "OuterCurve2D",
    "EllipseCurve",
    "RadialFourierCurve",
    "ThicknessDefinedCurve",
    "fourier_jet",
    "frame_2d",
    "ray_first_hit_2d",
    "convexity_audit",
    "wrap_angle",
]


def unit(theta):
    theta = np.asarray(theta, dtype=float)
    return np.stack((np.cos(theta), np.sin(theta)), axis=-1)


def unit_perp(theta):
    theta = np.asarray(theta, dtype=float)
    return np.stack((-np.sin(theta), np.cos(theta)), axis=-1)


def cross2(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def wrap_angle(theta):
    """Map angles into [-pi, pi)."""
    return np.mod(np.asarray(theta, dtype=float) + np.pi, TWO_PI) - np.pi


def fourier_jet(coefficients, theta):
    """Value and first three derivatives of sum_k a_k cos k theta + b_k sin k theta."""
    coeffs = np.asarray(coefficients, dtype=float).reshape(-1, 2)
    k = np.arange(coeffs.shape[0], dtype=float)
    theta = np.asarray(theta, dtype=float)
    kt = theta[..., None] * k
    c, s = np.cos(kt), np.sin(kt)
    a, b = coeffs[:, 0], coeffs[:, 1]
    f0 = np.sum(a * c + b * s, axis=-1)
    f1 = np.sum(k * (-a * s + b * c), axis=-1)
    f2 = np.sum(-k**2 * (a * c + b * s), axis=-1)
    f3 = np.sum(k**3 * (a * s - b * c), axis=-1)
    return f0, f1, f2, f3


class Curve2D(ABC):
    """Closed counter-clockwise parametric curve, 2*pi periodic in its parameter."""

    @abstractmethod
    def point_jet(self, phi):
        """Return (p, dp/dphi, d2p/dphi2), each shaped (..., 2)."""

    @abstractmethod
    def to_json(self) -> dict:
        ...

    def point(self, phi):
        return self.point_jet(phi)[0]

    def frame(self, phi: float) -> Frame2D:
        p, dp, ddp = (np.asarray(v, dtype=float) for v in self.point_jet(float(phi)))
        speed = float(np.linalg.norm(dp))
        if speed < config.DET_FLOOR:
            raise GeometryDegenerateError(f"vanishing tangent at parameter {phi:.6g}")
        tangent = dp / speed
        normal = np.array([tangent[1], -tangent[0]])
        curvature = float(cross2(dp, ddp)) / speed**3
        return Frame2D(theta=float(phi), point=p, tangent=tangent, normal=normal, curvature=curvature)

    def curvature(self, phi):
        _, dp, ddp = self.point_jet(phi)
        return cross2(dp, ddp) / np.linalg.norm(dp, axis=-1) ** 3

    def param_of(self, x) -> float:
        """Parameter of the curve point closest to x (x is expected on the curve)."""
        x = np.asarray(x, dtype=float)
        phis = np.linspace(-np.pi, np.pi, config.RAY_SAMPLES, endpoint=False)
        i = int(np.argmin(np.linalg.norm(self.point(phis) - x, axis=-1)))
        step = TWO_PI / config.RAY_SAMPLES

        def slope(phi):
            p, dp, _ = self.point_jet(phi)
            return float(np.dot(p - x, dp))

        lo, hi = phis[i] - step, phis[i] + step
        if slope(lo) * slope(hi) < 0.0:
            return float(wrap_angle(brentq(slope, lo, hi, xtol=1e-15)))
        return float(phis[i])


@dataclass(frozen=True)
class SupportCurve2D(Curve2D):
    """Convex curve given by its support function."""

    @abstractmethod
    def support_jet(self, theta):
        """Return (h, h', h'', h''') at theta."""

    @property
    def centroid(self) -> np.ndarray:
        return np.zeros(2)

    def radius_of_curvature(self, theta):
        h, _, h2, _ = self.support_jet(theta)
        return h + h2

    def point_jet(self, phi):
        h, h1, h2, h3 = self.support_jet(phi)
        u, up = unit(phi), unit_perp(phi)
        sigma = (h + h2)[..., None]
        dsigma = (h1 + h3)[..., None]
        p = h[..., None] * u + h1[..., None] * up
        return p, sigma * up, dsigma * up - sigma * u

    def frame(self, phi: float) -> Frame2D:
        h, h1, h2, _ = (float(v) for v in self.support_jet(float(phi)))
        sigma = h + h2
        if sigma <= 0.0:
            raise GeometryDegenerateError(
                f"support curve is not strictly convex at theta={phi:.6g} (h + h'' = {sigma:.6g})"
            )
        u, up = unit(float(phi)), unit_perp(float(phi))
        return Frame2D(theta=float(phi), point=h * u + h1 * up, tangent=up, normal=u, curvature=1.0 / sigma)


@dataclass(frozen=True)
class FourierSupportCurve(SupportCurve2D):
    coefficients: tuple[tuple[float, float], ...] = ((1.0, 0.0),)

    @classmethod
    def circle(cls, radius: float = 1.0) -> "FourierSupportCurve":
        return cls(((float(radius), 0.0),))

    @property
    def centroid(self) -> np.ndarray:
        # The first harmonic of a support function is a translation.
        if len(self.coefficients) < 2:
            return np.zeros(2)
        return np.array(self.coefficients[1], dtype=float)

    @property
    def is_circle(self) -> bool:
        return all(a == 0.0 and b == 0.0 for k, (a, b) in enumerate(self.coefficients) if k >= 1)

    def support_jet(self, theta):
        return fourier_jet(self.coefficients, theta)

    def to_json(self) -> dict:
        return {"support_fourier": [[float(a), float(b)] for a, b in self.coefficients]}


@dataclass(frozen=True)
class EllipseSupportCurve(SupportCurve2D):
    a: float = 1.0
    b: float = 1.0

    def support_jet(self, theta):
        theta = np.asarray(theta, dtype=float)
        a2, b2 = self.a**2, self.b**2
        g = a2 * np.cos(theta) ** 2 + b2 * np.sin(theta) ** 2
        g1 = (b2 - a2) * np.sin(2.0 * theta)
        g2 = 2.0 * (b2 - a2) * np.cos(2.0 * theta)
        g3 = -4.0 * (b2 - a2) * np.sin(2.0 * theta)
        h = np.sqrt(g)
        h1 = g1 / (2.0 * h)
        h2 = (g2 - 2.0 * h1**2) / (2.0 * h)
        h3 = (g3 - 6.0 * h1 * h2) / (2.0 * h)
        return h, h1, h2, h3

    def to_json(self) -> dict:
        return {"ellipse": {"a": float(self.a), "b": float(self.b)}}


class OuterCurve2D(Curve2D):
    """Outer boundary variants; `kind` is the scenario tag."""

    kind: str = ""


@dataclass(frozen=True)
class EllipseCurve(OuterCurve2D):
    a: float
    b: float
    kind = "ellipse"

    def point_jet(self, phi):
        phi = np.asarray(phi, dtype=float)
        c, s = np.cos(phi), np.sin(phi)
        p = np.stack((self.a * c, self.b * s), axis=-1)
        dp = np.stack((-self.a * s, self.b * c), axis=-1)
        return p, dp, -p

    def param_of(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(np.arctan2(x[1] / self.b, x[0] / self.a))

    def residual(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(x[..., 0] ** 2 / self.a**2 + x[..., 1] ** 2 / self.b**2 - 1.0)

    def exact_ray_hit(self, origin, direction) -> float | None:
        """Smallest t >= 0 with origin + t direction on the ellipse, from the quadratic."""
        o = np.asarray(origin, dtype=float)
        v = np.asarray(direction, dtype=float)
        qa = v[0] ** 2 / self.a**2 + v[1] ** 2 / self.b**2
        qb = 2.0 * (o[0] * v[0] / self.a**2 + o[1] * v[1] / self.b**2)
        qc = o[0] ** 2 / self.a**2 + o[1] ** 2 / self.b**2 - 1.0
        disc = qb * qb - 4.0 * qa * qc
        if disc < 0.0:
            return None
        q = -0.5 * (qb + np.copysign(np.sqrt(disc), qb))
        roots = [r for r in (q / qa, qc / q if q != 0.0 else np.inf) if r >= 0.0]
        return float(min(roots)) if roots else None

    def to_json(self) -> dict:
        return {"ellipse": {"a": float(self.a), "b": float(self.b)}}


@dataclass(frozen=True)
class RadialFourierCurve(OuterCurve2D):
    """Star-shaped curve rho(phi) u(phi) about the origin."""

    coefficients: tuple[tuple[float, float], ...]
    kind = "radial_fourier"

    def point_jet(self, phi):
        rho, rho1, rho2, _ = fourier_jet(self.coefficients, phi)
        u, up = unit(phi), unit_perp(phi)
        rho, rho1, rho2 = rho[..., None], rho1[..., None], rho2[..., None]
        return rho * u, rho1 * u + rho * up, (rho2 - rho) * u + 2.0 * rho1 * up

    def param_of(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(np.arctan2(x[1], x[0]))

    def to_json(self) -> dict:
        return {"radial_fourier": [[float(a), float(b)] for a, b in self.coefficients]}


@dataclass(frozen=True)
class ThicknessDefinedCurve(OuterCurve2D):
    """Image of a support curve under c -> c + d(theta) u(theta) for a Fourier thickness."""

    core: SupportCurve2D
    d_coefficients: tuple[tuple[float, float], ...]
    kind = "thickness"

    def point_jet(self, phi):
        c, dc, _ = self.core.point_jet(phi)
        h, h1, h2, h3 = self.core.support_jet(phi)
        d, d1, d2, _ = fourier_jet(self.d_coefficients, phi)
        u, up = unit(phi), unit_perp(phi)
        big_r = (h + h2 + d)[..., None]
        d, d1, d2 = d[..., None], d1[..., None], d2[..., None]
        dsigma = (h1 + h3)[..., None]
        p = c + d * u
        dp = d1 * u + big_r * up
        ddp = (d2 - big_r) * u + (2.0 * d1 + dsigma) * up
        return p, dp, ddp

    def param_of(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if isinstance(self.core, FourierSupportCurve) and self.core.is_circle:
            return float(np.arctan2(x[1], x[0]))
        return Curve2D.param_of(self, x)

    def to_json(self) -> dict:
        return {"thickness": {"fourier": [[float(a), float(b)] for a, b in self.d_coefficients]}}


def frame_2d(curve: Curve2D, theta: float) -> Frame2D:
    return curve.frame(theta)


def ray_first_hit_2d(curve: Curve2D, origin, direction, samples: int | None = None) -> tuple[float, float]:
    """First transversal crossing of the ray origin + t direction (t >= 0) with the curve.

    Sign changes of the signed gap cross(direction, p(phi) - origin) over a dense
    uniform parameter grid bracket the crossings; each bracket is solved with
    brentq and polished by one Newton step. Sampled minima of |gap| that show no
    sign change are refined with a bounded scalar minimization: a refined gap of
    the opposite sign is a short chord between two grid points, a refined gap
    within RAY_RESIDUAL is a grazing contact. Returns (t, phi_hit).
    """
    samples = samples or config.RAY_SAMPLES
    o = np.asarray(origin, dtype=float)
    v = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(v) - 1.0) > 1e-9:
        raise ValueError("ray direction must be a unit vector")

    step = TWO_PI / samples
    # Half-step offset keeps symmetry angles (0, pi/2, ...) off the grid.
    phis = -np.pi + step * (np.arange(samples + 1) + 0.5)
    pts = curve.point(phis)
    gaps = cross2(v, pts - o)
    along = (pts - o) @ v

    def gap(phi):
        return float(cross2(v, curve.point(phi) - o))

    def polish(root, lo, hi):
        _, dp, _ = curve.point_jet(root)
        slope = float(cross2(v, dp))
        if slope != 0.0:
            polished = root - gap(root) / slope
            if lo <= polished <= hi:
                return polished
        return root

    roots = []
    for i in np.nonzero(gaps[:-1] * gaps[1:] < 0.0)[0]:
        root = brentq(gap, phis[i], phis[i + 1], xtol=1e-15)
        roots.append(polish(root, phis[i], phis[i + 1]))
    # Exact zeros on the grid count only when the gap changes sign across them.
    for i in np.nonzero(gaps[:-1] == 0.0)[0]:
        prev = gaps[i - 1] if i > 0 else gaps[samples - 1]
        if prev * gaps[i + 1] < 0.0:
            roots.append(phis[i])

    grazing = []
    ring = gaps[:samples]
    before, after = np.roll(ring, 1), np.roll(ring, -1)
    same_sign = (ring * before > 0.0) & (ring * after > 0.0)
    dips = (np.abs(ring) <= np.abs(before)) & (np.abs(ring) <= np.abs(after))
    for i in np.nonzero(same_sign & dips & (along[:samples] >= 0.0))[0]:
        sign = float(np.sign(ring[i]))
        lo, hi = phis[i] - step, phis[i] + step
        refined = minimize_scalar(
            lambda phi: sign * gap(phi), bounds=(lo, hi), method="bounded", options={"xatol": 1e-13}
        )
        phi_star, depth = float(refined.x), float(refined.fun)
        if depth < -config.RAY_RESIDUAL:
            for a, b in ((lo, phi_star), (phi_star, hi)):
                root = brentq(gap, a, b, xtol=1e-15)
                roots.append(polish(root, a, b))
        elif depth <= config.RAY_RESIDUAL:
            grazing.append(phi_star)

    hits: list[tuple[float, float]] = []
    for root in roots:
        t = float(np.dot(curve.point(root) - o, v))
        if t >= -config.RAY_RESIDUAL:
            hits.append((max(t, 0.0), float(wrap_angle(root))))

    if not hits:
        if any(float(np.dot(curve.point(phi) - o, v)) >= 0.0 for phi in grazing):
            _LOGGER.debug("grazing contact of ray from %s along %s", o, v)
            raise RayMissError("ray grazes the curve without crossing", o, v, tangential=True)
        raise RayMissError("ray does not meet the curve", o, v)

    t_min = min(t for t, _ in hits)
    ties = [(phi, t) for t, phi in hits if t - t_min <= config.TIE_TOLERANCE]
    phi_hit, t_hit = min(ties)
    return t_hit, phi_hit


def convexity_audit(curve: SupportCurve2D, samples: int = config.AUDIT_SAMPLES_2D) -> ConvexityReport:
    if samples < config.CONVEXITY_MIN_SAMPLES:
        raise ValueError(f"convexity audit needs at least {config.CONVEXITY_MIN_SAMPLES} samples")
    thetas = np.linspace(0.0, TWO_PI, samples, endpoint=False)
    sigma = curve.radius_of_curvature(thetas)
    i = int(np.argmin(sigma))
    report = ConvexityReport(
        samples=samples,
        min_radius_of_curvature=float(sigma[i]),
        argmin_theta=float(thetas[i]),
        passed=bool(sigma[i] > 0.0),
    )
    if not report.passed:
        _LOGGER.warning("core curve fails convexity: min h + h'' = %.6g at theta=%.6g", sigma[i], thetas[i])
    return report
