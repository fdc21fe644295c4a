"""
Unit-sphere core boundary and real spherical-harmonic scalar fields.

A real harmonic of degree l and order m is written on S^2 as
    Y_l^m = N_lm * T_m(x, y) * P_l^(|m|)(z)
with T_m = Re (x + iy)^m for m >= 0, Im (x + iy)^|m| for m < 0 and P_l^(|m|)
the |m|-th derivative of the Legendre polynomial. This ambient extension is
polynomial, so gradients and Hessians are exact everywhere, poles included.
Intrinsic derivatives follow from the unit-sphere identities
    grad = P grad f,   Hess = P (D^2 f) P - <p, grad f> P.
`sh_jet` computes the same quantities by finite differences along geodesics
of an exponential chart and serves as an independent cross-check.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from logging import getLogger
from math import factorial

import numpy as np
from numpy.polynomial import Legendre

import config
from errors import RayMissError
from finitediff import derivatives_1d, directional_hessian
from models import TangentChart, ThicknessJet

_LOGGER = getLogger(__name__)

__all__ = [
    "SphericalHarmonicField",
    "frame_sphere",
    "rotated_chart",
    "transport_chart",
    "exp_map",
    "log_map",
    "sh_jet",
    "ray_first_hit_sphere",
    "fibonacci_sphere",
    "to_spherical",
    "from_spherical",
]

NORMALIZATIONS = ("orthonormal", "unnormalized")


def _normalization(l: int, m: int, kind: str) -> float:
    if kind == "unnormalized":
        return 1.0
    am = abs(m)
    n = np.sqrt((2 * l + 1) / (4.0 * np.pi) * factorial(l - am) / factorial(l + am))
    return float(n * np.sqrt(2.0)) if m != 0 else float(n)


@lru_cache(maxsize=None)
def _legendre_jet(l: int, am: int) -> tuple[Legendre, Legendre, Legendre]:
    """P_l^(am) and its first two derivatives."""
    poly = Legendre.basis(l).deriv(am) if am > 0 else Legendre.basis(l)
    return poly, poly.deriv(1), poly.deriv(2)


def _azimuthal_jet(m: int, x, y):
    """T_m and its first and second derivatives in (x, y)."""
    am = abs(m)
    w = x + 1j * y
    zero = np.zeros_like(w)
    if am == 0:
        t = np.ones_like(w)
        tx = ty = txx = txy = tyy = zero
    else:
        t = w**am
        base1 = am * w ** (am - 1)
        tx, ty = base1, 1j * base1
        if am >= 2:
            base2 = am * (am - 1) * w ** (am - 2)
        else:
            base2 = zero
        txx, txy, tyy = base2, 1j * base2, -base2
    part = np.real if m >= 0 else np.imag
    return tuple(part(v) for v in (t, tx, ty, txx, txy, tyy))


@dataclass(frozen=True)
class SphericalHarmonicField:
    """Finite real spherical-harmonic expansion, coefficients as (l, m, c) triples."""

    coefficients: tuple[tuple[int, int, float], ...]
    normalization: str = "orthonormal"

    def __post_init__(self) -> None:
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(f"unknown normalization {self.normalization!r}")
        for l, m, _ in self.coefficients:
            if l < 0 or abs(m) > l:
                raise ValueError(f"invalid harmonic index (l={l}, m={m})")

    @classmethod
    def constant(cls, value: float) -> "SphericalHarmonicField":
        return cls(((0, 0, float(value)),), normalization="unnormalized")

    @property
    def degree(self) -> int:
        return max((l for l, _, _ in self.coefficients), default=0)

    @property
    def is_constant(self) -> bool:
        return all(l == 0 or c == 0.0 for l, _, c in self.coefficients)

    def ambient_jet(self, points):
        """Value, ambient gradient (..., 3) and ambient Hessian (..., 3, 3)."""
        pts = np.asarray(points, dtype=float)
        x, y, z = pts[..., 0], pts[..., 1], pts[..., 2]
        value = np.zeros_like(x)
        grad = np.zeros(pts.shape)
        hess = np.zeros(pts.shape + (3,))
        for l, m, c in self.coefficients:
            if c == 0.0:
                continue
            scale = c * _normalization(l, m, self.normalization)
            p0, p1, p2 = _legendre_jet(l, abs(m))
            q, q1, q2 = p0(z), p1(z), p2(z)
            t, tx, ty, txx, txy, tyy = _azimuthal_jet(m, x, y)
            value += scale * t * q
            grad[..., 0] += scale * tx * q
            grad[..., 1] += scale * ty * q
            grad[..., 2] += scale * t * q1
            hess[..., 0, 0] += scale * txx * q
            hess[..., 0, 1] += scale * txy * q
            hess[..., 1, 1] += scale * tyy * q
            hess[..., 0, 2] += scale * tx * q1
            hess[..., 1, 2] += scale * ty * q1
            hess[..., 2, 2] += scale * t * q2
        hess[..., 1, 0] = hess[..., 0, 1]
        hess[..., 2, 0] = hess[..., 0, 2]
        hess[..., 2, 1] = hess[..., 1, 2]
        return value, grad, hess

    def value(self, points):
        return self.ambient_jet(points)[0]

    def intrinsic_gradient(self, points):
        """Tangential gradient as ambient 3-vectors, vectorized over points."""
        pts = np.asarray(points, dtype=float)
        _, grad, _ = self.ambient_jet(pts)
        radial = np.sum(grad * pts, axis=-1, keepdims=True)
        return grad - radial * pts

    def tangential_jet(self, point, chart: TangentChart | None = None) -> ThicknessJet:
        p = np.asarray(point, dtype=float)
        chart = chart or frame_sphere(p)
        basis = chart.basis
        value, grad, hess = self.ambient_jet(p)
        g = basis.T @ grad
        h = basis.T @ hess @ basis - float(np.dot(p, grad)) * np.eye(2)
        return ThicknessJet(value=float(value), gradient=g, hessian=0.5 * (h + h.T))

    def to_json(self) -> dict:
        return {
            "sphere_harmonics": {
                "coeffs": [{"l": int(l), "m": int(m), "c": float(c)} for l, m, c in self.coefficients],
                "normalization": self.normalization,
            }
        }


def _check_unit(point, tol: float = 1e-10) -> np.ndarray:
    p = np.asarray(point, dtype=float)
    if abs(np.linalg.norm(p) - 1.0) > tol:
        raise ValueError(f"point {p} is not on the unit sphere")
    return p


def frame_sphere(point) -> TangentChart:
    """Orthonormal tangent pair from Gram-Schmidt against the least-aligned axis."""
    p = _check_unit(point)
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(p)))] = 1.0
    e1 = axis - np.dot(axis, p) * p
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(p, e1)
    return TangentChart(base=p, e1=e1, e2=e2)


def rotated_chart(chart: TangentChart, angle: float) -> TangentChart:
    c, s = np.cos(angle), np.sin(angle)
    return TangentChart(base=chart.base, e1=c * chart.e1 + s * chart.e2, e2=-s * chart.e1 + c * chart.e2)


def transport_chart(chart: TangentChart, target) -> TangentChart:
    """Carry a chart to another point by the rotation along the connecting great circle."""
    p, q = chart.base, np.asarray(target, dtype=float)
    axis = np.cross(p, q)
    s = float(np.linalg.norm(axis))
    if s == 0.0:
        return TangentChart(base=q, e1=chart.e1, e2=chart.e2)
    k = axis / s
    c = float(np.dot(p, q))

    def rotate(v):
        return v * c + np.cross(k, v) * s + k * np.dot(k, v) * (1.0 - c)

    return TangentChart(base=q, e1=rotate(chart.e1), e2=rotate(chart.e2))


def exp_map(point, v):
    p = np.asarray(point, dtype=float)
    v = np.asarray(v, dtype=float)
    n = float(np.linalg.norm(v))
    if n == 0.0:
        return p.copy()
    return np.cos(n) * p + np.sin(n) * (v / n)


def log_map(point, x):
    """Tangent vector at point whose geodesic reaches x at time 1."""
    p = np.asarray(point, dtype=float)
    x = np.asarray(x, dtype=float)
    perp = x - np.dot(x, p) * p
    s = float(np.linalg.norm(perp))
    if s == 0.0:
        return np.zeros(3)
    angle = np.arctan2(s, float(np.dot(x, p)))
    return angle * perp / s


def sh_jet(field: SphericalHarmonicField, point, chart: TangentChart | None = None, h: float = config.FD_STEP) -> ThicknessJet:
    """Intrinsic value, gradient and Hessian by finite differences along chart geodesics."""
    p = _check_unit(point)
    chart = chart or frame_sphere(p)
    basis = chart.basis
    f0 = float(field.value(p))

    def along(w):
        direction = basis @ w
        return lambda s: field.value(exp_map(p, s * direction))

    grad = np.zeros(2)
    seconds = {}
    for i, w in enumerate(np.eye(2)):
        _, d1, d2, _, _ = derivatives_1d(along(w), h, f0=f0)
        grad[i] = float(d1)
        seconds[i] = float(d2)

    def second(w):
        for i, e in enumerate(np.eye(2)):
            if np.array_equal(w, e):
                return seconds[i]
        return float(derivatives_1d(along(w), h, f0=f0)[2])

    hess = directional_hessian(second, 2)
    return ThicknessJet(value=f0, gradient=grad, hessian=0.5 * (hess + hess.T))


def ray_first_hit_sphere(origin, direction) -> np.ndarray:
    """Nearest forward intersection with the unit sphere (stable quadratic formula)."""
    o = np.asarray(origin, dtype=float)
    v = np.asarray(direction, dtype=float)
    norm_o = np.linalg.norm(o)
    b = 2.0 * float(np.dot(v, o))
    c = (norm_o + 1.0) * (norm_o - 1.0)
    disc = b * b - 4.0 * c
    if disc < 0.0:
        raise RayMissError("ray misses the unit sphere", o, v)
    q = -0.5 * (b + np.copysign(np.sqrt(disc), b))
    roots = [r for r in (q, c / q if q != 0.0 else np.inf) if r >= 0.0]
    if not roots:
        raise RayMissError("unit sphere lies behind the ray origin", o, v)
    return o + min(roots) * v


def fibonacci_sphere(n: int) -> np.ndarray:
    """Quasi-uniform golden-angle lattice of n points on S^2."""
    i = np.arange(n, dtype=float)
    z = 1.0 - (2.0 * i + 1.0) / n
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    phi = i * np.pi * (3.0 - np.sqrt(5.0))
    return np.column_stack((r * np.cos(phi), r * np.sin(phi), z))


def to_spherical(point) -> tuple[float, float]:
    """(colatitude, longitude) of a unit vector."""
    p = np.asarray(point, dtype=float)
    return float(np.arccos(np.clip(p[2], -1.0, 1.0))), float(np.arctan2(p[1], p[0]))


def from_spherical(theta: float, phi: float) -> np.ndarray:
    return np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])
