"""
Five-point central differences with one level of Richardson extrapolation.

The stencils at step h (error O(h^4)) and at h/2 share the evaluations at
+-h, so a first-and-second derivative estimate costs seven evaluations of the
function. Combining the two levels as (16 D(h/2) - D(h)) / 15 cancels the
h^4 term; |D(h/2) - D(h)| is returned as a convergence monitor.

Functions may be vector valued; everything is computed with numpy arithmetic.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

__all__ = ["derivatives_1d", "first_derivative", "jacobian", "directional_hessian"]


def _d1(fm2, fm1, fp1, fp2, h):
    return (-fp2 + 8.0 * fp1 - 8.0 * fm1 + fm2) / (12.0 * h)


def _d2(fm2, fm1, f0, fp1, fp2, h):
    return (-fp2 + 16.0 * fp1 - 30.0 * f0 + 16.0 * fm1 - fm2) / (12.0 * h * h)


def derivatives_1d(func: Callable[[float], np.ndarray], h: float, f0=None):
    """First and second derivative of func at 0.

    Returns (f0, d1, d2, d1_discrepancy, d2_discrepancy).
    """
    f0 = np.asarray(func(0.0) if f0 is None else f0, dtype=float)
    fh = {s: np.asarray(func(s * h), dtype=float) for s in (-2.0, -1.0, -0.5, 0.5, 1.0, 2.0)}

    d1_h = _d1(fh[-2.0], fh[-1.0], fh[1.0], fh[2.0], h)
    d1_half = _d1(fh[-1.0], fh[-0.5], fh[0.5], fh[1.0], 0.5 * h)
    d2_h = _d2(fh[-2.0], fh[-1.0], f0, fh[1.0], fh[2.0], h)
    d2_half = _d2(fh[-1.0], fh[-0.5], f0, fh[0.5], fh[1.0], 0.5 * h)

    d1 = (16.0 * d1_half - d1_h) / 15.0
    d2 = (16.0 * d2_half - d2_h) / 15.0
    return (
        f0,
        d1,
        d2,
        float(np.max(np.abs(d1_half - d1_h))),
        float(np.max(np.abs(d2_half - d2_h))),
    )


def first_derivative(func: Callable[[float], np.ndarray], h: float):
    """First derivative at 0 without evaluating func(0). Returns (d1, discrepancy)."""
    fh = {s: np.asarray(func(s * h), dtype=float) for s in (-2.0, -1.0, -0.5, 0.5, 1.0, 2.0)}
    d1_h = _d1(fh[-2.0], fh[-1.0], fh[1.0], fh[2.0], h)
    d1_half = _d1(fh[-1.0], fh[-0.5], fh[0.5], fh[1.0], 0.5 * h)
    return (16.0 * d1_half - d1_h) / 15.0, float(np.max(np.abs(d1_half - d1_h)))


def jacobian(func: Callable[[np.ndarray], np.ndarray], n_in: int, h: float):
    """Jacobian at the origin of a map from R^n_in. Returns (matrix, discrepancy)."""
    columns = []
    discrepancy = 0.0
    for j in range(n_in):
        e = np.zeros(n_in)
        e[j] = 1.0
        col, disc = first_derivative(lambda s, e=e: func(s * e), h)
        columns.append(np.atleast_1d(col))
        discrepancy = max(discrepancy, disc)
    return np.column_stack(columns), discrepancy


def directional_hessian(second: Callable[[np.ndarray], float], dim: int) -> np.ndarray:
    """Assemble a symmetric Hessian from second directional derivatives.

    `second(w)` must return q(w) = w^T H w for a unit vector w. Off-diagonal
    entries follow from polarization: with w+- = (e_i +- e_j) / sqrt(2),
    H_ij = (q(w+) - q(w-)) / 2.
    """
    eye = np.eye(dim)
    hess = np.zeros((dim, dim))
    for i in range(dim):
        hess[i, i] = second(eye[i])
    for i in range(dim):
        for j in range(i + 1, dim):
            plus = second((eye[i] + eye[j]) / np.sqrt(2.0))
            minus = second((eye[i] - eye[j]) / np.sqrt(2.0))
            hess[i, j] = hess[j, i] = 0.5 * (plus - minus)
    return hess
