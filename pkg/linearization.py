"""
Linear behaviour of the return map at an equilibrium c*.

The finite-difference DF is authoritative. The preconditioner is defined from
it as A = (I - DF) Hess^-1, which makes DF = I - A Hess hold by construction;
every model prediction (scalar model, curvature-gap formula) is reported as a
deviation from DF rather than assumed.
"""
from __future__ import annotations

from logging import getLogger

import numpy as np

import config
from errors import DegenerateEquilibriumError, GeometryDegenerateError, RayMissError
from models import (
    Classification,
    CurvatureGapReport,
    EquilibriumRecord,
    LinearizationReport,
    LocalEstimates,
    NormalForm,
)
from sphere3d import transport_chart

_LOGGER = getLogger(__name__)

__all__ = [
    "operator_A",
    "stability_classify",
    "classify_spectrum",
    "curvature_gap_mu",
    "curvature_gap_spectrum",
    "local_estimates",
    "normal_form_frame",
]

CONVENTIONS = ("ratio", "product")
_MIN_ESTIMATE_SAMPLES = 32


def _require_nondegenerate(record: EquilibriumRecord) -> None:
    eig = np.abs(record.hessian_eigenvalues)
    scale = float(np.max(eig)) if eig.size else 0.0
    if record.degenerate or eig.size == 0 or float(np.min(eig)) <= config.DEGENERACY_RATIO * scale:
        raise DegenerateEquilibriumError(f"Hessian at equilibrium {record.identifier} is singular")


def _real_if_close(values: np.ndarray) -> np.ndarray:
    return np.real_if_close(values, tol=1e6)


def operator_A(system, record: EquilibriumRecord) -> LinearizationReport:
    """DF at c*, the preconditioner A = (I - DF) Hess^-1 and its diagnostics."""
    _require_nondegenerate(record)
    c = record.point if system.dimension == 3 else record.params[0]
    chart = system.chart(c)
    jet = system.jet(c, chart)
    estimate = system.return_jacobian(c, chart)
    df = estimate.matrix
    hess = jet.hessian
    eye = np.eye(df.shape[0])

    a = (eye - df) @ np.linalg.inv(hess)
    a_sym = 0.5 * (a + a.T)
    a_sym_min = float(np.min(np.linalg.eigvalsh(a_sym)))
    try:
        metric = np.linalg.inv(a)
    except np.linalg.LinAlgError:
        metric = None

    report = LinearizationReport(
        identifier=record.identifier,
        df=df,
        df_spectrum=_real_if_close(np.linalg.eigvals(df)),
        df_discrepancy=estimate.discrepancy,
        hessian_spectrum=np.linalg.eigvalsh(hess),
        a_matrix=a,
        a_eigenvalues=_real_if_close(np.linalg.eigvals(a)),
        symmetry_defect=float(np.linalg.norm(a - a.T)),
        a_sym_min_eigenvalue=a_sym_min,
        spd=a_sym_min > 0.0,
        effective_metric=metric,
        consistency_defect=float(np.linalg.norm(df - (eye - a @ hess))),
        scalar_model_defect=float(np.linalg.norm(df - (eye - 2.0 * jet.value * hess))),
    )
    if not report.spd:
        _LOGGER.info("A at equilibrium %d is not positive definite (min eig of sym part %.4g)", record.identifier, a_sym_min)
    return report


def classify_spectrum(eigenvalues, tol: float = config.NEUTRAL_BAND) -> Classification:
    magnitudes = np.abs(np.asarray(eigenvalues))
    if np.any(np.abs(magnitudes - 1.0) <= tol):
        return Classification.NEUTRAL
    if np.all(magnitudes < 1.0 - tol):
        return Classification.ATTRACTING
    if np.all(magnitudes > 1.0 + tol):
        return Classification.REPELLING
    return Classification.SADDLE


def stability_classify(
    report: LinearizationReport, record: EquilibriumRecord | None = None, tol: float = config.NEUTRAL_BAND
) -> LinearizationReport:
    """Classify by the spectrum of DF and check the step condition eig(A Hess) in (0, 2).

    With a record, also compares against the Morse index: when A is SPD and the
    step condition holds, minima must attract, maxima repel and saddles stay saddles.
    """
    report.classification = classify_spectrum(report.df_spectrum, tol)
    report.spectral_radius = float(np.max(np.abs(report.df_spectrum)))
    # A Hess = I - DF, so its spectrum is 1 - eig(DF).
    step = 1.0 - np.asarray(report.df_spectrum)
    step_ok = bool(np.all(np.abs(np.imag(step)) <= tol) and np.all((np.real(step) > 0.0) & (np.real(step) < 2.0)))
    report.spectral_step_ok = step_ok

    if record is not None:
        record.df_spectrum = report.df_spectrum
        record.classification = report.classification
        if record.morse_index is not None:
            dim = report.df.shape[0]
            if not (report.spd and step_ok):
                report.coherence = "assumptions-unmet"
            else:
                expected = (
                    Classification.ATTRACTING
                    if record.morse_index == 0
                    else Classification.REPELLING
                    if record.morse_index == dim
                    else Classification.SADDLE
                )
                report.coherence = "coherent" if expected == report.classification else "incoherent"
                if report.coherence == "incoherent":
                    _LOGGER.warning(
                        "equilibrium %d: index %d but classified %s",
                        record.identifier,
                        record.morse_index,
                        report.classification.value,
                    )
    return report


def curvature_gap_mu(d_star: float, kappa_core, kappa_outer, convention: str) -> np.ndarray:
    """Predicted DF eigenvalue per principal direction under a curvature convention."""
    kc = np.asarray(kappa_core, dtype=float)
    ko = np.asarray(kappa_outer, dtype=float)
    if convention == "ratio":
        denominator = 1.0 - d_star * ko
        if np.any(denominator == 0.0):
            raise GeometryDegenerateError("focal round trip: 1 - d* kappa of the outer boundary vanishes")
        return (1.0 - d_star * kc) / denominator
    if convention == "product":
        return (1.0 + d_star * kc) * (1.0 - d_star * ko)
    raise ValueError(f"unknown curvature convention {convention!r}")


def _label(value: float, positive: str, negative: str) -> str:
    if value > 0.0:
        return positive
    if value < 0.0:
        return negative
    return "neutral"


def curvature_gap_spectrum(system, record: EquilibriumRecord, convention: str = "ratio") -> CurvatureGapReport:
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown curvature convention {convention!r}")
    c = record.point if system.dimension == 3 else record.params[0]
    chart = system.chart(c)
    df = system.return_jacobian(c, chart).matrix
    h_eig, h_vec = np.linalg.eigh(record.hessian)

    aligned = h_vec.T @ df @ h_vec
    off = aligned - np.diag(np.diag(aligned))
    offdiag_mass = float(np.linalg.norm(off) / max(np.linalg.norm(aligned), np.finfo(float).tiny))
    report = CurvatureGapReport(
        identifier=record.identifier, applicable=True, reason="", convention=convention, offdiag_mass=offdiag_mass
    )
    if offdiag_mass > config.ALIGNMENT_MAX_OFFDIAG:
        report.applicable = False
        report.reason = "principal directions not aligned by the round trip"
        return report

    report.d_star = float(record.d)
    report.kappa_core = [float(k) for k in system.core_curvatures(c)]
    report.kappa_outer = [float(k) for k in system.outer_curvatures(c, h_eig)]
    eig = np.diag(aligned)
    report.df_eigenvalues = [float(e) for e in eig]
    try:
        predictions = {name: curvature_gap_mu(report.d_star, report.kappa_core, report.kappa_outer, name) for name in CONVENTIONS}
    except GeometryDegenerateError as exc:
        report.applicable = False
        report.reason = str(exc)
        return report
    report.mu = [float(m) for m in predictions[convention]]
    report.deviations = {name: [float(v) for v in np.abs(mu - eig)] for name, mu in predictions.items()}
    report.gap_labels = [
        _label(kc - ko, "contracting", "expanding") for kc, ko in zip(report.kappa_core, report.kappa_outer)
    ]
    report.spectral_labels = [_label(1.0 - abs(e), "contracting", "expanding") for e in eig]
    return report


def _estimate_offsets(dimension: int, radius: float, samples: int) -> np.ndarray:
    if dimension == 2:
        magnitudes = np.linspace(0.5 * radius, radius, samples // 2)
        return np.concatenate((magnitudes, -magnitudes))[:, None]
    angles = 2.0 * np.pi * np.arange(samples) / samples
    return radius * np.column_stack((np.cos(angles), np.sin(angles)))


def local_estimates(
    system,
    record: EquilibriumRecord,
    report: LinearizationReport | None = None,
    ladder=config.RADIUS_LADDER,
    samples_per_radius: int = config.SAMPLES_PER_RADIUS,
) -> LocalEstimates:
    """Quadratic bounds, descent constant, contraction rate and expansion remainder near c*.

    The remainder is R(c) = F(c) - c + A grad d(c) in the chart at c*, reported
    as max |R| / |c - c*| per radius of the ladder.
    """
    report = report or operator_A(system, record)
    a = report.a_matrix
    star = record.point if system.dimension == 3 else record.params[0]
    chart = system.chart(star)
    is_minimum = record.morse_index == 0 if record.morse_index is not None else bool(np.all(record.hessian_eigenvalues > 0.0))

    estimates = LocalEstimates(
        identifier=record.identifier, radii=list(ladder), samples_per_radius=samples_per_radius, remainder_ratios=[], q=None
    )
    quad_ratios: list[float] = []
    gammas: list[float] = []
    q_samples: list[float] = []
    for radius in ladder:
        ratios = []
        q_samples = []
        for offset in _estimate_offsets(system.dimension, radius, samples_per_radius):
            c = system.exp(star, offset, chart)
            try:
                x = system.log(star, c, chart)
                image = system.return_map(c)
                y = system.log(star, image, chart)
                local_chart = transport_chart(chart, c) if chart is not None else None
                jet = system.jet(c, local_chart)
                d_image = float(system.field.value(image))
            except (RayMissError, GeometryDegenerateError):
                continue
            size = float(np.linalg.norm(x))
            remainder = y - x + a @ jet.gradient
            ratios.append(float(np.linalg.norm(remainder)) / size)
            q_samples.append(float(np.linalg.norm(y)) / size)
            quad_ratios.append((jet.value - record.d) / size**2)
            if jet.grad_norm > 0.0:
                gammas.append((jet.value - d_image) / jet.grad_norm**2)
        if len(ratios) < min(samples_per_radius, _MIN_ESTIMATE_SAMPLES):
            estimates.partial = True
            estimates.notes.append(f"only {len(ratios)} admissible samples at radius {radius:g}")
        estimates.remainder_ratios.append(max(ratios) if ratios else float("nan"))

    estimates.q = max(q_samples) if q_samples else None
    if is_minimum:
        estimates.alpha = float(min(quad_ratios)) if quad_ratios else None
        estimates.beta = float(max(quad_ratios)) if quad_ratios else None
        estimates.gamma = float(min(gammas)) if gammas else None
        if estimates.gamma is not None and estimates.gamma <= 0.0:
            _LOGGER.warning("equilibrium %d: d does not decrease along F nearby (gamma=%.4g)", record.identifier, estimates.gamma)
    else:
        estimates.partial = True
        estimates.notes.append("alpha, beta and gamma are fitted at minima only")
    return estimates


def normal_form_frame(record: EquilibriumRecord, report: LinearizationReport) -> NormalForm:
    """Morse coordinates in which Hess = J_lambda and F(x) = x - A0 J_lambda x to first order."""
    _require_nondegenerate(record)
    eig, vec = np.linalg.eigh(record.hessian)
    basis = vec / np.sqrt(np.abs(eig))
    j_lambda = np.diag(np.sign(eig))
    inverse = np.linalg.inv(basis)
    a0 = inverse @ report.a_matrix @ inverse.T
    residual = float(np.linalg.norm(inverse @ report.df @ basis - (np.eye(len(eig)) - a0 @ j_lambda)))
    if residual > 1e-6:
        _LOGGER.warning("normal form at equilibrium %d: similarity residual %.3g", record.identifier, residual)
    return NormalForm(identifier=record.identifier, basis=basis, j_lambda=j_lambda, a0=a0, similarity_residual=residual)
