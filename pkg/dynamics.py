"""
Iteration of the return map and audits of the resulting orbits.
"""
from __future__ import annotations

from logging import getLogger

import numpy as np
from scipy.spatial import cKDTree

import config
from errors import GeometryDegenerateError, RayMissError
from models import (
    BasinSample,
    BasinSummary,
    CycleCandidate,
    CycleReport,
    DescentReport,
    DescentViolation,
    EquilibriumRecord,
    OrbitRecord,
    OrbitStatus,
    OrbitTrace,
)
from workers import parallel_map

_LOGGER = getLogger(__name__)

__all__ = ["iterate_orbit", "descent_audit", "cycle_audit", "basin_scan", "jitter_seeds"]

# d(F(c)) == d(c) is taken literally: a change below a few ulps of d.
_EQUALITY_ULPS = 4.0


def iterate_orbit(
    system,
    c0,
    max_steps: int = config.MAX_STEPS,
    tol_disp: float = config.TOL_DISP,
    tol_grad: float = config.TOL_GRAD,
) -> OrbitTrace:
    """Iterate F from c0 until displacement and gradient are both below tolerance.

    Record n holds c_n with |F(c_n) - c_n| as its displacement, so a run that
    exhausts max_steps carries max_steps + 1 records.
    """
    if max_steps < 1:
        raise ValueError(f"max_steps must be at least 1, got {max_steps}")

    trace = OrbitTrace(seed=system.params(c0))
    c = c0
    for step in range(max_steps + 1):
        try:
            jet = system.jet(c)
            image = system.return_map(c)
        except (RayMissError, GeometryDegenerateError) as exc:
            _LOGGER.warning("orbit from %s stopped at step %d: %s", trace.seed, step, exc)
            trace.status = OrbitStatus.ERROR
            trace.error = str(exc)
            return trace

        displacement = system.distance(image, c)
        trace.records.append(
            OrbitRecord(
                step=step,
                params=system.params(c),
                point=np.array(system.point(c), dtype=float),
                d=jet.value,
                lyapunov=0.5 * jet.value**2,
                grad_norm=jet.grad_norm,
                displacement=displacement,
            )
        )
        if displacement <= tol_disp and jet.grad_norm <= tol_grad:
            trace.status = OrbitStatus.CONVERGED
            trace.limit = np.array(system.point(c), dtype=float)
            trace.limit_params = system.params(c)
            _LOGGER.debug("orbit from %s converged after %d steps", trace.seed, step)
            return trace
        c = image

    trace.status = OrbitStatus.MAX_STEPS
    return trace


def descent_audit(trace: OrbitTrace, slack: float = config.DESCENT_SLACK) -> DescentReport:
    """Check that d never increases along the orbit and only stays put at critical points.

    An increase beyond `slack` is an "increase" violation. A step that leaves d
    unchanged to rounding while the gradient is still clearly nonzero
    (|grad d|^2 above slack) is a "stall" violation.
    """
    report = DescentReport(steps_audited=max(len(trace.records) - 1, 0), slack=slack)
    for before, after in zip(trace.records, trace.records[1:]):
        change = after.d - before.d
        report.max_increase = max(report.max_increase, change)
        if change > slack:
            report.violations.append(DescentViolation(step=before.step, kind="increase", change=change))
        elif abs(change) <= _EQUALITY_ULPS * np.spacing(max(abs(before.d), 1.0)) and before.grad_norm**2 > slack:
            report.violations.append(DescentViolation(step=before.step, kind="stall", change=change))
    if report.violations:
        _LOGGER.info(
            "descent audit of orbit from %s: %d violations, max increase %.3g",
            trace.seed,
            len(report.violations),
            report.max_increase,
        )
    return report


def cycle_audit(traces, dist_tol: float = config.CYCLE_DIST_TOL) -> CycleReport:
    """Look for returns of non-fixed iterates to an earlier non-fixed iterate."""
    traces = list(traces)
    report = CycleReport(traces_scanned=len(traces), dist_tol=dist_tol)
    for index, trace in enumerate(traces):
        if not trace.records:
            continue
        if trace.records[-1].displacement <= dist_tol:
            report.trivial_fixed += 1
            report.candidates.append(
                CycleCandidate(trace_index=index, start_step=trace.records[-1].step, period=1, distance=trace.records[-1].displacement)
            )
        moving = [r for r in trace.records if r.displacement > dist_tol]
        if len(moving) < 2:
            continue
        points = np.array([r.point for r in moving])
        steps = np.array([r.step for r in moving])
        pairs = cKDTree(points).query_pairs(r=dist_tol, output_type="ndarray")
        if len(pairs) == 0:
            continue
        periods = np.abs(steps[pairs[:, 1]] - steps[pairs[:, 0]])
        best = int(np.argmin(periods))
        i, j = sorted(pairs[best], key=lambda k: steps[k])
        candidate = CycleCandidate(
            trace_index=index,
            start_step=int(steps[i]),
            period=int(periods[best]),
            distance=float(np.linalg.norm(points[i] - points[j])),
        )
        report.candidates.append(candidate)
        _LOGGER.warning("orbit %d returns to step %d after %d steps", index, candidate.start_step, candidate.period)
    return report


def jitter_seeds(system, seeds, amount: float = config.BASIN_JITTER) -> list:
    """Shift every seed by `amount` along the first chart direction."""
    shift = np.zeros(system.dimension - 1)
    shift[0] = amount
    return [system.exp(c, shift) for c in seeds]


def basin_scan(
    system,
    seeds,
    records: list[EquilibriumRecord],
    max_steps: int = config.MAX_STEPS,
    tol_disp: float = config.TOL_DISP,
    tol_grad: float = config.TOL_GRAD,
    generic_basin: bool = False,
) -> tuple[list[BasinSample], BasinSummary, list[OrbitTrace]]:
    """Run one orbit per seed and label each limit with the nearest cataloged equilibrium."""
    seeds = list(seeds)
    if generic_basin:
        seeds = jitter_seeds(system, seeds)
    traces = parallel_map(lambda c: iterate_orbit(system, c, max_steps, tol_disp, tol_grad), seeds)

    radius = max(10.0 * tol_disp, config.MERGE_DISTANCE)
    tree = cKDTree(np.array([r.point for r in records])) if records else None
    samples: list[BasinSample] = []
    counts: dict[int, int] = {}
    unassigned = 0
    for trace in traces:
        limit_id = None
        if trace.status == OrbitStatus.CONVERGED and tree is not None:
            distance, k = tree.query(trace.limit)
            if distance <= radius:
                limit_id = records[int(k)].identifier
        if limit_id is None:
            unassigned += 1
        else:
            counts[limit_id] = counts.get(limit_id, 0) + 1
        samples.append(
            BasinSample(seed=trace.seed, limit_id=limit_id, steps=len(trace.records) - 1, status=trace.status)
        )

    degenerate = bool(system.field.is_constant)
    summary = BasinSummary(
        seeds=len(seeds),
        counts=dict(sorted(counts.items())),
        unassigned=unassigned,
        degenerate=degenerate,
        note="degenerate: continuum of fixed points" if degenerate else "",
    )
    if unassigned and not degenerate:
        _LOGGER.warning("%d of %d seeds did not reach a cataloged equilibrium", unassigned, len(seeds))
    return samples, summary, traces
