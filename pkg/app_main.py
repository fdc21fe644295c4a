"""
Command orchestration: one scenario, one command, one artifact bundle.

Each command runs in a worker thread; library batches inside it fan out
through `workers.parallel_map` and come back in input order, so bundles are
identical for any THICKSCAPE_THREADS.
"""
import asyncio
from dataclasses import dataclass
from logging import getLogger

import numpy as np

import config
from boundary2d import convexity_audit
from dynamics import basin_scan, cycle_audit, descent_audit, iterate_orbit
from emit_outputs import serialize_dataclass
from errors import DegenerateEquilibriumError, GeometryDegenerateError, RayMissError, UsageError
from linearization import (
    CONVENTIONS,
    curvature_gap_spectrum,
    local_estimates,
    normal_form_frame,
    operator_A,
    stability_classify,
)
from models import Artifact, ArtifactBundle, Classification, OrbitStatus, RunOptions, Scenario
from morse import fixed_point_crosscheck, locate_equilibria, morse_catalog, topology_audit
from returnmap import ReturnMapSystem
from scenario import build_system, scenario_hash, seed_points
from thickness import admissibility_audit
from workers import parallel_map

_LOGGER = getLogger(__name__)

COMMANDS = ("audit", "analyze", "orbit", "basins", "linearize", "verify")

IDENTITY_SAMPLES = {2: 360, 3: 500}
IDENTITY_TOLERANCE = {2: 1e-9, 3: 1e-7}
IDENTITY_JACOBIAN_POINTS = 10
IDENTITY_JACOBIAN_TOLERANCE = 1e-7
CROSSCHECK_SAMPLES = 200
RADIAL_SAMPLES = 32
RANGE_SAMPLES = 64
JET_TOLERANCE = 1e-6
CONSISTENCY_TOLERANCE = 1e-8
REMAINDER_DECAY = 2.0
# Remainder ratios below this are finite-difference noise, not Taylor remainder.
REMAINDER_NOISE_FLOOR = 1e-6
CONVERGED_FRACTION = 0.99
Q_SPECTRAL_GAP = 0.05


@dataclass
class _Run:
    scenario: Scenario
    system: ReturnMapSystem
    options: RunOptions

    @property
    def tolerances(self):
        return self.scenario.tolerances

    def param_names(self) -> list[str]:
        return ["theta"] if self.scenario.dimension == 2 else ["colatitude", "longitude"]

    def point_names(self) -> list[str]:
        return ["x", "y"] if self.scenario.dimension == 2 else ["x", "y", "z"]

    def max_steps(self) -> int:
        steps = self.options.max_steps if self.options.max_steps is not None else self.scenario.max_steps
        if steps < 1:
            raise UsageError(f"max_steps must be at least 1, got {steps}")
        return steps

    def seeds(self) -> list:
        return seed_points(self.scenario, self.system, self.options.seeds, self.options.rng_seed)


@dataclass
class _Linearized:
    report: object
    estimates: object
    normal_form: object
    gap: object


def _json(kind: str, payload) -> Artifact:
    return Artifact(kind=kind, extension="json", payload=payload)


def _csv(kind: str, header: list[str], rows: list[list]) -> Artifact:
    return Artifact(kind=kind, extension="csv", payload={"header": header, "rows": rows})


def _catalog(run: _Run):
    records = locate_equilibria(run.system, tol_grad=run.tolerances.tol_grad)
    return morse_catalog(records)


def _classify_all(run: _Run, catalog) -> list:
    """Linearize every nondegenerate equilibrium; classification lands on the records."""

    def classify(record):
        if record.degenerate:
            return None
        try:
            return stability_classify(operator_A(run.system, record), record)
        except (DegenerateEquilibriumError, RayMissError, GeometryDegenerateError) as exc:
            _LOGGER.warning("equilibrium %d not linearized: %s", record.identifier, exc)
            return None

    return parallel_map(classify, catalog.records)


def _linearize_all(run: _Run, catalog) -> list[_Linearized]:
    reports = _classify_all(run, catalog)

    def extend(pair):
        record, report = pair
        estimates = local_estimates(run.system, record, report)
        frame = normal_form_frame(record, report)
        gap = curvature_gap_spectrum(run.system, record, run.options.convention)
        return _Linearized(report, estimates, frame, gap)

    pairs = [(r, rep) for r, rep in zip(catalog.records, reports) if rep is not None]
    return parallel_map(extend, pairs)


def _trace_rows(run: _Run, trace) -> list[list]:
    return [[r.step, *r.params, *r.point, r.d, r.lyapunov, r.grad_norm, r.displacement] for r in trace.records]


def _trace_kind(index: int, count: int) -> str:
    return f"trace-{index:0{max(3, len(str(count - 1)))}d}"


def _findings(traces, descents, catalog, linearized: list[_Linearized]) -> list[str]:
    """Measured behaviour that contradicts descent, local attraction or the SPD preconditioner."""
    findings = []
    increasing = [i for i, rep in enumerate(descents) if any(v.kind == "increase" for v in rep.violations)]
    if increasing:
        worst = max(rep.max_increase for rep in descents)
        findings.append(f"d increases along {len(increasing)} of {len(traces)} orbits (max single-step increase {worst:.6g})")
    for item in linearized:
        record = next(r for r in catalog.records if r.identifier == item.report.identifier)
        if record.morse_index == 0 and item.report.classification != Classification.ATTRACTING:
            findings.append(
                f"minimum {record.identifier} is {item.report.classification.value} "
                f"(spectral radius of DF {item.report.spectral_radius:.6g})"
            )
        if record.morse_index == len(record.hessian_eigenvalues) and item.report.classification == Classification.ATTRACTING:
            findings.append(f"maximum {record.identifier} is attracting")
        if not item.report.spd:
            findings.append(
                f"A at equilibrium {record.identifier} is not positive definite "
                f"(min eigenvalue of its symmetric part {item.report.a_sym_min_eigenvalue:.6g})"
            )
        if item.estimates.gamma is not None and item.estimates.gamma <= 0.0:
            findings.append(f"d does not decrease along F near minimum {record.identifier} (gamma {item.estimates.gamma:.6g})")
        gap = item.gap
        if gap.applicable and not gap.labels_consistent:
            findings.append(
                f"curvature-gap labels {gap.gap_labels} disagree with DF spectrum {gap.spectral_labels} "
                f"at equilibrium {record.identifier}"
            )
    return findings


def cmd_audit(run: _Run) -> tuple[list[Artifact], int]:
    admissibility = admissibility_audit(run.system)
    payload = {"admissibility": serialize_dataclass(admissibility)}
    passed = admissibility.passed
    if run.scenario.dimension == 2:
        convexity = convexity_audit(run.system.core)
        payload["convexity"] = serialize_dataclass(convexity)
        passed = passed and convexity.passed
    payload["passed"] = passed
    return [_json("admissibility", payload)], 0


def cmd_analyze(run: _Run) -> tuple[list[Artifact], int]:
    catalog = _catalog(run)
    _classify_all(run, catalog)
    topology = topology_audit(catalog.records, run.scenario.topology)
    crosscheck = fixed_point_crosscheck(run.system, catalog.records, CROSSCHECK_SAMPLES, run.tolerances.tol_grad)
    equilibria = {"catalog": serialize_dataclass(catalog), "fixed_point_crosscheck": crosscheck}
    topology_payload = serialize_dataclass(topology)
    topology_payload["passed"] = topology.passed
    return [_json("equilibria", equilibria), _json("topology", topology_payload)], 0


def cmd_orbit(run: _Run) -> tuple[list[Artifact], int]:
    max_steps = run.max_steps()
    tol = run.tolerances
    seeds = run.seeds()
    traces = parallel_map(lambda c: iterate_orbit(run.system, c, max_steps, tol.tol_disp, tol.tol_grad), seeds)
    descents = [descent_audit(t, tol.slack) for t in traces]
    cycles = cycle_audit(traces)

    header = ["step", *run.param_names(), *run.point_names(), "d", "lyapunov", "grad_norm", "displacement"]
    artifacts = [_csv(_trace_kind(i, len(traces)), header, _trace_rows(run, t)) for i, t in enumerate(traces)]
    audit = {
        "orbits": [
            {
                "seed": t.seed,
                "status": t.status,
                "steps": len(t.records) - 1,
                "error": t.error,
                "descent": serialize_dataclass(rep),
                "descent_passed": rep.passed,
            }
            for t, rep in zip(traces, descents)
        ],
        "cycles": serialize_dataclass(cycles),
        "cycles_passed": cycles.passed,
        "descent_passed": all(rep.passed for rep in descents),
    }
    artifacts.append(_json("descent", audit))
    return artifacts, 0


def cmd_basins(run: _Run) -> tuple[list[Artifact], int]:
    max_steps = run.max_steps()
    tol = run.tolerances
    catalog = _catalog(run)
    samples, summary, _ = basin_scan(
        run.system, run.seeds(), catalog.records, max_steps, tol.tol_disp, tol.tol_grad, run.scenario.generic_basin
    )
    payload = {
        "summary": serialize_dataclass(summary),
        "equilibria": [{"identifier": r.identifier, "params": r.params, "morse_index": r.morse_index} for r in catalog.records],
        "samples": [serialize_dataclass(s) for s in samples],
    }
    header = ["seed_index", *run.param_names(), "limit_id", "steps", "status"]
    rows = [[i, *s.seed, s.limit_id, s.steps, s.status] for i, s in enumerate(samples)]
    return [_json("basins", payload), _csv("basin-samples", header, rows)], 0


def cmd_linearize(run: _Run) -> tuple[list[Artifact], int]:
    catalog = _catalog(run)
    linearized = _linearize_all(run, catalog)
    done = {item.report.identifier for item in linearized}
    skipped = [{"identifier": r.identifier, "reason": "degenerate Hessian"} for r in catalog.records if r.identifier not in done]

    reports = [
        {
            "report": serialize_dataclass(item.report),
            "estimates": serialize_dataclass(item.estimates),
            "normal_form": serialize_dataclass(item.normal_form),
        }
        for item in linearized
    ]
    gaps = [dict(serialize_dataclass(item.gap), labels_consistent=item.gap.labels_consistent) for item in linearized]

    dim = run.scenario.dimension - 1
    header = ["identifier", *run.param_names(), "morse_index", "classification"]
    for k in range(dim):
        header += [f"df_eig_{k + 1}_re", f"df_eig_{k + 1}_im"]
    header += ["spectral_radius", "a_spd"]
    rows = []
    by_id = {r.identifier: r for r in catalog.records}
    for item in linearized:
        record = by_id[item.report.identifier]
        eig = sorted(np.asarray(item.report.df_spectrum, dtype=complex), key=lambda z: (z.real, z.imag))
        cells = [record.identifier, *record.params, record.morse_index, item.report.classification]
        for z in eig:
            cells += [float(z.real), float(z.imag)]
        rows.append(cells + [item.report.spectral_radius, item.report.spd])

    return [
        _json("linearization", {"equilibria": reports, "skipped": skipped}),
        _json("curvature-gap", {"convention": run.options.convention, "reports": gaps}),
        _csv("spectra", header, rows),
    ], 0


def _row(check: str, passed, measured, threshold, detail: str = "") -> dict:
    status = "skipped" if passed is None else "pass" if passed else "fail"
    return {"check": check, "status": status, "measured": measured, "threshold": threshold, "detail": detail}


def _max_or_nan(values) -> float:
    values = [float(v) for v in values]
    return max(values) if values else float("nan")


def _identity_rows(run: _Run) -> list[dict]:
    dim = run.scenario.dimension
    if not run.system.field.is_constant:
        return [
            _row("parallel_identity", None, None, IDENTITY_TOLERANCE[dim], "thickness is not constant"),
            _row("parallel_identity_jacobian", None, None, IDENTITY_JACOBIAN_TOLERANCE, "thickness is not constant"),
        ]
    moved = parallel_map(run.system.displacement, run.system.sample(IDENTITY_SAMPLES[dim]))
    points = run.system.sample(IDENTITY_JACOBIAN_POINTS)
    eye = np.eye(dim - 1)
    defects = parallel_map(lambda c: float(np.linalg.norm(run.system.return_jacobian(c).matrix - eye)), points)
    worst, worst_df = max(moved), max(defects)
    return [
        _row("parallel_identity", worst <= IDENTITY_TOLERANCE[dim], worst, IDENTITY_TOLERANCE[dim]),
        _row("parallel_identity_jacobian", worst_df <= IDENTITY_JACOBIAN_TOLERANCE, worst_df, IDENTITY_JACOBIAN_TOLERANCE),
    ]


def _jet_error(run: _Run, c) -> float:
    chart = run.system.chart(c)
    exact = run.system.field.jet(c, chart)
    approx = run.system.field.fd_jet(c, chart)
    grad = np.linalg.norm(exact.gradient - approx.gradient) / max(1.0, np.linalg.norm(exact.gradient))
    hess = np.linalg.norm(exact.hessian - approx.hessian) / max(1.0, np.linalg.norm(exact.hessian))
    return float(max(grad, hess))


def _radial_error(run: _Run, c) -> float:
    errors = []
    for v in np.eye(run.scenario.dimension - 1):
        exact = run.system.radial_differential(c, v)
        approx = run.system.radial_differential_fd(c, v)
        errors.append(np.linalg.norm(exact - approx) / max(1.0, np.linalg.norm(exact)))
    return float(max(errors))


def _range_residual(run: _Run, c) -> float:
    try:
        return run.system.range_residual(c)
    except (RayMissError, GeometryDegenerateError):
        return float("inf")


def _geometry_rows(run: _Run) -> list[dict]:
    tol = run.tolerances
    admissibility = admissibility_audit(run.system)
    residual = max(parallel_map(lambda c: _range_residual(run, c), run.system.sample(RANGE_SAMPLES)))
    jets = max(parallel_map(lambda c: _jet_error(run, c), run.system.sample(CROSSCHECK_SAMPLES)))
    radial = max(parallel_map(lambda c: _radial_error(run, c), run.system.sample(RADIAL_SAMPLES)))
    return [
        _row(
            "admissibility",
            admissibility.passed,
            admissibility.min_thickness,
            tol.positivity_floor,
            f"min det {admissibility.min_det:.6g}, min outer turning {admissibility.min_outer_turning:.6g}, inward-normal pass rate {admissibility.oc_pass_rate:.4f}",
        ),
        _row("range_invariance", residual <= tol.ray_residual, residual, tol.ray_residual),
        _row("jet_crosscheck", jets <= JET_TOLERANCE, jets, JET_TOLERANCE, "relative error of analytic vs finite-difference jets"),
        _row("radial_differential", radial <= JET_TOLERANCE, radial, JET_TOLERANCE),
    ]


def _catalog_rows(run: _Run, catalog, linearized: list[_Linearized]) -> list[dict]:
    topology = topology_audit(catalog.records, run.scenario.topology)
    crosscheck = fixed_point_crosscheck(run.system, catalog.records, CROSSCHECK_SAMPLES, run.tolerances.tol_grad)
    rows = [
        _row(
            "critical_points_are_fixed",
            bool(catalog.records) and crosscheck["max_record_residual"] <= config.FIXED_POINT_TOL,
            crosscheck["max_record_residual"],
            config.FIXED_POINT_TOL,
            f"{len(catalog.records)} equilibria",
        ),
        _row("fixed_points_are_critical", crosscheck["sample_mismatches"] == 0, crosscheck["sample_mismatches"], 0),
    ]
    if topology.applicable:
        rows += [
            _row("morse_inequality", topology.morse_inequality_passed, topology.equilibria, topology.betti_sum),
            _row("euler_balance", topology.euler_balance_passed, topology.index_sum, topology.euler_characteristic),
        ]
    else:
        rows += [
            _row("morse_inequality", None, topology.equilibria, topology.betti_sum, topology.reason),
            _row("euler_balance", None, None, topology.euler_characteristic, topology.reason),
        ]

    if not linearized:
        reason = "no nondegenerate equilibria"
        return rows + [
            _row(name, None, None, threshold, reason)
            for name, threshold in (
                ("linearization_consistency", CONSISTENCY_TOLERANCE),
                ("remainder_decay", REMAINDER_DECAY),
                ("stability_matches_index", 0),
                ("descent_constant_positive", 0.0),
                ("local_contraction", 1.0),
                ("contraction_matches_spectrum", Q_SPECTRAL_GAP),
                ("curvature_gap_labels", 0),
            )
        ]

    by_id = {r.identifier: r for r in catalog.records}
    consistency = max(item.report.consistency_defect for item in linearized)
    rows.append(_row("linearization_consistency", consistency <= CONSISTENCY_TOLERANCE, consistency, CONSISTENCY_TOLERANCE))

    factors = []
    for item in linearized:
        ratios = [r for r in item.estimates.remainder_ratios if np.isfinite(r) and r > REMAINDER_NOISE_FLOOR]
        factors += [a / b for a, b in zip(ratios, ratios[1:])]
    if factors:
        rows.append(_row("remainder_decay", min(factors) >= REMAINDER_DECAY, min(factors), REMAINDER_DECAY, "per radius halving"))
    else:
        rows.append(_row("remainder_decay", None, None, REMAINDER_DECAY, "remainder below the noise floor at every radius"))

    mismatched = 0
    for item in linearized:
        record = by_id[item.report.identifier]
        dim = len(record.hessian_eigenvalues)
        expected = (
            Classification.ATTRACTING
            if record.morse_index == 0
            else Classification.REPELLING
            if record.morse_index == dim
            else Classification.SADDLE
        )
        mismatched += item.report.classification != expected
    rows.append(_row("stability_matches_index", mismatched == 0, mismatched, 0, "minima attract, maxima repel"))

    minima = [item for item in linearized if by_id[item.report.identifier].morse_index == 0]
    if minima:
        gamma = min(item.estimates.gamma if item.estimates.gamma is not None else float("nan") for item in minima)
        q = _max_or_nan(item.estimates.q for item in minima if item.estimates.q is not None)
        gap = _max_or_nan(
            abs(item.estimates.q - item.report.spectral_radius) for item in minima if item.estimates.q is not None
        )
        rows += [
            _row("descent_constant_positive", bool(gamma > 0.0), gamma, 0.0),
            _row("local_contraction", bool(q < 1.0), q, 1.0),
            _row("contraction_matches_spectrum", bool(gap <= Q_SPECTRAL_GAP), gap, Q_SPECTRAL_GAP),
        ]
    else:
        rows += [
            _row(name, None, None, threshold, "no nondegenerate minima")
            for name, threshold in (("descent_constant_positive", 0.0), ("local_contraction", 1.0), ("contraction_matches_spectrum", Q_SPECTRAL_GAP))
        ]

    applicable = [item.gap for item in linearized if item.gap.applicable]
    if applicable:
        inconsistent = sum(not gap.labels_consistent for gap in applicable)
        rows.append(_row("curvature_gap_labels", inconsistent == 0, inconsistent, 0, "sign of kappa_C - kappa_Omega matches 1 - |eig(DF)|"))
    else:
        rows.append(_row("curvature_gap_labels", None, None, 0, "principal directions not aligned"))
    return rows


def cmd_verify(run: _Run) -> tuple[list[Artifact], int]:
    max_steps = run.max_steps()
    tol = run.tolerances
    rows = _geometry_rows(run) + _identity_rows(run)

    if run.system.field.is_constant:
        catalog, linearized = None, []
        records = []
        reason = "continuum of fixed points"
        rows += [
            _row(name, None, None, None, reason)
            for name in ("critical_points_are_fixed", "fixed_points_are_critical", "morse_inequality", "euler_balance")
        ]
    else:
        catalog = _catalog(run)
        records = catalog.records
        linearized = _linearize_all(run, catalog)
        rows += _catalog_rows(run, catalog, linearized)

    _, summary, traces = basin_scan(
        run.system, run.seeds(), records, max_steps, tol.tol_disp, tol.tol_grad, run.scenario.generic_basin
    )
    descents = [descent_audit(t, tol.slack) for t in traces]
    cycles = cycle_audit(traces)
    increase = max(rep.max_increase for rep in descents)
    converged = sum(t.status == OrbitStatus.CONVERGED for t in traces) / len(traces)
    rows += [
        _row(
            "descent",
            all(rep.passed for rep in descents),
            increase,
            tol.slack,
            f"{sum(not rep.passed for rep in descents)} of {len(descents)} orbits with violations",
        ),
        _row("no_periodic_orbits", cycles.passed, max((c.period for c in cycles.candidates), default=0), 2),
        _row("orbits_converge", converged >= CONVERGED_FRACTION, converged, CONVERGED_FRACTION),
    ]
    if summary.degenerate:
        rows.append(_row("limits_cataloged", None, summary.unassigned, 0, summary.note))
    else:
        rows.append(_row("limits_cataloged", summary.unassigned == 0, summary.unassigned, 0))

    findings = _findings(traces, descents, catalog, linearized) if catalog is not None else []
    failed = [row["check"] for row in rows if row["status"] == "fail"]
    for finding in findings:
        _LOGGER.warning("finding: %s", finding)
    if failed:
        _LOGGER.warning("verify failed: %s", ", ".join(failed))
    status = 1 if failed else 0

    header = ["check", "status", "measured", "threshold", "detail"]
    matrix = [[row[k] for k in header] for row in rows]
    payload = {"rows": rows, "failed": failed, "findings": findings, "passed": not failed}
    return [_json("verify", payload), _csv("matrix", header, matrix)], status


_HANDLERS = {
    "audit": cmd_audit,
    "analyze": cmd_analyze,
    "orbit": cmd_orbit,
    "basins": cmd_basins,
    "linearize": cmd_linearize,
    "verify": cmd_verify,
}


async def run_command(scenario: Scenario, command: str, options: RunOptions | None = None) -> ArtifactBundle:
    """Run one command on a parsed scenario and collect its artifacts."""
    if command not in _HANDLERS:
        raise UsageError(f"unknown command {command!r}; expected one of {', '.join(COMMANDS)}")
    options = options or RunOptions()
    if options.convention not in CONVENTIONS:
        raise UsageError(f"unknown curvature convention {options.convention!r}")

    _LOGGER.info("running %s on scenario %s", command, scenario.name)
    system = await asyncio.to_thread(build_system, scenario)
    run = _Run(scenario=scenario, system=system, options=options)
    artifacts, status = await asyncio.to_thread(_HANDLERS[command], run)
    bundle = ArtifactBundle(
        scenario_name=scenario.name,
        command=command,
        scenario_hash=scenario_hash(scenario),
        artifacts=artifacts,
        exit_status=status,
    )
    _LOGGER.info("%s on %s produced %d artifacts (exit status %d)", command, scenario.name, len(artifacts), status)
    return bundle
