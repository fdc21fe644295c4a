"""
Critical points of the thickness function, their Morse data and the
topological bookkeeping that constrains them.

Critical points of d are exactly the fixed points of the return map, so every
located point is verified against F before it enters the catalog.
"""
from __future__ import annotations

from logging import getLogger

import numpy as np
from scipy.optimize import brentq
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

import config
from boundary2d import wrap_angle
from errors import GeometryDegenerateError, RayMissError
from models import DegenerateSet, EquilibriumRecord, MorseCatalog, TopologyDescriptor, TopologyReport
from sphere3d import fibonacci_sphere, to_spherical
from workers import parallel_map

_LOGGER = getLogger(__name__)

__all__ = ["locate_equilibria", "morse_catalog", "topology_audit", "fixed_point_crosscheck", "degeneracy_threshold"]

_NEIGHBOURS = 8
_LINKAGE = 0.2


def _planar_candidates(system, n: int, tol_grad: float) -> list[float]:
    field = system.field
    thetas = -np.pi + (2.0 * np.pi / n) * np.arange(n)
    slopes = np.array(parallel_map(field.theta_slope, thetas))
    candidates = [float(t) for t, s in zip(thetas, slopes) if abs(s) <= tol_grad]
    nxt = np.roll(slopes, -1)
    for i in np.nonzero(slopes * nxt < 0.0)[0]:
        lo = thetas[i]
        hi = lo + 2.0 * np.pi / n
        candidates.append(float(wrap_angle(brentq(field.theta_slope, lo, hi, xtol=1e-14))))
    return candidates


def _tangent_bases(points: np.ndarray) -> np.ndarray:
    """frame_sphere over a stack of points: (n, 3, 2) bases with the same axis choice."""
    axes = np.zeros_like(points)
    axes[np.arange(len(points)), np.argmin(np.abs(points), axis=1)] = 1.0
    e1 = axes - np.sum(axes * points, axis=1, keepdims=True) * points
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    return np.stack((e1, np.cross(points, e1)), axis=2)


def _newton_sphere(harmonics, seeds: np.ndarray, tol_grad: float) -> list[np.ndarray]:
    """Newton iteration on the tangential gradient, advanced for every seed at once."""
    points = np.array(seeds, dtype=float).reshape(-1, 3)
    active = np.ones(len(points), dtype=bool)
    for _ in range(config.NEWTON_MAX_ITER):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        p = points[idx]
        basis = _tangent_bases(p)
        _, grad, hess = harmonics.ambient_jet(p)
        g = np.einsum("nia,ni->na", basis, grad)
        h = np.einsum("nia,nij,njb->nab", basis, hess, basis) - np.sum(p * grad, axis=1)[:, None, None] * np.eye(2)
        done = np.linalg.norm(g, axis=1) <= tol_grad
        active[idx[done]] = False
        move = ~done
        if not move.any():
            break
        step = -np.einsum("nab,nb->na", np.linalg.pinv(h[move], rcond=1e-8), g[move])
        size = np.linalg.norm(step, axis=1)
        step *= np.minimum(1.0, config.NEWTON_MAX_STEP / np.maximum(size, np.finfo(float).tiny))[:, None]
        v = np.einsum("nia,na->ni", basis[move], step)
        length = np.linalg.norm(v, axis=1, keepdims=True)
        moved = np.cos(length) * p[move] + np.sin(length) * v / np.where(length > 0.0, length, 1.0)
        points[idx[move]] = moved / np.linalg.norm(moved, axis=1, keepdims=True)
    converged = np.linalg.norm(harmonics.intrinsic_gradient(points), axis=1) <= tol_grad
    dropped = int(np.sum(~converged))
    if dropped:
        _LOGGER.warning("Newton refinement did not converge for %d candidates; dropped", dropped)
    return list(points[converged])


def _sphere_candidates(system, n: int, tol_grad: float) -> list[np.ndarray]:
    points = fibonacci_sphere(n)
    norms = np.linalg.norm(system.field.harmonics.intrinsic_gradient(points), axis=1)
    _, neighbours = cKDTree(points).query(points, k=_NEIGHBOURS + 1)
    local_min = norms <= norms[neighbours[:, 1:]].min(axis=1)
    seeds = points[local_min]
    _LOGGER.debug("%d local minima of |grad d| among %d grid points", len(seeds), n)
    return _newton_sphere(system.field.harmonics, seeds, tol_grad)


def _merge(system, candidates: list) -> list:
    """Drop candidates within the merge distance of an earlier one."""
    if not candidates:
        return []
    points = np.array([system.point(c) for c in candidates])
    tree = cKDTree(points)
    keep = np.ones(len(candidates), dtype=bool)
    for i in range(len(candidates)):
        if keep[i]:
            for j in tree.query_ball_point(points[i], config.MERGE_DISTANCE):
                if j > i:
                    keep[j] = False
    return [c for c, k in zip(candidates, keep) if k]


def _record(system, c, tol_grad: float):
    chart = system.chart(c)
    jet = system.jet(c, chart)
    try:
        residual = system.displacement(c)
    except (RayMissError, GeometryDegenerateError) as exc:
        _LOGGER.warning("candidate %s dropped: return map failed (%s)", system.params(c), exc)
        return None
    if jet.grad_norm > tol_grad or residual > config.FIXED_POINT_TOL:
        _LOGGER.warning(
            "candidate %s dropped: |grad d|=%.3g, |F(c)-c|=%.3g", system.params(c), jet.grad_norm, residual
        )
        return None
    return EquilibriumRecord(
        identifier=-1,
        params=system.params(c),
        point=np.array(system.point(c), dtype=float),
        d=jet.value,
        grad_norm=jet.grad_norm,
        hessian=jet.hessian,
        hessian_eigenvalues=np.linalg.eigvalsh(jet.hessian),
        fixed_point_residual=residual,
    )


def locate_equilibria(system, grid_density: int | None = None, tol_grad: float = config.TOL_GRAD) -> list[EquilibriumRecord]:
    """Grid scan, refinement and fixed-point verification of the critical points of d."""
    if system.dimension == 2:
        n = max(grid_density or config.GRID_2D, config.GRID_2D)
        candidates = _planar_candidates(system, n, tol_grad)
    else:
        n = max(grid_density or config.GRID_3D, config.GRID_3D)
        candidates = _sphere_candidates(system, n, tol_grad)

    merged = _merge(system, candidates)
    records = [r for r in parallel_map(lambda c: _record(system, c, tol_grad), merged) if r is not None]
    records.sort(key=lambda r: tuple(round(p, 9) for p in r.params))
    for identifier, record in enumerate(records):
        record.identifier = identifier
    _LOGGER.info("located %d equilibria from %d candidates", len(records), len(candidates))
    return records


def degeneracy_threshold(records, ratio: float = config.DEGENERACY_RATIO) -> float:
    scale = max((float(np.max(np.abs(r.hessian_eigenvalues))) for r in records), default=0.0)
    return ratio * scale


def _mean_angle(records: list[EquilibriumRecord], dimension: int) -> float:
    if dimension == 2:
        angles = np.array([r.params[0] for r in records])
        return float(np.arctan2(np.mean(np.sin(angles)), np.mean(np.cos(angles))))
    return float(np.mean([to_spherical(r.point)[0] for r in records]))


def _degenerate_sets(records: list[EquilibriumRecord], threshold: float) -> list[DegenerateSet]:
    flagged = [r for r in records if r.degenerate]
    if not flagged:
        return []
    points = np.array([r.point for r in flagged])
    pairs = cKDTree(points).query_pairs(r=_LINKAGE, output_type="ndarray")
    size = len(flagged)
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(size, size)) if len(pairs) else coo_matrix((size, size))
    count, labels = connected_components(graph, directed=False)
    dimension = points.shape[1]
    sets = []
    for label in range(count):
        members = [r for r, lab in zip(flagged, labels) if lab == label]
        representative = members[0]
        eig = representative.hessian_eigenvalues
        sets.append(
            DegenerateSet(
                size=len(members),
                representative_id=representative.identifier,
                mean_angle=_mean_angle(members, dimension),
                transverse_spectrum=[float(e) for e in eig if abs(e) > threshold],
                tangent_directions=int(np.sum(np.abs(eig) <= threshold)),
            )
        )
    return sets


def morse_catalog(records: list[EquilibriumRecord], ratio: float = config.DEGENERACY_RATIO) -> MorseCatalog:
    """Attach Morse indices and degeneracy flags; group degenerate records into critical sets."""
    threshold = degeneracy_threshold(records, ratio)
    for record in records:
        eig = record.hessian_eigenvalues
        record.morse_index = int(np.sum(eig < -threshold))
        record.degenerate = bool(np.any(np.abs(eig) <= threshold))
    catalog = MorseCatalog(records=records, degenerate_sets=_degenerate_sets(records, threshold))
    catalog.morse_assumption_holds = bool(records) and not any(r.degenerate for r in records)
    if not catalog.morse_assumption_holds:
        _LOGGER.warning(
            "Morse assumption fails: %d of %d equilibria degenerate in %d critical sets",
            sum(1 for r in records if r.degenerate),
            len(records),
            len(catalog.degenerate_sets),
        )
    return catalog


def topology_audit(records: list[EquilibriumRecord], topology: TopologyDescriptor) -> TopologyReport:
    """Morse inequality (count >= sum of Betti numbers) and index balance against the Euler characteristic."""
    betti_sum = sum(topology.betti)
    chi = topology.euler_characteristic
    if not records:
        return TopologyReport(False, "not applicable: no equilibria", 0, betti_sum, None, chi, None, None)
    if any(r.degenerate or r.morse_index is None for r in records):
        return TopologyReport(False, "not applicable: Morse-Bott", len(records), betti_sum, None, chi, None, None)
    index_sum = sum((-1) ** r.morse_index for r in records)
    report = TopologyReport(
        applicable=True,
        reason="",
        equilibria=len(records),
        betti_sum=betti_sum,
        index_sum=index_sum,
        euler_characteristic=chi,
        morse_inequality_passed=len(records) >= betti_sum,
        euler_balance_passed=index_sum == chi,
    )
    if not report.passed:
        _LOGGER.warning("topology audit failed: %d equilibria, index sum %d, chi %d", len(records), index_sum, chi)
    return report


def fixed_point_crosscheck(system, records: list[EquilibriumRecord], samples: int, tol_grad: float = config.TOL_GRAD) -> dict:
    """Both directions of Fix(F) = Crit(d) over the catalog and a uniform sample."""
    record_residual = max((r.fixed_point_residual for r in records), default=0.0)
    mismatches = 0
    for c in system.sample(samples):
        try:
            grad = system.jet(c).grad_norm
            moved = system.displacement(c)
        except (RayMissError, GeometryDegenerateError):
            continue
        critical = grad <= 1e-10
        fixed = moved <= config.FIXED_POINT_TOL
        if (critical and not fixed) or (fixed and grad > tol_grad):
            mismatches += 1
    return {"max_record_residual": float(record_residual), "sample_mismatches": mismatches}
