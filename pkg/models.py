from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Union

import numpy as np

# A point of the core boundary: the support-function angle in 2D, a unit 3-vector on S^2.
BoundaryPoint = Union[float, np.ndarray]


@dataclass(frozen=True)
class Frame2D:
    theta: float
    point: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray
    curvature: float


@dataclass(frozen=True)
class TangentChart:
    base: np.ndarray
    e1: np.ndarray
    e2: np.ndarray

    @property
    def basis(self) -> np.ndarray:
        """3x2 matrix whose columns are the tangent vectors."""
        return np.column_stack((self.e1, self.e2))


@dataclass(frozen=True)
class ThicknessJet:
    value: float
    gradient: np.ndarray
    hessian: np.ndarray

    @property
    def grad_norm(self) -> float:
        return float(np.linalg.norm(self.gradient))


@dataclass(frozen=True)
class JacobianEstimate:
    matrix: np.ndarray
    discrepancy: float
    step: float


@dataclass
class ConvexityReport:
    samples: int
    min_radius_of_curvature: float
    argmin_theta: float
    passed: bool


@dataclass
class AdmissibilityReport:
    samples: int
    min_thickness: float
    min_det: float
    min_outer_turning: float
    oc_pass_rate: float
    positivity_ok: bool
    immersion_ok: bool
    oc_ok: bool
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.positivity_ok and self.immersion_ok and self.oc_ok


class OrbitStatus(str, Enum):
    CONVERGED = "converged"
    MAX_STEPS = "max-steps"
    ERROR = "error"


@dataclass
class OrbitRecord:
    step: int
    params: tuple[float, ...]
    point: np.ndarray
    d: float
    lyapunov: float
    grad_norm: float
    displacement: float


@dataclass
class OrbitTrace:
    seed: tuple[float, ...]
    records: list[OrbitRecord] = field(default_factory=list)
    status: OrbitStatus = OrbitStatus.MAX_STEPS
    limit: np.ndarray | None = None
    limit_params: tuple[float, ...] | None = None
    error: str | None = None

    def __len__(self) -> int:
        return len(self.records)


@dataclass
class DescentViolation:
    step: int
    kind: str
    change: float


@dataclass
class DescentReport:
    steps_audited: int
    slack: float
    violations: list[DescentViolation] = field(default_factory=list)
    max_increase: float = 0.0

    @property
    def passed(self) -> bool:
        return not self.violations


@dataclass
class CycleCandidate:
    trace_index: int
    start_step: int
    period: int
    distance: float


@dataclass
class CycleReport:
    traces_scanned: int
    dist_tol: float
    trivial_fixed: int = 0
    candidates: list[CycleCandidate] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.period < 2 for c in self.candidates)


@dataclass
class BasinSample:
    seed: tuple[float, ...]
    limit_id: int | None
    steps: int
    status: OrbitStatus


@dataclass
class BasinSummary:
    seeds: int
    counts: dict[int, int]
    unassigned: int
    degenerate: bool
    note: str = ""


class Classification(str, Enum):
    ATTRACTING = "attracting"
    REPELLING = "repelling"
    SADDLE = "saddle"
    NEUTRAL = "neutral/degenerate"


@dataclass
class EquilibriumRecord:
    identifier: int
    params: tuple[float, ...]
    point: np.ndarray
    d: float
    grad_norm: float
    hessian: np.ndarray
    hessian_eigenvalues: np.ndarray
    fixed_point_residual: float
    morse_index: int | None = None
    degenerate: bool | None = None
    df_spectrum: np.ndarray | None = None
    classification: Classification | None = None


@dataclass(frozen=True)
class TopologyDescriptor:
    betti: tuple[int, ...]

    @property
    def euler_characteristic(self) -> int:
        return sum((-1) ** k * b for k, b in enumerate(self.betti))

    @classmethod
    def sphere(cls, ambient_dimension: int) -> "TopologyDescriptor":
        """Betti numbers of the boundary sphere S^{N-1} of a convex body in R^N."""
        top = ambient_dimension - 1
        return cls(tuple(1 if k in (0, top) else 0 for k in range(top + 1)))


@dataclass
class TopologyReport:
    applicable: bool
    reason: str
    equilibria: int
    betti_sum: int
    index_sum: int | None
    euler_characteristic: int
    morse_inequality_passed: bool | None
    euler_balance_passed: bool | None

    @property
    def passed(self) -> bool:
        return bool(self.applicable and self.morse_inequality_passed and self.euler_balance_passed)


@dataclass
class DegenerateSet:
    size: int
    representative_id: int
    mean_angle: float
    transverse_spectrum: list[float]
    tangent_directions: int


@dataclass
class MorseCatalog:
    records: list[EquilibriumRecord]
    degenerate_sets: list[DegenerateSet] = field(default_factory=list)
    morse_assumption_holds: bool = True


@dataclass
class LinearizationReport:
    identifier: int
    df: np.ndarray
    df_spectrum: np.ndarray
    df_discrepancy: float
    hessian_spectrum: np.ndarray
    a_matrix: np.ndarray
    a_eigenvalues: np.ndarray
    symmetry_defect: float
    a_sym_min_eigenvalue: float
    spd: bool
    effective_metric: np.ndarray | None
    consistency_defect: float
    scalar_model_defect: float
    classification: Classification | None = None
    spectral_radius: float | None = None
    spectral_step_ok: bool | None = None
    coherence: str | None = None


@dataclass
class CurvatureGapReport:
    identifier: int
    applicable: bool
    reason: str
    convention: str
    d_star: float | None = None
    kappa_core: list[float] = field(default_factory=list)
    kappa_outer: list[float] = field(default_factory=list)
    mu: list[float] = field(default_factory=list)
    df_eigenvalues: list[float] = field(default_factory=list)
    deviations: dict[str, list[float]] = field(default_factory=dict)
    gap_labels: list[str] = field(default_factory=list)
    spectral_labels: list[str] = field(default_factory=list)
    offdiag_mass: float | None = None

    @property
    def labels_consistent(self) -> bool:
        """The curvature-gap label of every principal direction matches its DF eigenvalue label."""
        return self.gap_labels == self.spectral_labels


@dataclass
class LocalEstimates:
    identifier: int
    radii: list[float]
    samples_per_radius: int
    remainder_ratios: list[float]
    q: float | None
    alpha: float | None = None
    beta: float | None = None
    gamma: float | None = None
    partial: bool = False
    notes: list[str] = field(default_factory=list)


@dataclass
class NormalForm:
    identifier: int
    basis: np.ndarray
    j_lambda: np.ndarray
    a0: np.ndarray
    similarity_residual: float


@dataclass
class Tolerances:
    ray_residual: float
    fd_step: float
    hess_step: float
    jacobian_step: float
    tol_grad: float
    tol_disp: float
    slack: float
    positivity_floor: float


@dataclass
class SeedSpec:
    mode: str
    explicit: list[Any] = field(default_factory=list)
    count: int = 0
    rng_seed: int | None = None


@dataclass
class Scenario:
    name: str
    dimension: int
    core: dict[str, Any]
    outer: dict[str, Any] | None
    thickness: dict[str, Any] | None
    tolerances: Tolerances
    seeds: SeedSpec
    max_steps: int
    generic_basin: bool
    topology: TopologyDescriptor


@dataclass
class Artifact:
    kind: str
    extension: str
    payload: Any


@dataclass
class ArtifactBundle:
    scenario_name: str
    command: str
    scenario_hash: str
    artifacts: list[Artifact] = field(default_factory=list)
    exit_status: int = 0


@dataclass
class RunOptions:
    """Per-invocation overrides from the command line."""

    seeds: int | None = None
    rng_seed: int | None = None
    convention: str = "ratio"
    max_steps: int | None = None
