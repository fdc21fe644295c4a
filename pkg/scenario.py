"""
Scenario documents: parsing with path-qualified errors, normalization, and
construction of the return-map system and seed set a scenario describes.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict
from logging import getLogger
from typing import Any

import numpy as np

import config
from boundary2d import (
    EllipseCurve,
    EllipseSupportCurve,
    FourierSupportCurve,
    RadialFourierCurve,
    convexity_audit,
    wrap_angle,
)
from errors import ScenarioParseError
from models import Scenario, SeedSpec, Tolerances, TopologyDescriptor
from returnmap import PlanarReturnMap, ReturnMapSystem, SphereReturnMap
from sphere3d import SphericalHarmonicField
from thickness import FourierThickness, RayCastThickness, SphericalHarmonicThickness

_LOGGER = getLogger(__name__)

__all__ = ["parse_scenario", "normalize", "normalized_text", "scenario_hash", "build_system", "seed_points"]

DEFAULT_UNIFORM_SEEDS = 64

_TOP_KEYS = {"name", "dimension", "core", "outer", "thickness", "tolerances", "seeds", "orbit", "topology"}


def default_tolerances() -> Tolerances:
    return Tolerances(
        ray_residual=config.RAY_RESIDUAL,
        fd_step=config.FD_STEP,
        hess_step=config.HESS_STEP,
        jacobian_step=config.JACOBIAN_STEP,
        tol_grad=config.TOL_GRAD,
        tol_disp=config.TOL_DISP,
        slack=config.DESCENT_SLACK,
        positivity_floor=config.POSITIVITY_FLOOR,
    )


def _object(value, path: str, allowed: set[str], required: set[str] = frozenset()) -> dict:
    if not isinstance(value, dict):
        raise ScenarioParseError(path, "expected an object")
    for key in value:
        if key not in allowed:
            raise ScenarioParseError(f"{path}.{key}", "unknown key")
    for key in sorted(required):
        if key not in value:
            raise ScenarioParseError(f"{path}.{key}", "missing required field")
    return value


def _number(value, path: str, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioParseError(path, "expected a number")
    if not np.isfinite(value) or (positive and value <= 0):
        raise ScenarioParseError(path, "expected a positive finite number" if positive else "expected a finite number")
    return float(value)


def _integer(value, path: str, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioParseError(path, "expected an integer")
    if value < minimum:
        raise ScenarioParseError(path, f"must be at least {minimum}")
    return value


def _fourier(value, path: str) -> list[list[float]]:
    if not isinstance(value, list) or not value:
        raise ScenarioParseError(path, "expected a non-empty list of [a_k, b_k] pairs")
    pairs = []
    for k, pair in enumerate(value):
        if not isinstance(pair, list) or len(pair) != 2:
            raise ScenarioParseError(f"{path}[{k}]", "expected a pair [a_k, b_k]")
        pairs.append([_number(pair[0], f"{path}[{k}][0]"), _number(pair[1], f"{path}[{k}][1]")])
    return pairs


def _ellipse(value, path: str) -> dict:
    spec = _object(value, path, {"a", "b"}, {"a", "b"})
    return {"a": _number(spec["a"], f"{path}.a", positive=True), "b": _number(spec["b"], f"{path}.b", positive=True)}


def _single_variant(value, path: str, variants: set[str]) -> str:
    spec = _object(value, path, variants)
    if len(spec) != 1:
        raise ScenarioParseError(path, f"expected exactly one of {sorted(variants)}")
    return next(iter(spec))


def _parse_core(value, dimension: int) -> dict:
    path = "$.core"
    if dimension == 3:
        kind = _single_variant(value, path, {"unit_sphere"})
        _object(value[kind], f"{path}.unit_sphere", set())
        return {"unit_sphere": {}}
    kind = _single_variant(value, path, {"support_fourier", "ellipse"})
    if kind == "ellipse":
        core = {"ellipse": _ellipse(value[kind], f"{path}.ellipse")}
    else:
        core = {"support_fourier": _fourier(value[kind], f"{path}.support_fourier")}
    report = convexity_audit(_core_curve(core))
    if not report.passed:
        raise ScenarioParseError(path, f"core is not strictly convex (min h + h'' = {report.min_radius_of_curvature:.6g})")
    return core


def _parse_outer(value) -> dict:
    path = "$.outer"
    kind = _single_variant(value, path, {"ellipse", "radial_fourier"})
    if kind == "ellipse":
        return {"ellipse": _ellipse(value[kind], f"{path}.ellipse")}
    return {"radial_fourier": _fourier(value[kind], f"{path}.radial_fourier")}


def _parse_harmonics(value, path: str) -> dict:
    spec = _object(value, path, {"coeffs", "normalization"}, {"coeffs"})
    coeffs = spec["coeffs"]
    if not isinstance(coeffs, list) or not coeffs:
        raise ScenarioParseError(f"{path}.coeffs", "expected a non-empty list")
    parsed = []
    for k, item in enumerate(coeffs):
        entry = _object(item, f"{path}.coeffs[{k}]", {"l", "m", "c"}, {"l", "m", "c"})
        l = _integer(entry["l"], f"{path}.coeffs[{k}].l", 0)
        if isinstance(entry["m"], bool) or not isinstance(entry["m"], int) or abs(entry["m"]) > l:
            raise ScenarioParseError(f"{path}.coeffs[{k}].m", "expected an integer with |m| <= l")
        parsed.append({"l": l, "m": entry["m"], "c": _number(entry["c"], f"{path}.coeffs[{k}].c")})
    normalization = spec.get("normalization", "orthonormal")
    if normalization not in ("orthonormal", "unnormalized"):
        raise ScenarioParseError(f"{path}.normalization", "expected 'orthonormal' or 'unnormalized'")
    return {"coeffs": parsed, "normalization": normalization}


def _parse_thickness(value, dimension: int) -> dict:
    path = "$.thickness"
    if dimension == 3:
        _single_variant(value, path, {"sphere_harmonics"})
        return {"sphere_harmonics": _parse_harmonics(value["sphere_harmonics"], f"{path}.sphere_harmonics")}
    _single_variant(value, path, {"fourier"})
    return {"fourier": _fourier(value["fourier"], f"{path}.fourier")}


def _parse_tolerances(value) -> Tolerances:
    defaults = asdict(default_tolerances())
    spec = _object(value if value is not None else {}, "$.tolerances", set(defaults))
    for key, raw in spec.items():
        defaults[key] = _number(raw, f"$.tolerances.{key}", positive=True)
    return Tolerances(**defaults)


def _parse_seeds(value, dimension: int) -> SeedSpec:
    path = "$.seeds"
    if value is None:
        return SeedSpec(mode="uniform", count=DEFAULT_UNIFORM_SEEDS)
    spec = _object(value, path, {"explicit", "uniform", "random", "rng_seed"})
    modes = [m for m in ("explicit", "uniform", "random") if m in spec]
    if len(modes) != 1:
        raise ScenarioParseError(path, "expected exactly one of 'explicit', 'uniform', 'random'")
    mode = modes[0]
    if mode == "random":
        if "rng_seed" not in spec:
            raise ScenarioParseError(f"{path}.rng_seed", "required when random seeds are requested")
        return SeedSpec(
            mode="random",
            count=_integer(spec["random"], f"{path}.random", 1),
            rng_seed=_integer(spec["rng_seed"], f"{path}.rng_seed", 0),
        )
    if "rng_seed" in spec:
        raise ScenarioParseError(f"{path}.rng_seed", "only valid with random seeds")
    if mode == "uniform":
        return SeedSpec(mode="uniform", count=_integer(spec["uniform"], f"{path}.uniform", 1))

    explicit = spec["explicit"]
    if not isinstance(explicit, list) or not explicit:
        raise ScenarioParseError(f"{path}.explicit", "expected a non-empty list")
    parsed: list[Any] = []
    for k, seed in enumerate(explicit):
        item = f"{path}.explicit[{k}]"
        if dimension == 2:
            parsed.append(_number(seed, item))
            continue
        if not isinstance(seed, list) or len(seed) != 3:
            raise ScenarioParseError(item, "expected a 3-vector")
        vector = [_number(v, f"{item}[{i}]") for i, v in enumerate(seed)]
        if np.linalg.norm(vector) == 0.0:
            raise ScenarioParseError(item, "seed vector must be nonzero")
        parsed.append(vector)
    return SeedSpec(mode="explicit", explicit=parsed, count=len(parsed))


def _parse_orbit(value) -> tuple[int, bool]:
    spec = _object(value if value is not None else {}, "$.orbit", {"max_steps", "generic_basin"})
    max_steps = _integer(spec.get("max_steps", config.MAX_STEPS), "$.orbit.max_steps", 1)
    generic = spec.get("generic_basin", False)
    if not isinstance(generic, bool):
        raise ScenarioParseError("$.orbit.generic_basin", "expected a boolean")
    return max_steps, generic


def _parse_topology(value, dimension: int) -> TopologyDescriptor:
    if value is None:
        return TopologyDescriptor.sphere(dimension)
    spec = _object(value, "$.topology", {"betti"}, {"betti"})
    betti = spec["betti"]
    if not isinstance(betti, list) or not betti:
        raise ScenarioParseError("$.topology.betti", "expected a non-empty list of integers")
    return TopologyDescriptor(tuple(_integer(b, f"$.topology.betti[{k}]", 0) for k, b in enumerate(betti)))


def parse_scenario(text: str) -> Scenario:
    """Validate a scenario document and fill in defaults."""
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError("$", f"invalid JSON: {exc.msg} at line {exc.lineno}") from exc
    _object(document, "$", _TOP_KEYS, {"name", "dimension", "core"})

    name = document["name"]
    if not isinstance(name, str) or not name or any(ch in name for ch in "/\\"):
        raise ScenarioParseError("$.name", "expected a non-empty file-name-safe string")
    dimension = document["dimension"]
    if dimension not in (2, 3) or isinstance(dimension, bool):
        raise ScenarioParseError("$.dimension", "expected 2 or 3")

    has_outer, has_thickness = "outer" in document, "thickness" in document
    if has_outer == has_thickness:
        raise ScenarioParseError("$", "expected exactly one of 'outer' and 'thickness'")
    if dimension == 3 and has_outer:
        raise ScenarioParseError("$.outer", "explicit outer boundaries are planar only")

    max_steps, generic = _parse_orbit(document.get("orbit"))
    scenario = Scenario(
        name=name,
        dimension=dimension,
        core=_parse_core(document["core"], dimension),
        outer=_parse_outer(document["outer"]) if has_outer else None,
        thickness=_parse_thickness(document["thickness"], dimension) if has_thickness else None,
        tolerances=_parse_tolerances(document.get("tolerances")),
        seeds=_parse_seeds(document.get("seeds"), dimension),
        max_steps=max_steps,
        generic_basin=generic,
        topology=_parse_topology(document.get("topology"), dimension),
    )
    _LOGGER.debug("parsed scenario %s", name)
    return scenario


def normalize(scenario: Scenario) -> dict:
    """The scenario as a document with every default spelled out."""
    seeds = scenario.seeds
    if seeds.mode == "random":
        seed_doc: dict[str, Any] = {"random": seeds.count, "rng_seed": seeds.rng_seed}
    elif seeds.mode == "uniform":
        seed_doc = {"uniform": seeds.count}
    else:
        seed_doc = {"explicit": seeds.explicit}
    document = {
        "name": scenario.name,
        "dimension": scenario.dimension,
        "core": scenario.core,
        "tolerances": asdict(scenario.tolerances),
        "seeds": seed_doc,
        "orbit": {"max_steps": scenario.max_steps, "generic_basin": scenario.generic_basin},
        "topology": {"betti": list(scenario.topology.betti)},
    }
    if scenario.outer is not None:
        document["outer"] = scenario.outer
    else:
        document["thickness"] = scenario.thickness
    return document


def normalized_text(scenario: Scenario) -> str:
    return json.dumps(normalize(scenario), indent=2, sort_keys=True) + "\n"


def scenario_hash(scenario: Scenario) -> str:
    return hashlib.sha256(normalized_text(scenario).encode("utf-8")).hexdigest()


def _pairs(values) -> tuple[tuple[float, float], ...]:
    return tuple((float(a), float(b)) for a, b in values)


def _core_curve(core: dict):
    if "ellipse" in core:
        return EllipseSupportCurve(core["ellipse"]["a"], core["ellipse"]["b"])
    return FourierSupportCurve(_pairs(core["support_fourier"]))


def build_system(scenario: Scenario) -> ReturnMapSystem:
    tol = scenario.tolerances
    if scenario.dimension == 3:
        spec = scenario.thickness["sphere_harmonics"]
        harmonics = SphericalHarmonicField(
            tuple((int(e["l"]), int(e["m"]), float(e["c"])) for e in spec["coeffs"]),
            normalization=spec["normalization"],
        )
        field = SphericalHarmonicThickness(harmonics, positivity_floor=tol.positivity_floor)
        return SphereReturnMap(field, jacobian_step=tol.jacobian_step)

    core = _core_curve(scenario.core)
    if scenario.outer is not None:
        if "ellipse" in scenario.outer:
            outer = EllipseCurve(scenario.outer["ellipse"]["a"], scenario.outer["ellipse"]["b"])
        else:
            outer = RadialFourierCurve(_pairs(scenario.outer["radial_fourier"]))
        field = RayCastThickness(
            core, outer, fd_step=tol.fd_step, hess_step=tol.hess_step, positivity_floor=tol.positivity_floor
        )
    else:
        field = FourierThickness(core, _pairs(scenario.thickness["fourier"]), positivity_floor=tol.positivity_floor)
    return PlanarReturnMap(core, field, jacobian_step=tol.jacobian_step)


def seed_points(scenario: Scenario, system: ReturnMapSystem, count: int | None = None, rng_seed: int | None = None) -> list:
    """Seeds of the scenario; `count` and `rng_seed` override the document (CLI --seeds / --rng-seed)."""
    spec = scenario.seeds
    mode = spec.mode
    if rng_seed is not None:
        mode = "random"
    elif count is not None and mode == "explicit":
        mode = "uniform"
    n = count or spec.count

    if mode == "explicit":
        if scenario.dimension == 2:
            return [float(wrap_angle(t)) for t in spec.explicit]
        return [np.asarray(v, dtype=float) / np.linalg.norm(v) for v in spec.explicit]
    if mode == "uniform":
        return system.sample(n)

    rng = np.random.default_rng(rng_seed if rng_seed is not None else spec.rng_seed)
    if scenario.dimension == 2:
        return [float(t) for t in rng.uniform(-np.pi, np.pi, n)]
    vectors = rng.normal(size=(n, 3))
    return list(vectors / np.linalg.norm(vectors, axis=1, keepdims=True))