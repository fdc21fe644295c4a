import asyncio
import json

import pytest

from app_main import run_command
from errors import UsageError
from models import RunOptions
from scenario import parse_scenario
from thickscape import main


def _kinds(bundle) -> list[str]:
    return [a.kind for a in bundle.artifacts]


def _payload(bundle, kind: str):
    return next(a.payload for a in bundle.artifacts if a.kind == kind)


def _ellipse_with_seeds(seeds: list[float]):
    return parse_scenario(
        json.dumps(
            {
                "name": "ellipse-orbits",
                "dimension": 2,
                "core": {"support_fourier": [[1.0, 0.0]]},
                "outer": {"ellipse": {"a": 2.0, "b": 1.5}},
                "seeds": {"explicit": seeds},
                "orbit": {"max_steps": 500},
            }
        )
    )


def test_analyze_circle_in_ellipse(circle_in_ellipse_scenario) -> None:
    bundle = asyncio.run(run_command(circle_in_ellipse_scenario, "analyze"))

    assert _kinds(bundle) == ["equilibria", "topology"]
    assert bundle.exit_status == 0
    equilibria = _payload(bundle, "equilibria")
    assert len(equilibria["catalog"]["records"]) == 4
    assert equilibria["fixed_point_crosscheck"]["sample_mismatches"] == 0
    assert _payload(bundle, "topology")["passed"]


def test_orbit_writes_one_trace_per_seed() -> None:
    bundle = asyncio.run(run_command(_ellipse_with_seeds([0.3, -2.0]), "orbit"))

    assert _kinds(bundle) == ["trace-000", "trace-001", "descent"]
    trace = _payload(bundle, "trace-000")
    assert trace["header"] == ["step", "theta", "x", "y", "d", "lyapunov", "grad_norm", "displacement"]
    assert trace["rows"][0][0] == 0
    descent = _payload(bundle, "descent")
    assert not descent["descent_passed"]
    assert descent["cycles_passed"]


def test_orbit_rejects_zero_max_steps() -> None:
    with pytest.raises(UsageError):
        asyncio.run(run_command(_ellipse_with_seeds([0.3]), "orbit", RunOptions(max_steps=0)))


def test_unknown_command_and_convention_are_usage_errors(circle_in_ellipse_scenario) -> None:
    with pytest.raises(UsageError):
        asyncio.run(run_command(circle_in_ellipse_scenario, "plot"))
    with pytest.raises(UsageError):
        asyncio.run(run_command(circle_in_ellipse_scenario, "audit", RunOptions(convention="signed")))


def test_verify_concentric_spheres_passes(fixture_path) -> None:
    scenario = parse_scenario(fixture_path("concentric_spheres.json").read_text(encoding="utf-8"))

    bundle = asyncio.run(run_command(scenario, "verify"))

    assert bundle.exit_status == 0
    rows = {row["check"]: row for row in _payload(bundle, "verify")["rows"]}
    assert rows["parallel_identity"]["status"] == "pass"
    assert rows["parallel_identity_jacobian"]["status"] == "pass"
    assert rows["critical_points_are_fixed"]["status"] == "skipped"
    assert rows["limits_cataloged"]["detail"] == "degenerate: continuum of fixed points"


def test_verify_circle_in_ellipse_reports_ascent(circle_in_ellipse_scenario) -> None:
    bundle = asyncio.run(run_command(circle_in_ellipse_scenario, "verify", RunOptions(seeds=8)))

    assert bundle.exit_status == 1
    verify = _payload(bundle, "verify")
    assert "descent" in verify["failed"]
    assert "stability_matches_index" in verify["failed"]
    assert "curvature_gap_labels" in verify["failed"]
    assert any(f.startswith("curvature-gap labels") for f in verify["findings"])
    assert any(f.startswith("d increases along") for f in verify["findings"])
    assert any("not positive definite" in f for f in verify["findings"])
    rows = {row["check"]: row for row in verify["rows"]}
    assert rows["euler_balance"]["status"] == "pass"
    assert rows["linearization_consistency"]["status"] == "pass"


def test_cli_audit_writes_artifact(fixture_path, tmp_path) -> None:
    status = main(["audit", "--scenario", str(fixture_path("concentric_spheres.json")), "--out", str(tmp_path)])

    assert status == 0
    document = json.loads((tmp_path / "concentric-spheres.audit.admissibility.json").read_text(encoding="utf-8"))
    assert document["data"]["passed"]
    assert document["command"] == "audit"


def test_cli_runs_are_byte_identical(fixture_path, tmp_path) -> None:
    scenario = str(fixture_path("concentric_spheres.json"))
    for name in ("first", "second"):
        assert main(["audit", "--scenario", scenario, "--out", str(tmp_path / name)]) == 0

    name = "concentric-spheres.audit.admissibility.json"
    assert (tmp_path / "first" / name).read_bytes() == (tmp_path / "second" / name).read_bytes()


def test_cli_usage_errors(tmp_path) -> None:
    broken = tmp_path / "broken.json"
    broken.write_text('{"name": "x", "dimension": 2}', encoding="utf-8")

    assert main(["audit", "--scenario", str(broken), "--out", str(tmp_path)]) == 2
    assert main(["audit", "--scenario", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 2


def test_cli_rejects_zero_max_steps(fixture_path, tmp_path) -> None:
    status = main(
        ["orbit", "--scenario", str(fixture_path("concentric_spheres.json")), "--out", str(tmp_path), "--max-steps", "0"]
    )

    assert status == 2


@pytest.mark.parametrize(("flag", "formula"), [("paper", "ratio"), ("standard", "product")])
def test_cli_convention_flag_selects_formula(fixture_path, tmp_path, flag, formula) -> None:
    scenario = str(fixture_path("circle_in_ellipse.json"))

    status = main(["linearize", "--scenario", scenario, "--out", str(tmp_path), "--convention", flag])

    assert status == 0
    document = json.loads((tmp_path / "circle-in-ellipse.linearize.curvature-gap.json").read_text(encoding="utf-8"))
    assert document["data"]["convention"] == formula
    assert all(not report["labels_consistent"] for report in document["data"]["reports"] if report["d_star"] == pytest.approx(0.5))


def test_cli_rejects_formula_names_as_convention(fixture_path, tmp_path) -> None:
    scenario = str(fixture_path("concentric_spheres.json"))

    with pytest.raises(SystemExit) as excinfo:
        main(["audit", "--scenario", scenario, "--out", str(tmp_path), "--convention", "ratio"])

    assert excinfo.value.code == 2
