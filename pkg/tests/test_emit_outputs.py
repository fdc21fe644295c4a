import json
from dataclasses import dataclass

import numpy as np
import pytest

from emit_outputs import emit_outputs, format_cell, serialize_dataclass, to_jsonable
from models import Artifact, ArtifactBundle, Classification, OrbitStatus


@dataclass
class _Sample:
    spectrum: np.ndarray
    status: OrbitStatus
    gap: float


def _bundle(*artifacts: Artifact) -> ArtifactBundle:
    return ArtifactBundle(scenario_name="sample", command="verify", scenario_hash="ab" * 32, artifacts=list(artifacts))


def test_serialize_dataclass_with_numpy_and_enum_members() -> None:
    sample = _Sample(spectrum=np.array([1.0 + 0.0j, 0.5 + 0.25j]), status=OrbitStatus.CONVERGED, gap=float("nan"))

    assert serialize_dataclass(sample) == {
        "spectrum": [1.0, {"re": 0.5, "im": 0.25}],
        "status": "converged",
        "gap": None,
    }


def test_to_jsonable_numpy_scalars_and_infinities() -> None:
    assert to_jsonable({1: np.float64(2.5), "n": np.int64(3)}) == {"1": 2.5, "n": 3}
    assert to_jsonable((float("inf"), Classification.SADDLE)) == [None, "saddle"]
    assert to_jsonable(np.bool_(True)) is True


def test_format_cell() -> None:
    assert format_cell(True) == "true"
    assert format_cell(np.bool_(False)) == "false"
    assert format_cell(0.1) == "0.1"
    assert format_cell(np.float64(1e-12)) == "1e-12"
    assert format_cell(None) == ""
    assert format_cell(Classification.NEUTRAL) == "neutral/degenerate"
    assert format_cell(7) == "7"


def test_emit_outputs_writes_wrapped_json_and_csv(tmp_path) -> None:
    bundle = _bundle(
        Artifact(kind="verify", extension="json", payload={"passed": True, "values": np.array([1.0, np.nan])}),
        Artifact(kind="matrix", extension="csv", payload={"header": ["check", "status"], "rows": [["descent", "pass"]]}),
    )

    written = emit_outputs(bundle, tmp_path / "out")

    assert [p.name for p in written] == ["sample.verify.verify.json", "sample.verify.matrix.csv"]
    document = json.loads(written[0].read_text(encoding="utf-8"))
    assert document["scenario"] == "sample"
    assert document["command"] == "verify"
    assert document["kind"] == "verify"
    assert document["scenario_hash"] == "ab" * 32
    assert document["data"] == {"passed": True, "values": [1.0, None]}
    assert "tool_version" in document
    assert written[0].read_text(encoding="utf-8").endswith("}\n")
    assert written[1].read_text(encoding="utf-8") == "check,status\ndescent,pass\n"


def test_emit_outputs_is_byte_identical_on_rerun(tmp_path) -> None:
    bundle = _bundle(Artifact(kind="verify", extension="json", payload={"b": 1, "a": [0.1, 0.2]}))

    first = emit_outputs(bundle, tmp_path / "first")[0].read_bytes()
    second = emit_outputs(bundle, tmp_path / "second")[0].read_bytes()

    assert first == second


def test_csv_row_length_must_match_header(tmp_path) -> None:
    bundle = _bundle(Artifact(kind="matrix", extension="csv", payload={"header": ["a", "b"], "rows": [[1]]}))

    with pytest.raises(ValueError):
        emit_outputs(bundle, tmp_path)


def test_unsupported_extension(tmp_path) -> None:
    with pytest.raises(ValueError):
        emit_outputs(_bundle(Artifact(kind="plot", extension="png", payload=b"")), tmp_path)
