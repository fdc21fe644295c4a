import csv
import json
import math
from dataclasses import asdict, is_dataclass
from enum import Enum
from logging import getLogger
from pathlib import Path

import numpy as np

import config
from models import Artifact, ArtifactBundle

_LOGGER = getLogger(__name__)


def to_jsonable(value):
    """Plain-JSON form of numpy values, complex spectra, enums and non-finite floats."""
    if is_dataclass(value) and not isinstance(value, type):
        return serialize_dataclass(value)
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, np.generic):
        return to_jsonable(value.item())
    if isinstance(value, complex):
        if value.imag == 0.0:
            return to_jsonable(value.real)
        return {"re": to_jsonable(value.real), "im": to_jsonable(value.imag)}
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


# Helper to convert dataclass (with numpy members) to JSON-safe dict
def serialize_dataclass(obj):
    return {k: to_jsonable(v) for k, v in asdict(obj).items()}


def format_cell(value) -> str:
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if value is None:
        return ""
    return str(value)


def artifact_path(out_dir: Path, bundle: ArtifactBundle, artifact: Artifact) -> Path:
    return Path(out_dir) / f"{bundle.scenario_name}.{bundle.command}.{artifact.kind}.{artifact.extension}"


def _write_json(path: Path, bundle: ArtifactBundle, artifact: Artifact) -> None:
    document = {
        "tool_version": config.TOOL_VERSION,
        "scenario": bundle.scenario_name,
        "scenario_hash": bundle.scenario_hash,
        "command": bundle.command,
        "kind": artifact.kind,
        "data": to_jsonable(artifact.payload),
    }
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(json.dumps(document, indent=2, sort_keys=True, allow_nan=False) + "\n")


def _write_csv(path: Path, artifact: Artifact) -> None:
    header, rows = artifact.payload["header"], artifact.payload["rows"]
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f"{artifact.kind}: row has {len(row)} cells for {len(header)} columns")
            writer.writerow([format_cell(v) for v in row])


def emit_outputs(bundle: ArtifactBundle, out_dir) -> list[Path]:
    """Write every artifact of the bundle under out_dir; filesystem errors propagate."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for artifact in bundle.artifacts:
        path = artifact_path(out_dir, bundle, artifact)
        if artifact.extension == "json":
            _write_json(path, bundle, artifact)
        elif artifact.extension == "csv":
            _write_csv(path, artifact)
        else:
            raise ValueError(f"unsupported artifact extension {artifact.extension!r}")
        written.append(path)
    _LOGGER.info("wrote %d artifacts for %s %s to %s", len(written), bundle.scenario_name, bundle.command, out_dir)
    return written
