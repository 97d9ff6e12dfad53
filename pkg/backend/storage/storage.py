from __future__ import annotations

import hashlib
import json
import logging
import subprocess
from pathlib import Path
from typing import Any, Optional

import numpy as np
import pandas as pd

from backend.data_schema.models import SCHEMA_VERSION, Config, SweepReport
from models.spectral.core import Field, Frame, make_grid

logger = logging.getLogger(__name__)

FIELD_DTYPE = "<f8"
_REPO_ROOT = Path(__file__).resolve().parents[2]


def config_hash(config: Config) -> str:
    """SHA-256 of the config serialised with sorted keys."""
    payload = json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()


def git_describe() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=_REPO_ROOT,
            capture_output=True,
            text=True,
            check=True,
            timeout=5,
        )
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() or "unknown"


def sidecar_path(path: str | Path) -> Path:
    return Path(path).with_suffix(".json")


# ----------------------------------------------------------------------
# Fields
# ----------------------------------------------------------------------


def write_field(
    field: Field,
    path: str | Path,
    metadata: Optional[dict[str, Any]] = None,
    config: Optional[Config] = None,
) -> Path:
    """Write samples as row-major little-endian float64 plus a JSON sidecar.

    The sidecar holds the grid, frame and build description; ``metadata``
    (epsilon, k_index, speed, ...) is merged in. Returns the sidecar path.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    samples = np.ascontiguousarray(field.physical(), dtype=FIELD_DTYPE)
    path.write_bytes(samples.tobytes(order="C"))

    grid = field.grid
    manifest: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "data_file": path.name,
        "dtype": FIELD_DTYPE,
        "order": "C",
        "grid": {
            "half_width_x": grid.half_width_x,
            "half_width_y": grid.half_width_y,
            "points_x": grid.points_x,
            "points_y": grid.points_y,
        },
        "frame": field.frame.value,
        "git_describe": git_describe(),
        "config_hash": config_hash(config) if config is not None else None,
    }
    if metadata:
        manifest.update(metadata)
    side = sidecar_path(path)
    side.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    logger.debug("wrote field %s (%s) with sidecar %s", path, grid.shape, side)
    return side


def read_manifest(path: str | Path) -> dict[str, Any]:
    return json.loads(sidecar_path(path).read_text())


def read_field(path: str | Path) -> Field:
    """Inverse of :func:`write_field`; samples come back bit-exact."""
    path = Path(path)
    manifest = read_manifest(path)
    g = manifest["grid"]
    grid = make_grid(g["half_width_x"], g["half_width_y"], g["points_x"], g["points_y"])
    samples = np.frombuffer(path.read_bytes(), dtype=manifest.get("dtype", FIELD_DTYPE))
    if samples.size != grid.size:
        raise ValueError(
            f"{path}: holds {samples.size} values, sidecar grid needs {grid.size}"
        )
    return Field.from_samples(grid, samples.reshape(grid.shape), Frame(manifest["frame"]))


# ----------------------------------------------------------------------
# Reports
# ----------------------------------------------------------------------


def report_table(report: SweepReport) -> pd.DataFrame:
    """One row per (estimate, epsilon) ratio plus one row per global criterion."""
    rows: list[dict[str, Any]] = []
    for record in report.records:
        for name, ratio in sorted(record.estimate_ratios.items()):
            rows.append(
                {
                    "criterion": f"estimate:{name}",
                    "epsilon": record.epsilon,
                    "ratio": ratio,
                    "fitted_exponent": report.fitted_exponents.get(name, np.nan),
                    "passed": report.criteria.get(f"estimate:{name}"),
                }
            )
    for criterion, passed in sorted(report.criteria.items()):
        rows.append(
            {
                "criterion": criterion,
                "epsilon": np.nan,
                "ratio": np.nan,
                "fitted_exponent": np.nan,
                "passed": passed,
            }
        )
    columns = ["criterion", "epsilon", "ratio", "fitted_exponent", "passed"]
    return pd.DataFrame(rows, columns=columns)


def write_report(report: SweepReport, path: str | Path) -> Path:
    """Write the report as JSON and its criterion table as CSV next to it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report.model_dump_json(indent=2))
    csv_path = path.with_suffix(".csv")
    report_table(report).to_csv(csv_path, index=False)
    logger.info("wrote report %s and %s", path, csv_path)
    return csv_path


def read_report(path: str | Path) -> SweepReport:
    return SweepReport.model_validate_json(Path(path).read_text())


def write_json(payload: Any, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if hasattr(payload, "model_dump"):
        payload = payload.model_dump(mode="json")
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=str))
    return path
