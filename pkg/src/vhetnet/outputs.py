"""
Result writers: CSV tables, JSON reports, PGM heatmaps with an extents
sidecar, and the experiment manifest written next to every run.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from datetime import UTC, datetime
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

PGM_MAX = 255

_JSON_TYPES: dict[str, tuple[type, ...]] = {
    "string": (str,),
    "integer": (int,),
    "number": (int, float),
    "object": (dict,),
    "array": (list,),
    "boolean": (bool,),
}


def _serializable(obj: Any) -> Any:
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    raise TypeError(f"Object of type {type(obj).__name__} is not JSON serializable")


def _finite(obj: Any) -> Any:
    """Replace non-finite floats by the strings "inf", "-inf" and "nan"."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return "nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, list | tuple):
        return [_finite(v) for v in obj]
    return obj


def write_csv(frame: pd.DataFrame, path: str | Path) -> Path:
    """UTF-8 CSV with a header row, '.' decimals and ',' separators."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, encoding="utf-8", float_format="%.12g", lineterminator="\n")
    logger.debug("Wrote %s (%d rows)", path, len(frame))
    return path


def write_json(data: Any, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(_finite(json.loads(json.dumps(data, default=_serializable))), indent=2, sort_keys=True)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def write_pgm(
    values: np.ndarray,
    path: str | Path,
    extent: tuple[float, float, float, float],
    vmin: float = 0.0,
    vmax: float = 1.0,
) -> tuple[Path, Path]:
    """
    Binary graymap (P5, one byte per cell) of a (ny, nx) grid whose row 0 is
    ymin, written top row = ymax. A ``<name>.pgm.json`` sidecar records the
    extents and the value range mapped to 0..255.
    """
    grid = np.asarray(values, dtype=float)
    if grid.ndim != 2:
        raise ValueError(f"Heatmap must be 2-D, got shape {grid.shape}")
    if vmax <= vmin:
        raise ValueError("vmax must exceed vmin")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ny, nx = grid.shape
    scaled = np.clip((np.nan_to_num(grid, nan=vmin) - vmin) / (vmax - vmin), 0.0, 1.0)
    pixels = np.round(scaled[::-1] * PGM_MAX).astype(np.uint8)
    path.write_bytes(f"P5\n{nx} {ny}\n{PGM_MAX}\n".encode("ascii") + pixels.tobytes())
    sidecar = path.with_name(path.name + ".json")
    write_json(
        {
            "xmin": extent[0],
            "xmax": extent[1],
            "ymin": extent[2],
            "ymax": extent[3],
            "nx": nx,
            "ny": ny,
            "vmin": vmin,
            "vmax": vmax,
            "origin": "upper",
        },
        sidecar,
    )
    return path, sidecar


def read_pgm(path: str | Path) -> np.ndarray:
    """Pixels of a P5 graymap as a (rows, cols) uint8 array, top row first."""
    data = Path(path).read_bytes()
    fields, pos = [], 0
    while len(fields) < 4:
        while data[pos : pos + 1].isspace():
            pos += 1
        end = pos
        while end < len(data) and not data[end : end + 1].isspace():
            end += 1
        fields.append(data[pos:end])
        pos = end
    if fields[0] != b"P5":
        raise ValueError(f"{path} is not a binary PGM")
    nx, ny = int(fields[1]), int(fields[2])
    # exactly one whitespace byte separates the header from the pixels
    return np.frombuffer(data[pos + 1 : pos + 1 + nx * ny], dtype=np.uint8).reshape(ny, nx)


# ========== Manifests ==========


def load_schema(name: str) -> dict:
    """A JSON schema shipped in ``vhetnet/schemas``: "config" or "manifest"."""
    text = resources.files("vhetnet").joinpath("schemas", f"{name}.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def schema_violations(data: dict, schema: dict) -> list[str]:
    """Missing required keys and top-level type mismatches of ``data`` against ``schema``."""
    problems = [f"missing '{key}'" for key in schema.get("required", []) if key not in data]
    for key, spec in schema.get("properties", {}).items():
        if key not in data or "type" not in spec:
            continue
        kinds = spec["type"] if isinstance(spec["type"], list) else [spec["type"]]
        allowed = tuple(t for k in kinds for t in _JSON_TYPES.get(k, ()))
        value = data[key]
        if "null" in kinds and value is None:
            continue
        if isinstance(value, bool) and "boolean" not in kinds:
            problems.append(f"'{key}' must be {spec['type']}")
        elif allowed and not isinstance(value, allowed):
            problems.append(f"'{key}' must be {spec['type']}")
    if schema.get("additionalProperties") is False:
        extra = set(data) - set(schema.get("properties", {}))
        problems.extend(f"unexpected '{key}'" for key in sorted(extra))
    return problems


@dataclass
class ExperimentManifest:
    """
    Provenance of one run. Re-running with the same config, seed, subcommand
    and parameters reproduces every listed output byte for byte.
    """

    subcommand: str
    config_hash: str
    seed: int
    tool_version: str
    overrides: dict[str, Any] = field(default_factory=dict)
    parameters: dict[str, Any] = field(default_factory=dict)
    outputs: list[str] = field(default_factory=list)
    wall_clock_s: float = 0.0
    created_at: str = field(default_factory=lambda: datetime.now(UTC).isoformat())

    def add_output(self, path: str | Path) -> None:
        self.outputs.append(Path(path).name)

    def to_dict(self) -> dict[str, Any]:
        return _finite(json.loads(json.dumps(asdict(self), default=_serializable)))

    def validate(self) -> list[str]:
        return schema_violations(self.to_dict(), load_schema("manifest"))

    def write(self, directory: str | Path) -> Path:
        """Write ``<subcommand>.manifest.json`` into ``directory``."""
        problems = self.validate()
        if problems:
            raise ValueError(f"Invalid manifest: {'; '.join(problems)}")
        return write_json(self.to_dict(), Path(directory) / f"{self.subcommand}.manifest.json")
