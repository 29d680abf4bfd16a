"""File formats: trace CSV, feature-matrix JSON, library JSON, manifests.

All JSON is written with sorted keys and a fixed indent so identical
inputs produce byte-identical files; floats rely on Python's shortest
round-trip repr. No file ever embeds a timestamp or an absolute path.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import ConfigError, MissingInput, ShapeMismatch
from .preprocess import FeatureMatrix, TraceSet
from .templates import TemplateLibrary


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def write_json(path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(obj))


def read_json(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise MissingInput(f"no such file: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc


def sha256_file(path) -> str:
    path = Path(path)
    if not path.is_file():
        raise MissingInput(f"no such file: {path}")
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


def write_trace_csv(path, trace: TraceSet) -> None:
    """CSV with header t,s1,...,sS; time in seconds, values in volts."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n_sensors, n_samples = trace.channels.shape
    header = "t," + ",".join(f"s{i + 1}" for i in range(n_sensors))
    lines = [header]
    for k in range(n_samples):
        t = k / trace.sample_rate_hz
        row = [repr(float(t))] + [repr(float(trace.channels[i, k])) for i in range(n_sensors)]
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n")


def read_trace_csv(path, label: int | None = None) -> TraceSet:
    """Parse a trace CSV; the sample rate is recovered from the time column."""
    path = Path(path)
    if not path.is_file():
        raise MissingInput(f"no such file: {path}")
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if len(lines) < 3:
        raise ShapeMismatch(f"{path}: need a header and at least 2 samples")
    header = lines[0].split(",")
    if header[0] != "t" or len(header) < 2:
        raise ShapeMismatch(f"{path}: expected header 't,s1,...', got {lines[0]!r}")
    rows = [[float(x) for x in ln.split(",")] for ln in lines[1:]]
    data = np.asarray(rows)
    if data.shape[1] != len(header):
        raise ShapeMismatch(f"{path}: ragged rows")
    t = data[:, 0]
    steps = np.diff(t)
    if np.any(steps <= 0):
        raise ShapeMismatch(f"{path}: time column must be strictly increasing")
    rate = 1.0 / float(np.median(steps))
    return TraceSet(
        channels=data[:, 1:].T,
        sample_rate_hz=rate,
        label=label,
        meta={"source": path.name},
    )


def write_profile_csv(path, profile) -> None:
    """Debug dump of a sliding-RMSE profile: one tau,rmse row per offset."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["tau,rmse"]
    for i, value in enumerate(np.asarray(profile, dtype=float)):
        lines.append(f"{i + 1},{float(value)!r}")
    path.write_text("\n".join(lines) + "\n")


def write_feature_matrix(path, feature: FeatureMatrix) -> None:
    write_json(path, feature.to_json_dict())


def read_feature_matrix(path) -> FeatureMatrix:
    return FeatureMatrix.from_json_dict(read_json(path))


def write_library(path, library: TemplateLibrary) -> None:
    write_json(path, library.to_json_dict())


def read_library(path) -> TemplateLibrary:
    return TemplateLibrary.from_json_dict(read_json(path))
