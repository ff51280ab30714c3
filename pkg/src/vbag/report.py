"""Versioned JSON reports and CSV tables written by scenario runs."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import ConfigError

SCHEMA_VERSION = "vbag.report/1"
KNOWN_SCHEMAS = frozenset({SCHEMA_VERSION})


def to_jsonable(obj):
    """Recursively convert numpy containers and non-finite floats to plain JSON values."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def make_report(scenario: str, config: dict, payload: dict, timing: dict) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "scenario": scenario,
        "config": to_jsonable(config),
        "payload": to_jsonable(payload),
        "timing": to_jsonable(timing),
    }


def canonical_payload(report: dict) -> str:
    """Byte-stable rendering of everything except wall-clock timings."""
    body = {k: v for k, v in report.items() if k != "timing"}
    return json.dumps(body, sort_keys=True, separators=(",", ":"))


def write_report(report: dict, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_report(path) -> dict:
    report = json.loads(Path(path).read_text(encoding="utf-8"))
    version = report.get("schema_version")
    if version not in KNOWN_SCHEMAS:
        raise ConfigError(f"unknown report schema version {version!r}")
    return report


def write_csv(rows: list[dict], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not rows:
        path.write_text("", encoding="utf-8")
        return path
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: to_jsonable(v) for k, v in row.items()})
    return path
