"""Episode records and their CSV / JSON sidecar serialisation."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

COLUMNS = (
    "t", "px", "py", "theta", "v",
    "u_nom_0", "u_nom_1", "u_app_0", "u_app_1",
    "phi", "phi0", "nominal_status", "phase", "trigger_fired", "queries",
)


class SchemaError(ValueError):
    """Trace file does not have the expected header."""


@dataclass(frozen=True)
class StepRecord:
    t: int
    px: float
    py: float
    theta: float
    v: float
    u_nom_0: float
    u_nom_1: float
    u_app_0: float
    u_app_1: float
    phi: float
    phi0: float
    nominal_status: str
    phase: str
    trigger_fired: bool
    queries: int

    @property
    def intervened(self) -> bool:
        return self.phase != "PASS_THROUGH"


@dataclass
class EpisodeTrace:
    records: list[StepRecord] = field(default_factory=list)
    meta: dict[str, Any] = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def column(self, name: str) -> list:
        return [getattr(r, name) for r in self.records]


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return repr(x) if math.isfinite(x) else str(x)
    return str(x)


def write_trace_csv(trace: EpisodeTrace, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in trace.records:
            w.writerow([_fmt(getattr(r, c)) for c in COLUMNS])


def read_trace_csv(path: str | Path) -> EpisodeTrace:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != COLUMNS:
        got = rows[0] if rows else []
        raise SchemaError(f"unexpected trace header {got}; expected {list(COLUMNS)}")
    recs = []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(COLUMNS):
            raise SchemaError(f"line {i}: {len(row)} fields, expected {len(COLUMNS)}")
        try:
            recs.append(StepRecord(
                int(row[0]), *(float(x) for x in row[1:11]), row[11], row[12], row[13] == "1", int(row[14])
            ))
        except ValueError as exc:
            raise SchemaError(f"line {i}: {exc}") from None
    return EpisodeTrace(recs)


def sidecar_path(trace_path: str | Path) -> Path:
    return Path(trace_path).with_suffix(".json")


def write_sidecar(path: str | Path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
