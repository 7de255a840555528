"""Trajectory/estimate stream formats (JSONL) and delimited report output (CSV).

One JSON object per line for streams; CSV with a ``# key: value`` comment
header for binned reports. All writers are deterministic: identical inputs
produce byte-identical files.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dynamics import FlightSegment
from .errors import InvariantViolation, ParseError
from .estimator import StateEstimate


@dataclass(frozen=True)
class TrajectoryRecord:
    """A recorded or synthetic position stream.

    ``ts`` has shape (N,), ``ps`` shape (N, 3); timestamps strictly increase
    and there are at least two samples. ``meta`` carries free-form provenance
    (noise sigma, generator parameters, source).
    """

    id: str
    ts: np.ndarray
    ps: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        ts = np.asarray(self.ts, dtype=float)
        ps = np.asarray(self.ps, dtype=float)
        if ts.ndim != 1 or ps.shape != (ts.size, 3):
            raise InvariantViolation(f"record {self.id!r}: bad sample shapes")
        if ts.size < 2:
            raise InvariantViolation(f"record {self.id!r}: needs at least 2 samples")
        if not np.all(np.diff(ts) > 0.0):
            raise InvariantViolation(
                f"record {self.id!r}: timestamps must strictly increase")
        ts.flags.writeable = False
        ps.flags.writeable = False
        object.__setattr__(self, "ts", ts)
        object.__setattr__(self, "ps", ps)

    def __len__(self) -> int:
        return int(self.ts.size)

    def samples(self):
        """Iterate (t, p) pairs."""
        return zip(self.ts, self.ps)

    def to_json_obj(self) -> dict:
        samples = [[t, p[0], p[1], p[2]] for t, p in zip(self.ts.tolist(), self.ps.tolist())]
        return {"id": self.id, "samples": samples, "meta": self.meta}

    @classmethod
    def from_json_obj(cls, obj: dict) -> "TrajectoryRecord":
        try:
            rid = obj["id"]
            samples = obj["samples"]
        except (KeyError, TypeError) as exc:
            raise ParseError(f"record missing field: {exc}") from exc
        arr = np.asarray(samples, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 4:
            raise ParseError(f"record {rid!r}: samples must be rows of [t, x, y, z]")
        return cls(str(rid), arr[:, 0].copy(), arr[:, 1:].copy(), obj.get("meta") or {})


def load_trajectories(path) -> list[TrajectoryRecord]:
    """Read a JSONL trajectory file; empty file gives an empty list."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", line=lineno) from exc
            records.append(TrajectoryRecord.from_json_obj(obj))
    return records


def save_trajectories(path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json_obj()) + "\n")


def segment_to_record(segment: FlightSegment, rec_id: str, meta: dict | None = None) -> TrajectoryRecord:
    """Down-convert an integrated flight to the position-stream format.

    Velocities are dropped from the samples; bounce events, the termination
    reason, and the terminal velocity are preserved in ``meta``.
    """
    meta = dict(meta or {})
    meta.setdefault("source", "simulated")
    meta["termination"] = segment.termination.value
    meta["bounces"] = [
        {"t": ev.t, "p": ev.p.tolist(),
         "v_minus": ev.v_minus.tolist(), "v_plus": ev.v_plus.tolist()}
        for ev in segment.bounce_events
    ]
    meta["final_v"] = segment.vs[-1].tolist()
    return TrajectoryRecord(rec_id, segment.ts.copy(), segment.ps.copy(), meta)


def save_estimates(path, estimates: list[StateEstimate], meta: dict | None = None) -> None:
    """Write StateEstimate records as JSONL, one object per line."""
    with open(path, "w", encoding="utf-8") as fh:
        if meta:
            fh.write(json.dumps({"meta": meta}) + "\n")
        for est in estimates:
            fh.write(json.dumps({
                "t": est.t,
                "p_hat": est.p_hat.tolist(),
                "v_hat": est.v_hat.tolist(),
                "sample_count": est.sample_count,
            }) + "\n")


def write_csv(path, columns: list[str], rows, meta: dict | None = None) -> None:
    """Write a small CSV report with ``# key: value`` metadata comment lines."""
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in (meta or {}).items():
            fh.write(f"# {key}: {value}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_csv(path):
    """Read back a report CSV; returns (meta, columns, rows-of-strings)."""
    meta, columns, rows = {}, None, []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].partition(":")
                meta[key.strip()] = value.strip()
            elif columns is None:
                columns = line.split(",")
            else:
                rows.append(line.split(","))
    return meta, columns or [], rows


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)
