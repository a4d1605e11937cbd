"""Detection records and their JSONL encoding."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

ACTIVITY_CLASSES = ("baseball", "basketball", "football", "golf", "racquetball",
                    "soccer", "swimming", "tennis", "parade", "street fight")
MAX_BAD_FRACTION = 0.1


class IngestError(ValueError):
    pass


def parse_timestamp(text: str) -> datetime:
    """RFC 3339 instant with an explicit offset, returned in UTC."""
    if not isinstance(text, str):
        raise ValueError(f"timestamp must be a string, got {type(text).__name__}")
    t = text.strip()
    if t.endswith(("Z", "z")):
        t = t[:-1] + "+00:00"
    dt = datetime.fromisoformat(t)
    if dt.tzinfo is None:
        raise ValueError(f"timestamp {text!r} lacks a UTC offset")
    return dt.astimezone(timezone.utc)


def format_timestamp(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class DetectionRecord:
    id: str
    lat: float
    lon: float
    ts: datetime
    scores: tuple[float, ...]
    tag: str | None = None

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise ValueError("id must be a non-empty string")
        for name, v, lim in (("lat", self.lat, 90.0), ("lon", self.lon, 180.0)):
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                raise ValueError(f"{name} must be a finite number, got {v!r}")
            if not -lim <= v <= lim:
                raise ValueError(f"{name} {v} out of range [-{lim:g}, {lim:g}]")
        if self.ts.tzinfo is None:
            raise ValueError("timestamp must be timezone-aware")
        s = np.asarray(self.scores, dtype=float)
        if s.ndim != 1 or s.size == 0:
            raise ValueError("scores must be a non-empty vector")
        if not np.all(np.isfinite(s)) or np.any(s < 0):
            raise ValueError("scores must be finite and nonnegative")
        if abs(s.sum() - 1.0) > 1e-6:
            raise ValueError(f"scores sum to {s.sum():.8f}, expected 1")
        if self.tag is not None and not isinstance(self.tag, str):
            raise ValueError("tag must be a string or null")

    @property
    def date(self):
        return self.ts.astimezone(timezone.utc).date()

    def to_json(self) -> str:
        return json.dumps({"id": self.id, "lat": self.lat, "lon": self.lon, "ts": format_timestamp(self.ts),
                           "scores": [float(v) for v in self.scores], "tag": self.tag})

    @classmethod
    def from_obj(cls, obj) -> "DetectionRecord":
        if not isinstance(obj, dict):
            raise ValueError("record must be a JSON object")
        missing = {"id", "lat", "lon", "ts", "scores"} - obj.keys()
        if missing:
            raise ValueError(f"missing fields {sorted(missing)}")
        scores = obj["scores"]
        if not isinstance(scores, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                                                   for v in scores):
            raise ValueError("scores must be a list of numbers")
        return cls(obj["id"], obj["lat"], obj["lon"], parse_timestamp(obj["ts"]),
                   tuple(float(v) for v in scores), obj.get("tag"))


def write_jsonl(records, path) -> None:
    from ..gradcore.checkpoint import atomic_write_bytes

    text = "".join(r.to_json() + "\n" for r in records)
    atomic_write_bytes(path, text.encode("utf-8"))


def ingest_lines(lines, source: str = "<lines>") -> tuple[list[DetectionRecord], list[tuple[int, str]]]:
    """Parse JSONL lines; returns (records, [(line number, diagnostic), ...]).

    Blank lines are ignored. Raises :class:`IngestError` when more than 10% of
    the non-blank lines are malformed.
    """
    records, bad = [], []
    total = 0
    for no, line in enumerate(lines, 1):
        if not line.strip():
            continue
        total += 1
        try:
            records.append(DetectionRecord.from_obj(json.loads(line)))
        except (ValueError, TypeError) as exc:
            bad.append((no, str(exc)))
    if total and len(bad) > MAX_BAD_FRACTION * total:
        first = "; ".join(f"line {n}: {msg}" for n, msg in bad[:5])
        raise IngestError(f"{source}: {len(bad)} of {total} lines malformed (> {MAX_BAD_FRACTION:.0%}); first: {first}")
    if bad:
        log.warning("%s: skipped %d malformed line(s), first at line %d: %s", source, len(bad), *bad[0])
    return records, bad


def ingest(path) -> list[DetectionRecord]:
    records, _ = ingest_with_report(path)
    return records


def ingest_with_report(path):
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        return ingest_lines(fh, str(path))


def assign_class(r: DetectionRecord, threshold: float = 0.5) -> int | None:
    """Argmax class when its score reaches ``threshold``; ties go to the lowest index."""
    if not 0 <= threshold <= 1:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    s = np.asarray(r.scores)
    best = int(np.argmax(s))
    return best if s[best] >= threshold else None
