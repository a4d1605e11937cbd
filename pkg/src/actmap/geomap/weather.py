"""Monthly weather series stored as a small CSV."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

HEADER = ["month", "temperature", "precipitation"]
VARIABLES = ("temperature", "precipitation")


@dataclass
class WeatherSeries:
    temperature: np.ndarray
    precipitation: np.ndarray

    def __post_init__(self):
        self.temperature = np.asarray(self.temperature, dtype=float)
        self.precipitation = np.asarray(self.precipitation, dtype=float)
        for name in VARIABLES:
            v = getattr(self, name)
            if v.shape != (12,):
                raise ValueError(f"{name} needs 12 monthly values, got shape {v.shape}")
            if not np.all(np.isfinite(v)):
                raise ValueError(f"{name} contains non-finite values")

    def variable(self, name: str) -> np.ndarray:
        if name not in VARIABLES:
            raise ValueError(f"unknown weather variable {name!r}; expected one of {VARIABLES}")
        return getattr(self, name)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(HEADER)
        for m in range(12):
            w.writerow([m + 1, repr(float(self.temperature[m])), repr(float(self.precipitation[m]))])
        return buf.getvalue()


def read_weather_csv(path) -> WeatherSeries:
    with open(Path(path), newline="") as fh:
        return parse_weather_csv(fh.read(), str(path))


def parse_weather_csv(text: str, source: str = "<csv>") -> WeatherSeries:
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if any(c.strip() for c in r)]
    if not rows or [c.strip() for c in rows[0]] != HEADER:
        raise ValueError(f"{source}: header must be {','.join(HEADER)}")
    body = rows[1:]
    if len(body) != 12:
        raise ValueError(f"{source}: expected 12 monthly rows, got {len(body)}")
    temp, prec = np.empty(12), np.empty(12)
    for n, row in enumerate(body, 2):
        if len(row) != 3:
            raise ValueError(f"{source}:{n}: expected 3 fields, got {len(row)}")
        try:
            month, t, p = int(row[0]), float(row[1]), float(row[2])
        except ValueError as exc:
            raise ValueError(f"{source}:{n}: {exc}") from None
        if month != n - 1:
            raise ValueError(f"{source}:{n}: months must run 1..12 in order, got {month}")
        if not (math.isfinite(t) and math.isfinite(p)):
            raise ValueError(f"{source}:{n}: non-finite value")
        temp[month - 1], prec[month - 1] = t, p
    return WeatherSeries(temp, prec)
