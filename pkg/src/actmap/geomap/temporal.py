"""Daily and monthly series, event peaks and correlation."""
from __future__ import annotations

import calendar
from dataclasses import dataclass
from datetime import date, timedelta

import numpy as np

from .records import assign_class


class Undefined:
    """Result of a correlation that has no value (a constant input)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "undefined"

    def __bool__(self) -> bool:
        return False


UNDEFINED = Undefined()


def _check_year(year: int) -> None:
    if not isinstance(year, (int, np.integer)) or not 1 <= year <= 9999:
        raise ValueError(f"invalid year {year!r}")


@dataclass
class DailySeries:
    year: int
    counts: np.ndarray

    def __post_init__(self):
        n = 366 if calendar.isleap(self.year) else 365
        if len(self.counts) != n:
            raise ValueError(f"{self.year} has {n} days, got {len(self.counts)} counts")

    def date_of(self, index: int) -> date:
        return date(self.year, 1, 1) + timedelta(days=int(index))

    def index_of(self, d: date) -> int:
        return (d - date(self.year, 1, 1)).days

    def __getitem__(self, d: date):
        return self.counts[self.index_of(d)]


def daily_series(records, class_id: int, year: int, threshold: float = 0.5, lag_shift: int = 0) -> DailySeries:
    """Per-UTC-day counts of records assigned to ``class_id``.

    ``lag_shift`` moves every record ``lag_shift`` days earlier, to undo a known
    upload delay; records shifted out of the year are dropped.
    """
    _check_year(year)
    n = 366 if calendar.isleap(year) else 365
    counts = np.zeros(n, dtype=np.int64)
    start = date(year, 1, 1)
    for r in records:
        if assign_class(r, threshold) != class_id:
            continue
        k = (r.date - start).days - lag_shift
        if 0 <= k < n:
            counts[k] += 1
    return DailySeries(year, counts)


MAD_NORMAL = 1.4826  # MAD of a normal sample times this estimates its standard deviation


def detect_peaks(series: DailySeries, window: int = 31, k: float = 6.0, mad_scale: float = MAD_NORMAL) -> list[date]:
    """Days whose count exceeds median + k * mad_scale * MAD of the centred window
    and is that window's maximum. Windows are truncated at the ends of the year.

    ``mad_scale=1`` gives the raw-MAD rule.
    """
    if window < 3 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 3, got {window}")
    x = np.asarray(series.counts, dtype=float)
    half = window // 2
    peaks = []
    for d in range(len(x)):
        seg = x[max(0, d - half):d + half + 1]
        med = np.median(seg)
        mad = np.median(np.abs(seg - med))
        if x[d] > med + k * mad_scale * mad and x[d] == seg.max():
            peaks.append(series.date_of(d))
    return peaks


def monthly_counts(records, class_id: int, year: int, threshold: float = 0.5) -> np.ndarray:
    _check_year(year)
    out = np.zeros(12, dtype=np.int64)
    for r in records:
        if r.date.year == year and assign_class(r, threshold) == class_id:
            out[r.date.month - 1] += 1
    return out


def minmax_normalize(series) -> np.ndarray:
    """(x - min) / (max - min); a constant series maps to 0.5 everywhere."""
    x = np.asarray(series, dtype=float)
    if x.size == 0:
        raise ValueError("cannot normalise an empty series")
    lo, hi = x.min(), x.max()
    if hi == lo:
        return np.full_like(x, 0.5)
    return np.clip((x - lo) / (hi - lo), 0.0, 1.0)


def correlate(a, b):
    """Pearson r, or :data:`UNDEFINED` when either series is constant."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"series must be 1-d and equally long, got {a.shape} and {b.shape}")
    if a.size < 3:
        raise ValueError("correlation needs at least 3 points")
    da, db = a - a.mean(), b - b.mean()
    sa, sb = np.sqrt(da @ da), np.sqrt(db @ db)
    if sa == 0 or sb == 0:
        return UNDEFINED
    return float(np.clip((da @ db) / (sa * sb), -1.0, 1.0))
