"""Synthetic geo-tagged detection streams with known ground truth.

Baseline records are Poisson per (class, day) and uniform inside the bounding
box, optionally concentrated around hotspots. Events add a fixed number of
records along a route on one date. Score vectors are one-hot blended with
Dirichlet noise; with noise weight below 0.5 the true class always stays the
argmax with score above 0.5.
"""
from __future__ import annotations

import calendar
import math
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone

import numpy as np

from ..geomap.grid import BBox, spatial_grid, ActivityGrid
from ..geomap.records import ACTIVITY_CLASSES, DetectionRecord
from ..geomap.temporal import minmax_normalize
from ..geomap.weather import VARIABLES, WeatherSeries

SOCCER = ACTIVITY_CLASSES.index("soccer")
FOOTBALL = ACTIVITY_CLASSES.index("football")
PARADE = ACTIVITY_CLASSES.index("parade")
STREET_FIGHT = ACTIVITY_CLASSES.index("street fight")

NOISY_SOCCER_TAGS = ("kids playing football", "Sunday football in the park", "football practice")
CLASS_TAGS = {
    "baseball": "baseball game", "basketball": "pickup basketball", "football": "football game",
    "golf": "golf swing", "racquetball": "racquetball match", "soccer": "soccer match",
    "swimming": "swimming laps", "tennis": "tennis rally", "parade": "parade",
    "street fight": "fight on the street",
}


@dataclass(frozen=True)
class EventSpec:
    date: date
    route: tuple[tuple[float, float], ...]  # (lat, lon) polyline vertices
    count: int
    class_id: int = PARADE
    buffer: float = 0.0004  # degrees either side of the route

    def __post_init__(self):
        if len(self.route) < 1:
            raise ValueError("an event route needs at least one vertex")
        if self.count < 0 or self.buffer < 0:
            raise ValueError("event count and buffer must be nonnegative")


@dataclass(frozen=True)
class Hotspot:
    lat: float
    lon: float
    radius: float  # standard deviation, degrees
    class_id: int = STREET_FIGHT
    weight: float = 1.0


@dataclass(frozen=True)
class WeatherCoupling:
    class_id: int
    variable: str
    coefficient: float

    def __post_init__(self):
        if self.variable not in VARIABLES:
            raise ValueError(f"unknown weather variable {self.variable!r}")


@dataclass(frozen=True)
class GeoScenarioSpec:
    bbox: BBox
    year: int = 2016
    base_rates: tuple[float, ...] = (0.0,) * len(ACTIVITY_CLASSES)  # mean records per class per day
    events: tuple[EventSpec, ...] = ()
    couplings: tuple[WeatherCoupling, ...] = ()
    tag_noise: float = 0.0  # share of soccer records tagged "football"
    score_noise: float = 0.2  # weight of the Dirichlet component
    concentration: float = 1.0
    hotspots: tuple[Hotspot, ...] = ()
    hotspot_share: float = 0.7  # share of a hotspot class's baseline drawn around its hotspots
    seed: int = 0

    def __post_init__(self):
        if any(r < 0 or not math.isfinite(r) for r in self.base_rates):
            raise ValueError("base rates must be finite and nonnegative")
        if not 0 <= self.tag_noise <= 1:
            raise ValueError(f"tag_noise must lie in [0, 1], got {self.tag_noise}")
        if not 0 <= self.score_noise < 1:
            raise ValueError(f"score_noise must lie in [0, 1), got {self.score_noise}")
        if self.concentration <= 0:
            raise ValueError("Dirichlet concentration must be positive")
        if not 0 <= self.hotspot_share <= 1:
            raise ValueError("hotspot_share must lie in [0, 1]")
        m = len(self.base_rates)
        for e in self.events:
            if e.date.year != self.year:
                raise ValueError(f"event date {e.date} outside scenario year {self.year}")
            if not 0 <= e.class_id < m:
                raise ValueError(f"event class {e.class_id} out of range")
        for c in self.couplings:
            if not 0 <= c.class_id < m:
                raise ValueError(f"coupled class {c.class_id} out of range")

    @property
    def n_classes(self) -> int:
        return len(self.base_rates)


@dataclass
class GeoTruth:
    class_of: dict[str, int] = field(default_factory=dict)
    poisson_total: int = 0
    event_ids: dict[date, list[str]] = field(default_factory=dict)
    tag_noise_ids: list[str] = field(default_factory=list)
    monthly_factor: dict[int, np.ndarray] = field(default_factory=dict)


def modulation(spec: GeoScenarioSpec, weather: WeatherSeries | None) -> np.ndarray:
    """[M, 12] multiplicative monthly factors max(0, 1 + c * (2 * w_norm - 1))."""
    out = np.ones((spec.n_classes, 12))
    if spec.couplings and weather is None:
        raise ValueError("weather couplings need a monthly weather series")
    for cp in spec.couplings:
        w = minmax_normalize(weather.variable(cp.variable))
        out[cp.class_id] *= np.maximum(0.0, 1.0 + cp.coefficient * (2 * w - 1))
    return out


def _scores(rng: np.random.Generator, true_class: int, spec: GeoScenarioSpec) -> tuple[float, ...]:
    m = spec.n_classes
    s = np.zeros(m)
    s[true_class] = 1.0 - spec.score_noise
    if spec.score_noise > 0:
        s += spec.score_noise * rng.dirichlet(np.full(m, spec.concentration))
    return tuple(float(v) for v in s / s.sum())


def _uniform_point(rng, bbox: BBox) -> tuple[float, float]:
    return (float(rng.uniform(bbox.lat_min, bbox.lat_max)), float(rng.uniform(bbox.lon_min, bbox.lon_max)))


def _hotspot_point(rng, bbox: BBox, spots: list[Hotspot]) -> tuple[float, float]:
    w = np.array([h.weight for h in spots], dtype=float)
    h = spots[int(rng.choice(len(spots), p=w / w.sum()))]
    for _ in range(100):
        lat, lon = rng.normal(h.lat, h.radius), rng.normal(h.lon, h.radius)
        if bbox.contains(lat, lon):
            return float(lat), float(lon)
    return _uniform_point(rng, bbox)


def route_point(rng, route, buffer: float) -> tuple[float, float]:
    """Uniform position along the polyline (by length) plus an offset within ``buffer``."""
    pts = np.asarray(route, dtype=float)
    if len(pts) == 1:
        base = pts[0]
    else:
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        total = seg.sum()
        if total == 0:
            base = pts[0]
        else:
            s = rng.uniform(0, total)
            k = int(np.searchsorted(np.cumsum(seg), s, side="right"))
            k = min(k, len(seg) - 1)
            t = (s - (np.cumsum(seg)[k] - seg[k])) / seg[k]
            base = pts[k] + t * (pts[k + 1] - pts[k])
    r = buffer * math.sqrt(rng.uniform())
    theta = rng.uniform(0, 2 * math.pi)
    return float(base[0] + r * math.cos(theta)), float(base[1] + r * math.sin(theta))


def distance_to_route(lat: float, lon: float, route) -> float:
    """Planar distance in degrees from a point to a polyline."""
    p = np.array([lat, lon])
    pts = np.asarray(route, dtype=float)
    if len(pts) == 1:
        return float(np.linalg.norm(p - pts[0]))
    best = math.inf
    for a, b in zip(pts[:-1], pts[1:]):
        ab = b - a
        denom = ab @ ab
        t = 0.0 if denom == 0 else float(np.clip((p - a) @ ab / denom, 0, 1))
        best = min(best, float(np.linalg.norm(p - (a + t * ab))))
    return best


def _tag(rng, cls: int, spec: GeoScenarioSpec, names) -> tuple[str, bool]:
    if cls == SOCCER and rng.uniform() < spec.tag_noise:
        return NOISY_SOCCER_TAGS[int(rng.integers(len(NOISY_SOCCER_TAGS)))], True
    return CLASS_TAGS.get(names[cls], names[cls]), False


def _timestamp(rng, d: date) -> datetime:
    secs = int(rng.integers(0, 86400))
    return datetime(d.year, d.month, d.day, tzinfo=timezone.utc) + timedelta(seconds=secs)


def gen_geo_detections(spec: GeoScenarioSpec, weather: WeatherSeries | None = None,
                       return_truth: bool = False):
    """Generate the scenario's records (sorted by timestamp, then id)."""
    rng = np.random.default_rng(spec.seed)
    names = ACTIVITY_CLASSES if spec.n_classes == len(ACTIVITY_CLASSES) else tuple(
        f"class{c}" for c in range(spec.n_classes))
    factor = modulation(spec, weather)
    spots = {c: [h for h in spec.hotspots if h.class_id == c] for c in range(spec.n_classes)}
    truth = GeoTruth(monthly_factor={c: factor[c].copy() for c in range(spec.n_classes)})
    records = []
    n_days = 366 if calendar.isleap(spec.year) else 365
    start = date(spec.year, 1, 1)
    serial = 0

    def emit(cls, d, lat, lon):
        nonlocal serial
        rid = f"v{serial:07d}"
        serial += 1
        tag, noisy = _tag(rng, cls, spec, names)
        if noisy:
            truth.tag_noise_ids.append(rid)
        records.append(DetectionRecord(rid, lat, lon, _timestamp(rng, d), _scores(rng, cls, spec), tag))
        truth.class_of[rid] = cls
        return rid

    for k in range(n_days):
        d = start + timedelta(days=k)
        for c in range(spec.n_classes):
            lam = spec.base_rates[c] * factor[c, d.month - 1]
            n = int(rng.poisson(lam)) if lam > 0 else 0
            truth.poisson_total += n
            for _ in range(n):
                use_spot = spots[c] and rng.uniform() < spec.hotspot_share
                lat, lon = _hotspot_point(rng, spec.bbox, spots[c]) if use_spot else _uniform_point(rng, spec.bbox)
                emit(c, d, lat, lon)
    for e in spec.events:
        ids = truth.event_ids.setdefault(e.date, [])
        for _ in range(e.count):
            lat, lon = route_point(rng, e.route, e.buffer)
            ids.append(emit(e.class_id, e.date, lat, lon))
    records.sort(key=lambda r: (r.ts, r.id))
    return (records, truth) if return_truth else records


def crime_reference_grid(spec: GeoScenarioSpec, n: int, cell_size: float, seed: int = 1,
                         class_id: int = STREET_FIGHT) -> ActivityGrid:
    """A synthetic "official records" grid drawn from the same hotspots as ``class_id``."""
    spots = [h for h in spec.hotspots if h.class_id == class_id]
    rng = np.random.default_rng(seed)
    pts = []
    for _ in range(n):
        lat, lon = _hotspot_point(rng, spec.bbox, spots) if spots else _uniform_point(rng, spec.bbox)
        onehot = tuple(1.0 if c == class_id else 0.0 for c in range(spec.n_classes))
        pts.append(DetectionRecord(f"r{len(pts)}", lat, lon, datetime(spec.year, 1, 1, tzinfo=timezone.utc), onehot))
    return spatial_grid(pts, class_id, spec.bbox, cell_size)


# San Francisco stand-in scenario -------------------------------------------------

SF_BBOX = BBox(37.70, -122.52, 37.82, -122.35)
PARADE_DATES = (date(2016, 2, 20), date(2016, 3, 12), date(2016, 5, 28), date(2016, 6, 25), date(2016, 10, 9))
PARADE_ROUTES = (
    ((37.7880, -122.4075), (37.7946, -122.4062), (37.7990, -122.4071)),  # Chinatown
    ((37.7908, -122.3990), (37.7853, -122.4060), (37.7797, -122.4130)),  # Market St east
    ((37.7510, -122.4182), (37.7648, -122.4195), (37.7694, -122.4200)),  # Mission
    ((37.7923, -122.3967), (37.7780, -122.4149)),  # Market / Beale to Market / 8th
    ((37.8001, -122.4101), (37.8050, -122.4150), (37.8076, -122.4177)),  # North Beach
)
SF_WEATHER_2016 = WeatherSeries(
    temperature=[11.2, 12.4, 13.0, 14.1, 15.0, 16.3, 16.8, 17.2, 18.0, 16.4, 13.7, 11.1],
    precipitation=[112.0, 30.0, 95.0, 28.0, 9.0, 2.0, 0.5, 0.2, 1.5, 38.0, 70.0, 105.0],
)


def sf_scenario(seed: int = 0, parade_base: float = 20.0, parade_count: int = 200, tag_noise: float = 0.3,
                basketball_coupling: float = -0.9, swimming_coupling: float = 0.9,
                base_scale: float = 1.0) -> GeoScenarioSpec:
    """A 2016 city scenario: five parades, weather-coupled sports, football/soccer tag noise."""
    rates = dict(baseball=4, basketball=20, football=3, golf=3, racquetball=2, soccer=8, swimming=15,
                 tennis=5, parade=parade_base, **{"street fight": 3})
    events = tuple(EventSpec(d, r, parade_count) for d, r in zip(PARADE_DATES, PARADE_ROUTES))
    couplings = (WeatherCoupling(ACTIVITY_CLASSES.index("basketball"), "precipitation", basketball_coupling),
                 WeatherCoupling(ACTIVITY_CLASSES.index("swimming"), "temperature", swimming_coupling))
    hotspots = (Hotspot(37.7840, -122.4075, 0.004), Hotspot(37.7650, -122.4190, 0.003, weight=0.6))
    return GeoScenarioSpec(SF_BBOX, 2016, tuple(base_scale * rates[n] for n in ACTIVITY_CLASSES), events,
                           couplings, tag_noise, 0.2, 1.0, hotspots, 0.7, seed)
