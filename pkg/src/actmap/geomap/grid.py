"""Spatial activity grids and route maps."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .records import ACTIVITY_CLASSES, DetectionRecord, assign_class

DEFAULT_CELL = 0.002  # degrees, roughly 200 m
# points within this fraction of a cell below an edge snap onto it, so that
# coordinates built as lo + k * cell land in cell k despite rounding
EDGE_SNAP = 1e-9


@dataclass(frozen=True)
class BBox:
    lat_min: float
    lon_min: float
    lat_max: float
    lon_max: float

    def __post_init__(self):
        vals = (self.lat_min, self.lon_min, self.lat_max, self.lon_max)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("bbox coordinates must be finite")
        if not (-90 <= self.lat_min < self.lat_max <= 90 and -180 <= self.lon_min < self.lon_max <= 180):
            raise ValueError(f"degenerate or out-of-range bbox {vals}")

    def contains(self, lat: float, lon: float) -> bool:
        """Half-open containment, matching the lower-inclusive cell edges."""
        return self.lat_min <= lat < self.lat_max and self.lon_min <= lon < self.lon_max

    def as_list(self) -> list[float]:
        return [self.lat_min, self.lon_min, self.lat_max, self.lon_max]


def cell_index(value: float, origin: float, cell: float) -> int:
    return int(math.floor((value - origin) / cell + EDGE_SNAP))


@dataclass
class ActivityGrid:
    bbox: BBox
    cell_size: float
    class_id: int
    counts: np.ndarray  # [rows (lat), cols (lon)], row 0 at lat_min
    outside: int = 0

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def cell_bounds(self, i: int, j: int) -> tuple[float, float, float, float]:
        lat0 = self.bbox.lat_min + i * self.cell_size
        lon0 = self.bbox.lon_min + j * self.cell_size
        return lat0, lon0, lat0 + self.cell_size, lon0 + self.cell_size


def grid_shape(bbox: BBox, cell_size: float) -> tuple[int, int]:
    if not cell_size > 0:
        raise ValueError(f"cell_size must be positive, got {cell_size}")
    rows = max(1, math.ceil((bbox.lat_max - bbox.lat_min) / cell_size - EDGE_SNAP))
    cols = max(1, math.ceil((bbox.lon_max - bbox.lon_min) / cell_size - EDGE_SNAP))
    return rows, cols


def _locate(bbox: BBox, cell_size: float, shape, lat: float, lon: float):
    if not bbox.contains(lat, lon):
        return None
    i = min(cell_index(lat, bbox.lat_min, cell_size), shape[0] - 1)
    j = min(cell_index(lon, bbox.lon_min, cell_size), shape[1] - 1)
    return i, j


def spatial_grid(records, class_id: int, bbox: BBox, cell_size: float = DEFAULT_CELL,
                 threshold: float = 0.5) -> ActivityGrid:
    """Count records assigned to ``class_id`` per cell; out-of-bbox ones are tallied separately."""
    shape = grid_shape(bbox, cell_size)
    counts = np.zeros(shape, dtype=np.int64)
    outside = 0
    for r in records:
        if assign_class(r, threshold) != class_id:
            continue
        loc = _locate(bbox, cell_size, shape, r.lat, r.lon)
        if loc is None:
            outside += 1
        else:
            counts[loc] += 1
    return ActivityGrid(bbox, cell_size, class_id, counts, outside)


@dataclass
class Partition:
    grids: dict[int, ActivityGrid]
    outside: int
    unassigned: int
    total: int

    def conserved(self) -> bool:
        return sum(g.total for g in self.grids.values()) + self.outside + self.unassigned == self.total


def partition(records, bbox: BBox, cell_size: float = DEFAULT_CELL, threshold: float = 0.5,
              n_classes: int | None = None) -> Partition:
    """Single pass splitting every record into a class grid cell, out-of-bbox or unassigned."""
    records = list(records)
    m = n_classes if n_classes is not None else max((len(r.scores) for r in records), default=0)
    shape = grid_shape(bbox, cell_size)
    grids = {c: ActivityGrid(bbox, cell_size, c, np.zeros(shape, dtype=np.int64)) for c in range(m)}
    outside = unassigned = 0
    for r in records:
        c = assign_class(r, threshold)
        if c is None:
            unassigned += 1
            continue
        loc = _locate(bbox, cell_size, shape, r.lat, r.lon)
        if loc is None:
            outside += 1
            grids[c].outside += 1
        else:
            grids[c].counts[loc] += 1
    return Partition(grids, outside, unassigned, len(records))


def grid_correlation(a: ActivityGrid, b: ActivityGrid):
    """Pearson correlation between two grids' cell counts (same geometry required)."""
    from .temporal import correlate

    if a.counts.shape != b.counts.shape or a.bbox != b.bbox or a.cell_size != b.cell_size:
        raise ValueError("grids must share bbox and cell size")
    return correlate(a.counts.ravel().astype(float), b.counts.ravel().astype(float))


def _polygon(lat0: float, lon0: float, cell: float) -> list[list[float]]:
    lat1, lon1 = lat0 + cell, lon0 + cell
    return [[lon0, lat0], [lon1, lat0], [lon1, lat1], [lon0, lat1], [lon0, lat0]]


def grid_geojson(grid: ActivityGrid, class_name: str | None = None, date: str | None = None) -> dict:
    name = class_name or _class_name(grid.class_id)
    feats = []
    for i, j in zip(*np.nonzero(grid.counts)):
        lat0, lon0, _, _ = grid.cell_bounds(int(i), int(j))
        feats.append(_feature(lat0, lon0, grid.cell_size, int(grid.counts[i, j]), name, date))
    return {"type": "FeatureCollection", "features": feats}


def _feature(lat0, lon0, cell, count, name, date):
    return {"type": "Feature",
            "geometry": {"type": "Polygon", "coordinates": [_polygon(lat0, lon0, cell)]},
            "properties": {"count": count, "class": name, "date": date}}


def _class_name(c: int) -> str:
    return ACTIVITY_CLASSES[c] if 0 <= c < len(ACTIVITY_CLASSES) else f"class{c}"


@dataclass
class RouteMap:
    cells: list[tuple[int, int, int]]  # (lat index, lon index, count) in path order
    cell_size: float
    geojson: dict

    @property
    def total(self) -> int:
        return sum(c for _, _, c in self.cells)


def route_map(records, class_id: int, date, cell_size: float = DEFAULT_CELL, threshold: float = 0.5,
              class_name: str | None = None) -> RouteMap:
    """Cells holding ``class_id`` records on ``date`` (UTC), ordered along their principal axis.

    Cells are aligned to a global grid anchored at latitude/longitude 0 so maps
    from different days line up.
    """
    counts: dict[tuple[int, int], int] = {}
    for r in records:
        if r.date != date or assign_class(r, threshold) != class_id:
            continue
        key = (cell_index(r.lat, 0.0, cell_size), cell_index(r.lon, 0.0, cell_size))
        counts[key] = counts.get(key, 0) + 1
    name = class_name or _class_name(class_id)
    if not counts:
        return RouteMap([], cell_size, {"type": "FeatureCollection", "features": []})
    keys = sorted(counts)
    centres = np.array([[(i + 0.5) * cell_size, (j + 0.5) * cell_size] for i, j in keys])
    weights = np.array([counts[k] for k in keys], dtype=float)
    mean = (centres * weights[:, None]).sum(0) / weights.sum()
    d = centres - mean
    cov = (d * weights[:, None]).T @ d
    _, vecs = np.linalg.eigh(cov)
    axis = vecs[:, -1]
    if axis[np.argmax(np.abs(axis))] < 0:
        axis = -axis
    proj = d @ axis
    order = sorted(range(len(keys)), key=lambda n: (round(proj[n], 12), keys[n]))
    cells = [(keys[n][0], keys[n][1], counts[keys[n]]) for n in order]
    feats = [_feature(i * cell_size, j * cell_size, cell_size, c, name, date.isoformat()) for i, j, c in cells]
    for rank, f in enumerate(feats):
        f["properties"]["order"] = rank
    return RouteMap(cells, cell_size, {"type": "FeatureCollection", "features": feats})


def validate_geojson(doc: dict) -> None:
    """Raise ValueError unless ``doc`` is a FeatureCollection of closed Polygon cells
    with integer ``count``, string ``class`` and string-or-null ``date`` properties."""
    if doc.get("type") != "FeatureCollection" or not isinstance(doc.get("features"), list):
        raise ValueError("not a FeatureCollection")
    for n, f in enumerate(doc["features"]):
        if f.get("type") != "Feature":
            raise ValueError(f"feature {n}: type must be Feature")
        g = f.get("geometry") or {}
        if g.get("type") != "Polygon":
            raise ValueError(f"feature {n}: geometry must be a Polygon")
        rings = g.get("coordinates")
        if not isinstance(rings, list) or not rings:
            raise ValueError(f"feature {n}: missing coordinates")
        for ring in rings:
            if len(ring) < 4 or ring[0] != ring[-1]:
                raise ValueError(f"feature {n}: ring must be closed with >= 4 positions")
            for lon, lat in ring:
                if not (-180 <= lon <= 180 and -90 <= lat <= 90):
                    raise ValueError(f"feature {n}: position out of range")
        p = f.get("properties") or {}
        if not isinstance(p.get("count"), int) or p["count"] < 0:
            raise ValueError(f"feature {n}: count must be a nonnegative integer")
        if not isinstance(p.get("class"), str):
            raise ValueError(f"feature {n}: class must be a string")
        if p.get("date") is not None and not isinstance(p["date"], str):
            raise ValueError(f"feature {n}: date must be a string or null")
