"""Mapping classified geo-tagged detections in space and time."""
from .grid import (DEFAULT_CELL, ActivityGrid, BBox, Partition, RouteMap, grid_correlation,
                   grid_geojson, partition, route_map, spatial_grid, validate_geojson)
from .records import (ACTIVITY_CLASSES, DetectionRecord, IngestError, assign_class, format_timestamp,
                      ingest, ingest_lines, ingest_with_report, parse_timestamp, write_jsonl)
from .tagcheck import Located, TagReport, tag_vs_content
from .temporal import (UNDEFINED, DailySeries, Undefined, correlate, daily_series, detect_peaks,
                       minmax_normalize, monthly_counts)
from .weather import WeatherSeries, parse_weather_csv, read_weather_csv
