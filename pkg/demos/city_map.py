"""Mapping a year of classified videos over a city.

A synthetic 2016 scenario stands in for geo-tagged uploads: background
detections for ten activities, five parades on fixed dates, basketball that
falls off when it rains, swimming that follows the temperature, and soccer
videos that users tagged "football". The script walks through the questions a
city analyst would ask of such a corpus.

    python demos/city_map.py [out_dir]
"""
import json
import sys
from pathlib import Path

from actmap.geomap import (ACTIVITY_CLASSES, correlate, daily_series, detect_peaks, grid_geojson,
                           minmax_normalize, monthly_counts, partition, route_map, tag_vs_content)
from actmap.synthbench import SF_WEATHER_2016, gen_geo_detections, sf_scenario

out = Path(sys.argv[1] if len(sys.argv) > 1 else "runs/demo_city")
out.mkdir(parents=True, exist_ok=True)

spec = sf_scenario(seed=0)
records, truth = gen_geo_detections(spec, SF_WEATHER_2016, return_truth=True)
print(f"{len(records)} detections in {spec.bbox}")

# Every record lands in exactly one place: a class grid cell, outside the box, or unassigned.
part = partition(records, spec.bbox)
print(f"grids hold {sum(g.total for g in part.grids.values())}, outside {part.outside}, "
      f"unassigned {part.unassigned}; conserved: {part.conserved()}")

# When do parades happen? Daily counts with robust spike detection.
parade = ACTIVITY_CLASSES.index("parade")
series = daily_series(records, parade, 2016)
peaks = detect_peaks(series)
print("parade days:", ", ".join(d.isoformat() for d in peaks))

# Where did the biggest one go? The route shows up as a band of busy cells.
biggest = max(peaks, key=lambda d: series[d])
rm = route_map(records, parade, biggest)
(out / "parade_route.geojson").write_text(json.dumps(rm.geojson))
print(f"route on {biggest}: {len(rm.cells)} cells, {rm.total} detections")

# Does weather shape outdoor activity? Correlate normalised monthly series.
for cls, var in (("basketball", "precipitation"), ("swimming", "temperature")):
    counts = monthly_counts(records, ACTIVITY_CLASSES.index(cls), 2016)
    r = correlate(minmax_normalize(counts), minmax_normalize(getattr(SF_WEATHER_2016, var)))
    print(f"{cls} vs {var}: r = {r:+.3f}")

# Can tags be trusted? Compare the "football" tag with what the classifier saw.
football = ACTIVITY_CLASSES.index("football")
tags = tag_vs_content(records, "football", football)
print(f"'football' tags on non-football content: {len(tags.false_positives)} "
      f"(injected {len(truth.tag_noise_ids)}); football videos without the tag: {len(tags.missed)}")

grid = part.grids[football]
(out / "football_grid.geojson").write_text(json.dumps(grid_geojson(grid)))
print(f"content-based football grid: {grid.total} detections in {int((grid.counts > 0).sum())} cells")
print(f"GeoJSON written to {out}")
