import json
import math
from datetime import date, datetime, timedelta, timezone

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from actmap.geomap import (ACTIVITY_CLASSES, UNDEFINED, BBox, DailySeries, DetectionRecord, IngestError,
                           assign_class, correlate, daily_series, detect_peaks, grid_correlation, grid_geojson,
                           ingest, ingest_lines, ingest_with_report, minmax_normalize, monthly_counts,
                           parse_weather_csv, partition, read_weather_csv, route_map, spatial_grid,
                           tag_vs_content, validate_geojson, write_jsonl)
from actmap.synthbench import (PARADE_DATES, SF_WEATHER_2016, EventSpec, GeoScenarioSpec, distance_to_route,
                               gen_geo_detections, sf_scenario)

BOX = BBox(37.70, -122.52, 37.82, -122.35)
FOOTBALL = ACTIVITY_CLASSES.index("football")
SOCCER = ACTIVITY_CLASSES.index("soccer")
PARADE = ACTIVITY_CLASSES.index("parade")
UTC = timezone.utc


def onehot(c, m=10):
    return tuple(1.0 if i == c else 0.0 for i in range(m))


def rec(i=0, lat=37.75, lon=-122.45, c=0, ts=None, tag=None, m=10):
    ts = ts or datetime(2016, 6, 25, 12, tzinfo=UTC)
    return DetectionRecord(f"r{i}", lat, lon, ts, onehot(c, m), tag)


def at(d: date, hour=12):
    return datetime(d.year, d.month, d.day, hour, tzinfo=UTC)


def _series(counts, year=2016):
    return DailySeries(year, np.asarray(counts))


def _brute_peaks(x, window, k, scale):
    out = []
    half = window // 2
    for d in range(len(x)):
        seg = sorted(x[max(0, d - half):d + half + 1])
        n = len(seg)
        med = (seg[n // 2] + seg[(n - 1) // 2]) / 2
        dev = sorted(abs(v - med) for v in seg)
        mad = (dev[n // 2] + dev[(n - 1) // 2]) / 2
        if x[d] > med + k * scale * mad and x[d] == max(seg):
            out.append(d)
    return out


class TestRecords:
    def test_empty_file(self, tmp_path):
        p = tmp_path / "e.jsonl"
        p.write_text("")
        assert ingest_with_report(p) == ([], [])

    def test_round_trip(self, tmp_path):
        r = DetectionRecord("abc", 37.7, -122.4, datetime(2016, 2, 20, 8, 30, 5, tzinfo=UTC),
                            (0.25, 0.75), "parade day")
        p = tmp_path / "one.jsonl"
        write_jsonl([r], p)
        assert ingest(p) == [r]

    def test_latitude_range_diagnostic(self):
        line = json.dumps({"id": "x", "lat": 95, "lon": 0, "ts": "2016-01-01T00:00:00Z", "scores": [1.0]})
        good = rec().to_json()
        records, bad = ingest_lines([good] * 10 + [line])
        assert len(records) == 10
        assert bad[0][0] == 11 and "lat 95" in bad[0][1] and "out of range" in bad[0][1]

    def test_too_many_bad_lines(self):
        with pytest.raises(IngestError, match="line 1"):
            ingest_lines(["{not json", rec().to_json()])

    @pytest.mark.parametrize("obj", [
        {"id": "a", "lat": 1, "lon": 1, "ts": "2016-01-01T00:00:00Z", "scores": [0.5, 0.6]},
        {"id": "a", "lat": 1, "lon": 1, "ts": "2016-01-01T00:00:00", "scores": [1.0]},
        {"id": "a", "lat": 1, "lon": 1, "scores": [1.0]},
        {"id": "a", "lat": 1, "lon": 200, "ts": "2016-01-01T00:00:00Z", "scores": [1.0]},
        {"id": "", "lat": 1, "lon": 1, "ts": "2016-01-01T00:00:00Z", "scores": [1.0]},
    ])
    def test_invalid_records(self, obj):
        with pytest.raises(ValueError):
            DetectionRecord.from_obj(obj)

    def test_assign_class(self):
        assert assign_class(rec(c=3), 0.5) == 3
        uniform = DetectionRecord("u", 0, 0, at(date(2016, 1, 1)), (0.1,) * 10)
        assert assign_class(uniform, 0.5) is None
        assert assign_class(uniform, 0.0) == 0

    def test_threshold_reached_exactly(self):
        r = DetectionRecord("h", 0, 0, at(date(2016, 1, 1)), (0.5, 0.5))
        assert assign_class(r, 0.5) == 0


class TestGrid:
    def test_centre_record(self):
        bbox = BBox(0.0, 0.0, 1.0, 1.0)
        g = spatial_grid([rec(lat=0.55, lon=0.55)], 0, bbox, 0.1)
        assert g.total == 1 and g.counts[5, 5] == 1

    def test_shared_edge_goes_to_upper_cell(self):
        # lower-inclusive edges: a point on the boundary between cells 2 and 3 belongs to cell 3
        bbox = BBox(0.0, 0.0, 1.0, 1.0)
        g = spatial_grid([rec(lat=0.3, lon=0.7)], 0, bbox, 0.1)
        assert g.counts[3, 7] == 1

    def test_outside_counted(self):
        g = spatial_grid([rec(lat=10.0, lon=10.0), rec(1)], 0, BOX)
        assert g.total == 1 and g.outside == 1

    def test_uniform_conservation(self, rng):
        recs = [rec(i, float(rng.uniform(BOX.lat_min, BOX.lat_max)), float(rng.uniform(BOX.lon_min, BOX.lon_max)))
                for i in range(1000)]
        g = spatial_grid(recs, 0, BOX)
        assert g.total + g.outside == 1000 and g.outside == 0

    def test_degenerate_bbox(self):
        with pytest.raises(ValueError):
            BBox(1.0, 0.0, 1.0, 1.0)

    def test_partition_conserves(self, rng):
        spec = sf_scenario(seed=2, base_scale=0.2)
        recs = gen_geo_detections(spec, SF_WEATHER_2016)
        recs.append(rec(99999999, lat=0.0, lon=0.0))
        recs.append(DetectionRecord("flat", 37.75, -122.45, at(date(2016, 1, 1)), (0.1,) * 10))
        p = partition(recs, BOX, 0.01)
        assert p.conserved() and p.outside >= 1 and p.unassigned >= 1

    def test_geojson_contract(self):
        g = spatial_grid([rec(i, 37.75 + 0.001 * i) for i in range(5)], 0, BOX)
        doc = grid_geojson(g)
        validate_geojson(doc)
        assert sum(f["properties"]["count"] for f in doc["features"]) == 5
        assert doc["features"][0]["properties"]["class"] == ACTIVITY_CLASSES[0]

    def test_geojson_validator_rejects(self):
        with pytest.raises(ValueError):
            validate_geojson({"type": "FeatureCollection", "features": [{"type": "Feature"}]})

    def test_grid_correlation_self(self, rng):
        recs = [rec(i, float(rng.uniform(37.7, 37.8)), float(rng.uniform(-122.5, -122.4))) for i in range(300)]
        g = spatial_grid(recs, 0, BOX, 0.02)
        assert grid_correlation(g, g) == pytest.approx(1.0)
        empty = spatial_grid([], 0, BOX, 0.02)
        assert grid_correlation(g, empty) is UNDEFINED


class TestRouteMap:
    ROUTE = ((37.760, -122.440), (37.780, -122.420))

    def test_band_covers_route(self):
        spec = GeoScenarioSpec(BOX, events=(EventSpec(date(2016, 6, 25), self.ROUTE, 400, PARADE),), seed=1)
        recs = gen_geo_detections(spec)
        rm = route_map(recs, PARADE, date(2016, 6, 25), 0.002)
        validate_geojson(rm.geojson)
        assert rm.total == 400
        cells = {(i, j) for i, j, _ in rm.cells}
        # every cell touched lies within the route buffer plus one cell diagonal
        for i, j in cells:
            c_lat, c_lon = (i + 0.5) * 0.002, (j + 0.5) * 0.002
            assert distance_to_route(c_lat, c_lon, self.ROUTE) <= 0.0004 + 0.002 * math.sqrt(2) / 2 + 1e-9
        # connected band: 8-neighbourhood flood fill reaches every cell
        start = next(iter(cells))
        seen, todo = {start}, [start]
        while todo:
            i, j = todo.pop()
            for di in (-1, 0, 1):
                for dj in (-1, 0, 1):
                    n = (i + di, j + dj)
                    if n in cells and n not in seen:
                        seen.add(n)
                        todo.append(n)
        assert seen == cells
        # path order follows the route direction
        lats = [i for i, _, _ in rm.cells]
        assert lats[0] < lats[-1]

    def test_single_record(self):
        rm = route_map([rec()], 0, date(2016, 6, 25))
        assert len(rm.geojson["features"]) == 1
        assert rm.geojson["features"][0]["properties"]["date"] == "2016-06-25"

    def test_no_records_on_date(self):
        rm = route_map([rec()], 0, date(2016, 6, 26))
        assert rm.geojson == {"type": "FeatureCollection", "features": []}

    def test_total_matches_daily_series(self):
        spec = sf_scenario(seed=4, base_scale=0.2)
        recs = gen_geo_detections(spec, SF_WEATHER_2016)
        s = daily_series(recs, PARADE, 2016)
        for d in PARADE_DATES[:2]:
            assert route_map(recs, PARADE, d).total == s[d]


class TestDailySeries:
    def test_empty(self):
        s = daily_series([], 0, 2016)
        assert len(s.counts) == 366 and not s.counts.any()

    def test_single_day(self):
        recs = [rec(i, ts=at(date(2016, 6, 25), i % 24)) for i in range(500)]
        s = daily_series(recs, 0, 2016)
        assert s[date(2016, 6, 25)] == 500 and s.counts.sum() == 500

    def test_non_leap(self):
        assert len(daily_series([], 0, 2015).counts) == 365

    def test_utc_day(self):
        pst = timezone(timedelta(hours=-8))
        r = DetectionRecord("late", 37.7, -122.4, datetime(2016, 3, 11, 20, tzinfo=pst), onehot(0))
        assert daily_series([r], 0, 2016)[date(2016, 3, 12)] == 1

    def test_lag_shift(self):
        s = daily_series([rec(ts=at(date(2016, 6, 27)))], 0, 2016, lag_shift=2)
        assert s[date(2016, 6, 25)] == 1


class TestPeaks:
    def test_flat(self):
        assert detect_peaks(_series(np.full(366, 7))) == []

    def test_parade_dates(self, rng):
        counts = rng.poisson(20, 366)
        s = _series(counts)
        for d in PARADE_DATES:
            s.counts[s.index_of(d)] += 200
        assert detect_peaks(s) == list(PARADE_DATES)

    def test_single_spike_on_zero(self):
        counts = np.zeros(366, int)
        counts[100] = 3
        assert detect_peaks(_series(counts)) == [date(2016, 1, 1) + timedelta(days=100)]

    @given(st.integers(0, 10 ** 6), st.sampled_from([7, 15, 31]), st.floats(1.0, 8.0))
    @settings(max_examples=20, deadline=None)
    def test_brute_force_oracle(self, seed, window, k):
        r = np.random.default_rng(seed)
        counts = r.poisson(5, 366)
        counts[r.integers(0, 366, 4)] += r.integers(10, 60, 4)
        got = [(d - date(2016, 1, 1)).days for d in detect_peaks(_series(counts), window, k)]
        assert got == _brute_peaks(list(counts), window, k, 1.4826)

    @given(st.integers(0, 10 ** 6), st.integers(1, 50))
    @settings(max_examples=20, deadline=None)
    def test_scale_invariance(self, seed, c):
        counts = np.random.default_rng(seed).poisson(4, 366)
        counts[50] += 40
        assert detect_peaks(_series(counts)) == detect_peaks(_series(counts * c))

    def test_even_window_rejected(self):
        with pytest.raises(ValueError):
            detect_peaks(_series(np.zeros(366)), window=10)


class TestMonthlyAndCorrelation:
    def test_minmax(self):
        np.testing.assert_allclose(minmax_normalize([2, 4, 6]), [0, 0.5, 1])
        np.testing.assert_allclose(minmax_normalize([7, 7, 7]), [0.5] * 3)

    @given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=30))
    @settings(max_examples=50, deadline=None)
    def test_minmax_range_and_idempotence(self, xs):
        y = minmax_normalize(xs)
        assert y.min() >= 0 and y.max() <= 1
        if np.ptp(np.asarray(xs)) > 1e-6:
            np.testing.assert_allclose(minmax_normalize(y), y, atol=1e-12)

    def test_monthly(self):
        recs = [rec(i, ts=at(date(2016, 6, 1 + i))) for i in range(9)]
        m = monthly_counts(recs, 0, 2016)
        assert m[5] == 9 and m.sum() == 9
        assert not monthly_counts([], 0, 2016).any()

    def test_correlate_examples(self):
        assert correlate([1, 2, 3], [1, 2, 3]) == pytest.approx(1.0)
        assert correlate([1, 2, 3], [-1, -2, -3]) == pytest.approx(-1.0)
        # cov 5, var 2 and 38/3: r = 5 / sqrt(76/3)
        assert correlate([1, 2, 3], [2, 4, 7]) == pytest.approx(5 / math.sqrt(76 / 3), abs=1e-12)
        assert correlate([1, 2, 3], [2, 4, 7]) == pytest.approx(np.corrcoef([1, 2, 3], [2, 4, 7])[0, 1])

    def test_constant_is_undefined(self):
        r = correlate([1, 1, 1], [1, 2, 3])
        assert r is UNDEFINED and repr(r) == "undefined"

    @given(st.integers(0, 10 ** 6), st.floats(-100, 100).filter(lambda c: abs(c) > 1e-3), st.floats(-100, 100))
    @settings(max_examples=40, deadline=None)
    def test_affine_covariance(self, seed, c, d):
        r = np.random.default_rng(seed)
        a, b = r.normal(size=12), r.normal(size=12)
        assert correlate(a, c * b + d) == pytest.approx(math.copysign(1, c) * correlate(a, b), abs=1e-9)

    def test_too_short(self):
        with pytest.raises(ValueError):
            correlate([1, 2], [2, 1])


class TestWeather:
    def test_round_trip(self, tmp_path):
        p = tmp_path / "w.csv"
        p.write_text(SF_WEATHER_2016.to_csv())
        w = read_weather_csv(p)
        np.testing.assert_allclose(w.precipitation, SF_WEATHER_2016.precipitation)

    @pytest.mark.parametrize("text", [
        "month,temp,precipitation\n" + "".join(f"{m},1,1\n" for m in range(1, 13)),
        "month,temperature,precipitation\n" + "".join(f"{m},1,1\n" for m in range(1, 12)),
        "month,temperature,precipitation\n" + "".join(f"{m},1,x\n" for m in range(1, 13)),
    ])
    def test_malformed(self, text):
        with pytest.raises(ValueError):
            parse_weather_csv(text)


class TestTagCheck:
    def test_kids_playing_football(self):
        r = rec(1, c=SOCCER, tag="kids playing football")
        report = tag_vs_content([r], "football", FOOTBALL)
        assert [x.id for x in report.false_positives] == ["r1"] and report.missed == []

    def test_consistent_record_in_neither(self):
        report = tag_vs_content([rec(2, c=FOOTBALL, tag="Football game")], "FOOTBALL", FOOTBALL)
        assert report.false_positives == [] and report.missed == []

    def test_missed(self):
        report = tag_vs_content([rec(3, c=FOOTBALL, tag=None)], "football", FOOTBALL)
        assert [x.id for x in report.missed] == ["r3"]

    def test_injected_noise_exact(self):
        spec = sf_scenario(seed=6, base_scale=0.3)
        recs, truth = gen_geo_detections(spec, SF_WEATHER_2016, return_truth=True)
        report = tag_vs_content(recs, "football", FOOTBALL)
        assert {x.id for x in report.false_positives} == set(truth.tag_noise_ids)
        assert report.to_dict()["keyword"] == "football"
