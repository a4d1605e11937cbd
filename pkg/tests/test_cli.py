import hashlib
import json
import subprocess
import sys
from pathlib import Path

import pytest

from actmap.cli import DEFAULTS, main, resolve_config, ConfigError

SMALL_DATA = {"activity_count": 4, "flow_count": 6, "flow_heldout": 4, "geo_scale": 0.05, "parade_count": 40}
TINY_TRAIN = {"motion_steps": 2, "motion_generic": 4, "spatial_steps": 2, "temporal_steps": 2, "batch_size": 4}


def run(tmp_path, command, cfg=None, out=None, extra=()):
    args = [command, "--out", str(out or tmp_path / command)]
    if cfg is not None:
        p = tmp_path / f"{command}.cfg.json"
        p.write_text(json.dumps(cfg))
        args += ["--config", str(p)]
    return main(args + list(extra))


def digest(root: Path) -> str:
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file() and p.name != "config.json":
            h.update(str(p.relative_to(root)).encode())
            h.update(p.read_bytes())
    return h.hexdigest()


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """gen-data, a few-step train-streams, then classify with locations attached."""
    root = tmp_path_factory.mktemp("cli")
    assert run(root, "gen-data", SMALL_DATA, root / "data") == 0
    assert run(root, "train-streams", {"data": str(root / "data" / "activity"), **TINY_TRAIN},
               root / "model") == 0
    cfg = {"model": str(root / "model"), "data": str(root / "data" / "activity"),
           "locations": str(root / "data" / "activity" / "locations.jsonl"), "threads": 2}
    assert run(root, "classify", cfg, root / "classify") == 0
    return root


class TestConfig:
    def test_defaults_resolve(self):
        for command in DEFAULTS:
            cfg = resolve_config(command, {}, {})
            assert cfg["seed"] == 0 and cfg["threads"] == 1

    def test_unknown_key_exit_2(self, tmp_path, capsys):
        assert run(tmp_path, "gen-data", {"activity_cuont": 3}) == 2
        assert "activity_cuont" in capsys.readouterr().err

    def test_wrong_type_exit_2(self, tmp_path):
        assert run(tmp_path, "gen-data", {"activity_count": "many"}) == 2

    def test_scale_only_where_it_applies(self, tmp_path):
        assert run(tmp_path, "timeline", extra=["--scale", "0.5"]) == 2

    def test_resolve_rejects_unknown(self):
        with pytest.raises(ConfigError):
            resolve_config("map", {"colour": "red"}, {})

    def test_runtime_failure_exit_1(self, tmp_path):
        assert run(tmp_path, "timeline", {"detections": str(tmp_path / "absent.jsonl")}) == 1

    def test_config_written(self, tmp_path):
        run(tmp_path, "timeline", {"detections": str(tmp_path / "absent.jsonl"), "k": 4.0}, extra=["--seed", "9"])
        cfg = json.loads((tmp_path / "timeline" / "config.json").read_text())
        assert cfg["command"] == "timeline" and cfg["k"] == 4.0 and cfg["seed"] == 9 and cfg["window"] == 31


class TestGenData:
    def test_byte_deterministic(self, tmp_path):
        assert run(tmp_path, "gen-data", SMALL_DATA, tmp_path / "a") == 0
        assert run(tmp_path, "gen-data", SMALL_DATA, tmp_path / "b") == 0
        assert digest(tmp_path / "a") == digest(tmp_path / "b")

    def test_seed_changes_output(self, tmp_path):
        run(tmp_path, "gen-data", {**SMALL_DATA, "geo": False}, tmp_path / "a")
        run(tmp_path, "gen-data", {**SMALL_DATA, "geo": False}, tmp_path / "b", extra=["--seed", "1"])
        assert digest(tmp_path / "a") != digest(tmp_path / "b")


class TestPipeline:
    def test_classify_records(self, pipeline):
        lines = (pipeline / "classify" / "results.jsonl").read_text().splitlines()
        assert len(lines) == 16
        r = json.loads(lines[0])
        assert set(r) == {"id", "label", "confidence", "scores"}
        assert abs(sum(r["scores"]) - 1) < 1e-6

    def test_map_conserves_records(self, pipeline):
        dets = str(pipeline / "classify" / "detections.jsonl")
        for c in range(4):
            assert run(pipeline, "map", {"detections": dets, "class_id": c, "threshold": 0.0,
                                         "class_names": ["a", "b", "c", "d"]}, pipeline / f"map{c}") == 0
        totals = [json.loads((pipeline / f"map{c}" / "map.json").read_text()) for c in range(4)]
        assert all(t["conserved"] for t in totals)
        counted = sum(sum(f["properties"]["count"] for f in
                          json.loads((pipeline / f"map{c}" / "grid.geojson").read_text())["features"])
                      for c in range(4))
        assert counted == 16

    def test_eval_model(self, pipeline):
        cfg = {"model": str(pipeline / "model"), "data": str(pipeline / "data" / "activity")}
        assert run(pipeline, "eval", cfg, pipeline / "eval_model") == 0
        ev = json.loads((pipeline / "eval_model" / "eval.json").read_text())
        assert len(ev["per_class"]) == 4 and 0 <= ev["accuracy"] <= 1


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    root = tmp_path_factory.mktemp("evaldata")
    assert run(root, "gen-data", {**SMALL_DATA, "geo": False}, root / "data") == 0
    return root / "data" / "activity"


class TestEvalAndReport:
    def test_oracle_is_perfect(self, tmp_path, data):
        assert run(tmp_path, "eval", {"model": "oracle", "data": str(data)}, tmp_path / "ev") == 0
        ev = json.loads((tmp_path / "ev" / "eval.json").read_text())
        assert ev["accuracy"] == 1.0
        assert [c["class"] for c in ev["per_class"]] == json.loads((data / "classes.json").read_text())

    def test_report_rows(self, tmp_path, data):
        run(tmp_path, "eval", {"model": "oracle", "data": str(data)}, tmp_path / "res" / "ev")
        assert run(tmp_path, "report", {"results": str(tmp_path / "res")}, tmp_path / "rep") == 0
        text = (tmp_path / "rep" / "report.txt").read_text()
        assert "Mean Average" in text and "100.00" in text
        rows = (tmp_path / "rep" / "report.csv").read_text().splitlines()
        names = json.loads((data / "classes.json").read_text())
        assert [r.split(",")[0] for r in rows[1:5]] == names

    def test_report_absent_class(self, tmp_path):
        ev = {"accuracy": 0.5, "overall": 0.5, "confusion": [],
              "per_class": [{"class": "x", "accuracy": 1.0}, {"class": "y", "accuracy": None},
                            {"class": "z", "accuracy": 0.0}]}
        (tmp_path / "res").mkdir()
        (tmp_path / "res" / "eval.json").write_text(json.dumps(ev))
        assert run(tmp_path, "report", {"results": str(tmp_path / "res")}, tmp_path / "rep") == 0
        rows = dict(r.split(",", 1) for r in (tmp_path / "rep" / "report.csv").read_text().splitlines()[1:])
        assert rows["y"] == "n/a" and float(rows["Mean Average"]) == pytest.approx(0.5)

    def test_report_missing_eval_exit_1(self, tmp_path, capsys):
        (tmp_path / "res").mkdir()
        assert run(tmp_path, "report", {"results": str(tmp_path / "res")}, tmp_path / "rep") == 1
        assert "eval.json" in capsys.readouterr().err


class TestBench:
    def test_bench_writes_fps(self, tmp_path):
        assert run(tmp_path, "bench", {"clips": 4, "min_seconds": 0.05}) == 0
        b = json.loads((tmp_path / "bench" / "bench.json").read_text())
        assert b["fps"] > 0 and b["frames"] % 12 == 0

    def test_entry_point_markers(self, tmp_path):
        cfg = tmp_path / "b.json"
        cfg.write_text(json.dumps({"clips": 2, "min_seconds": 0.01}))
        proc = subprocess.run([sys.executable, "-m", "actmap.cli", "bench", "--config", str(cfg),
                               "--out", str(tmp_path / "b")], capture_output=True, text=True, check=True)
        lines = proc.stdout.splitlines()
        assert lines[0] == "bench: start" and lines[1] == "bench: done"
