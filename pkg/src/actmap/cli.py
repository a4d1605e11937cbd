"""``actmap``: one binary with a subcommand per pipeline stage.

Every command takes a JSON config (``--config``) whose keys override the
documented defaults below; unknown keys are rejected. The resolved config is
written next to the outputs as ``config.json``. Exit codes: 0 ok, 1 runtime
failure, 2 config error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import gradcore as gc
from .actrec import (AugmentSwitches, StreamConfig, TrainSchedule, TwoStream, classify_video, evaluate,
                     train_two_stream, video_record)
from .flowlearn import (FlowTrainConfig, LossConfig, LossWeights, MotionNetConfig, build_motionnet, evaluate_epe,
                        train_motionnet)
from .flowlearn.dataset import load_clip, read_clip_dataset, read_index, write_clip_dataset
from .geomap import (ACTIVITY_CLASSES, BBox, DetectionRecord, correlate, daily_series, detect_peaks, grid_geojson,
                     ingest, minmax_normalize, monthly_counts, partition, read_weather_csv, route_map,
                     spatial_grid, tag_vs_content, write_jsonl)
from .geomap.records import format_timestamp
from .gradcore.checkpoint import atomic_write_bytes
from .synthbench import (SF_BBOX, SF_WEATHER_2016, default_activity_specs, gen_activity_dataset, gen_flow_dataset,
                         gen_geo_detections, sf_scenario)

log = logging.getLogger("actmap")

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Key:
    default: Any
    doc: str


# ---------------------------------------------------------------- defaults

SHARED = {"seed": Key(0, "random seed"), "threads": Key(1, "inference worker threads")}

DEFAULTS: dict[str, dict[str, Key]] = {
    "gen-data": {
        "activity_count": Key(60, "clips per activity class"),
        "ambiguous": Key(False, "give every activity class the same appearance"),
        "speed": Key(2.5, "activity motion speed, px/frame"),
        "frame_count": Key(3, "frames per clip"),
        "resolution": Key([32, 32], "clip height, width"),
        "split": Key(0.8, "train fraction of each activity class"),
        "flow_count": Key(200, "constant-velocity training clips for MotionNet"),
        "flow_heldout": Key(50, "held-out constant-velocity clips"),
        "flow_max_speed": Key(3.0, "max |v| of constant-velocity clips, px/frame"),
        "geo": Key(True, "also generate the city detection scenario and weather table"),
        "parade_base": Key(20.0, "noise floor of parade detections per day"),
        "parade_count": Key(200, "extra detections per injected parade"),
        "tag_noise": Key(0.3, "fraction of soccer records tagged 'football'"),
        "basketball_coupling": Key(-0.9, "basketball vs precipitation coupling"),
        "swimming_coupling": Key(0.9, "swimming vs temperature coupling"),
        "geo_scale": Key(1.0, "multiplier on background detection rates"),
    },
    "train-flow": {
        "data": Key([], "clip dataset directories to train on (train split only)"),
        "heldout": Key("", "clip dataset with ground-truth flow for endpoint error, optional"),
        "steps": Key(1500, "optimisation steps"),
        "lr": Key(1e-3, "Adam learning rate"),
        "batch_size": Key(16, "clips per step"),
        "halve_every": Key(None, "halve the learning rate every this many steps (default: at quarters)"),
        "smooth_weight": Key(0.1, "smoothness loss weight"),
        "width_scale": Key(0.125, "channel width multiplier"),
        "checkpoint_every": Key(0, "save a checkpoint every this many steps (0: off)"),
    },
    "train-streams": {
        "data": Key("", "activity clip dataset directory"),
        "motionnet": Key("", "pretrained MotionNet checkpoint; empty: pretrain here"),
        "motion_steps": Key(1500, "MotionNet pretraining steps when no checkpoint is given"),
        "motion_generic": Key(200, "generic constant-velocity clips mixed into MotionNet pretraining"),
        "spatial_steps": Key(250, "spatial stream steps"),
        "temporal_steps": Key(800, "temporal stream steps"),
        "lr": Key(5e-3, "SGD learning rate for both streams"),
        "motionnet_lr_ratio": Key(1e-3, "MotionNet learning rate relative to the temporal head"),
        "batch_size": Key(32, "clips per step"),
        "augment": Key(True, "flip and multi-scale corner cropping"),
        "flow_bound": Key(20.0, "flow clip bound B before normalisation, px"),
        "width_scale": Key(0.125, "channel width multiplier"),
    },
    "classify": {
        "model": Key("", "directory written by train-streams"),
        "data": Key("", "clip dataset; each entry is one video of 3T channels"),
        "split": Key("", "only classify this split (empty: all)"),
        "locations": Key("", "JSONL of {id, lat, lon, ts, tag}; when given, detections.jsonl is written"),
        "sample_period": Key(1.0, "seconds between sampled clips"),
        "fps": Key(30.0, "frame rate metadata of the videos"),
    },
    "map": {
        "detections": Key("", "detections JSONL"),
        "class_id": Key(8, "activity class to map"),
        "cell_size": Key(0.002, "grid cell size, degrees"),
        "threshold": Key(0.5, "minimum top score for a class assignment"),
        "bbox": Key(None, "[lat_min, lon_min, lat_max, lon_max]; default: the city box"),
        "date": Key("", "YYYY-MM-DD: also write that day's route map"),
        "class_names": Key([], "names for the class ids (default: the ten activities)"),
    },
    "timeline": {
        "detections": Key("", "detections JSONL"),
        "class_id": Key(8, "activity class"),
        "year": Key(2016, "calendar year"),
        "window": Key(31, "peak detection window, days (odd)"),
        "k": Key(6.0, "peak threshold in robust standard deviations"),
        "threshold": Key(0.5, "minimum top score for a class assignment"),
        "lag_shift": Key(0, "days to move records earlier (upload delay)"),
    },
    "weather": {
        "detections": Key("", "detections JSONL"),
        "weather": Key("", "monthly weather CSV"),
        "year": Key(2016, "calendar year"),
        "pairs": Key([[1, "precipitation"], [6, "temperature"]], "[class_id, variable] pairs to correlate"),
        "threshold": Key(0.5, "minimum top score for a class assignment"),
    },
    "tagcheck": {
        "detections": Key("", "detections JSONL"),
        "keyword": Key("football", "tag keyword (case-insensitive substring)"),
        "class_id": Key(2, "content class the keyword should mean"),
        "threshold": Key(0.5, "minimum top score for a class assignment"),
    },
    "eval": {
        "model": Key("", "directory written by train-streams, or 'oracle'"),
        "data": Key("", "labelled clip dataset"),
        "split": Key("val", "split to evaluate (empty: all)"),
    },
    "bench": {
        "model": Key("", "directory written by train-streams; empty: untrained streams"),
        "width_scale": Key(0.125, "width of the untrained streams"),
        "num_classes": Key(4, "classes of the untrained streams"),
        "resolution": Key([32, 32], "input resolution of the untrained streams"),
        "clips": Key(64, "clips per timed pass"),
        "min_seconds": Key(2.0, "repeat passes until at least this much time has elapsed"),
    },
    "report": {
        "results": Key("", "directory holding the outputs of earlier commands"),
    },
}


def config_doc(command: str) -> str:
    keys = {**SHARED, **DEFAULTS[command]}
    return "\n".join(f"  {k} = {json.dumps(v.default)}: {v.doc}" for k, v in keys.items())


def _type_ok(default, value) -> bool:
    if default is None:
        return value is None or isinstance(value, (int, float, str, list)) and not isinstance(value, bool)
    if isinstance(default, bool):
        return isinstance(value, bool)
    if isinstance(default, int):
        return isinstance(value, int) and not isinstance(value, bool)
    if isinstance(default, float):
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    return isinstance(value, type(default))


def resolve_config(command: str, file_cfg: dict | None, overrides: dict) -> dict:
    keys = {**SHARED, **DEFAULTS[command]}
    cfg = {k: v.default for k, v in keys.items()}
    problems = []
    for source, values in (("config", file_cfg or {}), ("flag", overrides)):
        for k, v in values.items():
            if k not in keys:
                problems.append(f"unknown key {k!r} ({source})")
            elif not _type_ok(keys[k].default, v):
                problems.append(f"key {k!r} expects {type(keys[k].default).__name__}, got {json.dumps(v)} ({source})")
            else:
                cfg[k] = float(v) if isinstance(keys[k].default, float) else v
    if problems:
        raise ConfigError("; ".join(problems))
    if cfg["threads"] < 1:
        raise ConfigError("key 'threads' must be >= 1")
    return cfg


def load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    try:
        obj = json.loads(Path(path).read_text())
    except FileNotFoundError as e:
        raise ConfigError(f"config file {path} not found") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path}: {e}") from e
    if not isinstance(obj, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return obj


# ---------------------------------------------------------------- output helpers

def write_text(path: Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def write_json(path: Path, obj) -> None:
    write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    write_text(path, buf.getvalue())


def _need(cfg: dict, *keys: str) -> None:
    missing = [k for k in keys if cfg[k] in ("", [], None)]
    if missing:
        raise ConfigError(f"missing required key(s): {', '.join(missing)}")


def _records(path: str) -> list[DetectionRecord]:
    return ingest(path)


# ---------------------------------------------------------------- model storage

MODEL_CKPT, MODEL_META = "model.ckpt", "model.json"


def save_model(out: Path, streams: TwoStream, class_names) -> None:
    c = streams.cfg
    meta = {"width_scale": c.width_scale, "input_resolution": list(c.input_resolution),
            "num_classes": c.num_classes, "fusion_weights": list(c.fusion_weights), "flow_bound": c.flow_bound,
            "frame_count": streams.frame_count, "motion_width_scale": streams.motion_cfg.width_scale,
            "class_names": list(class_names)}
    streams.save(out / MODEL_CKPT)
    write_json(out / MODEL_META, meta)


def load_model(model_dir: str) -> tuple[TwoStream, list[str]]:
    d = Path(model_dir)
    absent = [str(d / n) for n in (MODEL_CKPT, MODEL_META) if not (d / n).exists()]
    if absent:
        raise FileNotFoundError(f"model artifacts missing: {', '.join(absent)}")
    meta = json.loads((d / MODEL_META).read_text())
    cfg = StreamConfig(width_scale=meta["width_scale"], input_resolution=tuple(meta["input_resolution"]),
                       num_classes=meta["num_classes"], fusion_weights=tuple(meta["fusion_weights"]),
                       flow_bound=meta["flow_bound"])
    mcfg = MotionNetConfig(width_scale=meta["motion_width_scale"], frame_count=meta["frame_count"],
                           input_resolution=tuple(meta["input_resolution"]))
    streams = TwoStream(cfg, mcfg)
    streams.load(d / MODEL_CKPT)
    streams.freeze()
    return streams, list(meta.get("class_names") or [])


class OracleScorer:
    """Perfect classifier for a labelled dataset: one-hot on the true label."""

    def __init__(self, labels, num_classes: int, frame_count: int):
        self.labels = np.asarray(labels)
        self.num_classes = num_classes
        self.frame_count = frame_count
        self._cursor = 0

    def predict_scores(self, clips):
        out = np.eye(self.num_classes)[self.labels[self._cursor:self._cursor + len(clips)]]
        self._cursor += len(clips)
        return out


# ---------------------------------------------------------------- commands

def cmd_gen_data(cfg: dict, out: Path) -> dict:
    seed = cfg["seed"]
    res = tuple(cfg["resolution"])
    specs = default_activity_specs(cfg["activity_count"], cfg["ambiguous"], cfg["speed"])
    ds = gen_activity_dataset(specs, cfg["split"], cfg["frame_count"], res, seed)
    write_clip_dataset(out / "activity", ds.frames, ds.flows, ds.labels, ds.splits, ds.ids)
    write_json(out / "activity" / "classes.json", ds.class_names)
    loc_rng = np.random.default_rng([seed, 1])
    start = datetime(2016, 1, 1, tzinfo=timezone.utc)
    lines = []
    for vid in ds.ids:
        lat = float(SF_BBOX.lat_min + loc_rng.uniform() * (SF_BBOX.lat_max - SF_BBOX.lat_min))
        lon = float(SF_BBOX.lon_min + loc_rng.uniform() * (SF_BBOX.lon_max - SF_BBOX.lon_min))
        ts = start + timedelta(seconds=int(loc_rng.integers(366 * 86400)))
        lines.append(json.dumps({"id": vid, "lat": round(lat, 6), "lon": round(lon, 6),
                                 "ts": format_timestamp(ts), "tag": None}))
    write_text(out / "activity" / "locations.jsonl", "".join(s + "\n" for s in lines))
    summary = {"activity_clips": len(ds)}
    if cfg["flow_count"] > 0:
        f, v = gen_flow_dataset(cfg["flow_count"], cfg["flow_max_speed"], cfg["frame_count"], res, seed=seed + 1)
        write_clip_dataset(out / "flow", f, v)
        summary["flow_clips"] = len(f)
    if cfg["flow_heldout"] > 0:
        f, v = gen_flow_dataset(cfg["flow_heldout"], cfg["flow_max_speed"], cfg["frame_count"], res, seed=seed + 2)
        write_clip_dataset(out / "flow_heldout", f, v)
    if cfg["geo"]:
        spec = sf_scenario(seed, cfg["parade_base"], cfg["parade_count"], cfg["tag_noise"],
                           cfg["basketball_coupling"], cfg["swimming_coupling"], cfg["geo_scale"])
        records = gen_geo_detections(spec, SF_WEATHER_2016)
        write_jsonl(records, out / "geo" / "detections.jsonl")
        write_text(out / "geo" / "weather.csv", SF_WEATHER_2016.to_csv())
        summary["geo_records"] = len(records)
    return summary


def _train_frames(dirs) -> np.ndarray:
    parts = []
    for d in dirs:
        frames, _, _, entries = read_clip_dataset(d)
        keep = [i for i, e in enumerate(entries) if e.split == "train"]
        parts.append(frames[keep])
    return np.concatenate(parts)


def cmd_train_flow(cfg: dict, out: Path) -> dict:
    _need(cfg, "data")
    dirs = cfg["data"] if isinstance(cfg["data"], list) else [cfg["data"]]
    frames = _train_frames(dirs)
    mcfg = MotionNetConfig(width_scale=cfg["width_scale"], frame_count=frames.shape[1] // 3,
                           input_resolution=tuple(frames.shape[2:]),
                           loss=LossConfig(weights=LossWeights(lambda2=cfg["smooth_weight"])))
    net = build_motionnet(mcfg, cfg["seed"], np.float32)
    tcfg = FlowTrainConfig(lr=cfg["lr"], batch_size=cfg["batch_size"], halve_every=cfg["halve_every"],
                           checkpoint_every=cfg["checkpoint_every"], checkpoint_dir=str(out / "checkpoints"),
                           seed=cfg["seed"])
    trace = train_motionnet(net, frames.astype(np.float32), cfg["steps"], tcfg)
    gc.checkpoint.save(out / "motionnet.ckpt", net.state_dict())
    write_csv(out / "trace.csv", ["step", "loss"], [(i, f"{v:.8g}") for i, v in enumerate(trace)])
    summary = {"steps": len(trace), "final_loss": trace[-1] if trace else None}
    if cfg["heldout"]:
        hf, hv, _, _ = read_clip_dataset(cfg["heldout"])
        if hv is None:
            raise ValueError(f"{cfg['heldout']} holds no ground-truth flow")
        summary["heldout_epe"] = evaluate_epe(net, hf, hv)
    write_json(out / "metrics.json", summary)
    return summary


def cmd_train_streams(cfg: dict, out: Path) -> dict:
    _need(cfg, "data")
    frames, _, labels, entries = read_clip_dataset(cfg["data"])
    classes_path = Path(cfg["data"]) / "classes.json"
    names = json.loads(classes_path.read_text()) if classes_path.exists() else []
    m = max(len(names), int(labels.max()) + 1)
    train = np.array([e.split == "train" for e in entries])
    val = np.array([e.split == "val" for e in entries])
    if not train.any():
        raise ValueError(f"{cfg['data']} has no training split")
    res = tuple(frames.shape[2:])
    scfg = StreamConfig(width_scale=cfg["width_scale"], input_resolution=res, num_classes=m,
                        flow_bound=cfg["flow_bound"])
    mcfg = MotionNetConfig(width_scale=cfg["width_scale"], frame_count=frames.shape[1] // 3, input_resolution=res)
    streams = TwoStream(scfg, mcfg, seed=cfg["seed"])
    summary: dict[str, Any] = {}
    if cfg["motionnet"]:
        streams.motionnet.load_state_dict(gc.checkpoint.load(cfg["motionnet"]))
    elif cfg["motion_steps"] > 0:
        clips = frames[train]
        if cfg["motion_generic"] > 0:
            generic, _ = gen_flow_dataset(cfg["motion_generic"], 3.0, mcfg.frame_count, res, seed=cfg["seed"] + 7)
            clips = np.concatenate([clips, generic])
        mtrace = train_motionnet(streams.motionnet, clips.astype(np.float32), cfg["motion_steps"],
                                 FlowTrainConfig(seed=cfg["seed"]))
        summary["motion_final_loss"] = mtrace[-1]
    aug = AugmentSwitches() if cfg["augment"] else None
    common = dict(lr=cfg["lr"], batch_size=cfg["batch_size"], augment=aug, seed=cfg["seed"])
    schedules = (TrainSchedule(steps=cfg["spatial_steps"], decay_at=(0.4, 0.8), **common),
                 TrainSchedule(steps=cfg["temporal_steps"], decay_at=(5 / 16, 10 / 16),
                               motionnet_lr_ratio=cfg["motionnet_lr_ratio"], **common))
    traces = train_two_stream(streams, (frames[train], labels[train]), schedules)
    save_model(out, streams, names or [str(i) for i in range(m)])
    rows = [("spatial", i, f"{l:.6g}", a) for i, (l, a) in enumerate(zip(traces.spatial.loss,
                                                                        traces.spatial.train_accuracy))]
    rows += [("temporal", i, f"{l:.6g}", a) for i, (l, a) in enumerate(zip(traces.temporal.loss,
                                                                          traces.temporal.train_accuracy))]
    write_csv(out / "traces.csv", ["stream", "step", "loss", "batch_accuracy"], rows)
    if val.any():
        sc = streams.score_batch(frames[val])
        for k in ("spatial", "temporal", "fused"):
            summary[f"val_{k}_accuracy"] = float(np.mean(getattr(sc, k).argmax(1) == labels[val]))
    write_json(out / "metrics.json", summary)
    return summary


def _videos(data: str, split: str):
    entries = [e for e in read_index(data) if not split or e.split == split]
    if not entries:
        raise ValueError(f"{data}: no clips{' in split ' + split if split else ''}")
    for e in entries:
        frames, _ = load_clip(data, e.id)
        yield e, frames.reshape(-1, 3, *frames.shape[1:])


def cmd_classify(cfg: dict, out: Path) -> dict:
    _need(cfg, "model", "data")
    streams, _ = load_model(cfg["model"])
    videos = list(_videos(cfg["data"], cfg["split"]))

    def one(item):
        e, video = item
        return classify_video(streams, video, cfg["sample_period"], cfg["fps"])

    t0 = time.perf_counter()
    with ThreadPoolExecutor(cfg["threads"]) as pool:
        preds = list(pool.map(one, videos))
    seconds = time.perf_counter() - t0
    frames = sum(len(p.clip_scores) * streams.frame_count for p in preds)
    results = [video_record(e.id, p) for (e, _), p in zip(videos, preds)]
    write_text(out / "results.jsonl", "".join(json.dumps(r) + "\n" for r in results))
    stats = {"videos": len(results), "frames": frames, "seconds": seconds, "fps": frames / seconds}
    write_json(out / "stats.json", stats)
    summary = {"videos": len(results)}
    if cfg["locations"]:
        locs = {}
        for n, line in enumerate(Path(cfg["locations"]).read_text().splitlines(), 1):
            if line.strip():
                obj = json.loads(line)
                locs[obj["id"]] = obj
        missing = [r["id"] for r in results if r["id"] not in locs]
        if missing:
            raise ValueError(f"{len(missing)} classified video(s) lack a location, first: {missing[0]}")
        dets = [DetectionRecord.from_obj({**locs[r["id"]], "scores": r["scores"]}) for r in results]
        write_jsonl(dets, out / "detections.jsonl")
        summary["detections"] = len(dets)
    return summary


def _bbox(cfg) -> BBox:
    if cfg["bbox"] is None:
        return SF_BBOX
    b = cfg["bbox"]
    if not isinstance(b, list) or len(b) != 4:
        raise ConfigError("key 'bbox' must be [lat_min, lon_min, lat_max, lon_max]")
    return BBox(*map(float, b))


def cmd_map(cfg: dict, out: Path) -> dict:
    _need(cfg, "detections")
    records = _records(cfg["detections"])
    names = cfg["class_names"] or list(ACTIVITY_CLASSES)
    cid = cfg["class_id"]
    name = names[cid] if 0 <= cid < len(names) else f"class{cid}"
    bbox = _bbox(cfg)
    grid = spatial_grid(records, cid, bbox, cfg["cell_size"], cfg["threshold"])
    write_json(out / "grid.geojson", grid_geojson(grid, name))
    rows = []
    for i, j in zip(*np.nonzero(grid.counts)):
        lat0, lon0, _, _ = grid.cell_bounds(int(i), int(j))
        rows.append((int(i), int(j), f"{lat0:.6f}", f"{lon0:.6f}", int(grid.counts[i, j])))
    write_csv(out / "grid.csv", ["row", "col", "lat_min", "lon_min", "count"], rows)
    part = partition(records, bbox, cfg["cell_size"], cfg["threshold"])
    summary = {"class_id": cid, "class_name": name, "records": len(records), "in_grid": grid.total,
               "outside": grid.outside, "conserved": part.conserved()}
    if cfg["date"]:
        day = datetime.strptime(cfg["date"], "%Y-%m-%d").date()
        rm = route_map(records, cid, day, cfg["cell_size"], cfg["threshold"], name)
        write_json(out / f"route_{cfg['date']}.geojson", rm.geojson)
        summary["route_cells"] = len(rm.geojson["features"])
    write_json(out / "map.json", summary)
    return summary


def cmd_timeline(cfg: dict, out: Path) -> dict:
    _need(cfg, "detections")
    records = _records(cfg["detections"])
    series = daily_series(records, cfg["class_id"], cfg["year"], cfg["threshold"], cfg["lag_shift"])
    peaks = detect_peaks(series, cfg["window"], cfg["k"])
    write_csv(out / "daily.csv", ["date", "count"],
              [(series.date_of(i).isoformat(), int(c)) for i, c in enumerate(series.counts)])
    result = {"class_id": cfg["class_id"], "year": cfg["year"], "peaks": [d.isoformat() for d in peaks]}
    write_json(out / "peaks.json", result)
    return result


def cmd_weather(cfg: dict, out: Path) -> dict:
    _need(cfg, "detections", "weather")
    records = _records(cfg["detections"])
    weather = read_weather_csv(cfg["weather"])
    pairs, rows, header = [], [], ["month"]
    monthly = {}
    for pair in cfg["pairs"]:
        if not (isinstance(pair, list) and len(pair) == 2 and isinstance(pair[0], int)
                and pair[1] in ("temperature", "precipitation")):
            raise ConfigError(f"weather pair {pair!r} must be [class_id, 'temperature'|'precipitation']")
        cid, var = pair
        if cid not in monthly:
            monthly[cid] = monthly_counts(records, cid, cfg["year"], cfg["threshold"])
        r = correlate(minmax_normalize(monthly[cid]), minmax_normalize(weather.variable(var)))
        pairs.append({"class_id": cid, "variable": var, "r": r if isinstance(r, float) else "undefined"})
    cids = sorted(monthly)
    header += [f"class_{c}" for c in cids] + ["temperature", "precipitation"]
    for mth in range(12):
        rows.append([mth + 1] + [int(monthly[c][mth]) for c in cids]
                    + [weather.temperature[mth], weather.precipitation[mth]])
    write_csv(out / "monthly.csv", header, rows)
    result = {"year": cfg["year"], "correlations": pairs}
    write_json(out / "correlations.json", result)
    return result


def cmd_tagcheck(cfg: dict, out: Path) -> dict:
    _need(cfg, "detections")
    records = _records(cfg["detections"])
    report = tag_vs_content(records, cfg["keyword"], cfg["class_id"], cfg["threshold"])
    result = report.to_dict()
    write_json(out / "tagcheck.json", result)
    return {"false_positives": len(report.false_positives), "missed": len(report.missed)}


def cmd_eval(cfg: dict, out: Path) -> dict:
    _need(cfg, "model", "data")
    frames, _, labels, entries = read_clip_dataset(cfg["data"], cfg["split"] or None)
    if len(frames) == 0:
        raise ValueError(f"{cfg['data']}: no clips in split {cfg['split']!r}")
    classes_path = Path(cfg["data"]) / "classes.json"
    names = json.loads(classes_path.read_text()) if classes_path.exists() else []
    if cfg["model"] == "oracle":
        m = max(len(names), int(labels.max()) + 1)
        scorer = OracleScorer(labels, m, frames.shape[1] // 3)
    else:
        scorer, model_names = load_model(cfg["model"])
        m = scorer.cfg.num_classes
        names = names or model_names
    names = names or [str(i) for i in range(m)]
    ev = evaluate(scorer, (frames, labels), m)
    write_json(out / "eval.json", ev.to_dict(names))
    write_json(out / "stats.json", {"frames": ev.frames, "seconds": ev.seconds, "fps": ev.fps})
    return {"accuracy": ev.accuracy}


def cmd_bench(cfg: dict, out: Path) -> dict:
    if cfg["model"]:
        streams, _ = load_model(cfg["model"])
    else:
        scfg = StreamConfig(width_scale=cfg["width_scale"], input_resolution=tuple(cfg["resolution"]),
                            num_classes=cfg["num_classes"])
        streams = TwoStream(scfg, seed=cfg["seed"])
        streams.freeze()
    rng = np.random.default_rng(cfg["seed"])
    h, w = streams.cfg.input_resolution
    clips = rng.uniform(size=(cfg["clips"], 3 * streams.frame_count, h, w)).astype(streams.dtype)
    chunks = np.array_split(clips, cfg["threads"])
    frames = 0
    print("bench: start", flush=True)
    t0 = time.perf_counter()
    with ThreadPoolExecutor(cfg["threads"]) as pool:
        while True:
            list(pool.map(streams.predict_scores, chunks))
            frames += len(clips) * streams.frame_count
            if time.perf_counter() - t0 >= cfg["min_seconds"]:
                break
    seconds = time.perf_counter() - t0
    print("bench: done", flush=True)
    result = {"frames": frames, "seconds": seconds, "fps": frames / seconds, "threads": cfg["threads"]}
    write_json(out / "bench.json", result)
    return result


def _find(root: Path, name: str) -> Path | None:
    hits = sorted(root.rglob(name))
    return hits[0] if hits else None


def cmd_report(cfg: dict, out: Path) -> dict:
    _need(cfg, "results")
    root = Path(cfg["results"])
    ev_path = _find(root, "eval.json") if root.is_dir() else None
    if ev_path is None:
        raise FileNotFoundError(f"report inputs missing under {root}: eval.json")
    ev = json.loads(ev_path.read_text())
    lines = ["Per-class accuracy", ""]
    rows, vals = [], []
    width = max([len("Mean Average")] + [len(c["class"]) for c in ev["per_class"]])
    for name, acc in ((c["class"], c["accuracy"]) for c in ev["per_class"]):
        cell = "n/a" if acc is None else f"{100 * acc:.2f}"
        if acc is not None:
            vals.append(acc)
        rows.append((name, "n/a" if acc is None else f"{acc:.6f}"))
        lines.append(f"{name:<{width}}  {cell:>7}")
    mean = float(np.mean(vals)) if vals else math.nan
    rows.append(("Mean Average", f"{mean:.6f}"))
    lines += [f"{'Mean Average':<{width}}  {100 * mean:>7.2f}", ""]
    fps_path = _find(root, "bench.json") or _find(ev_path.parent, "stats.json")
    if fps_path is not None:
        fps = json.loads(fps_path.read_text())["fps"]
        lines.append(f"Throughput: {fps:.2f} frames/s ({fps_path.name})")
        rows.append(("fps", f"{fps:.4f}"))
    else:
        lines.append("Throughput: not measured")
    peaks_path = _find(root, "peaks.json")
    if peaks_path is not None:
        pk = json.loads(peaks_path.read_text())
        lines.append(f"Event peaks (class {pk['class_id']}, {pk['year']}): {', '.join(pk['peaks']) or 'none'}")
        for d in pk["peaks"]:
            rows.append(("peak", d))
    corr_path = _find(root, "correlations.json")
    if corr_path is not None:
        for c in json.loads(corr_path.read_text())["correlations"]:
            r = c["r"]
            lines.append(f"Monthly correlation class {c['class_id']} vs {c['variable']}: "
                         f"{r if isinstance(r, str) else f'{r:+.3f}'}")
            rows.append((f"r class {c['class_id']} {c['variable']}", r if isinstance(r, str) else f"{r:.6f}"))
    write_text(out / "report.txt", "\n".join(lines) + "\n")
    write_csv(out / "report.csv", ["item", "value"], rows)
    return {"mean_average": mean}


COMMANDS: dict[str, Callable[[dict, Path], dict]] = {
    "gen-data": cmd_gen_data, "train-flow": cmd_train_flow, "train-streams": cmd_train_streams,
    "classify": cmd_classify, "map": cmd_map, "timeline": cmd_timeline, "weather": cmd_weather,
    "tagcheck": cmd_tagcheck, "eval": cmd_eval, "bench": cmd_bench, "report": cmd_report,
}


HELP = {
    "gen-data": "generate synthetic activity clips, flow clips and a city detection scenario",
    "train-flow": "train MotionNet without labels by image reconstruction",
    "train-streams": "train the spatial and stacked temporal streams",
    "classify": "classify videos; optionally attach locations to write detections",
    "map": "grid one class of detections and export GeoJSON",
    "timeline": "daily counts and event peaks for one class",
    "weather": "correlate monthly class counts with weather",
    "tagcheck": "compare user tags with recognised content",
    "eval": "mean-average accuracy, per-class accuracy, confusion matrix and fps",
    "bench": "time the full inference pipeline",
    "report": "summarise earlier results as plain text and CSV",
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="actmap", description="Activity recognition and mapping pipeline.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, help=HELP[name],
                            description=f"Config keys (JSON):\n{config_doc(name)}",
                            formatter_class=argparse.RawDescriptionHelpFormatter)
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--seed", type=int, help="random seed (overrides the config)")
        sp.add_argument("--out", default=None, help="output directory (default: runs/<command>)")
        sp.add_argument("--scale", type=float, help="width_scale override")
        sp.add_argument("--threads", type=int, help="inference worker threads")
        sp.add_argument("-v", "--verbose", action="store_true", help="log progress")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        overrides = {}
        if args.seed is not None:
            if args.seed < 0 or args.seed >= 2 ** 64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            overrides["seed"] = args.seed
        if args.threads is not None:
            overrides["threads"] = args.threads
        if args.scale is not None:
            if "width_scale" not in DEFAULTS[args.command]:
                raise ConfigError(f"--scale does not apply to {args.command}")
            if not 0 < args.scale <= 1:
                raise ConfigError("--scale must lie in (0, 1]")
            overrides["width_scale"] = args.scale
        cfg = resolve_config(args.command, load_config_file(args.config), overrides)
        out = Path(args.out or f"runs/{args.command}")
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "config.json", {"command": args.command, **cfg})
        summary = COMMANDS[args.command](cfg, out)
    except ConfigError as e:
        print(f"actmap {args.command}: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # any hard failure maps to exit 1
        log.debug("failure", exc_info=True)
        print(f"actmap {args.command}: error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    print(json.dumps(summary, sort_keys=True, default=str))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
