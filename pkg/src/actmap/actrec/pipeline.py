"""The stacked two-stream classifier: spatial stream on the centre frame,
MotionNet feeding a temporal stream through flow normalisation, late fusion."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import gradcore as gc
from ..flowlearn import MotionNet, MotionNetConfig, build_motionnet
from ..gradcore import checkpoint
from .fusion import late_fuse
from .streams import Stream, StreamConfig, build_spatial_stream, build_temporal_stream, flow_normalize


@dataclass
class ClipScores:
    spatial: np.ndarray
    temporal: np.ndarray
    fused: np.ndarray


class TwoStream:
    def __init__(self, cfg: StreamConfig, motion_cfg: MotionNetConfig | None = None, seed: int = 0,
                 dtype=np.float32):
        motion_cfg = motion_cfg or MotionNetConfig(width_scale=cfg.width_scale, input_resolution=cfg.input_resolution)
        if tuple(motion_cfg.input_resolution) != tuple(cfg.input_resolution):
            raise ValueError("MotionNet and stream resolutions must agree")
        self.cfg = cfg
        self.motion_cfg = motion_cfg
        self.spatial: Stream = build_spatial_stream(cfg, seed, dtype)
        self.motionnet: MotionNet = build_motionnet(motion_cfg, seed + 1, dtype)
        self.temporal: Stream = build_temporal_stream(cfg, motion_cfg.flow_channels, seed + 2, dtype)

    @property
    def frame_count(self) -> int:
        return self.motion_cfg.frame_count

    @property
    def dtype(self):
        return self.spatial.params.dtype

    def centre_frame(self, clips: np.ndarray) -> np.ndarray:
        c = self.frame_count // 2
        return clips[:, 3 * c:3 * c + 3]

    def temporal_logits(self, clips, train: bool = False, rng=None, return_flows: bool = False):
        flows = self.motionnet.forward(clips)
        x = flow_normalize(flows[-1], self.cfg.input_resolution, self.cfg.flow_bound)
        logits = self.temporal.forward(x, train=train, rng=rng)
        return (logits, flows) if return_flows else logits

    def _check(self, clips) -> np.ndarray:
        clips = np.asarray(clips)
        if clips.ndim == 3:
            clips = clips[None]
        expect = (3 * self.frame_count, *self.cfg.input_resolution)
        if clips.ndim != 4 or clips.shape[1:] != expect:
            raise gc.ShapeError(f"clips must be [N, {expect[0]}, {expect[1]}, {expect[2]}], got {clips.shape}")
        return clips.astype(self.dtype, copy=False)

    def score_batch(self, clips, batch_size: int = 64) -> ClipScores:
        clips = self._check(clips)
        sp, tp = [], []
        with gc.no_grad():
            for i in range(0, len(clips), batch_size):
                b = clips[i:i + batch_size]
                sp.append(gc.softmax(self.spatial.forward(self.centre_frame(b)).data.astype(np.float64)))
                tp.append(gc.softmax(self.temporal_logits(b).data.astype(np.float64)))
        s, t = np.concatenate(sp), np.concatenate(tp)
        return ClipScores(s, t, late_fuse(s, t, self.cfg.fusion_weights))

    def predict_scores(self, clips) -> np.ndarray:
        """Fused class probabilities per clip."""
        return self.score_batch(clips).fused

    def state_dict(self) -> dict[str, np.ndarray]:
        out = {}
        for prefix, part in (("spatial", self.spatial), ("motionnet", self.motionnet), ("temporal", self.temporal)):
            out.update({f"{prefix}/{k}": v for k, v in part.state_dict().items()})
        return out

    def load_state_dict(self, state) -> None:
        for prefix, part in (("spatial", self.spatial), ("motionnet", self.motionnet), ("temporal", self.temporal)):
            part.load_state_dict({k.split("/", 1)[1]: v for k, v in state.items() if k.startswith(prefix + "/")})

    def save(self, path) -> None:
        checkpoint.save(path, self.state_dict())

    def load(self, path) -> None:
        self.load_state_dict(checkpoint.load(path))

    def freeze(self) -> None:
        """Make all parameters read-only so the model can be shared by inference threads."""
        for part in (self.spatial, self.motionnet, self.temporal):
            part.params.freeze()


def classify_clip(streams: TwoStream, clip) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(spatial, temporal, fused) class probabilities for one clip [3F, H, W]."""
    clip = np.asarray(clip)
    if clip.ndim != 3:
        raise gc.ShapeError(f"a clip is [3F, H, W], got shape {clip.shape}")
    sc = streams.score_batch(clip[None])
    return sc.spatial[0], sc.temporal[0], sc.fused[0]


def sample_clip_starts(n_frames: int, frame_count: int, sample_period: float, fps: float) -> list[int]:
    """Start frames of clips taken every ``sample_period`` seconds that fit in the video."""
    if n_frames < frame_count:
        raise ValueError(f"video has {n_frames} frames, shorter than one {frame_count}-frame clip")
    if sample_period <= 0 or fps <= 0:
        raise ValueError("sample_period and fps must be positive")
    step = sample_period * fps
    starts, k = [], 0
    while True:
        s = int(round(k * step))
        if s + frame_count > n_frames:
            break
        if not starts or s != starts[-1]:
            starts.append(s)
        k += 1
    return starts


@dataclass
class VideoPrediction:
    label: int
    confidence: float
    clip_scores: np.ndarray  # [n_clips, M] fused
    scores: np.ndarray  # averaged fused scores


def classify_video(streams, video, sample_period: float = 1.0, fps: float = 30.0) -> VideoPrediction:
    """Average fused clip scores over clips sampled every ``sample_period`` seconds.

    ``video`` is [T, 3, H, W]. ``streams`` may be any object with
    ``predict_scores(clips)`` and ``frame_count``. Ties go to the lowest class index.
    """
    video = np.asarray(video)
    if video.ndim != 4 or video.shape[1] != 3:
        raise gc.ShapeError(f"video must be [T, 3, H, W], got {video.shape}")
    f = streams.frame_count
    starts = sample_clip_starts(len(video), f, sample_period, fps)
    clips = np.stack([video[s:s + f].reshape(3 * f, *video.shape[2:]) for s in starts])
    per_clip = np.asarray(streams.predict_scores(clips), dtype=float)
    mean = per_clip.mean(axis=0)
    label = int(np.argmax(mean))
    return VideoPrediction(label, float(mean[label]), per_clip, mean)


def video_record(video_id: str, pred: VideoPrediction) -> dict:
    """One JSONL output object for a classified video."""
    return {"id": video_id, "label": pred.label, "confidence": pred.confidence,
            "scores": [float(v) for v in pred.scores]}
