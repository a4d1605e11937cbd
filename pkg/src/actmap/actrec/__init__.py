"""Two-stream activity recognition: spatial and stacked temporal streams with late fusion."""
from .augment import AugmentSwitches, augment, augment_batch, crop_box, flip_clip, resize
from .evaluate import Evaluation, confusion_matrix, evaluate, mean_average_accuracy, per_class_accuracy
from .fusion import DEFAULT_FUSION, late_fuse
from .pipeline import (ClipScores, TwoStream, VideoPrediction, classify_clip, classify_video, sample_clip_starts,
                       video_record)
from .streams import (FLOW_BOUND, Stream, StreamConfig, build_spatial_stream, build_temporal_stream, dropout,
                      flow_normalize, stream_architecture)
from .train import (TrainSchedule, TrainTrace, TwoStreamTraces, clip_gradients, spatial_schedule,
                    temporal_schedule, train_two_stream)

__all__ = [
    "AugmentSwitches", "augment", "augment_batch", "crop_box", "flip_clip", "resize",
    "Evaluation", "confusion_matrix", "evaluate", "mean_average_accuracy", "per_class_accuracy",
    "DEFAULT_FUSION", "late_fuse",
    "ClipScores", "TwoStream", "VideoPrediction", "classify_clip", "classify_video", "sample_clip_starts",
    "video_record",
    "FLOW_BOUND", "Stream", "StreamConfig", "build_spatial_stream", "build_temporal_stream", "dropout",
    "flow_normalize", "stream_architecture",
    "TrainSchedule", "TrainTrace", "TwoStreamTraces", "clip_gradients", "spatial_schedule",
    "temporal_schedule", "train_two_stream",
]
