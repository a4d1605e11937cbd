"""Unsupervised flow learning by image reconstruction."""
from .losses import (CharbonnierParams, LossConfig, LossWeights, charbonnier, composite_loss,
                     inverse_warp, pixel_loss, pool_frames, smoothness_loss, ssim_loss, ssim_map)
from .motionnet import (MotionNet, MotionNetConfig, architecture, build_motionnet,
                        full_resolution_flow, predict_flows, upsample_flow)
from .train import FlowTrainConfig, TrainingDiverged, evaluate_epe, train_motionnet

__all__ = [
    "CharbonnierParams", "LossConfig", "LossWeights", "charbonnier", "composite_loss",
    "inverse_warp", "pixel_loss", "pool_frames", "smoothness_loss", "ssim_loss", "ssim_map",
    "MotionNet", "MotionNetConfig", "architecture", "build_motionnet", "full_resolution_flow",
    "predict_flows", "upsample_flow", "FlowTrainConfig", "TrainingDiverged", "evaluate_epe",
    "train_motionnet",
]
