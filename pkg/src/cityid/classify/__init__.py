"""Frame-level classifiers and video-level score aggregation."""

from .data import FEATURE_KINDS, FrameDataset, ScoreMatrix, aggregate_video_scores, cap_frames
from .forest import ForestModel, Tree, predict_forest, train_random_forest
from .mlp import MlpHyper, MlpModel, predict_mlp, train_mlp

__all__ = [
    "FEATURE_KINDS",
    "FrameDataset",
    "ScoreMatrix",
    "aggregate_video_scores",
    "cap_frames",
    "ForestModel",
    "Tree",
    "predict_forest",
    "train_random_forest",
    "MlpHyper",
    "MlpModel",
    "predict_mlp",
    "train_mlp",
]
