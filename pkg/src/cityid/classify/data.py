from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import EmptyData, EmptyGroup, ValidationError

FEATURE_KINDS = ("statistical", "weights", "linear_combination")


@dataclass(frozen=True)
class FrameDataset:
    """Frame-level training rows.

    ``y`` holds indices into ``classes``; ``group_ids`` names the video each
    row came from.
    """

    X: np.ndarray
    y: np.ndarray
    group_ids: np.ndarray
    classes: tuple
    feature_kind: str = "statistical"

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.int64)
        g = np.asarray(self.group_ids).astype(str)
        if X.ndim != 2 or X.shape[0] == 0:
            raise EmptyData("dataset has no rows")
        if len(y) != X.shape[0] or len(g) != X.shape[0]:
            raise ValidationError("X, y and group_ids lengths differ")
        if not np.all(np.isfinite(X)):
            raise ValidationError("dataset rows must be finite")
        if y.min() < 0 or y.max() >= len(self.classes):
            raise ValidationError("label index outside the declared class list")
        if self.feature_kind not in FEATURE_KINDS:
            raise ValidationError(f"unknown feature kind {self.feature_kind!r}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "group_ids", g)
        object.__setattr__(self, "classes", tuple(self.classes))

    @classmethod
    def from_labels(cls, X, labels: Sequence[str], group_ids, classes: Sequence[str], feature_kind="statistical"):
        index = {c: i for i, c in enumerate(classes)}
        try:
            y = [index[c] for c in labels]
        except KeyError as exc:
            raise ValidationError(f"label {exc.args[0]!r} not in the declared class list") from None
        return cls(X, np.asarray(y, dtype=np.int64), group_ids, tuple(classes), feature_kind)

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def width(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "FrameDataset":
        return FrameDataset(self.X[idx], self.y[idx], self.group_ids[idx], self.classes, self.feature_kind)


def cap_frames(data: FrameDataset, max_frames_per_video: int | None, seed: int) -> FrameDataset:
    """Keep at most ``max_frames_per_video`` rows per group, chosen with a seeded draw.

    Kept rows stay in their original order.
    """
    if not max_frames_per_video:
        return data
    rng = np.random.default_rng(seed)
    keep = []
    for g in np.unique(data.group_ids):
        idx = np.flatnonzero(data.group_ids == g)
        if len(idx) > max_frames_per_video:
            idx = np.sort(rng.choice(idx, max_frames_per_video, replace=False))
        keep.append(idx)
    return data.subset(np.sort(np.concatenate(keep)))


@dataclass(frozen=True)
class ScoreMatrix:
    scores: np.ndarray  # (V, C), rows sum to 1
    video_ids: tuple
    classes: tuple


def aggregate_video_scores(frame_posteriors, group_ids, classes: Sequence[str] = ()) -> ScoreMatrix:
    """Average frame posteriors per video; videos come out in sorted id order."""
    p = np.asarray(frame_posteriors, dtype=np.float64)
    g = np.asarray(group_ids).astype(str)
    if p.ndim != 2 or len(g) != p.shape[0]:
        raise ValidationError("every frame row needs exactly one group id")
    if p.shape[0] == 0:
        raise EmptyGroup("no frames to aggregate")
    videos, inverse = np.unique(g, return_inverse=True)
    sums = np.zeros((len(videos), p.shape[1]))
    np.add.at(sums, inverse, p)
    counts = np.bincount(inverse, minlength=len(videos))
    scores = sums / counts[:, None]
    scores /= scores.sum(axis=1, keepdims=True)
    classes = tuple(classes) or tuple(str(i) for i in range(p.shape[1]))
    return ScoreMatrix(scores, tuple(videos), classes)
