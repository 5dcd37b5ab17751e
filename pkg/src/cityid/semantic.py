"""Urban-sound bases and the least-squares semantic decomposition.

A soundtrack's contextual feature matrix S (275 x T) is expressed through
the basis matrix B (275 x K, one column per sound class) as

    W = pinv(B) @ S        (K x T weights, "presence" of each sound)
    S_hat = B @ W          (275 x T linear combination / reconstruction)

S_hat is the orthogonal projection of S onto the span of the bases.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    MissingClass,
    NumericalFailure,
    RankDeficientBasis,
    TooFewFrames,
    ValidationError,
)
from .features import FeatureMatrix

URBAN_CLASSES = (
    "air_conditioner",
    "car_horn",
    "children_playing",
    "dog_bark",
    "drilling",
    "engine_idling",
    "gun_shot",
    "jackhammer",
    "siren",
    "street_music",
)

VAR_EPS = 1e-12


@dataclass(frozen=True)
class BasisMatrix:
    columns: np.ndarray  # (275, K)
    class_names: tuple
    counts: tuple = ()

    def __post_init__(self):
        cols = np.asarray(self.columns, dtype=np.float64)
        if cols.ndim != 2 or cols.shape[1] != len(self.class_names):
            raise DimensionMismatch(f"basis has shape {cols.shape} for {len(self.class_names)} class names")
        if len(set(self.class_names)) != len(self.class_names):
            raise ValidationError("basis class names must be unique")
        if not np.all(np.isfinite(cols)):
            raise ValidationError("basis entries must be finite")
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "class_names", tuple(self.class_names))
        object.__setattr__(self, "counts", tuple(self.counts) or (0,) * cols.shape[1])

    @property
    def n_classes(self) -> int:
        return self.columns.shape[1]

    @property
    def rank(self) -> int:
        s = np.linalg.svd(self.columns, compute_uv=False)
        return int(np.sum(s > _pinv_tol(s, self.columns.shape)))

    def select(self, names: Sequence[str]) -> "BasisMatrix":
        """Reduced basis keeping the named columns, in this basis' order."""
        missing = set(names) - set(self.class_names)
        if missing:
            raise MissingClass(f"classes not in basis: {sorted(missing)}")
        idx = [i for i, c in enumerate(self.class_names) if c in set(names)]
        return BasisMatrix(
            self.columns[:, idx],
            tuple(self.class_names[i] for i in idx),
            tuple(self.counts[i] for i in idx),
        )


@dataclass(frozen=True)
class WeightsMatrix:
    values: np.ndarray  # (K, T)
    class_names: tuple
    source_id: str = ""

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class ReconstructionMatrix:
    values: np.ndarray  # (275, T)
    source_id: str = ""


@dataclass(frozen=True)
class SoundEvidence:
    entries: list = field(default_factory=list)  # [(class_name, score), ...], best first
    source_id: str = ""

    @property
    def classes(self) -> list:
        return [name for name, _ in self.entries]


def build_basis(
    class_vectors: Mapping[str, Sequence[np.ndarray]],
    class_names: Sequence[str] = URBAN_CLASSES,
    aggregate: str = "mean",
) -> BasisMatrix:
    """One column per class: the mean (or median) of its clips' global vectors."""
    if aggregate not in ("mean", "median"):
        raise ValidationError(f"unknown basis aggregate {aggregate!r}")
    cols, counts = [], []
    dim = None
    for name in class_names:
        vecs = class_vectors.get(name) or []
        if len(vecs) == 0:
            raise MissingClass(f"no exemplar clips for class {name!r}")
        arr = np.asarray([np.asarray(v, dtype=np.float64) for v in vecs])
        if arr.ndim != 2 or (dim is not None and arr.shape[1] != dim):
            raise DimensionMismatch(f"class {name!r} vectors have inconsistent length")
        dim = arr.shape[1]
        cols.append(arr.mean(axis=0) if aggregate == "mean" else np.median(arr, axis=0))
        counts.append(len(arr))
    basis = BasisMatrix(np.stack(cols, axis=1), tuple(class_names), tuple(counts))
    check_rank(basis)
    return basis


def check_rank(basis: BasisMatrix) -> int:
    """Numerical rank; warns when it is below the number of classes."""
    rank = basis.rank
    if rank < basis.n_classes:
        warnings.warn(
            f"basis numerical rank {rank} < {basis.n_classes} classes; projection will be degraded",
            RankDeficientBasis,
            stacklevel=2,
        )
    return rank


def _pinv_tol(s: np.ndarray, shape) -> float:
    if s.size == 0:
        return 0.0
    return float(s.max()) * max(shape) * np.finfo(np.float64).eps


def pseudo_inverse(b) -> np.ndarray:
    """Moore-Penrose inverse from the thin SVD.

    Singular values at or below ``max(s) * max(m, n) * eps`` are treated as zero.
    """
    a = np.asarray(b.columns if isinstance(b, BasisMatrix) else b, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise ValidationError("pseudo_inverse input must be finite")
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"SVD did not converge: {exc}") from exc
    keep = s > _pinv_tol(s, a.shape)
    inv = np.zeros_like(s)
    inv[keep] = 1.0 / s[keep]
    return (vt.T * inv) @ u.T


def _signal_columns(signal) -> tuple[np.ndarray, str]:
    """Signal in its (275, T) orientation."""
    if isinstance(signal, FeatureMatrix):
        return signal.rows.T, signal.source_id
    rows = np.asarray(signal, dtype=np.float64)
    if rows.ndim == 1:
        rows = rows[None]
    return rows.T, ""


def project_weights(b: BasisMatrix, signal, pinv: np.ndarray | None = None) -> WeightsMatrix:
    """Weights = pinv(B) @ Signal.T  for a (T, 275) feature matrix.

    Pass a precomputed ``pinv`` to share one inverse across soundtracks.
    """
    cols, sid = _signal_columns(signal)
    if cols.shape[0] != b.columns.shape[0]:
        raise DimensionMismatch(f"signal frames have width {cols.shape[0]}, basis has {b.columns.shape[0]} rows")
    if cols.shape[1] == 0:
        raise DimensionMismatch("signal has no frames")
    p = pseudo_inverse(b) if pinv is None else pinv
    return WeightsMatrix(p @ cols, b.class_names, sid)


def reconstruct(b: BasisMatrix, w: WeightsMatrix) -> ReconstructionMatrix:
    if w.values.shape[0] != b.n_classes:
        raise DimensionMismatch(f"weights have {w.values.shape[0]} rows for a {b.n_classes}-column basis")
    if tuple(w.class_names) != b.class_names:
        raise DimensionMismatch("weights and basis class order differ")
    return ReconstructionMatrix(b.columns @ w.values, w.source_id)


def normalize_weights(w: WeightsMatrix) -> WeightsMatrix:
    """Standardize each class row across time (population std).

    Rows with variance below 1e-12 become zeros.
    """
    v = w.values
    if v.shape[1] < 2:
        raise TooFewFrames("normalization needs at least 2 frames")
    mean = v.mean(axis=1, keepdims=True)
    centred = v - mean
    var = (centred ** 2).mean(axis=1, keepdims=True)
    ok = var >= VAR_EPS
    out = np.where(ok, centred / np.sqrt(np.where(ok, var, 1.0)), 0.0)
    return WeightsMatrix(out, w.class_names, w.source_id)


def top_k_sounds(w_norm: WeightsMatrix, k: int = 3) -> SoundEvidence:
    """Rank classes by their peak normalized weight over time.

    Ties keep the basis class order.
    """
    n_classes = w_norm.values.shape[0]
    if not 1 <= k <= n_classes:
        raise ValidationError(f"k must be in [1, {n_classes}], got {k}")
    scores = w_norm.values.max(axis=1)
    order = np.argsort(-scores, kind="stable")[:k]
    return SoundEvidence([(w_norm.class_names[i], float(scores[i])) for i in order], w_norm.source_id)

