"""DET curves and equal error rate, one-vs-rest over cities."""

from __future__ import annotations

import math
import warnings
from fractions import Fraction
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..errors import CityIdWarning, DegenerateLabels, EmptyInput, ValidationError


@dataclass(frozen=True)
class DetCurve:
    thresholds: np.ndarray  # strictly increasing, with -inf / +inf sentinels
    far: np.ndarray
    frr: np.ndarray
    n_pos: int
    n_neg: int


@dataclass
class EerReport:
    per_city: dict
    mean: float
    counts: dict = field(default_factory=dict)  # city -> (n_pos, n_neg)
    fingerprint: str = ""


def det_points(scores, labels) -> DetCurve:
    """FAR and FRR at every distinct score, accepting ``score >= threshold``."""
    s = np.asarray(scores, dtype=np.float64)
    lab = np.asarray(labels).astype(bool)
    if s.shape != lab.shape or s.ndim != 1:
        raise ValidationError("scores and labels must be 1-D and of equal length")
    if not np.all(np.isfinite(s)):
        raise ValidationError("scores must be finite")
    pos, neg = np.sort(s[lab]), np.sort(s[~lab])
    if len(pos) == 0 or len(neg) == 0:
        raise DegenerateLabels("need at least one positive and one negative")
    thr = np.concatenate([[-np.inf], np.unique(s), [np.inf]])
    # count of scores >= t is len - (number strictly below t)
    far = (len(neg) - np.searchsorted(neg, thr, side="left")) / len(neg)
    frr = np.searchsorted(pos, thr, side="left") / len(pos)
    return DetCurve(thr, far, frr, len(pos), len(neg))


def equal_error_rate(curve: DetCurve) -> float:
    """FAR/FRR crossing, linearly interpolated between bracketing points.

    Rates are ratios of counts, so the crossing is computed as an exact
    fraction and rounded once.
    """
    d = curve.far - curve.frr
    j = int(np.argmax(d <= 0))  # d runs from +1 at -inf to -1 at +inf

    def rates(i):
        far = Fraction(int(round(curve.far[i] * curve.n_neg)), curve.n_neg)
        frr = Fraction(int(round(curve.frr[i] * curve.n_pos)), curve.n_pos)
        return far, frr

    f1, r1 = rates(j)
    if f1 == r1:
        return float(f1)
    f0, r0 = rates(j - 1)
    d0, d1 = f0 - r0, f1 - r1
    return float(f0 + d0 / (d0 - d1) * (f1 - f0))


def eer(scores, labels) -> float:
    return equal_error_rate(det_points(scores, labels))


def mean_eer(per_city: Mapping[str, float], counts=None, fingerprint: str = "") -> EerReport:
    if not per_city:
        raise EmptyInput("no per-city EER values")
    values = list(per_city.values())
    return EerReport(dict(per_city), math.fsum(values) / len(values), dict(counts or {}), fingerprint)


def one_vs_rest_eer(scores, true_labels, classes, fingerprint: str = "") -> EerReport:
    """EER of column c against the binary target ``label == classes[c]``, then the mean.

    Classes absent from ``true_labels`` are skipped with a warning.
    """
    s = np.asarray(scores, dtype=np.float64)
    true_labels = np.asarray(true_labels)
    per_city, counts = {}, {}
    for c, name in enumerate(classes):
        target = true_labels == name
        n_pos = int(target.sum())
        if n_pos == 0 or n_pos == len(target):
            warnings.warn(f"class {name!r} has no positives or no negatives; skipped", CityIdWarning, stacklevel=2)
            continue
        per_city[name] = eer(s[:, c], target)
        counts[name] = (n_pos, len(target) - n_pos)
    return mean_eer(per_city, counts, fingerprint)
