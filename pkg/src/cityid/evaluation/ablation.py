"""Basis-count ablation: rerun the pipeline on random subsets of the sound classes."""

from __future__ import annotations

import math
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field

import numpy as np

from ..errors import SizeExceedsBasis, ValidationError
from ..semantic import BasisMatrix

# subset size -> number of random groups
DEFAULT_SIZES_PLAN = {2: 5, 5: 2, 8: 1, 10: 1}


@dataclass(frozen=True)
class AblationGroup:
    members: tuple
    size: int
    eer: float


@dataclass
class AblationReport:
    groups: list
    mean_by_size: dict
    seed: int
    sizes_plan: dict = field(default_factory=dict)


def parse_sizes_plan(text: str) -> dict:
    """``"2:5,5:2,8:1,10:1"`` -> {2: 5, 5: 2, 8: 1, 10: 1}."""
    plan = {}
    try:
        for part in text.split(","):
            size, groups = part.split(":")
            plan[int(size)] = int(groups)
    except ValueError:
        raise ValidationError(f"bad sizes plan {text!r}; expected size:groups,...") from None
    if any(s < 1 or g < 1 for s, g in plan.items()):
        raise ValidationError("sizes and group counts must be positive")
    return plan


def format_sizes_plan(plan: Mapping[int, int]) -> str:
    return ",".join(f"{s}:{g}" for s, g in sorted(plan.items()))


def sample_groups(class_names, sizes_plan: Mapping[int, int], seed: int) -> list:
    """Seeded draws without replacement. Members keep the basis order."""
    k = len(class_names)
    biggest = max(sizes_plan)
    if biggest > k:
        raise SizeExceedsBasis(f"subset size {biggest} exceeds the {k}-class basis")
    rng = np.random.default_rng(seed)
    groups = []
    for size in sorted(sizes_plan):
        for _ in range(sizes_plan[size]):
            idx = np.sort(rng.choice(k, size=size, replace=False))
            groups.append(tuple(class_names[i] for i in idx))
    return groups


def ablation_run(
    full_basis: BasisMatrix,
    evaluate: Callable[[BasisMatrix], float],
    sizes_plan: Mapping[int, int] = DEFAULT_SIZES_PLAN,
    seed: int = 0,
) -> AblationReport:
    """Evaluate every sampled group with ``evaluate(reduced_basis) -> mean EER``.

    The caller's ``evaluate`` closes over the pipeline configuration
    (features, classifier, training seed).
    """
    groups = []
    for members in sample_groups(full_basis.class_names, sizes_plan, seed):
        groups.append(AblationGroup(members, len(members), float(evaluate(full_basis.select(members)))))
    mean_by_size = {}
    for size in sorted(sizes_plan):
        vals = [g.eer for g in groups if g.size == size]
        mean_by_size[size] = math.fsum(vals) / len(vals)
    return AblationReport(groups, mean_by_size, seed, dict(sizes_plan))
