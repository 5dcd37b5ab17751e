"""Equal error rate evaluation and the basis-count ablation."""

from .ablation import (
    DEFAULT_SIZES_PLAN,
    AblationGroup,
    AblationReport,
    ablation_run,
    format_sizes_plan,
    parse_sizes_plan,
    sample_groups,
)
from .det import DetCurve, EerReport, det_points, eer, equal_error_rate, mean_eer, one_vs_rest_eer

__all__ = [
    "DEFAULT_SIZES_PLAN",
    "AblationGroup",
    "AblationReport",
    "ablation_run",
    "format_sizes_plan",
    "parse_sizes_plan",
    "sample_groups",
    "DetCurve",
    "EerReport",
    "det_points",
    "eer",
    "equal_error_rate",
    "mean_eer",
    "one_vs_rest_eer",
]
