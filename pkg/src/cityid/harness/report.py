"""JSON reports and plot-ready CSV tables.

Reports are written with sorted keys and floats rounded to 9 significant
digits, so identical runs give byte-identical files. Wall-clock timings
and cache statistics differ between otherwise identical runs; they are
written only when ``volatile=True``.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from pathlib import Path

from ..errors import IoFailure

REPORT_VERSION = 1


def round_floats(obj, digits: int = 9):
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return None
        return float(f"{obj:.{digits}g}")
    if isinstance(obj, dict):
        return {str(k): round_floats(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(v, digits) for v in obj]
    return obj


def report_payload(report, volatile: bool = False) -> dict:
    d = dataclasses.asdict(report) if dataclasses.is_dataclass(report) else dict(report)
    d["report_version"] = REPORT_VERSION
    if volatile:
        d["timings"] = d.get("timings") or {}
        d["cache"] = d.get("cache") or {}
    else:
        d["timings"] = None
        d.pop("cache", None)
    return round_floats(d)


def dumps(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, indent=2, allow_nan=False) + "\n"


def emit_report(report, path, volatile: bool = False) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(dumps(report_payload(report, volatile)))
    except OSError as exc:
        raise IoFailure(f"cannot write report {path}: {exc}") from exc
    return path


def load_report(path) -> dict:
    return json.loads(Path(path).read_text())


def _write_csv(path: Path, header, rows) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([f"{v:.9g}" if isinstance(v, float) else v for v in r])
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path


def write_system_csv(path, reports) -> Path:
    """feature_kind, classifier, eer"""
    rows = [(r["feature_kind"], r["classifier"], r["mean_eer"]) for r in reports]
    return _write_csv(Path(path), ("feature_kind", "classifier", "eer"), rows)


def write_city_weights_csv(path, city_weights: dict) -> Path:
    """city, class, mean_weight (unnormalized), normalized_peak"""
    raw = city_weights.get("raw_mean", {})
    peak = city_weights.get("normalized_peak", {})
    rows = []
    for city in raw:
        for cls, value in raw[city].items():
            rows.append((city, cls, value, peak.get(city, {}).get(cls, float("nan"))))
    return _write_csv(Path(path), ("city", "class", "mean_weight", "normalized_peak"), rows)


def write_ablation_csv(path, ablation: dict) -> Path:
    """n_bases, mean_eer"""
    rows = [(int(k), v) for k, v in sorted(ablation["mean_eer_by_size"].items(), key=lambda kv: int(kv[0]))]
    return _write_csv(Path(path), ("n_bases", "mean_eer"), rows)


def emit_csv(out_dir, reports=(), city_weights=None, ablation=None) -> list:
    out_dir = Path(out_dir)
    written = []
    if reports:
        written.append(write_system_csv(out_dir / "eer_by_system.csv", reports))
    if city_weights:
        written.append(write_city_weights_csv(out_dir / "city_weights.csv", city_weights))
    if ablation:
        written.append(write_ablation_csv(out_dir / "ablation.csv", ablation))
    return written
