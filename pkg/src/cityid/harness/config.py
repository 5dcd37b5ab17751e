"""Pipeline configuration: a flat ``key = value`` file with ``#`` comments.

Command-line flags override file values. The effective configuration is
embedded in every report together with its content fingerprint.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, fields
from pathlib import Path

from ..classify import FEATURE_KINDS, MlpHyper
from ..errors import InvalidConfig
from ..evaluation import format_sizes_plan, parse_sizes_plan
from ..features import MfccParams
from .manifests import TRAIN_FRACTION

CLASSIFIERS = ("rf", "mlp")
PATH_KEYS = ("cache_dir", "urbansound_manifest", "urbansound_audio_dir", "train_manifest", "test_manifest")
# keys that do not change any computed number
NON_RESULT_KEYS = ("cache_dir",)


@dataclass
class PipelineConfig:
    feature_kind: str = "linear_combination"
    classifier: str = "mlp"
    seed: int = 0
    cache_dir: str = ".cityid-cache"
    urbansound_manifest: str = ""
    urbansound_audio_dir: str = ""  # default: <manifest dir>/audio
    train_manifest: str = ""
    test_manifest: str = ""  # empty: seeded split of train_manifest
    train_fraction: float = TRAIN_FRACTION
    shuffle_labels: bool = False

    sample_rate: int = 44100
    window_len: int = 1024
    hop_len: int = 512
    context_radius: int = 45
    n_mels: int = 40
    fmin: float = 0.0
    fmax: float = 22050.0
    n_mfcc: int = 25
    include_c0: bool = True
    log_floor: float = 1e-10

    basis_aggregate: str = "mean"
    evidence_k: int = 3

    n_trees: int = 100
    rf_max_frames_per_video: int = 0  # 0: no cap

    mlp_lr: float = 1e-4
    mlp_batch: int = 500
    mlp_momentum: float = 0.9
    mlp_weight_decay: float = 1e-6
    mlp_dropout: float = 0.5
    mlp_epochs: int = 50
    mlp_hidden: str = "1024,1024"
    mlp_max_frames_per_video: int = 0
    mlp_dtype: str = "float32"

    sizes_plan: str = "2:5,5:2,8:1,10:1"

    def mfcc_params(self) -> MfccParams:
        return MfccParams(self.sample_rate, self.window_len, self.hop_len, self.n_mels, self.fmin,
                          self.fmax, self.n_mfcc, self.include_c0, self.log_floor)

    def mlp_hyper(self) -> MlpHyper:
        return MlpHyper(self.mlp_lr, self.mlp_batch, self.mlp_momentum, self.mlp_weight_decay,
                        self.mlp_dropout, self.mlp_epochs, self.hidden_widths(),
                        self.mlp_max_frames_per_video or None, self.mlp_dtype)

    def hidden_widths(self) -> tuple:
        try:
            return tuple(int(h) for h in self.mlp_hidden.split(","))
        except ValueError:
            raise InvalidConfig(f"mlp_hidden must be comma-separated integers, got {self.mlp_hidden!r}") from None

    def sizes(self) -> dict:
        return parse_sizes_plan(self.sizes_plan)

    def validate(self) -> "PipelineConfig":
        if self.feature_kind not in FEATURE_KINDS:
            raise InvalidConfig(f"feature_kind must be one of {FEATURE_KINDS}")
        if self.classifier not in CLASSIFIERS:
            raise InvalidConfig(f"classifier must be one of {CLASSIFIERS}")
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise InvalidConfig("seed must be an unsigned 64-bit integer")
        if self.hop_len > self.window_len:
            raise InvalidConfig("hop_len must not exceed window_len")
        if self.context_radius < 0:
            raise InvalidConfig("context_radius must be >= 0")
        if self.basis_aggregate not in ("mean", "median"):
            raise InvalidConfig("basis_aggregate must be mean or median")
        if not 0.0 < self.train_fraction < 1.0:
            raise InvalidConfig("train_fraction must be in (0, 1)")
        if self.n_trees < 1 or self.evidence_k < 1:
            raise InvalidConfig("n_trees and evidence_k must be positive")
        if self.rf_max_frames_per_video < 0 or self.mlp_max_frames_per_video < 0:
            raise InvalidConfig("frame caps must be >= 0")
        if self.mlp_dtype not in ("float32", "float64"):
            raise InvalidConfig("mlp_dtype must be float32 or float64")
        try:
            self.mfcc_params().validate()
            self.mlp_hyper().validate()
            self.sizes()
        except InvalidConfig:
            raise
        except ValueError as exc:
            raise InvalidConfig(str(exc)) from None
        return self

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["sizes_plan"] = format_sizes_plan(self.sizes())
        return d

    def result_dict(self) -> dict:
        """Config entries that can affect results (what the fingerprint covers)."""
        d = self.to_dict()
        for k in NON_RESULT_KEYS:
            d.pop(k)
        return d

    def fingerprint(self) -> str:
        blob = json.dumps(self.result_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes).validate()


_FIELDS = {f.name: f for f in fields(PipelineConfig)}


def _coerce(key: str, raw: str):
    f = _FIELDS.get(key)
    if f is None:
        raise InvalidConfig(f"unknown config key {key!r}")
    kind = f.type if isinstance(f.type, str) else f.type.__name__
    raw = raw.strip()
    try:
        if kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "int":
            return int(raw, 0)
        if kind == "float":
            return float(raw)
        return raw
    except ValueError:
        raise InvalidConfig(f"bad value for {key}: {raw!r}") from None


def parse_overrides(pairs) -> dict:
    """``["key=value", ...]`` -> typed dict."""
    out = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise InvalidConfig(f"expected key=value, got {pair!r}")
        k, v = pair.split("=", 1)
        k = k.strip()
        out[k] = _coerce(k, v)
    return out


def load_config(path=None, overrides: dict | None = None) -> PipelineConfig:
    """Read a config file (optional) and apply overrides.

    Relative paths inside the file resolve against the file's directory.
    """
    values: dict = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise InvalidConfig(f"config file {path} not found")
        for n, line in enumerate(path.read_text().splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidConfig(f"{path}:{n}: expected key = value")
            k, v = line.split("=", 1)
            k = k.strip()
            values[k] = _coerce(k, v)
        for k in PATH_KEYS:
            if values.get(k) and not Path(values[k]).is_absolute():
                values[k] = str((path.parent / values[k]).resolve())
    values.update(overrides or {})
    return PipelineConfig(**values).validate()


def dump_config(config: PipelineConfig) -> str:
    lines = [f"{k} = {v}".rstrip() for k, v in config.to_dict().items()]
    return "\n".join(lines) + "\n"
