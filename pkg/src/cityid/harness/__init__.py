"""Config, manifests, cache, pipeline, reports, synthetic corpus and CLI."""

from .cache import Cache
from .config import PipelineConfig, load_config
from .pipeline import Pipeline, RunReport, run_pipeline
from .report import emit_report, load_report
from .synth import SynthSpec, generate_synthetic_corpus

__all__ = [
    "Cache", "PipelineConfig", "load_config", "Pipeline", "RunReport", "run_pipeline",
    "emit_report", "load_report", "SynthSpec", "generate_synthetic_corpus",
]
