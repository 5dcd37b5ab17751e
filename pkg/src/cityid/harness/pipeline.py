"""End-to-end runs: features -> basis -> projection -> classifier -> EER.

Every expensive stage goes through :class:`~cityid.harness.cache.Cache`
with a key covering the inputs' content and all parameters that affect
the result, so reruns reuse work and changed parameters recompute.
"""

from __future__ import annotations

import logging
import time
import warnings
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import audio_io, errors
from ..classify import (
    FrameDataset,
    aggregate_video_scores,
    predict_forest,
    predict_mlp,
    train_mlp,
    train_random_forest,
)
from ..errors import (
    ClampedSamples,
    CityIdError,
    CityIdWarning,
    InvalidConfig,
    RankDeficientBasis,
    StageError,
    StaleCache,
)
from ..evaluation import AblationReport, ablation_run, one_vs_rest_eer
from ..features import mfcc, summarize_context, summarize_global
from ..semantic import (
    URBAN_CLASSES,
    BasisMatrix,
    WeightsMatrix,
    build_basis,
    check_rank,
    normalize_weights,
    pseudo_inverse,
    top_k_sounds,
)
from .cache import (
    Cache,
    array_digest,
    basis_from_blob,
    basis_to_blob,
    content_key,
    file_digest,
    model_from_blob,
    model_to_blob,
)
from .config import PipelineConfig
from .manifests import CITIES, CityEntry, load_city_manifest, load_urbansound_manifest, shuffle_cities, split_train_test

log = logging.getLogger(__name__)


@dataclass
class RunReport:
    config: dict
    config_fingerprint: str
    feature_kind: str
    classifier: str
    input_width: int
    n_train_videos: int
    n_test_videos: int
    per_city_eer: dict
    mean_eer: float
    eer_counts: dict = field(default_factory=dict)
    scores_ref: str = ""
    basis: dict | None = None
    evidence: list | None = None
    city_weights: dict | None = None
    ablation: dict | None = None
    warnings: list = field(default_factory=list)
    # volatile: wall-clock seconds and cache hit/miss counts per stage
    timings: dict = field(default_factory=dict)
    cache: dict = field(default_factory=dict)


class _WarningLog:
    def __init__(self):
        self.messages: list[str] = []

    def add(self, w):
        # cache-state dependent, so logged but kept out of reports
        if issubclass(w.category, (StaleCache, ClampedSamples)):
            log.warning("%s", w.message)
            return
        msg = f"{w.category.__name__}: {w.message}"
        log.warning("%s", msg)
        if issubclass(w.category, CityIdWarning) and msg not in self.messages:
            self.messages.append(msg)


class Pipeline:
    def __init__(self, config: PipelineConfig, cache: Cache | None = None):
        self.config = config.validate()
        self.cache = cache or Cache(config.cache_dir)
        self.timings: dict = {}
        self.warning_log = _WarningLog()
        self._features: dict = {}
        self._basis: BasisMatrix | None = None
        self._split = None

    # -- bookkeeping ---------------------------------------------------------

    @contextmanager
    def stage(self, name: str):
        t0 = time.perf_counter()
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                yield
            except StageError:
                raise
            except CityIdError as exc:
                raise StageError(name, exc) from exc
            finally:
                for w in caught:
                    self.warning_log.add(w)
                self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - t0

    # -- features ------------------------------------------------------------

    def _feature_key(self, path: Path, kind: str) -> str:
        c = self.config
        return content_key("features", kind, file_digest(path), c.mfcc_params().to_dict(), c.context_radius)

    def clip_features(self, path, kind: str) -> tuple[np.ndarray, str]:
        """(features, cache key); ``kind`` is "global" (1 x 275) or "context" (T x 275)."""
        path = Path(path)
        memo = (str(path), kind)
        if memo in self._features:
            return self._features[memo]
        key = self._feature_key(path, kind)

        def compute():
            c = self.config
            clip = audio_io.load_canonical(path, sample_rate_hz=c.sample_rate)
            frames = audio_io.frame_signal(clip, c.window_len, c.hop_len)
            m = mfcc(frames, c.mfcc_params())
            if kind == "global":
                return summarize_global(m)[None]
            return summarize_context(m, c.context_radius).rows

        value = (self.cache.matrix("features", key, compute), key)
        self._features[memo] = value
        return value

    # -- manifests -----------------------------------------------------------

    def split(self):
        if self._split is None:
            c = self.config
            if not c.train_manifest:
                raise InvalidConfig("train_manifest is not set")
            entries = load_city_manifest(c.train_manifest)
            if c.test_manifest:
                train, test = entries, load_city_manifest(c.test_manifest)
                if c.shuffle_labels:
                    train = shuffle_cities(train, c.seed)
                    test = shuffle_cities(test, c.seed + 1)
            else:
                if c.shuffle_labels:
                    entries = shuffle_cities(entries, c.seed)
                train, test = split_train_test(entries, c.seed, c.train_fraction)
            self._split = (train, test)
        return self._split

    def cities(self) -> tuple:
        train, test = self.split()
        present = {e.city for e in train} | {e.city for e in test}
        return tuple(c for c in CITIES if c in present)

    # -- basis ---------------------------------------------------------------

    def exemplar_vectors(self) -> tuple[dict, list]:
        c = self.config
        if not c.urbansound_manifest:
            raise InvalidConfig("urbansound_manifest is not set")
        audio_root = Path(c.urbansound_audio_dir or Path(c.urbansound_manifest).parent / "audio")
        vectors: dict = {}
        keys = []
        for e in load_urbansound_manifest(c.urbansound_manifest):
            vec, key = self.clip_features(e.audio_path(audio_root), "global")
            vectors.setdefault(e.class_name, []).append(vec[0])
            keys.append((e.class_name, key))
        return vectors, keys

    def basis(self) -> BasisMatrix:
        if self._basis is None:
            with self.stage("extract"):
                vectors, keys = self.exemplar_vectors()
            with self.stage("basis"):
                names = tuple(n for n in URBAN_CLASSES if n in vectors)
                key = content_key("basis", sorted(keys), self.config.basis_aggregate, names)
                with warnings.catch_warnings():
                    # re-checked below so cache hits warn too
                    warnings.simplefilter("ignore", RankDeficientBasis)
                    meta, arrays = self.cache.blob(
                        "basis", key, lambda: basis_to_blob(build_basis(vectors, names, self.config.basis_aggregate))
                    )
                self._basis = basis_from_blob(meta, arrays)
                check_rank(self._basis)
        return self._basis

    # -- projection ----------------------------------------------------------

    def video_input(self, entry: CityEntry, kind: str, basis: BasisMatrix | None, pinv=None) -> np.ndarray:
        rows, fkey = self.clip_features(entry.path, "context")
        if kind == "statistical":
            return rows
        bkey = array_digest(basis.columns)
        key = content_key("project", kind, fkey, bkey, list(basis.class_names))

        def compute():
            p = pseudo_inverse(basis) if pinv is None else pinv
            w = p @ rows.T
            return w.T if kind == "weights" else (basis.columns @ w).T

        return self.cache.matrix("project", key, compute)

    def dataset(self, entries, kind: str, basis: BasisMatrix | None) -> FrameDataset:
        pinv = pseudo_inverse(basis) if basis is not None and kind != "statistical" else None
        xs, labels, groups = [], [], []
        for e in entries:
            x = self.video_input(e, kind, basis, pinv)
            xs.append(x)
            labels += [e.city] * len(x)
            groups += [e.video_id] * len(x)
        return FrameDataset.from_labels(np.concatenate(xs), labels, groups, self.cities(), kind)

    # -- classifiers ---------------------------------------------------------

    def _hyper(self, classifier: str) -> dict:
        c = self.config
        if classifier == "rf":
            return {"n_trees": c.n_trees, "max_frames_per_video": c.rf_max_frames_per_video}
        h = c.mlp_hyper()
        return {k: getattr(h, k) for k in h.__dataclass_fields__}

    def train(self, data: FrameDataset, classifier: str):
        c = self.config
        hyper = self._hyper(classifier)
        key = content_key("model", classifier, array_digest(data.X, data.y, data.group_ids),
                          list(data.classes), data.feature_kind, hyper, c.seed)

        def compute():
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                if classifier == "rf":
                    model = train_random_forest(data, c.n_trees, c.seed, c.rf_max_frames_per_video or None)
                else:
                    model = train_mlp(data, c.mlp_hyper(), c.seed)
            meta, arrays = model_to_blob(model)
            meta["warnings"] = [[w.category.__name__, str(w.message)] for w in caught
                                if issubclass(w.category, CityIdWarning)]
            return meta, arrays

        meta, arrays = self.cache.blob("model", key, compute)
        # replayed from the blob so cached and fresh runs report the same warnings
        for name, message in meta.get("warnings", []):
            warnings.warn(message, getattr(errors, name, CityIdWarning), stacklevel=2)
        return model_from_blob(meta, arrays), key

    @staticmethod
    def posteriors(model, X) -> np.ndarray:
        if model.__class__.__name__ == "ForestModel":
            return predict_forest(model, X)
        return predict_mlp(model, X)

    def score(self, model, model_key: str, data: FrameDataset):
        key = content_key("scores", model_key, array_digest(data.X, data.group_ids))

        def compute():
            s = aggregate_video_scores(self.posteriors(model, data.X), data.group_ids, data.classes)
            return {"video_ids": list(s.video_ids), "classes": list(s.classes)}, {"scores": s.scores}

        meta, arrays = self.cache.blob("scores", key, compute)
        return meta, arrays["scores"], key

    # -- runs ----------------------------------------------------------------

    def evaluate(self, feature_kind: str, classifier: str, basis: BasisMatrix | None, model=None):
        """Train (unless ``model`` is given) and score; returns (EerReport, details)."""
        train, test = self.split()
        with self.stage("extract"):
            for e in (test if model is not None else train + test):
                self.clip_features(e.path, "context")
        with self.stage("project"):
            tr = None if model is not None else self.dataset(train, feature_kind, basis)
            te = self.dataset(test, feature_kind, basis)
        with self.stage("train"):
            if model is None:
                model, model_key = self.train(tr, classifier)
            else:
                model_key = content_key("supplied-model", model_to_blob(model)[0])
        with self.stage("score"):
            meta, scores, score_key = self.score(model, model_key, te)
        with self.stage("evaluate"):
            truth = {e.video_id: e.city for e in test}
            report = one_vs_rest_eer(scores, [truth[v] for v in meta["video_ids"]], meta["classes"],
                                     self.config.fingerprint())
        return report, {"score_key": score_key, "input_width": te.width, "model": model}

    def evidence(self, basis: BasisMatrix) -> tuple[list, dict]:
        c = self.config
        train, test = self.split()
        pinv = pseudo_inverse(basis)
        items = []
        for e in sorted(test, key=lambda e: e.video_id):
            w = self.video_input(e, "weights", basis, pinv).T
            if w.shape[1] < 2:
                continue
            ev = top_k_sounds(normalize_weights(_weights(w, basis)), min(c.evidence_k, basis.n_classes))
            items.append({"video": e.video_id, "city": e.city,
                          "top": [{"class": n, "score": s} for n, s in ev.entries]})
        raw: dict = {}
        peak: dict = {}
        for e in train:
            w = self.video_input(e, "weights", basis, pinv).T
            raw.setdefault(e.city, []).append(w.mean(axis=1))
            if w.shape[1] >= 2:
                peak.setdefault(e.city, []).append(normalize_weights(_weights(w, basis)).values.max(axis=1))
        names = basis.class_names
        summary = {
            "raw_mean": {city: dict(zip(names, np.mean(v, axis=0).tolist())) for city, v in sorted(raw.items())},
            "normalized_peak": {city: dict(zip(names, np.mean(v, axis=0).tolist())) for city, v in sorted(peak.items())},
        }
        return items, summary

    def clip_evidence(self, path, basis: BasisMatrix | None = None, k: int | None = None):
        """Top-k sounds of one soundtrack from its normalized weights."""
        basis = basis or self.basis()
        k = min(k or self.config.evidence_k, basis.n_classes)
        rows, _ = self.clip_features(path, "context")
        w = pseudo_inverse(basis) @ rows.T
        return top_k_sounds(normalize_weights(WeightsMatrix(w, basis.class_names, Path(path).stem)), k)

    def run(self, with_ablation: bool = False) -> RunReport:
        c = self.config
        basis = None
        if c.feature_kind != "statistical" or c.urbansound_manifest or with_ablation:
            basis = self.basis()
        eer_report, details = self.evaluate(c.feature_kind, c.classifier, basis)
        evidence = city_weights = None
        if basis is not None:
            with self.stage("evidence"):
                evidence, city_weights = self.evidence(basis)
        ablation = None
        if with_ablation:
            ablation = ablation_to_dict(self.ablate(basis))
        train, test = self.split()
        return RunReport(
            config=c.result_dict(),
            config_fingerprint=c.fingerprint(),
            feature_kind=c.feature_kind,
            classifier=c.classifier,
            input_width=details["input_width"],
            n_train_videos=len(train),
            n_test_videos=len(test),
            per_city_eer=eer_report.per_city,
            mean_eer=eer_report.mean,
            eer_counts={k: list(v) for k, v in eer_report.counts.items()},
            scores_ref=details["score_key"],
            basis=None if basis is None else {"class_names": list(basis.class_names), "rank": basis.rank,
                                              "counts": list(basis.counts)},
            evidence=evidence,
            city_weights=city_weights,
            ablation=ablation,
            warnings=list(self.warning_log.messages),
            timings=dict(self.timings),
            cache=self.cache.stats(),
        )

    def ablate(self, basis: BasisMatrix | None = None, feature_kind: str = "linear_combination",
               classifier: str = "mlp") -> AblationReport:
        basis = basis or self.basis()

        def run_subset(sub: BasisMatrix) -> float:
            log.info("ablation group %s", ",".join(sub.class_names))
            return self.evaluate(feature_kind, classifier, sub)[0].mean

        with self.stage("ablate"):
            return ablation_run(basis, run_subset, self.config.sizes(), self.config.seed)


def _weights(w: np.ndarray, basis: BasisMatrix) -> WeightsMatrix:
    return WeightsMatrix(w, basis.class_names)


def ablation_to_dict(r: AblationReport) -> dict:
    return {
        "seed": r.seed,
        "sizes_plan": {str(k): v for k, v in sorted(r.sizes_plan.items())},
        "groups": [{"members": list(g.members), "size": g.size, "eer": g.eer} for g in r.groups],
        "mean_eer_by_size": {str(k): v for k, v in sorted(r.mean_by_size.items())},
    }


def run_pipeline(config: PipelineConfig, cache: Cache | None = None, with_ablation: bool = False) -> RunReport:
    return Pipeline(config, cache).run(with_ablation=with_ablation)

