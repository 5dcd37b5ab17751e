"""``cityid`` command line.

Exit status: 0 on success, 1 on validation errors (bad config, manifest
or input data), 2 on runtime failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .. import __version__
from ..errors import CityIdError, StageError, ValidationError
from ..semantic import normalize_weights, pseudo_inverse, top_k_sounds
from .cache import Cache, basis_to_blob, model_from_blob, model_to_blob, read_blob, write_blob, write_matrix
from .config import dump_config, load_config, parse_overrides
from .pipeline import Pipeline, _weights, ablation_to_dict
from .report import dumps, emit_csv, emit_report, report_payload, round_floats
from .synth import SynthSpec, generate_synthetic_corpus

log = logging.getLogger("cityid")

ALL_SYSTEMS = tuple(f"{k}:{c}" for k in ("statistical", "weights", "linear_combination") for c in ("rf", "mlp"))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser, out_help: str = "output path"):
    p.add_argument("--config", type=Path, help="key = value config file")
    p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    p.add_argument("--cache", type=Path, help="cache directory")
    p.add_argument("--out", type=Path, help=out_help)
    p.add_argument("--feature", choices=("statistical", "weights", "linear_combination"))
    p.add_argument("--classifier", choices=("rf", "mlp"))
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key (repeatable)")
    p.add_argument("--emit-csv", action="store_true", help="also write plot-ready CSV tables")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cityid", description="Audio-only city identification with semantic sound features.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a seeded synthetic corpus and a matching config")
    _common(p, "corpus directory")
    p.add_argument("--n-classes", type=int, default=10)
    p.add_argument("--n-cities", type=int, default=6)
    p.add_argument("--videos-per-city", type=int, default=30)
    p.add_argument("--exemplars-per-class", type=int, default=8)
    p.add_argument("--min-duration", type=float, default=4.0)
    p.add_argument("--max-duration", type=float, default=8.0)
    p.add_argument("--orthogonality", type=float, default=1.0)

    sub.add_parser("extract", help="compute and cache features for every clip")
    sub.add_parser("basis", help="build the urban-sound basis matrix")
    sub.add_parser("project", help="project soundtracks onto the basis; write weights and evidence")
    sub.add_parser("train", help="train the configured classifier on the training split")
    p = sub.add_parser("evaluate", help="score the test split and write a run report")
    p.add_argument("--model", type=Path, help="use a model written by 'train' instead of training")
    p.add_argument("--timings", action="store_true", help="include wall-clock timings and cache statistics")
    sub.add_parser("ablate", help="basis-count ablation with Linear Combination features and the MLP")
    p = sub.add_parser("report", help="run several systems and write JSON, CSV and figures")
    p.add_argument("--systems", default=",".join(ALL_SYSTEMS), help="comma list of feature:classifier")
    p.add_argument("--ablation", action="store_true", help="include the ablation study")
    p.add_argument("--timings", action="store_true")
    for name in ("extract", "basis", "project", "train", "evaluate", "ablate", "report"):
        _common(sub.choices[name])
    return parser


def _config(args):
    overrides = parse_overrides(args.overrides)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.cache is not None:
        overrides["cache_dir"] = str(args.cache)
    if args.feature:
        overrides["feature_kind"] = args.feature
    if args.classifier:
        overrides["classifier"] = args.classifier
    return load_config(args.config, overrides)


def _require_out(args):
    if args.out is None:
        raise ValidationError(f"{args.command}: --out is required")
    return args.out


def _print(obj):
    print(dumps(round_floats(obj)), end="")


def cmd_synth(args):
    out = _require_out(args)
    spec = SynthSpec(
        n_classes=args.n_classes, n_cities=args.n_cities, videos_per_city=args.videos_per_city,
        seed=args.seed or 0, duration_range=(args.min_duration, args.max_duration),
        exemplars_per_class=args.exemplars_per_class, orthogonality=args.orthogonality,
    )
    corpus = generate_synthetic_corpus(spec, out)
    cfg = out / "pipeline.cfg"
    cfg.write_text(
        "# generated by cityid synth\n"
        f"urbansound_manifest = {corpus.urbansound_manifest.relative_to(out)}\n"
        f"train_manifest = {corpus.city_manifest.relative_to(out)}\n"
        "cache_dir = cache\n"
        f"seed = {spec.seed}\n"
        "# desk-scale training budget\n"
        "mlp_epochs = 40\n"
        "mlp_max_frames_per_video = 100\n"
        "rf_max_frames_per_video = 100\n"
    )
    _print({"corpus": str(out), "config": str(cfg), "soundtracks": spec.n_cities * spec.videos_per_city,
            "exemplars": spec.n_classes * spec.exemplars_per_class})


def cmd_extract(args):
    pipe = Pipeline(_config(args))
    counts = {}
    if pipe.config.urbansound_manifest:
        pipe.basis()
        counts["exemplars"] = len(pipe.exemplar_vectors()[1])
    train, test = pipe.split()
    with pipe.stage("extract"):
        for e in train + test:
            pipe.clip_features(e.path, "context")
    counts["soundtracks"] = len(train) + len(test)
    counts["cache"] = pipe.cache.stats()
    _print(counts)


def cmd_basis(args):
    out = _require_out(args)
    pipe = Pipeline(_config(args))
    b = pipe.basis()
    write_blob(out, *basis_to_blob(b))
    _print({"basis": str(out), "shape": list(b.columns.shape), "rank": b.rank, "class_names": list(b.class_names)})


def cmd_project(args):
    out = _require_out(args)
    pipe = Pipeline(_config(args))
    kind = pipe.config.feature_kind if pipe.config.feature_kind != "statistical" else "weights"
    basis = pipe.basis()
    pinv = pseudo_inverse(basis)
    train, test = pipe.split()
    evidence = []
    for e in sorted(train + test, key=lambda e: e.video_id):
        x = pipe.video_input(e, kind, basis, pinv)
        write_matrix(out / f"{e.video_id}.{kind}.scf", x)
        w = pipe.video_input(e, "weights", basis, pinv).T
        if w.shape[1] >= 2:
            ev = top_k_sounds(normalize_weights(_weights(w, basis)), min(pipe.config.evidence_k, basis.n_classes))
            evidence.append({"video": e.video_id, "city": e.city,
                             "top": [{"class": n, "score": s} for n, s in ev.entries]})
    (out / "evidence.json").write_text(dumps(round_floats({"feature_kind": kind, "evidence": evidence})))
    _print({"out": str(out), "soundtracks": len(evidence), "feature_kind": kind})


def cmd_train(args):
    out = _require_out(args)
    pipe = Pipeline(_config(args))
    c = pipe.config
    basis = pipe.basis() if c.feature_kind != "statistical" else None
    train, _ = pipe.split()
    data = pipe.dataset(train, c.feature_kind, basis)
    model, key = pipe.train(data, c.classifier)
    meta, arrays = model_to_blob(model)
    write_blob(out, meta, arrays)
    _print({"model": str(out), "kind": meta["kind"], "rows": data.n_rows, "width": data.width})


def cmd_evaluate(args):
    out = _require_out(args)
    pipe = Pipeline(_config(args))
    if args.model:
        c = pipe.config
        model = model_from_blob(*read_blob(args.model))
        basis = pipe.basis() if c.feature_kind != "statistical" else None
        rep, details = pipe.evaluate(c.feature_kind, c.classifier, basis, model=model)
        payload = {"config": c.result_dict(), "config_fingerprint": c.fingerprint(),
                   "feature_kind": c.feature_kind, "classifier": c.classifier,
                   "per_city_eer": rep.per_city, "mean_eer": rep.mean, "input_width": details["input_width"],
                   "scores_ref": details["score_key"], "warnings": pipe.warning_log.messages,
                   "timings": pipe.timings if args.timings else None}
        Path(out).write_text(dumps(round_floats(payload)))
        report = payload
    else:
        r = pipe.run()
        emit_report(r, out, volatile=args.timings)
        report = report_payload(r)
        if args.emit_csv:
            emit_csv(Path(out).parent, [report], r.city_weights)
    _print({"report": str(out), "mean_eer": report["mean_eer"]})


def cmd_ablate(args):
    out = _require_out(args)
    pipe = Pipeline(_config(args))
    ab = ablation_to_dict(pipe.ablate())
    payload = {"config": pipe.config.result_dict(), "config_fingerprint": pipe.config.fingerprint(),
               "ablation": ab, "warnings": pipe.warning_log.messages}
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    Path(out).write_text(dumps(round_floats(payload)))
    if args.emit_csv:
        emit_csv(Path(out).parent, ablation=ab)
    _print({"ablation": str(out), "mean_eer_by_size": ab["mean_eer_by_size"]})


def cmd_report(args):
    from .plots import plot_ablation, plot_city_weights, plot_eer_by_system

    out = _require_out(args)
    base = _config(args)
    cache = Cache(base.cache_dir)
    systems = []
    for item in args.systems.split(","):
        kind, _, clf = item.strip().partition(":")
        systems.append(base.replace(feature_kind=kind, classifier=clf))
    payloads = []
    city_weights = ablation = None
    for i, cfg in enumerate(systems):
        pipe = Pipeline(cfg, cache)
        r = pipe.run(with_ablation=args.ablation and i == len(systems) - 1)
        payloads.append(report_payload(r, args.timings))
        city_weights = city_weights or r.city_weights
        ablation = ablation or r.ablation
        log.info("%s/%s: mean EER %.4f", cfg.feature_kind, cfg.classifier, r.mean_eer)
    summary = {
        "systems": [{"feature_kind": p["feature_kind"], "classifier": p["classifier"], "eer": p["mean_eer"]}
                    for p in payloads],
        "reports": payloads,
        "ablation": ablation,
        "city_weights": city_weights,
    }
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(dumps(round_floats(summary)))
    (out / "config.txt").write_text(dump_config(base))
    figures = [plot_eer_by_system(payloads, out / "figures" / "eer_by_system.png")]
    if city_weights:
        figures.append(plot_city_weights(city_weights, out / "figures" / "city_weights.png"))
    if ablation:
        figures.append(plot_ablation(ablation, out / "figures" / "ablation.png"))
    tables = emit_csv(out, payloads, city_weights, ablation) if args.emit_csv else []
    _print({"report": str(out / "report.json"), "figures": [str(f) for f in figures],
            "tables": [str(t) for t in tables], "systems": summary["systems"]})


COMMANDS = {
    "synth": cmd_synth, "extract": cmd_extract, "basis": cmd_basis, "project": cmd_project,
    "train": cmd_train, "evaluate": cmd_evaluate, "ablate": cmd_ablate, "report": cmd_report,
}


def exit_code(exc: BaseException) -> int:
    while isinstance(exc, StageError):
        exc = exc.cause
    return 1 if isinstance(exc, ValidationError) else 2


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except CityIdError as exc:
        print(f"cityid {args.command}: {exc}", file=sys.stderr)
        return exit_code(exc)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"cityid {args.command}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
