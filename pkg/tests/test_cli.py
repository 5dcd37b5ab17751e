import json

import pytest

from cityid.harness.cache import read_blob, read_matrix
from cityid.harness.cli import build_parser, exit_code, main
from cityid.errors import InvalidConfig, IoFailure, StageError


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def cfg(tiny_corpus, tmp_path):
    _, path = tiny_corpus
    return ["--config", path, "--cache", tmp_path / "cache"]


def test_parser_has_all_subcommands():
    sub = build_parser()._subparsers._group_actions[0].choices
    assert set(sub) == {"synth", "extract", "basis", "project", "train", "evaluate", "ablate", "report"}


def test_usage_errors_exit_1(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["nope"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["evaluate", "--feature", "mfcc"])
    assert exc.value.code == 1
    capsys.readouterr()


def test_validation_and_runtime_exit_codes(capsys, tmp_path, cfg):
    assert run(capsys, "evaluate", "--config", tmp_path / "missing.cfg", "--out", tmp_path / "r.json")[0] == 1
    assert run(capsys, "evaluate", *cfg, "--set", "mlp_epochs=0", "--out", tmp_path / "r.json")[0] == 1
    assert run(capsys, "evaluate", *cfg)[0] == 1  # --out is required
    code, _, err = run(capsys, "basis", *cfg, "--set", "urbansound_manifest=" + str(tmp_path / "none.csv"),
                       "--out", tmp_path / "b.scb")
    assert code == 2 and "none.csv" in err
    assert exit_code(StageError("train", InvalidConfig("x"))) == 1
    assert exit_code(IoFailure("disk")) == 2


def test_basis_project_train_evaluate(capsys, tmp_path, cfg):
    code, out, _ = run(capsys, "basis", *cfg, "--out", tmp_path / "basis.scb")
    assert code == 0 and json.loads(out)["shape"] == [275, 10]
    meta, arrays = read_blob(tmp_path / "basis.scb")
    assert meta["kind"] == "basis" and arrays["columns"].shape == (275, 10)

    code, out, _ = run(capsys, "project", *cfg, "--feature", "weights", "--out", tmp_path / "proj")
    assert code == 0
    w = read_matrix(next((tmp_path / "proj").glob("*.weights.scf")))
    assert w.shape[1] == 10
    ev = json.loads((tmp_path / "proj" / "evidence.json").read_text())
    assert len(ev["evidence"]) == 12

    code, out, _ = run(capsys, "train", *cfg, "--classifier", "rf", "--out", tmp_path / "model.scb")
    assert code == 0 and json.loads(out)["kind"] == "forest"
    code, out, _ = run(capsys, "evaluate", *cfg, "--classifier", "rf", "--model", tmp_path / "model.scb",
                       "--out", tmp_path / "with_model.json")
    assert code == 0
    code, out, _ = run(capsys, "evaluate", *cfg, "--classifier", "rf", "--out", tmp_path / "full.json",
                       "--emit-csv")
    assert code == 0
    full = json.loads((tmp_path / "full.json").read_text())
    supplied = json.loads((tmp_path / "with_model.json").read_text())
    # the saved model scores exactly like the one trained inside evaluate
    assert supplied["mean_eer"] == full["mean_eer"]
    assert full["timings"] is None and "cache" not in full
    assert (tmp_path / "eer_by_system.csv").exists() and (tmp_path / "city_weights.csv").exists()


def test_extract_reports_counts(capsys, cfg):
    code, out, _ = run(capsys, "extract", *cfg)
    assert code == 0
    d = json.loads(out)
    assert d["exemplars"] == 20 and d["soundtracks"] == 12


def test_report_writes_json_csv_and_figures(capsys, tmp_path, cfg):
    out_dir = tmp_path / "rep"
    code, out, _ = run(capsys, "report", *cfg, "--systems", "statistical:rf,linear_combination:mlp",
                       "--ablation", "--emit-csv", "--out", out_dir)
    assert code == 0
    summary = json.loads((out_dir / "report.json").read_text())
    assert [(s["feature_kind"], s["classifier"]) for s in summary["systems"]] == [
        ("statistical", "rf"), ("linear_combination", "mlp")]
    assert summary["ablation"]["mean_eer_by_size"].keys() == {"2", "10"}
    for name in ("eer_by_system", "city_weights", "ablation"):
        assert (out_dir / f"{name}.csv").exists()
        png = out_dir / "figures" / f"{name}.png"
        assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_ablate_command(capsys, tmp_path, cfg):
    code, out, _ = run(capsys, "ablate", *cfg, "--out", tmp_path / "ab.json", "--emit-csv")
    assert code == 0
    ab = json.loads((tmp_path / "ab.json").read_text())["ablation"]
    assert len(ab["groups"]) == 3 and (tmp_path / "ablation.csv").exists()


def test_synth_writes_loadable_config(capsys, tmp_path):
    out = tmp_path / "corpus"
    code, stdout, _ = run(capsys, "synth", "--out", out, "--seed", 2, "--n-cities", 2, "--videos-per-city", 2,
                          "--exemplars-per-class", 1, "--min-duration", 2, "--max-duration", 2.5)
    assert code == 0
    from cityid.harness.config import load_config

    c = load_config(out / "pipeline.cfg")
    assert c.seed == 2 and c.cache_dir == str(out / "cache")
    assert len(json.loads(stdout)) == 4
