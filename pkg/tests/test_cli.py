import json
import shutil

import numpy as np
import pytest

from conftest import FIXTURES
from manchu_ocr import imaging
from manchu_ocr.cli import main
from manchu_ocr.config import load_config, parse_config
from manchu_ocr.errors import ConfigError
from manchu_ocr.harness import RunRecord, compare_runs, run_eval, select_subset
from manchu_ocr.records import read_manifest, read_predictions, sha256_file
from manchu_ocr.synth import compose_page


def write_config(path, doc):
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


def test_config_defaults_and_validation(tmp_path):
    cfg = load_config(None)
    assert cfg.recognizer("baseline").kind == "baseline"
    cfg = parse_config(b'{"seed": 5}')
    assert cfg.gen.seed == 5
    with pytest.raises(ConfigError):
        parse_config(b'{"nope": 1}')
    with pytest.raises(ConfigError):
        parse_config(b'{"tablePath": "missing.tsv"}', tmp_path)
    with pytest.raises(ConfigError):
        parse_config(b"[1]")
    with pytest.raises(ConfigError):
        parse_config(b'{"recognizers": [{"id": "a", "kind": "baseline"}, {"id": "a", "kind": "baseline"}]}')
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.json")


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("ds")
    cfg = write_config(root / "cfg.json", {"seed": 4, "timing": False, "gen": {"sampleCount": 120}})
    assert main(["--config", str(cfg), "gen", "--out", str(root / "data")]) == 0
    return root, cfg


def test_gen_prints_counts(dataset, capsys, tmp_path):
    cfg = write_config(tmp_path / "c.json", {"gen": {"sampleCount": 10}})
    assert main(["gen", "--config", str(cfg), "--out", str(tmp_path / "d")]) == 0
    assert "wrote 10 samples" in capsys.readouterr().out


def test_gen_bad_splits_exit_2(tmp_path, capsys):
    spec = write_config(tmp_path / "spec.json", {"sampleCount": 5, "splits": {"train": 0.9, "val": 0.3}})
    assert main(["gen", "--spec", str(spec), "--out", str(tmp_path / "o")]) == 2
    assert "SpecError" in capsys.readouterr().err


def test_gen_repeat_same_manifest_hash(tmp_path):
    for name in ("a", "b"):
        assert main(["gen", "--seed", "9", "--count", "15", "--out", str(tmp_path / name)]) == 0
    assert sha256_file(tmp_path / "a" / "manifest.jsonl") == sha256_file(tmp_path / "b" / "manifest.jsonl")


def test_eval_writes_run_artifacts(dataset, tmp_path):
    root, cfg = dataset
    out = tmp_path / "run"
    assert main(["--config", str(cfg), "eval", "--manifest", str(root / "data" / "manifest.jsonl"),
                 "--out", str(out), "--jobs", "3"]) == 0
    rec = RunRecord.load(out)
    assert set(rec.reports) == {"manchu", "roman"}
    assert rec.reports["manchu"].word_accuracy == 100.0
    report = json.loads((out / "report.json").read_text(encoding="utf-8"))
    assert report["scriptChannel"] == "manchu" and "latencyNote" in report
    assert [p.sample_id for p in read_predictions(out / "predictions.jsonl")] == sorted(
        s.id for s in read_manifest(root / "data" / "manifest.jsonl"))


def test_limit_and_sample_seed_reproducible(dataset, tmp_path):
    root, cfg = dataset
    samples = read_manifest(root / "data" / "manifest.jsonl")
    a = [s.id for s in select_subset(samples, 100, 7)]
    b = [s.id for s in select_subset(samples, 100, 7)]
    assert a == b and len(a) == 100
    assert a != [s.id for s in select_subset(samples, 100, 8)]
    assert main(["--config", str(cfg), "eval", "--manifest", str(root / "data" / "manifest.jsonl"),
                 "--out", str(tmp_path / "r"), "--limit", "100", "--sample-seed", "7"]) == 0
    assert [p.sample_id for p in read_predictions(tmp_path / "r" / "predictions.jsonl")] == a


def test_replay_matches_live(dataset, tmp_path):
    root, _ = dataset
    config = load_config(root / "cfg.json")
    manifest = root / "data" / "manifest.jsonl"
    live = run_eval(config, manifest, tmp_path / "live")
    replay = run_eval(config, manifest, tmp_path / "replay", replay=tmp_path / "live" / "predictions.jsonl")
    assert live.reports == replay.reports
    assert live.run_id == replay.run_id


def test_run_hash_tracks_input_bytes(dataset, tmp_path):
    root, _ = dataset
    config = load_config(root / "cfg.json")
    manifest = root / "data" / "manifest.jsonl"
    base = run_eval(config, manifest, tmp_path / "a")
    same = run_eval(config, manifest, tmp_path / "b")
    assert (base.run_id, base.manifest_hash) == (same.run_id, same.manifest_hash)
    copy = tmp_path / "m2" / "manifest.jsonl"
    copy.parent.mkdir()
    shutil.copytree(root / "data" / "images", copy.parent / "images")
    copy.write_bytes(manifest.read_bytes() + b"\n")
    changed = run_eval(config, copy, tmp_path / "c")
    assert changed.manifest_hash != base.manifest_hash and changed.run_id != base.run_id
    other_cfg = parse_config(config.raw + b" ", root)
    assert run_eval(other_cfg, manifest, tmp_path / "d").config_hash != base.config_hash


def test_unreachable_http_exit_4(dataset, tmp_path, capsys):
    root, _ = dataset
    cfg = write_config(tmp_path / "h.json", {"recognizers": [
        {"id": "remote", "kind": "http", "endpoint": "http://127.0.0.1:9/ocr", "timeoutSeconds": 1}]})
    code = main(["--config", str(cfg), "eval", "--manifest", str(root / "data" / "manifest.jsonl"),
                 "--recognizer", "remote", "--out", str(tmp_path / "r"), "--limit", "5"])
    assert code == 4
    preds = read_predictions(tmp_path / "r" / "predictions.jsonl")
    assert len(preds) == 5 and all(p.error == "TransportError" for p in preds)


def test_unknown_recognizer_exit_2(dataset, tmp_path):
    root, _ = dataset
    assert main(["eval", "--manifest", str(root / "data" / "manifest.jsonl"),
                 "--recognizer", "ghost", "--out", str(tmp_path / "r")]) == 2


def test_missing_manifest_exit_3(tmp_path):
    assert main(["eval", "--manifest", str(tmp_path / "none.jsonl"), "--out", str(tmp_path / "r")]) == 3


def _fixture_runs(tmp_path):
    config = load_config(None)
    m = FIXTURES / "validation_runs" / "manifest.jsonl"
    for name in ("llama", "qwen7b"):
        run_eval(config, m, tmp_path / name, recognizer_id=name,
                 replay=FIXTURES / "validation_runs" / f"{name}.jsonl", timing=False)
    return [str(tmp_path / "llama"), str(tmp_path / "qwen7b")]


def test_compare_table(tmp_path, capsys):
    runs = _fixture_runs(tmp_path)
    assert main(["compare", *runs, "--out", str(tmp_path / "cmp")]) == 0
    text = (tmp_path / "cmp" / "comparison.txt").read_text(encoding="utf-8")
    assert "98.3" in text and "0.0024" in text and "0.998" in text
    assert "87.5" in text and "0.0264" in text and "0.978" in text
    assert text.rstrip().endswith("best: llama")
    csv = (tmp_path / "cmp" / "comparison.csv").read_text(encoding="utf-8").splitlines()
    assert csv[0] == "run,recognizer,wordAccuracy,cer,f1,latency,warning" and len(csv) == 3
    assert main(["compare", *runs[::-1]]) == 0
    assert capsys.readouterr().out.rstrip().endswith("best: llama")


def test_compare_needs_two(tmp_path):
    runs = _fixture_runs(tmp_path)
    assert main(["compare", runs[0]]) == 2


def test_compare_flags_manifest_mismatch(tmp_path):
    runs = _fixture_runs(tmp_path)
    config = load_config(None)
    run_eval(config, FIXTURES / "handwritten_errors" / "manifest.jsonl", tmp_path / "test",
             recognizer_id="llama", replay=FIXTURES / "handwritten_errors" / "llama.jsonl", timing=False)
    rows, best = compare_runs([(r, RunRecord.load(r)) for r in runs + [str(tmp_path / "test")]])
    assert [r["warning"] for r in rows] == ["", "", "manifest-mismatch"]
    assert best.endswith("llama")


def test_segment_command(tmp_path, atlas, lexicon):
    page, _ = compose_page([list(lexicon.words[:3]), list(lexicon.words[3:5])], atlas)
    imaging.write_png(tmp_path / "page.png", page)
    assert main(["segment", "--page", str(tmp_path / "page.png"), "--out", str(tmp_path / "out")]) == 0
    layout = json.loads((tmp_path / "out" / "layout.json").read_text(encoding="utf-8"))
    assert [w["file"] for w in layout["words"]] == [
        "col0_word0.png", "col0_word1.png", "col0_word2.png", "col1_word0.png", "col1_word1.png"]
    assert imaging.read_png(tmp_path / "out" / "col1_word1.png").shape == (480, 64)


def test_prep_command(dataset, tmp_path):
    root, _ = dataset
    assert main(["prep", "--in", str(root / "data" / "images"), "--out", str(tmp_path / "p")]) == 0
    out = sorted((tmp_path / "p").glob("*.png"))
    assert len(out) == 120
    assert np.median(imaging.read_png(out[0])) >= 200


def test_analyze_command(tmp_path, capsys):
    d = FIXTURES / "handwritten_errors"
    assert main(["analyze", "--manifest", str(d / "manifest.jsonl"), "--predictions", str(d / "llama.jsonl"),
                 "--out", str(tmp_path / "an")]) == 0
    assert "concentration 55.9%" in capsys.readouterr().out
    for name in ("confusion.csv", "concentration.json", "longest.json"):
        assert (tmp_path / "an" / name).exists()
