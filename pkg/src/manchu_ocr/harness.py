"""Evaluation runs: recognize a manifest, score both channels, persist a run."""
from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from . import imaging, metrics
from .config import ToolkitConfig
from .errors import EmptyRunError, MissingPrediction
from .metrics import CHANNELS, MetricsReport
from .recognizers import (BaselineRecognizer, HttpRecognizer, Recognizer, RecognizerDescriptor,
                          SubprocessRecognizer, TemplateIndex, failed_prediction,
                          index_from_atlases)
from .records import (Prediction, Sample, atomic_write_text, dump_json, read_manifest,
                      read_predictions, sha256_bytes, sha256_file, write_predictions)
from .script import load_table
from .synth import demo_atlases, load_atlas, load_lexicon

log = logging.getLogger(__name__)

LATENCY_NOTE = "wall-clock around the recognizer call; excludes image loading and output parsing"


def load_atlases(paths, table=None):
    atlases = []
    for p in paths or ["demo"]:
        if str(p) == "demo":
            atlases.extend(demo_atlases(table))
        else:
            atlases.append(load_atlas(p))
    return atlases


def open_recognizer(descriptor: RecognizerDescriptor, config: ToolkitConfig | None = None) -> Recognizer:
    config = config or ToolkitConfig()
    if descriptor.kind == "subprocess":
        return SubprocessRecognizer(descriptor)
    if descriptor.kind == "http":
        return HttpRecognizer(descriptor)
    table = load_table(config.table_path)
    opts = descriptor.options
    if "index" in opts:
        index = TemplateIndex.load(config.resolve(opts["index"]))
    else:
        lexicon_path = opts.get("lexicon") or config.lexicon_path
        lexicon = load_lexicon(config.resolve(lexicon_path) if lexicon_path else None, table)
        atlas_paths = opts.get("atlas") or [str(p) for p in config.atlas_paths] or ["demo"]
        atlases = load_atlases([p if p == "demo" else config.resolve(p) for p in atlas_paths], table)
        dims = tuple(opts.get("featureDims", (16, 120)))
        index = index_from_atlases(lexicon, atlases, config.preprocess, dims, config.gen, table)
    return BaselineRecognizer(index, table, descriptor.id)


def select_subset(samples: Sequence[Sample], limit: int | None, sample_seed: int = 0) -> list[Sample]:
    """Deterministic random subset of ``limit`` samples, returned in id order."""
    ordered = sorted(samples, key=lambda s: s.id)
    if limit is None or limit >= len(ordered):
        return ordered
    rng = np.random.default_rng(sample_seed)
    picked = rng.choice(len(ordered), size=limit, replace=False)
    return [ordered[i] for i in sorted(picked)]


def recognize_samples(samples: Sequence[Sample], root: Path, recognizer: Recognizer,
                      cfg: imaging.PreprocessConfig | None, jobs: int = 1,
                      timing: bool = True) -> list[Prediction]:
    """One prediction per sample, sorted by id.  ``cfg=None`` skips preprocessing."""

    def one(sample):
        try:
            img = imaging.read_png(root / sample.image_path)
        except OSError as exc:
            return failed_prediction(sample.id, "ImageError", str(exc), 0.0)
        if cfg is not None:
            img = imaging.preprocess(img, cfg)
        pred = recognizer.predict(sample.id, img)
        if not timing:
            pred = Prediction(pred.sample_id, pred.manchu, pred.roman, 0.0, pred.raw,
                              pred.malformed, pred.error)
        return pred

    if jobs > 1 and recognizer.reentrant:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            preds = list(pool.map(one, samples))
    else:
        preds = [one(s) for s in samples]
    return sorted(preds, key=lambda p: p.sample_id)


def score_run(samples: Sequence[Sample], predictions: Sequence[Prediction]) -> dict[str, MetricsReport]:
    by_id = {p.sample_id: p for p in predictions}
    reports = {}
    for channel in CHANNELS:
        scores = []
        for s in samples:
            if s.id not in by_id:
                raise MissingPrediction(s.id)
            scores.append(metrics.score_sample(by_id[s.id], s, channel))
        reports[channel] = metrics.aggregate(scores, channel)
    return reports


@dataclass
class RunRecord:
    run_id: str
    config_hash: str
    manifest_hash: str
    recognizer_id: str
    reports: dict[str, MetricsReport]
    sample_count: int
    failed_count: int
    started: str | None = None
    finished: str | None = None

    def to_dict(self) -> dict:
        return {
            "runId": self.run_id,
            "configHash": self.config_hash,
            "manifestHash": self.manifest_hash,
            "recognizerId": self.recognizer_id,
            "sampleCount": self.sample_count,
            "failedCount": self.failed_count,
            "reports": {ch: r.to_dict() for ch, r in self.reports.items()},
            "latencyNote": LATENCY_NOTE,
            "timestamps": {"started": self.started, "finished": self.finished},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        return cls(
            run_id=d["runId"],
            config_hash=d["configHash"],
            manifest_hash=d["manifestHash"],
            recognizer_id=d["recognizerId"],
            reports={ch: MetricsReport.from_dict(r) for ch, r in d["reports"].items()},
            sample_count=int(d.get("sampleCount", 0)),
            failed_count=int(d.get("failedCount", 0)),
            started=d.get("timestamps", {}).get("started"),
            finished=d.get("timestamps", {}).get("finished"),
        )

    @classmethod
    def load(cls, path: str | Path) -> "RunRecord":
        path = Path(path)
        if path.is_dir():
            path = path / "run.json"
        return cls.from_dict(json.loads(path.read_text(encoding="utf-8")))


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def run_eval(config: ToolkitConfig, manifest_path: str | Path, out_dir: str | Path,
             recognizer_id: str = "baseline", limit: int | None = None, sample_seed: int | None = None,
             replay: str | Path | None = None, jobs: int = 1, preprocess: bool = True,
             timing: bool | None = None) -> RunRecord:
    """Evaluate one recognizer (or replay a prediction file) on a manifest.

    Writes ``predictions.jsonl``, ``report.json`` and ``run.json`` into
    ``out_dir``.  Raises EmptyRunError when no transport succeeded.
    """
    timing = config.timing if timing is None else timing
    manifest_path = Path(manifest_path)
    out_dir = Path(out_dir)
    started = _now() if timing else None
    samples = select_subset(read_manifest(manifest_path), limit,
                            config.seed if sample_seed is None else sample_seed)
    if not samples:
        raise EmptyRunError(f"{manifest_path}: no samples to evaluate")
    if replay is not None:
        wanted = {s.id for s in samples}
        predictions = [p for p in read_predictions(replay) if p.sample_id in wanted]
        rid = recognizer_id
    else:
        descriptor = config.recognizer(recognizer_id)
        with open_recognizer(descriptor, config) as recognizer:
            predictions = recognize_samples(
                samples, manifest_path.parent, recognizer,
                config.preprocess if preprocess else None, jobs, timing)
        rid = descriptor.id
    failed = sum(1 for p in predictions if p.failed)
    write_predictions(out_dir / "predictions.jsonl", predictions)
    reports = score_run(samples, predictions)
    config_hash = sha256_bytes(config.raw)
    manifest_hash = sha256_file(manifest_path)
    run_id = sha256_bytes("\n".join([config_hash, manifest_hash, rid] + [s.id for s in samples])
                          .encode())[:16]
    record = RunRecord(run_id, config_hash, manifest_hash, rid, reports, len(samples), failed,
                       started, _now() if timing else None)
    headline = reports["manchu"].to_dict()
    report_doc = dict(headline)
    report_doc.update({
        "channels": {ch: r.to_dict() for ch, r in reports.items()},
        "manifestHash": manifest_hash,
        "recognizerId": rid,
        "timestamp": record.finished,
        "latencyNote": LATENCY_NOTE,
    })
    atomic_write_text(out_dir / "report.json", dump_json(report_doc))
    atomic_write_text(out_dir / "run.json", dump_json(record.to_dict()))
    if replay is None and predictions and failed == len(predictions):
        raise EmptyRunError(f"all {failed} transports failed for recognizer {rid!r}")
    return record


# -- comparison ------------------------------------------------------------------

COMPARE_COLUMNS = ("run", "recognizer", "wordAccuracy", "cer", "f1", "latency", "warning")


def compare_runs(records: Sequence[tuple[str, RunRecord]], channel: str = "manchu"):
    """Rows for each run plus the id of the best one (by word accuracy)."""
    if len(records) < 2:
        raise ValueError("compare needs at least two run records")
    ref_hash = records[0][1].manifest_hash
    rows = []
    for name, rec in records:
        r = rec.reports[channel]
        rows.append({
            "run": name,
            "recognizer": rec.recognizer_id,
            "wordAccuracy": r.word_accuracy,
            "cer": r.mean_cer,
            "f1": r.mean_f1,
            "latency": r.mean_latency,
            "warning": "" if rec.manifest_hash == ref_hash else "manifest-mismatch",
        })
    best = metrics.select_best([(name, rec.reports[channel]) for name, rec in records])
    return rows, best


def comparison_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COMPARE_COLUMNS)
    for row in rows:
        writer.writerow([row["run"], row["recognizer"], metrics.fmt(row["wordAccuracy"]),
                         metrics.fmt(row["cer"]), metrics.fmt(row["f1"]),
                         metrics.fmt(row["latency"]), row["warning"]])
    return buf.getvalue()


def comparison_text(rows, best: str) -> str:
    """Aligned table at display precision (accuracy 1 dp, CER 4 dp, F1 3 dp)."""
    header = ["Run", "Recognizer", "Word Acc (%)", "CER", "F1", "Time (s)", "Warning"]
    body = [[row["run"], row["recognizer"], f"{row['wordAccuracy']:.1f}", f"{row['cer']:.4f}",
             f"{row['f1']:.3f}", f"{row['latency']:.1f}", row["warning"]] for row in rows]
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in [header] + body]
    lines.insert(1, "  ".join("-" * w for w in widths))
    lines.append("")
    lines.append(f"best: {best}")
    return "\n".join(lines) + "\n"
