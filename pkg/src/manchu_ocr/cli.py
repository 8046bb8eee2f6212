"""manchu-ocr command line.

Exit codes: 0 success, 1 unexpected failure, 2 config or usage error,
3 IO error, 4 recognizer transport failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import Counter
from pathlib import Path

from . import analysis, harness, imaging
from .config import ToolkitConfig, load_config
from .errors import ConfigError, EmptyRunError, ManchuOcrError, TransportError
from .records import atomic_write_text, dump_json, read_manifest, read_predictions
from .script import load_table
from .segment import segment_page
from .synth import GenSpec, generate, load_lexicon

log = logging.getLogger("manchu_ocr")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_IO, EXIT_TRANSPORT = 0, 1, 2, 3, 4


class UsageError(ManchuOcrError):
    pass


def _config(args) -> ToolkitConfig:
    config = load_config(args.config)
    if args.seed is not None:
        config.seed = args.seed
        config.gen = GenSpec.from_dict({**config.gen.to_dict(), "seed": args.seed})
    return config


def cmd_gen(args) -> int:
    config = _config(args)
    table = load_table(config.table_path)
    spec = config.gen
    if args.spec:
        doc = json.loads(Path(args.spec).read_text(encoding="utf-8"))
        doc.setdefault("seed", config.seed if args.seed is None else args.seed)
        spec = GenSpec.from_dict(doc)
    if args.count is not None:
        spec = GenSpec.from_dict({**spec.to_dict(), "sampleCount": args.count})
    lexicon_path = args.lexicon or config.lexicon_path
    lexicon = load_lexicon(lexicon_path, table)
    atlases = harness.load_atlases(args.atlas or [str(p) for p in config.atlas_paths] or ["demo"], table)
    samples = generate(lexicon, atlases, spec, args.out, table, jobs=args.jobs)
    counts = Counter(s.split for s in samples)
    print(f"wrote {len(samples)} samples to {args.out}: "
          + ", ".join(f"{k}={counts[k]}" for k in sorted(counts)))
    return EXIT_OK


def cmd_prep(args) -> int:
    config = _config(args)
    src = Path(args.input)
    out = Path(args.out)
    files = sorted(src.glob("*.png")) if src.is_dir() else [src]
    if not files:
        raise FileNotFoundError(f"no PNG files under {src}")
    for f in files:
        imaging.write_png(out / f.name, imaging.preprocess(imaging.read_png(f), config.preprocess))
    print(f"preprocessed {len(files)} images into {out}")
    return EXIT_OK


def cmd_segment(args) -> int:
    config = _config(args)
    out = Path(args.out)
    crops, words = segment_page(imaging.read_png(args.page), config.segment, config.preprocess)
    entries = []
    for crop, word in zip(crops, words):
        name = f"col{word.column_index}_word{word.order_in_column}.png"
        imaging.write_png(out / name, crop)
        entries.append({"file": name, **word.to_dict()})
    atomic_write_text(out / "layout.json", dump_json({"page": str(args.page), "words": entries}))
    print(f"{len(crops)} words in {len({w.column_index for w in words})} columns")
    return EXIT_OK


def cmd_eval(args) -> int:
    config = _config(args)
    timing = False if args.no_timing else None
    try:
        record = harness.run_eval(
            config, args.manifest, args.out, recognizer_id=args.recognizer, limit=args.limit,
            sample_seed=args.sample_seed, replay=args.predictions, jobs=args.jobs,
            preprocess=not args.no_preprocess, timing=timing)
    except EmptyRunError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    for channel, rep in record.reports.items():
        print(f"{channel:7s} acc={rep.word_accuracy:.1f} cer={rep.mean_cer:.4f} "
              f"f1={rep.mean_f1:.3f} latency={rep.mean_latency:.3f}s n={rep.sample_count}")
    if record.failed_count:
        print(f"{record.failed_count} samples failed", file=sys.stderr)
    return EXIT_OK


def cmd_analyze(args) -> int:
    samples = read_manifest(args.manifest)
    predictions = read_predictions(args.predictions)
    table = analysis.accumulate(samples, predictions, args.channel)
    longest = analysis.longest_correct(samples, predictions, args.channel)
    analysis.export(table, args.out, args.k, longest, args.channel)
    try:
        rep = analysis.concentration(table, args.k)
        tops = ", ".join(f"{ch} {share:.1f}%" for ch, share in rep.top_k)
        print(f"{table.total_errors} errors; top-{args.k}: {tops}; concentration {rep.concentration:.1f}%")
    except ManchuOcrError:
        print("no errors")
    return EXIT_OK


def cmd_compare(args) -> int:
    if len(args.runs) < 2:
        raise UsageError("compare needs at least two run records")
    records = [(Path(r).stem if Path(r).is_file() else Path(r).name, harness.RunRecord.load(r))
               for r in args.runs]
    rows, best = harness.compare_runs(records, args.channel)
    text = harness.comparison_text(rows, best)
    if args.out:
        out = Path(args.out)
        atomic_write_text(out / "comparison.csv", harness.comparison_csv(rows))
        atomic_write_text(out / "comparison.txt", text)
    print(text, end="")
    return EXIT_OK


def _global_flags(parser, suppress: bool) -> None:
    # subcommands repeat the flags with suppressed defaults so a value given
    # before the subcommand is not reset by the subparser
    def default(value):
        return argparse.SUPPRESS if suppress else value
    parser.add_argument("--config", default=default(None), help="JSON config file")
    parser.add_argument("--jobs", type=int, default=default(1), help="max concurrent samples")
    parser.add_argument("--seed", type=int, default=default(None), help="override the config seed")
    parser.add_argument("-v", "--verbose", action="store_true", default=default(False))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)

    p = argparse.ArgumentParser(prog="manchu-ocr",
                                description="Manchu word OCR data and evaluation toolkit")
    _global_flags(p, suppress=False)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="generate a synthetic word-image dataset")
    g.add_argument("--lexicon")
    g.add_argument("--atlas", action="append", help="atlas directory or 'demo' (repeatable)")
    g.add_argument("--spec", help="GenSpec JSON (overrides config.gen)")
    g.add_argument("--count", type=int, help="override sampleCount")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    pr = sub.add_parser("prep", parents=[common], help="preprocess a PNG or a directory of PNGs")
    pr.add_argument("--in", dest="input", required=True)
    pr.add_argument("--out", required=True)
    pr.set_defaults(func=cmd_prep)

    s = sub.add_parser("segment", parents=[common], help="cut a page into word crops")
    s.add_argument("--page", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_segment)

    e = sub.add_parser("eval", parents=[common], help="evaluate a recognizer on a manifest")
    e.add_argument("--manifest", required=True)
    e.add_argument("--recognizer", default="baseline")
    e.add_argument("--out", required=True, help="run directory")
    e.add_argument("--limit", type=int)
    e.add_argument("--sample-seed", type=int)
    e.add_argument("--predictions", help="replay a predictions file instead of recognizing")
    e.add_argument("--no-preprocess", action="store_true")
    e.add_argument("--no-timing", action="store_true",
                   help="record zero latency and no timestamps (byte-reproducible output)")
    e.set_defaults(func=cmd_eval)

    a = sub.add_parser("analyze", parents=[common], help="per-character error analysis")
    a.add_argument("--manifest", required=True)
    a.add_argument("--predictions", required=True)
    a.add_argument("--out", required=True)
    a.add_argument("--k", type=int, default=3)
    a.add_argument("--channel", choices=("manchu", "roman"), default="manchu")
    a.set_defaults(func=cmd_analyze)

    c = sub.add_parser("compare", parents=[common], help="compare two or more runs")
    c.add_argument("runs", nargs="+", help="run directories or run.json files")
    c.add_argument("--out")
    c.add_argument("--channel", choices=("manchu", "roman"), default="manchu")
    c.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TransportError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except (OSError, json.JSONDecodeError) as exc:
        print(f"IO error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ManchuOcrError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
