"""Toolkit configuration: one JSON document, paths relative to its directory."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .imaging import PreprocessConfig
from .recognizers import RecognizerDescriptor
from .segment import SegmentConfig
from .synth import GenSpec

KNOWN_KEYS = {"preprocess", "segment", "gen", "recognizers", "tablePath", "seed",
              "lexiconPath", "atlasPaths", "timing"}
BASELINE = {"id": "baseline", "kind": "baseline"}


@dataclass
class ToolkitConfig:
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    segment: SegmentConfig = field(default_factory=SegmentConfig)
    gen: GenSpec = field(default_factory=GenSpec)
    recognizers: list[RecognizerDescriptor] = field(
        default_factory=lambda: [RecognizerDescriptor.from_dict(BASELINE)])
    table_path: Path | None = None
    lexicon_path: Path | None = None
    atlas_paths: list[Path] = field(default_factory=list)
    seed: int = 0
    timing: bool = True
    raw: bytes = b"{}"
    base_dir: Path = field(default_factory=Path.cwd)

    def recognizer(self, rid: str) -> RecognizerDescriptor:
        for d in self.recognizers:
            if d.id == rid:
                return d
        raise ConfigError(f"no recognizer {rid!r} in config (have {[d.id for d in self.recognizers]})")

    def resolve(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p


def _existing(base: Path, value, what: str) -> Path:
    p = Path(value)
    p = p if p.is_absolute() else base / p
    if not p.exists():
        raise ConfigError(f"{what} not found: {p}")
    return p


def parse_config(raw: bytes, base_dir: Path | None = None) -> ToolkitConfig:
    base_dir = Path(base_dir or Path.cwd())
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    seed = int(doc.get("seed", 0))
    gen = dict(doc.get("gen") or {})
    gen.setdefault("seed", seed)
    recognizers = [RecognizerDescriptor.from_dict(r) for r in doc.get("recognizers", [BASELINE])]
    ids = [r.id for r in recognizers]
    if len(set(ids)) != len(ids):
        raise ConfigError(f"duplicate recognizer ids: {ids}")
    for r in recognizers:
        for key in ("lexicon", "index"):
            if key in r.options:
                _existing(base_dir, r.options[key], f"recognizer {r.id!r} {key}")
        for a in r.options.get("atlas", []) or []:
            if a != "demo":
                _existing(base_dir, a, f"recognizer {r.id!r} atlas")
    return ToolkitConfig(
        preprocess=PreprocessConfig.from_dict(doc.get("preprocess")),
        segment=SegmentConfig.from_dict(doc.get("segment")),
        gen=GenSpec.from_dict(gen),
        recognizers=recognizers,
        table_path=_existing(base_dir, doc["tablePath"], "tablePath") if doc.get("tablePath") else None,
        lexicon_path=_existing(base_dir, doc["lexiconPath"], "lexiconPath") if doc.get("lexiconPath") else None,
        atlas_paths=[_existing(base_dir, a, "atlas") for a in doc.get("atlasPaths", [])],
        seed=seed,
        timing=bool(doc.get("timing", True)),
        raw=raw,
        base_dir=base_dir,
    )


def load_config(path: str | Path | None) -> ToolkitConfig:
    if path is None:
        return parse_config(b"{}")
    path = Path(path)
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    return parse_config(raw, path.resolve().parent)
