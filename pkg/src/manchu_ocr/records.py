"""Manifest and prediction records, line-delimited JSON persistence."""
from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .errors import ManchuOcrError


@dataclass(frozen=True)
class Sample:
    id: str
    image_path: str
    manchu: str
    roman: str
    font_id: str
    split: str

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "imagePath": self.image_path,
            "manchu": self.manchu,
            "roman": self.roman,
            "fontId": self.font_id,
            "split": self.split,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Sample":
        return cls(d["id"], d["imagePath"], d["manchu"], d["roman"],
                   d.get("fontId", ""), d.get("split", ""))


@dataclass(frozen=True)
class Prediction:
    sample_id: str
    manchu: str
    roman: str
    latency_seconds: float
    raw: str = ""
    malformed: bool = False
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    def to_dict(self) -> dict:
        d = {
            "id": self.sample_id,
            "manchu": self.manchu,
            "roman": self.roman,
            "latencySeconds": round(self.latency_seconds, 6),
            "raw": self.raw,
            "malformed": self.malformed,
        }
        if self.error is not None:
            d["error"] = self.error
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Prediction":
        return cls(
            sample_id=d["id"],
            manchu=d.get("manchu", ""),
            roman=d.get("roman", ""),
            latency_seconds=float(d.get("latencySeconds", 0.0)),
            raw=d.get("raw", ""),
            malformed=bool(d.get("malformed", False)),
            error=d.get("error"),
        )


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def dump_json(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, indent=2) + "\n"


def _jsonl(rows: Iterable[dict]) -> str:
    return "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows)


def _read_jsonl(path: Path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ManchuOcrError(f"{path}:{line_no}: bad record ({exc.msg})") from None
    return rows


def write_manifest(path: str | Path, samples: Iterable[Sample]) -> None:
    atomic_write_text(path, _jsonl(s.to_dict() for s in samples))


def read_manifest(path: str | Path) -> list[Sample]:
    return [Sample.from_dict(d) for d in _read_jsonl(Path(path))]


def write_predictions(path: str | Path, predictions: Iterable[Prediction]) -> None:
    ordered = sorted(predictions, key=lambda p: p.sample_id)
    atomic_write_text(path, _jsonl(p.to_dict() for p in ordered))


def read_predictions(path: str | Path) -> list[Prediction]:
    return [Prediction.from_dict(d) for d in _read_jsonl(Path(path))]


def sha256_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()
