"""Character-level error attribution.

Substitutions and deletions are charged to the ground-truth character;
insertions to the inserted predicted character, kept in their own bucket so
shares can be reported with or without them.
"""
from __future__ import annotations

import csv
import io
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple

from .errors import MissingPrediction, NoErrors
from .metrics import channel_text
from .records import Prediction, Sample, atomic_write_text

MATCH, SUBSTITUTE, DELETE, INSERT = "match", "substitute", "delete", "insert"
VIEW_ALL = "all-errors"
VIEW_NO_INSERTIONS = "substitutions+deletions"


class EditOp(NamedTuple):
    op: str
    truth_char: str | None
    pred_char: str | None


def align(predicted: str, truth: str) -> list[EditOp]:
    """One minimal edit script turning ``truth`` into ``predicted``.

    Backtrace from the end of the Levenshtein matrix, preferring
    match > substitute > delete > insert at every step.
    """
    m, n = len(truth), len(predicted)
    dist = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(m + 1):
        dist[i][0] = i
    for j in range(n + 1):
        dist[0][j] = j
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            dist[i][j] = min(dist[i - 1][j] + 1, dist[i][j - 1] + 1,
                             dist[i - 1][j - 1] + (truth[i - 1] != predicted[j - 1]))
    ops = []
    i, j = m, n
    while i or j:
        here = dist[i][j]
        if i and j and truth[i - 1] == predicted[j - 1] and dist[i - 1][j - 1] == here:
            ops.append(EditOp(MATCH, truth[i - 1], predicted[j - 1]))
            i, j = i - 1, j - 1
        elif i and j and dist[i - 1][j - 1] + 1 == here:
            ops.append(EditOp(SUBSTITUTE, truth[i - 1], predicted[j - 1]))
            i, j = i - 1, j - 1
        elif i and dist[i - 1][j] + 1 == here:
            ops.append(EditOp(DELETE, truth[i - 1], None))
            i -= 1
        else:
            ops.append(EditOp(INSERT, None, predicted[j - 1]))
            j -= 1
    ops.reverse()
    return ops


def script_cost(ops: Iterable[EditOp]) -> int:
    return sum(1 for op in ops if op.op != MATCH)


@dataclass
class CharErrors:
    substitutions: Counter = field(default_factory=Counter)
    deletions: int = 0
    insertions: int = 0

    @property
    def total(self) -> int:
        return sum(self.substitutions.values()) + self.deletions + self.insertions

    @property
    def without_insertions(self) -> int:
        return sum(self.substitutions.values()) + self.deletions


@dataclass
class ConfusionTable:
    per_char: dict[str, CharErrors] = field(default_factory=dict)

    @property
    def total_errors(self) -> int:
        return sum(e.total for e in self.per_char.values())

    def entry(self, ch: str) -> CharErrors:
        return self.per_char.setdefault(ch, CharErrors())

    def add_script(self, ops: Iterable[EditOp]) -> None:
        for op in ops:
            if op.op == SUBSTITUTE:
                self.entry(op.truth_char).substitutions[op.pred_char] += 1
            elif op.op == DELETE:
                self.entry(op.truth_char).deletions += 1
            elif op.op == INSERT:
                self.entry(op.pred_char).insertions += 1

    def merge(self, other: "ConfusionTable") -> "ConfusionTable":
        out = ConfusionTable()
        for table in (self, other):
            for ch, e in table.per_char.items():
                mine = out.entry(ch)
                mine.substitutions.update(e.substitutions)
                mine.deletions += e.deletions
                mine.insertions += e.insertions
        return out


def accumulate(samples: Iterable[Sample], predictions: Iterable[Prediction],
               channel: str = "manchu") -> ConfusionTable:
    by_id = {p.sample_id: p for p in predictions}
    table = ConfusionTable()
    for sample in samples:
        pred = by_id.get(sample.id)
        if pred is None:
            raise MissingPrediction(sample.id)
        table.add_script(align(channel_text(pred, channel), channel_text(sample, channel)))
    return table


@dataclass(frozen=True)
class ConcentrationReport:
    top_k: list[tuple[str, float]]
    concentration: float
    k: int
    view: str = VIEW_ALL
    total_errors: int = 0

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "view": self.view,
            "totalErrors": self.total_errors,
            "topK": [{"char": ch, "codepoint": f"U+{ord(ch):04X}", "share": round(share, 6)}
                     for ch, share in self.top_k],
            "concentration": round(self.concentration, 6),
        }


def concentration(table: ConfusionTable, k: int = 3, include_insertions: bool = True) -> ConcentrationReport:
    """Top-k characters by share of attributed errors, and their summed share."""
    counts = {ch: (e.total if include_insertions else e.without_insertions)
              for ch, e in table.per_char.items()}
    total = sum(counts.values())
    if total == 0:
        raise NoErrors("no errors to attribute")
    ranked = sorted((ch for ch, c in counts.items() if c > 0),
                    key=lambda ch: (-counts[ch], ord(ch[0]), ch))
    top = [(ch, 100.0 * counts[ch] / total) for ch in ranked[:k]]
    # sum counts first so the total is not a sum of rounded shares
    conc = 100.0 * sum(counts[ch] for ch, _ in top) / total
    return ConcentrationReport(top, conc, k, VIEW_ALL if include_insertions else VIEW_NO_INSERTIONS, total)


class LongestCorrect(NamedTuple):
    sample_id: str
    length: int
    text: str


def longest_correct(samples: Iterable[Sample], predictions: Iterable[Prediction],
                    channel: str = "manchu") -> LongestCorrect | None:
    by_id = {p.sample_id: p for p in predictions}
    best = None
    for s in sorted(samples, key=lambda s: s.id):
        p = by_id.get(s.id)
        truth = channel_text(s, channel)
        if p is None or channel_text(p, channel) != truth:
            continue
        if best is None or len(truth) > best.length:
            best = LongestCorrect(s.id, len(truth), truth)
    return best


def confusion_csv(table: ConfusionTable) -> str:
    replacements = sorted({r for e in table.per_char.values() for r in e.substitutions})
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["truth"] + replacements + ["DEL", "INS"])
    for ch in sorted(c for c, e in table.per_char.items() if e.total):
        e = table.per_char[ch]
        writer.writerow([ch] + [e.substitutions.get(r, 0) for r in replacements]
                        + [e.deletions, e.insertions])
    return buf.getvalue()


def export(table: ConfusionTable, out_dir: str | Path, k: int = 3,
           longest: LongestCorrect | None = None, channel: str = "manchu") -> list[Path]:
    """Write confusion.csv, concentration.json and longest.json."""
    out_dir = Path(out_dir)
    paths = [out_dir / "confusion.csv", out_dir / "concentration.json", out_dir / "longest.json"]
    atomic_write_text(paths[0], confusion_csv(table))
    views = {}
    for include in (True, False):
        try:
            rep = concentration(table, k, include_insertions=include)
            views[rep.view] = rep.to_dict()
        except NoErrors:
            views[VIEW_ALL if include else VIEW_NO_INSERTIONS] = None
    doc = {
        "channel": channel,
        "totalErrors": table.total_errors,
        "attribution": "substitutions and deletions charged to the ground-truth character; "
                       "insertions charged to the inserted predicted character",
        "views": views,
    }
    atomic_write_text(paths[1], json.dumps(doc, ensure_ascii=False, indent=2) + "\n")
    longest_doc = None if longest is None else {
        "id": longest.sample_id, "length": longest.length, "text": longest.text}
    atomic_write_text(paths[2], json.dumps({"channel": channel, "longest": longest_doc},
                                           ensure_ascii=False, indent=2) + "\n")
    return paths
