"""Recognition metrics: CER, exact-match word accuracy, block-matching F1.

Characters are Unicode scalar values (``str`` indexing).  Per-sample scores
are plain arithmetic; aggregation is an unweighted mean over samples.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

from .errors import EmptyRunError, EmptyTruth, IdMismatch

CHANNELS = ("manchu", "roman")
FLOAT_DIGITS = 6


def levenshtein(a: Sequence, b: Sequence) -> int:
    """Unit-cost edit distance, two-row DP."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def cer(predicted: str, truth: str) -> float:
    if not truth:
        raise EmptyTruth("character error rate is undefined for an empty reference")
    return levenshtein(predicted, truth) / len(truth)


def _longest_block(pred, truth, p_lo, p_hi, t_lo, t_hi):
    # Longest common substring inside the window.  Scanning truth positions
    # in the outer loop and accepting only strictly longer runs keeps the
    # earliest-in-truth, then earliest-in-predicted block on ties.
    best = (p_lo, t_lo, 0)
    run = {}
    for t in range(t_lo, t_hi):
        next_run = {}
        ch = truth[t]
        for p in range(p_lo, p_hi):
            if pred[p] == ch:
                k = run.get(p - 1, 0) + 1
                next_run[p] = k
                if k > best[2]:
                    best = (p - k + 1, t - k + 1, k)
                elif k == best[2] and (t - k + 1, p - k + 1) < (best[1], best[0]):
                    best = (p - k + 1, t - k + 1, k)
        run = next_run
    return best


def matching_blocks(predicted: Sequence, truth: Sequence) -> list[tuple[int, int, int]]:
    """Recursive longest-common-block decomposition.

    Returns ``(pred_start, truth_start, length)`` triples ordered by position;
    adjacent blocks are not merged.
    """
    out = []
    stack = [(0, len(predicted), 0, len(truth))]
    while stack:
        p_lo, p_hi, t_lo, t_hi = stack.pop()
        if p_lo >= p_hi or t_lo >= t_hi:
            continue
        p, t, k = _longest_block(predicted, truth, p_lo, p_hi, t_lo, t_hi)
        if k == 0:
            continue
        out.append((p, t, k))
        stack.append((p_lo, p, t_lo, t))
        stack.append((p + k, p_hi, t + k, t_hi))
    out.sort(key=lambda b: (b[1], b[0]))
    return out


@dataclass(frozen=True)
class CharF1Breakdown:
    true_positives: int
    predicted_len: int
    truth_len: int
    precision: float
    recall: float
    f1: float


def char_f1(predicted: str, truth: str) -> CharF1Breakdown:
    if not truth:
        raise EmptyTruth("F1 is undefined for an empty reference")
    tp = sum(k for _, _, k in matching_blocks(predicted, truth))
    precision = tp / len(predicted) if predicted else 0.0
    recall = tp / len(truth)
    # 2PR/(P+R) reduces to 2TP/(|p|+|t|): one division, so 0.75 stays 0.75
    f1 = 0.0 if tp == 0 else 2 * tp / (len(predicted) + len(truth))
    return CharF1Breakdown(tp, len(predicted), len(truth), precision, recall, f1)


@dataclass(frozen=True)
class SampleScore:
    sample_id: str
    cer: float
    exact_match: bool
    f1: CharF1Breakdown
    latency: float


def channel_text(record, channel: str) -> str:
    if channel not in CHANNELS:
        raise ValueError(f"unknown channel {channel!r}")
    return getattr(record, channel)


def score_sample(prediction, truth, channel: str = "manchu") -> SampleScore:
    """Score one prediction against its manifest sample on one script channel."""
    if prediction.sample_id != truth.id:
        raise IdMismatch(f"prediction {prediction.sample_id!r} scored against sample {truth.id!r}")
    pred_text = channel_text(prediction, channel)
    true_text = channel_text(truth, channel)
    return SampleScore(
        sample_id=truth.id,
        cer=cer(pred_text, true_text),
        exact_match=pred_text == true_text,
        f1=char_f1(pred_text, true_text),
        latency=prediction.latency_seconds,
    )


@dataclass(frozen=True)
class MetricsReport:
    word_accuracy: float
    mean_cer: float
    mean_f1: float
    mean_latency: float
    sample_count: int
    script_channel: str

    def to_dict(self) -> dict:
        d = asdict(self)
        return {
            "wordAccuracy": round(d["word_accuracy"], FLOAT_DIGITS),
            "meanCer": round(d["mean_cer"], FLOAT_DIGITS),
            "meanF1": round(d["mean_f1"], FLOAT_DIGITS),
            "meanLatency": round(d["mean_latency"], FLOAT_DIGITS),
            "sampleCount": d["sample_count"],
            "scriptChannel": d["script_channel"],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(
            word_accuracy=float(d["wordAccuracy"]),
            mean_cer=float(d["meanCer"]),
            mean_f1=float(d["meanF1"]),
            mean_latency=float(d["meanLatency"]),
            sample_count=int(d["sampleCount"]),
            script_channel=d["scriptChannel"],
        )


def aggregate(scores: Iterable[SampleScore], channel: str = "manchu") -> MetricsReport:
    # sort so the float sums do not depend on scoring order
    scores = sorted(scores, key=lambda s: s.sample_id)
    n = len(scores)
    if n == 0:
        raise EmptyRunError("cannot aggregate an empty run")
    exact = sum(1 for s in scores if s.exact_match)
    return MetricsReport(
        word_accuracy=100.0 * exact / n,
        mean_cer=sum(s.cer for s in scores) / n,
        mean_f1=sum(s.f1.f1 for s in scores) / n,
        mean_latency=sum(s.latency for s in scores) / n,
        sample_count=n,
        script_channel=channel,
    )


def select_best(reports: Iterable[tuple[str, MetricsReport]]) -> str:
    """Highest word accuracy; ties go to lower mean CER, then smaller id."""
    reports = list(reports)
    if not reports:
        raise EmptyRunError("no reports to choose from")
    best = min(reports, key=lambda r: (-r[1].word_accuracy, r[1].mean_cer, r[0]))
    return best[0]


def fmt(value: float, digits: int = FLOAT_DIGITS) -> str:
    return f"{value:.{digits}f}"
