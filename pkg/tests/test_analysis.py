import json
import random

import pytest
from hypothesis import given, strategies as st

from manchu_ocr.analysis import (DELETE, INSERT, MATCH, SUBSTITUTE, ConfusionTable, accumulate,
                                 align, concentration, confusion_csv, export, longest_correct,
                                 script_cost)
from manchu_ocr.errors import MissingPrediction, NoErrors
from manchu_ocr.metrics import levenshtein
from manchu_ocr.records import Prediction, Sample

A, M, L, E = "ᠠ", "ᠮ", "ᠯ", "ᡝ"
AMALA = A + M + A + L + A


def S(i, manchu):
    return Sample(f"s{i:03d}", "x.png", manchu, "", "f", "test")


def P(i, manchu):
    return Prediction(f"s{i:03d}", manchu, "", 0.0)


def test_align_identity_and_deletions():
    assert all(op.op == MATCH for op in align(AMALA, AMALA))
    ops = align(AMALA[:3], AMALA)
    assert [op.op for op in ops].count(DELETE) == 2 and script_cost(ops) == 2


text = st.text(alphabet="abcd", max_size=9)


@given(text, text)
def test_align_cost_is_levenshtein(p, t):
    ops = align(p, t)
    assert script_cost(ops) == levenshtein(p, t)
    assert len(ops) >= max(len(p), len(t))
    assert "".join(op.truth_char or "" for op in ops) == t
    assert "".join(op.pred_char or "" for op in ops) == p


def test_accumulate_attribution():
    table = accumulate([S(0, AMALA)], [P(0, E + AMALA[1:])])
    assert table.per_char[A].substitutions[E] == 1
    assert table.total_errors == 1
    ins = accumulate([S(0, A)], [P(0, A + M)])
    assert ins.per_char[M].insertions == 1
    assert accumulate([S(0, AMALA)], [P(0, AMALA)]).total_errors == 0
    with pytest.raises(MissingPrediction):
        accumulate([S(0, AMALA)], [])


def test_forty_percent_share():
    # 10 errors, 4 on A
    samples = [S(i, A + M + L) for i in range(10)]
    preds = [P(i, E + M + L) if i < 4 else P(i, A + (E if i < 7 else M) + (L if i < 7 else E))
             for i in range(10)]
    rep = concentration(accumulate(samples, preds), k=3)
    assert rep.total_errors == 10
    assert rep.top_k[0] == (A, 40.0)


def test_concentration_edges():
    single = accumulate([S(0, A)], [P(0, E)])
    rep = concentration(single, 3)
    assert rep.top_k == [(A, 100.0)] and rep.concentration == 100.0
    with pytest.raises(NoErrors):
        concentration(ConfusionTable(), 3)


def test_concentration_monotone_in_k():
    rng = random.Random(0)
    alpha = "abcdefg"
    samples = [S(i, "".join(rng.choice(alpha) for _ in range(6))) for i in range(40)]
    preds = [P(i, "".join(rng.choice(alpha) for _ in range(rng.randint(3, 8)))) for i in range(40)]
    table = accumulate(samples, preds)
    values = [concentration(table, k).concentration for k in range(1, 10)]
    assert values == sorted(values) and values[-1] == pytest.approx(100.0)


def test_accumulate_permutation_invariant_and_merge():
    rng = random.Random(1)
    samples = [S(i, "".join(rng.choice("abc") for _ in range(5))) for i in range(20)]
    preds = [P(i, "".join(rng.choice("abc") for _ in range(5))) for i in range(20)]
    a = confusion_csv(accumulate(samples, preds))
    b = confusion_csv(accumulate(samples[::-1], preds[::-1]))
    merged = accumulate(samples[:7], preds).merge(accumulate(samples[7:], preds))
    assert a == b == confusion_csv(merged)
    total = sum(levenshtein(p.manchu, s.manchu) for s, p in zip(samples, preds))
    assert accumulate(samples, preds).total_errors == total


def test_longest_correct():
    samples = [S(0, AMALA), S(1, A * 13), S(2, A + M), S(3, M * 13)]
    preds = [P(0, AMALA), P(1, A * 13), P(2, A + M), P(3, M * 13)]
    assert longest_correct(samples, preds).sample_id == "s001"
    assert longest_correct(samples, [P(i, "") for i in range(4)]) is None
    assert longest_correct(samples[:3], preds[:3]).length == 13


def test_confusion_csv_shapes():
    assert confusion_csv(ConfusionTable()) == "truth,DEL,INS\n"
    t = accumulate([S(0, A + M)], [P(0, E + L)])
    lines = confusion_csv(t).splitlines()
    assert lines[0] == f"truth,{L},{E},DEL,INS"
    assert len(lines) == 3


def test_export_is_byte_stable(tmp_path):
    t = accumulate([S(0, AMALA), S(1, A)], [P(0, AMALA[:3]), P(1, E)])
    lc = longest_correct([S(0, AMALA)], [P(0, AMALA)])
    export(t, tmp_path / "a", 3, lc)
    export(t, tmp_path / "b", 3, lc)
    for name in ("confusion.csv", "concentration.json", "longest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    doc = json.loads((tmp_path / "a" / "concentration.json").read_text(encoding="utf-8"))
    assert set(doc["views"]) == {"all-errors", "substitutions+deletions"}
