import pytest
from hypothesis import given, strategies as st

from manchu_ocr.errors import TableParseError, UnknownGlyph, UnknownToken
from manchu_ocr.script import (TransliterationTable, canonical_roman, is_manchu, load_table,
                               manchu_to_roman, parse_table, roman_to_manchu, tokenize_roman,
                               validate_table)

AMALA = "ᠠᠮᠠᠯᠠ"
# the 16 code points printed for FERGUWEBURAKŪNGGE
FERGU = ("ᡶᡝᡵᡤᡠᠸᡝᠪ"
         "ᡠᡵᠠᡴᡡᠩᡤᡝ")


def test_worked_words(table):
    assert roman_to_manchu("AMALA", table) == AMALA
    assert manchu_to_roman(AMALA, table) == "AMALA"
    assert roman_to_manchu("FERGUWEBURAKŪNGGE", table) == FERGU
    assert manchu_to_roman(FERGU, table) == "FERGUWEBURAKŪNGGE"


def test_single_token(table):
    assert roman_to_manchu("A", table) == "ᠠ"
    assert manchu_to_roman("ᠠ", table) == "A"


def test_shipped_table_is_clean(table):
    assert validate_table(table) == []
    assert len(table.tokens) == 25
    assert "Ū" in table.tokens and "U" in table.tokens
    assert table.glyph("Ū") != table.glyph("U")


def test_longest_match_prefers_digraph(table):
    assert tokenize_roman("ANGGA", table) == ["A", "NG", "G", "A"]
    assert tokenize_roman("NG", table) == ["NG"]


def test_lowercase_and_nfd_input_canonicalized(table):
    assert roman_to_manchu("amala", table) == AMALA
    assert canonical_roman("kū") == "KŪ"


def test_unknown_token_position(table):
    with pytest.raises(UnknownToken) as err:
        roman_to_manchu("AMXA", table)
    assert err.value.position == 2


def test_unknown_glyph_position(table):
    with pytest.raises(UnknownGlyph) as err:
        manchu_to_roman("ᠠA", table)
    assert err.value.position == 1


def test_duplicate_token_violation():
    t = TransliterationTable((("A", "ᠠ"), ("A", "ᠡ")), "t")
    kinds = [v.kind for v in validate_table(t)]
    assert kinds == ["DuplicateToken"]


def test_ambiguous_glyph_violation():
    t = TransliterationTable((("A", "ᠠ"), ("B", "ᠠ")), "t")
    kinds = [v.kind for v in validate_table(t)]
    assert kinds == ["AmbiguousGlyph"]


def test_parse_errors_carry_line_numbers():
    with pytest.raises(TableParseError) as err:
        parse_table("# c\nA\tU+1820\nB U+182A\n")
    assert err.value.line_no == 3
    with pytest.raises(TableParseError):
        parse_table("A\tU+ZZZZ\n")


def test_multi_codepoint_entries():
    t = parse_table("A\tU+1820\nX\tU+1820,U+180B\n")
    assert roman_to_manchu("XA", t) == "ᠠ᠋ᠠ"
    assert manchu_to_roman("ᠠ᠋ᠠ", t) == "XA"


def test_load_table_strict_rejects_duplicates(tmp_path):
    p = tmp_path / "t.tsv"
    p.write_text("A\tU+1820\nA\tU+1821\n", encoding="utf-8")
    with pytest.raises(Exception):
        load_table(p)
    assert len(load_table(p, strict=False).entries) == 2


def test_is_manchu(table):
    assert is_manchu(AMALA, table)
    assert not is_manchu("AMALA", table)


def test_round_trip_100_random_words(table):
    import random
    rng = random.Random(7)
    toks = table.tokens
    for _ in range(100):
        word = "".join(rng.choice(toks) for _ in range(rng.randint(1, 12)))
        assert manchu_to_roman(roman_to_manchu(word, table), table) == word


def _words(table):
    return st.lists(st.sampled_from(table.tokens), min_size=1, max_size=15).map("".join)


@given(st.data())
def test_round_trip_property(data):
    from manchu_ocr.script import default_table
    t = default_table()
    word = data.draw(_words(t))
    assert manchu_to_roman(roman_to_manchu(word, t), t) == word
    toks = tokenize_roman(word, t)
    assert len(roman_to_manchu(word, t)) == sum(len(t.glyph(x)) for x in toks)
    assert tokenize_roman(word, t) == toks
