"""Manchu text in two scripts: Mongolian-block Unicode and Roman letters.

Texts are plain ``str`` values.  Roman text is canonical uppercase NFC
(``Ū`` and ``Š`` are single code points), Manchu text is a run of
Mongolian-block code points.  Conversion in both directions is greedy
longest-match against a :class:`TransliterationTable`.
"""
from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import NamedTuple

from .errors import ConfigError, TableParseError, UnknownGlyph, UnknownToken

MONGOLIAN_BLOCK = range(0x1800, 0x18B0)


class Violation(NamedTuple):
    kind: str  # "DuplicateToken" | "AmbiguousGlyph" | "EmptyEntry"
    token: str
    codepoints: str
    detail: str


@dataclass(frozen=True)
class TransliterationTable:
    entries: tuple[tuple[str, str], ...]
    version: str = "custom"
    _to_manchu: dict = field(init=False, repr=False, compare=False)
    _to_roman: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        # longest tokens first, then alphabetical: the decoding order
        ordered = tuple(sorted(self.entries, key=lambda e: (-len(e[0]), e[0])))
        object.__setattr__(self, "entries", ordered)
        object.__setattr__(self, "_to_manchu", {t: c for t, c in reversed(ordered)})
        object.__setattr__(self, "_to_roman", {c: t for t, c in reversed(ordered)})

    @property
    def tokens(self) -> list[str]:
        return [t for t, _ in self.entries]

    @property
    def max_token_len(self) -> int:
        return max((len(t) for t, _ in self.entries), default=0)

    @property
    def max_glyph_len(self) -> int:
        return max((len(c) for _, c in self.entries), default=0)

    def glyph(self, token: str) -> str:
        return self._to_manchu[token]

    def charset(self) -> frozenset[str]:
        return frozenset("".join(c for _, c in self.entries))


def canonical_roman(text: str) -> str:
    return unicodedata.normalize("NFC", text).strip().upper()


def _parse_codepoints(spec: str) -> str:
    out = []
    for part in spec.split(","):
        part = part.strip()
        if not part.upper().startswith("U+"):
            raise ValueError(f"expected U+XXXX, got {part!r}")
        out.append(chr(int(part[2:], 16)))
    return "".join(out)


def parse_table(text: str, version: str = "custom") -> TransliterationTable:
    entries = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        parts = stripped.split("\t")
        if len(parts) != 2:
            raise TableParseError(line_no, f"expected TOKEN<TAB>U+XXXX, got {line!r}")
        token = canonical_roman(parts[0])
        if not token:
            raise TableParseError(line_no, "empty token")
        try:
            cps = _parse_codepoints(parts[1])
        except ValueError as exc:
            raise TableParseError(line_no, str(exc)) from None
        entries.append((token, cps))
    return TransliterationTable(tuple(entries), version=version)


def load_table(path: str | Path | None = None, strict: bool = True) -> TransliterationTable:
    """Read a table file; ``None`` loads the bundled table."""
    if path is None:
        return default_table()
    path = Path(path)
    table = parse_table(path.read_text(encoding="utf-8"), version=path.name)
    problems = validate_table(table) if strict else []
    if problems:
        raise ConfigError(f"{path}: " + "; ".join(v.detail for v in problems))
    return table


@lru_cache(maxsize=None)
def default_table() -> TransliterationTable:
    text = resources.files("manchu_ocr").joinpath("data/table.tsv").read_text(encoding="utf-8")
    return parse_table(text, version="mollendorff-basic-1")


def validate_table(table: TransliterationTable) -> list[Violation]:
    out = []
    seen_tokens: dict[str, str] = {}
    seen_glyphs: dict[str, str] = {}
    # walk in file order would be nicer for messages, but entries are sorted;
    # violations are reported per offending pair either way
    for token, cps in table.entries:
        if not token or not cps:
            out.append(Violation("EmptyEntry", token, cps, f"empty entry {token!r}"))
            continue
        if token in seen_tokens:
            out.append(Violation("DuplicateToken", token, cps,
                                 f"token {token!r} defined more than once"))
        else:
            seen_tokens[token] = cps
        if cps in seen_glyphs:
            hexes = ",".join(f"U+{ord(c):04X}" for c in cps)
            out.append(Violation("AmbiguousGlyph", token, cps,
                                 f"{hexes} shared by {seen_glyphs[cps]!r} and {token!r}"))
        else:
            seen_glyphs[cps] = token
    return out


def tokenize_roman(text: str, table: TransliterationTable | None = None) -> list[str]:
    table = table or default_table()
    text = canonical_roman(text)
    lookup = table._to_manchu
    tokens = []
    i, n, longest = 0, len(text), table.max_token_len
    while i < n:
        for size in range(min(longest, n - i), 0, -1):
            piece = text[i:i + size]
            if piece in lookup:
                tokens.append(piece)
                i += size
                break
        else:
            raise UnknownToken(text, i)
    return tokens


def roman_to_manchu(text: str, table: TransliterationTable | None = None) -> str:
    table = table or default_table()
    return "".join(table._to_manchu[t] for t in tokenize_roman(text, table))


def manchu_to_roman(text: str, table: TransliterationTable | None = None) -> str:
    table = table or default_table()
    lookup = table._to_roman
    out = []
    i, n, longest = 0, len(text), table.max_glyph_len
    while i < n:
        for size in range(min(longest, n - i), 0, -1):
            piece = text[i:i + size]
            if piece in lookup:
                out.append(lookup[piece])
                i += size
                break
        else:
            raise UnknownGlyph(text, i)
    return "".join(out)


def is_manchu(text: str, table: TransliterationTable | None = None) -> bool:
    """True for non-empty text drawn only from the table's glyph set."""
    allowed = (table or default_table()).charset()
    return bool(text) and all(c in allowed and ord(c) in MONGOLIAN_BLOCK for c in text)


def is_roman(text: str, table: TransliterationTable | None = None) -> bool:
    if not text or text != canonical_roman(text):
        return False
    try:
        tokenize_roman(text, table)
    except UnknownToken:
        return False
    return True
