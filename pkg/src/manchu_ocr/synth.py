"""Synthetic word images composed from a per-letter glyph atlas.

A word is drawn by stacking one glyph per Roman token top to bottom with a
small vertical overlap, so consecutive letters join along a shared stem.
Atlas glyphs are dark ink on white; generated dataset images are inverted
to light-on-dark, matching the look of the original synthetic corpus.
"""
from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import imaging
from .errors import ConfigError, MissingGlyph, SpecError
from .records import Sample, atomic_write_text, write_manifest
from .script import (TransliterationTable, canonical_roman, default_table,
                     roman_to_manchu, tokenize_roman)

FORMS = ("initial", "medial", "final", "isolated")
GLYPH_HEIGHT = 28
GLYPH_WIDTH = 32


@dataclass
class GlyphAtlas:
    font_id: str
    glyphs: dict[tuple[str, str], np.ndarray]

    def get(self, token: str, form: str) -> np.ndarray:
        try:
            return self.glyphs[(token, form)]
        except KeyError:
            pass
        try:
            return self.glyphs[(token, "isolated")]
        except KeyError:
            raise MissingGlyph(token, form) from None

    def tokens(self) -> set[str]:
        return {t for t, _ in self.glyphs}


@dataclass(frozen=True)
class Lexicon:
    words: tuple[str, ...]
    source: str = "custom"


@dataclass(frozen=True)
class NoiseParams:
    salt_pepper_prob: float = 0.0
    gaussian_sigma: float = 0.0
    rotation_degrees_max: float = 0.0

    def validate(self):
        if not 0.0 <= self.salt_pepper_prob <= 1.0:
            raise SpecError("saltPepperProb must lie in [0, 1]")
        if self.gaussian_sigma < 0:
            raise SpecError("gaussianSigma must be >= 0")
        if not 0 <= self.rotation_degrees_max <= 10:
            raise SpecError("rotationDegreesMax must lie in [0, 10]")

    @property
    def is_identity(self) -> bool:
        return (self.salt_pepper_prob == 0 and self.gaussian_sigma == 0
                and self.rotation_degrees_max == 0)


@dataclass(frozen=True)
class GenSpec:
    sample_count: int = 2000
    seed: int = 0
    noise: NoiseParams = field(default_factory=lambda: NoiseParams(0.01, 6.0, 0.0))
    fonts: tuple[str, ...] = ()
    splits: tuple[tuple[str, float], ...] = (("train", 0.8), ("val", 0.2))
    overlap: float = 0.15
    margin: int = 8

    def validate(self):
        if self.sample_count < 0:
            raise SpecError("sampleCount must be >= 0")
        if not self.splits:
            raise SpecError("at least one split is required")
        if any(f < 0 for _, f in self.splits):
            raise SpecError("split fractions must be non-negative")
        if not math.isclose(sum(f for _, f in self.splits), 1.0, abs_tol=1e-9):
            raise SpecError(f"split fractions sum to {sum(f for _, f in self.splits)}, not 1")
        if not 0 <= self.overlap < 1:
            raise SpecError("overlap must lie in [0, 1)")
        if self.margin < 0:
            raise SpecError("margin must be >= 0")
        self.noise.validate()

    @classmethod
    def from_dict(cls, d: dict | None) -> "GenSpec":
        d = dict(d or {})
        noise = d.pop("noise", None)
        splits = d.pop("splits", None)
        kwargs = {}
        names = {"sampleCount": "sample_count", "seed": "seed", "fonts": "fonts",
                 "overlap": "overlap", "margin": "margin"}
        for key, value in d.items():
            if key not in names:
                raise SpecError(f"unknown gen key {key!r}")
            kwargs[names[key]] = tuple(value) if key == "fonts" else value
        if noise is not None:
            kwargs["noise"] = NoiseParams(
                float(noise.get("saltPepperProb", 0.0)),
                float(noise.get("gaussianSigma", 0.0)),
                float(noise.get("rotationDegreesMax", 0.0)),
            )
        if splits is not None:
            kwargs["splits"] = tuple((str(k), float(v)) for k, v in splits.items())
        spec = cls(**kwargs)
        spec.validate()
        return spec

    def to_dict(self) -> dict:
        return {
            "sampleCount": self.sample_count,
            "seed": self.seed,
            "noise": {
                "saltPepperProb": self.noise.salt_pepper_prob,
                "gaussianSigma": self.noise.gaussian_sigma,
                "rotationDegreesMax": self.noise.rotation_degrees_max,
            },
            "fonts": list(self.fonts),
            "splits": dict(self.splits),
            "overlap": self.overlap,
            "margin": self.margin,
        }


# -- lexicon -----------------------------------------------------------------

def parse_lexicon(text: str, source: str = "custom",
                  table: TransliterationTable | None = None) -> Lexicon:
    words, seen = [], set()
    for line_no, line in enumerate(text.splitlines(), start=1):
        word = canonical_roman(line.split("#", 1)[0])
        if not word:
            continue
        if word in seen:
            raise ConfigError(f"{source}:{line_no}: duplicate word {word!r}")
        try:
            tokenize_roman(word, table)
        except Exception as exc:
            raise ConfigError(f"{source}:{line_no}: {exc}") from None
        seen.add(word)
        words.append(word)
    if not words:
        raise ConfigError(f"{source}: lexicon is empty")
    return Lexicon(tuple(words), source)


def load_lexicon(path: str | Path | None = None,
                 table: TransliterationTable | None = None) -> Lexicon:
    if path is None:
        text = resources.files("manchu_ocr").joinpath("data/lexicon.txt").read_text(encoding="utf-8")
        return parse_lexicon(text, "bundled", table)
    path = Path(path)
    return parse_lexicon(path.read_text(encoding="utf-8"), path.name, table)


# -- atlas ---------------------------------------------------------------------

_DEMO_STYLES = {
    # stem half-width, cell inset from the glyph edge, cell row offset
    "demo-a": {"stem": 3, "inset": 0, "shift": 0},
    "demo-b": {"stem": 2, "inset": 3, "shift": 1},
}
_CELL_ROWS = ((5, 11), (11, 17), (17, 23))


def _demo_codes(n: int) -> list[int]:
    # 6-bit left/right x 3-row patterns, 2..4 cells set, fixed order
    codes = [c for k in (3, 2, 4) for c in range(64) if bin(c).count("1") == k]
    return codes[:n]


def _demo_glyph(code: int, form: str, style: dict) -> np.ndarray:
    g = np.full((GLYPH_HEIGHT, GLYPH_WIDTH), 255, dtype=np.uint8)
    mid = GLYPH_WIDTH // 2
    s = style["stem"]
    g[:, mid - s:mid + s] = 0
    c0 = style["inset"]
    for bit in range(6):
        if not code >> bit & 1:
            continue
        r0, r1 = _CELL_ROWS[bit % 3]
        r0, r1 = r0 + style["shift"], r1 + style["shift"] - (bit % 3 == 2)
        if bit < 3:
            g[r0:r1, c0:mid - s] = 0
        else:
            g[r0:r1, mid + s:GLYPH_WIDTH - c0] = 0
    if form in ("initial", "isolated"):
        g[0:4, mid - 8:mid + 8] = 0
    if form in ("final", "isolated"):
        g[GLYPH_HEIGHT - 4:, mid:GLYPH_WIDTH - 2] = 0
    return g


def demo_atlas(font_id: str = "demo-a", table: TransliterationTable | None = None) -> GlyphAtlas:
    """Machine-drawn atlas: a shared stem plus a per-letter block pattern."""
    table = table or default_table()
    style = _DEMO_STYLES[font_id]
    tokens = sorted(table.tokens)
    glyphs = {}
    for token, code in zip(tokens, _demo_codes(len(tokens))):
        for form in FORMS:
            glyphs[(token, form)] = _demo_glyph(code, form, style)
    return GlyphAtlas(font_id, glyphs)


def demo_atlases(table: TransliterationTable | None = None) -> list[GlyphAtlas]:
    return [demo_atlas(f, table) for f in sorted(_DEMO_STYLES)]


def save_atlas(atlas: GlyphAtlas, directory: str | Path) -> None:
    directory = Path(directory)
    index = {"fontId": atlas.font_id, "glyphs": []}
    for (token, form), img in sorted(atlas.glyphs.items()):
        name = f"{token}_{form}.png"
        imaging.write_png(directory / name, img)
        index["glyphs"].append({"token": token, "form": form, "file": name})
    atomic_write_text(directory / "index.json", json.dumps(index, ensure_ascii=False, indent=2) + "\n")


def load_atlas(directory: str | Path) -> GlyphAtlas:
    directory = Path(directory)
    index_path = directory / "index.json"
    if not index_path.exists():
        raise ConfigError(f"{directory}: missing index.json")
    index = json.loads(index_path.read_text(encoding="utf-8"))
    glyphs = {}
    for entry in index["glyphs"]:
        if entry["form"] not in FORMS:
            raise ConfigError(f"{directory}: unknown form {entry['form']!r}")
        glyphs[(canonical_roman(entry["token"]), entry["form"])] = imaging.read_png(directory / entry["file"])
    return GlyphAtlas(index["fontId"], glyphs)


def check_atlas(atlas: GlyphAtlas, table: TransliterationTable | None = None) -> list[str]:
    """Problems with an atlas: missing isolated forms, inconsistent widths."""
    table = table or default_table()
    problems = [f"no isolated glyph for {t!r}" for t in table.tokens
                if (t, "isolated") not in atlas.glyphs]
    widths = [g.shape[1] for g in atlas.glyphs.values()]
    if widths:
        ref = float(np.median(widths))
        problems += [f"glyph {key} width {g.shape[1]} outside +-20% of {ref:g}"
                     for key, g in sorted(atlas.glyphs.items())
                     if abs(g.shape[1] - ref) > 0.2 * ref]
    return problems


# -- composition -----------------------------------------------------------------

def positional_forms(n: int) -> list[str]:
    if n == 1:
        return ["isolated"]
    return ["initial"] + ["medial"] * (n - 2) + ["final"]


def compose_word(roman: str, atlas: GlyphAtlas, overlap: float = 0.15,
                 table: TransliterationTable | None = None) -> np.ndarray:
    """Stack the word's glyphs vertically; dark ink on white."""
    tokens = tokenize_roman(roman, table)
    glyphs = [atlas.get(t, f) for t, f in zip(tokens, positional_forms(len(tokens)))]
    if len(glyphs) == 1:
        return glyphs[0].copy()
    width = max(g.shape[1] for g in glyphs)
    steps = [g.shape[0] - int(math.floor(overlap * g.shape[0] + 0.5)) for g in glyphs]
    height = sum(steps[:-1]) + glyphs[-1].shape[0]
    canvas = np.full((height, width), 255, dtype=np.uint8)
    y = 0
    for g, step in zip(glyphs, steps):
        x = (width - g.shape[1]) // 2
        region = canvas[y:y + g.shape[0], x:x + g.shape[1]]
        np.minimum(region, g, out=region)
        y += step
    return canvas


def add_noise(img, noise: NoiseParams, rng: np.random.Generator) -> np.ndarray:
    """Rotation, then additive Gaussian noise, then salt-and-pepper flips.

    Rotation fills with black (the light-on-dark background).  A flipped
    pixel p becomes 255 - p.
    """
    out = imaging.as_raster(img)
    if noise.rotation_degrees_max > 0:
        angle = rng.uniform(-noise.rotation_degrees_max, noise.rotation_degrees_max)
        rotated = ndimage.rotate(out.astype(np.float64), angle, reshape=False, order=1,
                                 mode="constant", cval=0.0)
        out = imaging._round_u8(rotated)
    if noise.gaussian_sigma > 0:
        jitter = rng.normal(0.0, noise.gaussian_sigma, size=out.shape)
        out = imaging._round_u8(out.astype(np.float64) + jitter)
    if noise.salt_pepper_prob > 0:
        mask = rng.random(out.shape) < noise.salt_pepper_prob
        out = out.copy()
        out[mask] = 255 - out[mask]
    return out if out is not img else out.copy()


def sample_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, index])


def sample_id(index: int) -> str:
    return f"s{index:06d}"


def render_sample(index: int, lexicon: Lexicon, atlases: list[GlyphAtlas], spec: GenSpec,
                  table: TransliterationTable | None = None) -> tuple[str, str, np.ndarray]:
    """(roman word, font id, light-on-dark raster) for sample ``index``."""
    rng = sample_rng(spec.seed, index)
    word = lexicon.words[int(rng.integers(len(lexicon.words)))]
    atlas = atlases[int(rng.integers(len(atlases)))]
    ink = compose_word(word, atlas, spec.overlap, table)
    m = spec.margin
    img = np.pad(imaging.invert(ink), m, constant_values=0)
    return word, atlas.font_id, add_noise(img, spec.noise, rng)


def split_counts(n: int, splits: tuple[tuple[str, float], ...]) -> list[int]:
    """Largest-remainder rounding of n * fraction; ties to earlier splits."""
    exact = [n * f for _, f in splits]
    counts = [int(math.floor(e)) for e in exact]
    rest = n - sum(counts)
    order = sorted(range(len(splits)), key=lambda i: (-(exact[i] - counts[i]), i))
    for i in order[:rest]:
        counts[i] += 1
    return counts


def assign_splits(ids: list[str], splits: tuple[tuple[str, float], ...]) -> dict[str, str]:
    """Rank ids by content hash and cut the ranking at the split counts."""
    ranked = sorted(ids, key=lambda i: hashlib.sha256(i.encode()).hexdigest())
    out, pos = {}, 0
    for (name, _), count in zip(splits, split_counts(len(ids), splits)):
        for sid in ranked[pos:pos + count]:
            out[sid] = name
        pos += count
    return out


def select_atlases(atlases: list[GlyphAtlas], fonts: tuple[str, ...]) -> list[GlyphAtlas]:
    if not atlases:
        raise SpecError("no glyph atlases supplied")
    if not fonts:
        return sorted(atlases, key=lambda a: a.font_id)
    by_id = {a.font_id: a for a in atlases}
    missing = [f for f in fonts if f not in by_id]
    if missing:
        raise SpecError(f"fonts not available in atlases: {missing}")
    return [by_id[f] for f in fonts]


def generate(lexicon: Lexicon, atlases: list[GlyphAtlas], spec: GenSpec, out_dir: str | Path,
             table: TransliterationTable | None = None, jobs: int = 1) -> list[Sample]:
    """Render ``spec.sample_count`` word images and write images + manifest.

    Output is a pure function of the inputs: each sample draws from its own
    generator seeded by (seed, index), so ``jobs`` does not change any byte.
    """
    spec.validate()
    table = table or default_table()
    chosen = select_atlases(atlases, spec.fonts)
    for word in lexicon.words:
        tokens = tokenize_roman(word, table)
        for atlas in chosen:
            for t, f in zip(tokens, positional_forms(len(tokens))):
                atlas.get(t, f)
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)

    def work(i):
        word, font_id, img = render_sample(i, lexicon, chosen, spec, table)
        rel = f"images/{sample_id(i)}.png"
        imaging.write_png(out_dir / rel, img)
        return i, word, font_id, rel

    indices = range(spec.sample_count)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rendered = list(pool.map(work, indices))
    else:
        rendered = [work(i) for i in indices]
    ids = [sample_id(i) for i in indices]
    splits = assign_splits(ids, spec.splits)
    samples = [
        Sample(sample_id(i), rel, roman_to_manchu(word, table), word, font_id, splits[sample_id(i)])
        for i, word, font_id, rel in rendered
    ]
    write_manifest(out_dir / "manifest.jsonl", samples)
    return samples


# -- pages ---------------------------------------------------------------------

def ink_box(img, threshold: int = 128) -> tuple[int, int, int, int]:
    ys, xs = np.nonzero(np.asarray(img) < threshold)
    if len(xs) == 0:
        return (0, 0, 0, 0)
    return (int(xs.min()), int(ys.min()), int(xs.max() - xs.min() + 1), int(ys.max() - ys.min() + 1))


def compose_page(columns: list[list[str]], atlas: GlyphAtlas, word_gap: int = 240,
                 column_pitch: int = 160, margin: int = 40, overlap: float = 0.15,
                 table: TransliterationTable | None = None) -> tuple[np.ndarray, list[dict]]:
    """Dark-on-light page with words stacked in columns, left to right.

    Returns the page and the planted layout: one dict per word with
    ``column``, ``order``, ``roman`` and ink ``box`` as (x, y, w, h).
    """
    words = [[compose_word(w, atlas, overlap, table) for w in col] for col in columns]
    col_heights = [sum(w.shape[0] for w in col) + word_gap * max(0, len(col) - 1) for col in words]
    height = max(col_heights, default=0) + 2 * margin
    width = 2 * margin + column_pitch * max(0, len(columns) - 1) + GLYPH_WIDTH * 2
    page = np.full((height, width), 255, dtype=np.uint8)
    planted = []
    for c, col in enumerate(words):
        cx = margin + GLYPH_WIDTH + c * column_pitch
        y = margin
        for r, img in enumerate(col):
            h, w = img.shape
            x = cx - w // 2
            region = page[y:y + h, x:x + w]
            np.minimum(region, img, out=region)
            bx, by, bw, bh = ink_box(img)
            planted.append({"column": c, "order": r, "roman": columns[c][r],
                            "box": (x + bx, y + by, bw, bh)})
            y += h + word_gap
    return page, planted
