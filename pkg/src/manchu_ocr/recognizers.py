"""Recognizer contract, output parsing, transports and the template baseline.

Every recognizer answers in the two-line format::

    Manchu:<manchu script>
    Roman:<romanization>

External recognizers receive a PNG per request, either as a length-prefixed
frame on a long-lived process's stdin (4-byte big-endian length, then the
bytes) or as the body of an HTTP POST.  Transport failures never raise out
of :func:`recognize`; they come back as failed predictions.
"""
from __future__ import annotations

import json
import queue
import re
import struct
import subprocess
import sys
import threading
import time
import unicodedata
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np
from PIL import Image

from . import imaging
from .errors import ConfigError, EmptySource, RecognizerTimeout, TransportError
from .records import Prediction, read_manifest
from .script import TransliterationTable, default_table, roman_to_manchu
from .synth import GenSpec, GlyphAtlas, Lexicon, compose_word

MANCHU_MARKER = "Manchu:"
ROMAN_MARKER = "Roman:"
KINDS = ("baseline", "subprocess", "http")
DEFAULT_FEATURE_DIMS = (16, 120)  # width, height


# -- output format -------------------------------------------------------------

class ParsedOutput(NamedTuple):
    manchu: str
    roman: str
    malformed: bool


def format_output(manchu: str, roman: str) -> str:
    return f"{MANCHU_MARKER}{manchu}\n{ROMAN_MARKER}{roman}"


def _channel_after(text: str, marker: str, stop: str | None) -> str | None:
    pos = text.find(marker)
    if pos < 0:
        return None
    rest = text[pos + len(marker):]
    rest = re.split(r"\r\n|\r|\n", rest, maxsplit=1)[0]
    if stop is not None and stop in rest:
        rest = rest[:rest.index(stop)]
    return rest.strip().strip("*`").strip()


def parse_output(text: str) -> ParsedOutput:
    """Pull both channels out of a recognizer reply.

    A missing marker yields an empty channel and sets ``malformed``; it is
    a scored failure, never an exception.
    """
    text = text or ""
    manchu = _channel_after(text, MANCHU_MARKER, ROMAN_MARKER)
    roman = _channel_after(text, ROMAN_MARKER, MANCHU_MARKER)
    malformed = manchu is None or roman is None
    roman = unicodedata.normalize("NFC", roman or "")
    return ParsedOutput(manchu or "", roman, malformed)


# -- descriptors -----------------------------------------------------------------

@dataclass(frozen=True)
class RecognizerDescriptor:
    id: str
    kind: str
    command: tuple[str, ...] = ()
    endpoint: str = ""
    timeout_seconds: float = 30.0
    reentrant: bool = False
    options: dict = field(default_factory=dict, hash=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"recognizer {self.id!r}: unknown kind {self.kind!r}")
        if self.timeout_seconds <= 0:
            raise ConfigError(f"recognizer {self.id!r}: timeoutSeconds must be > 0")
        if self.kind == "subprocess" and not self.command:
            raise ConfigError(f"recognizer {self.id!r}: subprocess kind needs a command")
        if self.kind == "http" and not self.endpoint:
            raise ConfigError(f"recognizer {self.id!r}: http kind needs an endpoint")

    @classmethod
    def from_dict(cls, d: dict) -> "RecognizerDescriptor":
        d = dict(d)
        try:
            rid, kind = d.pop("id"), d.pop("kind")
        except KeyError as exc:
            raise ConfigError(f"recognizer entry missing {exc.args[0]!r}") from None
        command = d.pop("command", ())
        if isinstance(command, str):
            command = (command,)
        return cls(
            id=rid,
            kind=kind,
            command=tuple(command),
            endpoint=d.pop("endpoint", ""),
            timeout_seconds=float(d.pop("timeoutSeconds", 30.0)),
            reentrant=bool(d.pop("reentrant", kind == "baseline")),
            options=d,
        )


# -- template baseline ---------------------------------------------------------

@dataclass
class TemplateIndex:
    labels: list[str]
    fonts: list[str]
    vectors: np.ndarray  # (n, width*height) bool
    feature_dims: tuple[int, int] = DEFAULT_FEATURE_DIMS
    source_atlas_id: str = ""

    def __len__(self):
        return len(self.labels)

    def save(self, path: str | Path) -> None:
        np.savez_compressed(
            path, vectors=np.packbits(self.vectors, axis=1),
            meta=np.array(json.dumps({
                "labels": self.labels, "fonts": self.fonts,
                "featureDims": list(self.feature_dims), "source": self.source_atlas_id,
                "bits": int(self.vectors.shape[1]),
            }, ensure_ascii=False)))

    @classmethod
    def load(cls, path: str | Path) -> "TemplateIndex":
        with np.load(path) as data:
            meta = json.loads(str(data["meta"]))
            vectors = np.unpackbits(data["vectors"], axis=1)[:, :meta["bits"]].astype(bool)
        return cls(meta["labels"], meta["fonts"], vectors, tuple(meta["featureDims"]), meta["source"])


def extract_features(img, dims: tuple[int, int] = DEFAULT_FEATURE_DIMS) -> np.ndarray:
    """Box-downsample a preprocessed (dark-on-light) image and mark ink bits."""
    small = Image.fromarray(imaging.as_raster(img)).resize(dims, Image.Resampling.BOX)
    return (np.asarray(small) < 128).ravel()


def build_template_index(entries: Iterable[tuple[str, str, np.ndarray]],
                         dims: tuple[int, int] = DEFAULT_FEATURE_DIMS,
                         source: str = "") -> TemplateIndex:
    """Index from (label, font, preprocessed image) triples, one per (label, font)."""
    labels, fonts, vectors, seen = [], [], [], set()
    for label, font, img in entries:
        if (label, font) in seen:
            continue
        seen.add((label, font))
        labels.append(label)
        fonts.append(font)
        vectors.append(extract_features(img, dims))
    if not labels:
        raise EmptySource("no labelled images to index")
    return TemplateIndex(labels, fonts, np.vstack(vectors), tuple(dims), source)


def render_clean(word: str, atlas: GlyphAtlas, spec: GenSpec | None = None,
                 table: TransliterationTable | None = None) -> np.ndarray:
    """A noise-free dataset-style (light-on-dark) rendering of one word."""
    spec = spec or GenSpec()
    ink = compose_word(word, atlas, spec.overlap, table)
    return np.pad(imaging.invert(ink), spec.margin, constant_values=0)


def index_from_atlases(lexicon: Lexicon, atlases: list[GlyphAtlas],
                       cfg: imaging.PreprocessConfig | None = None,
                       dims: tuple[int, int] = DEFAULT_FEATURE_DIMS,
                       spec: GenSpec | None = None,
                       table: TransliterationTable | None = None) -> TemplateIndex:
    cfg = cfg or imaging.PreprocessConfig()
    entries = ((w, a.font_id, imaging.preprocess(render_clean(w, a, spec, table), cfg))
               for a in atlases for w in lexicon.words)
    return build_template_index(entries, dims, ",".join(a.font_id for a in atlases))


def index_from_manifest(manifest_path: str | Path, cfg: imaging.PreprocessConfig | None = None,
                        dims: tuple[int, int] = DEFAULT_FEATURE_DIMS) -> TemplateIndex:
    cfg = cfg or imaging.PreprocessConfig()
    root = Path(manifest_path).parent
    samples = sorted(read_manifest(manifest_path), key=lambda s: s.id)
    entries = ((s.roman, s.font_id, imaging.preprocess(imaging.read_png(root / s.image_path), cfg))
               for s in samples)
    return build_template_index(entries, dims, f"manifest:{Path(manifest_path).name}")


def baseline_classify(index: TemplateIndex, img) -> tuple[str, int]:
    """Nearest template by Hamming distance; ties go to the smaller label."""
    query = extract_features(img, index.feature_dims)
    dist = np.count_nonzero(index.vectors != query, axis=1)
    best = min(range(len(index)), key=lambda i: (int(dist[i]), index.labels[i], index.fonts[i]))
    return index.labels[best], int(dist[best])


# -- recognizers -----------------------------------------------------------------

def failed_prediction(sample_id: str, kind: str, message: str, latency: float) -> Prediction:
    return Prediction(sample_id, "", "", latency, raw=f"ERROR {kind}: {message}",
                      malformed=True, error=kind)


class Recognizer:
    """Base class: ``predict`` turns one preprocessed image into a Prediction."""

    id = "recognizer"
    reentrant = False

    def predict(self, sample_id: str, img) -> Prediction:
        raise NotImplementedError

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class BaselineRecognizer(Recognizer):
    reentrant = True

    def __init__(self, index: TemplateIndex, table: TransliterationTable | None = None,
                 recognizer_id: str = "baseline"):
        self.index = index
        self.table = table or default_table()
        self.id = recognizer_id

    def answer(self, img) -> str:
        label, _ = baseline_classify(self.index, img)
        return format_output(roman_to_manchu(label, self.table), label)

    def predict(self, sample_id: str, img) -> Prediction:
        start = time.perf_counter()
        raw = self.answer(img)
        latency = time.perf_counter() - start
        parsed = parse_output(raw)
        return Prediction(sample_id, parsed.manchu, parsed.roman, latency, raw, parsed.malformed)


class SubprocessRecognizer(Recognizer):
    """Keeps one worker process warm; restarts it after a timeout or crash."""

    def __init__(self, descriptor: RecognizerDescriptor):
        self.descriptor = descriptor
        self.id = descriptor.id
        self.reentrant = False
        self._proc = None
        self._lines = None
        self._lock = threading.Lock()

    def _start(self):
        self._proc = subprocess.Popen(
            list(self.descriptor.command), stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL)
        self._lines = queue.Queue()
        threading.Thread(target=self._pump, args=(self._proc, self._lines), daemon=True).start()

    @staticmethod
    def _pump(proc, lines):
        for line in iter(proc.stdout.readline, b""):
            lines.put(line)
        lines.put(None)

    def _kill(self):
        if self._proc is not None:
            self._proc.kill()
            self._proc.wait()
            for stream in (self._proc.stdin, self._proc.stdout):
                try:
                    stream.close()
                except OSError:
                    pass
        self._proc = None

    def request(self, png: bytes) -> str:
        if self._proc is None or self._proc.poll() is not None:
            self._kill()
            self._start()
        try:
            self._proc.stdin.write(struct.pack(">I", len(png)) + png)
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            self._kill()
            raise TransportError(f"worker stdin closed: {exc}") from None
        deadline = time.monotonic() + self.descriptor.timeout_seconds
        got = []
        while len(got) < 2:
            remaining = deadline - time.monotonic()
            try:
                line = self._lines.get(timeout=max(remaining, 0.0))
            except queue.Empty:
                self._kill()
                raise RecognizerTimeout(f"no answer within {self.descriptor.timeout_seconds}s") from None
            if line is None:
                self._kill()
                raise TransportError("worker exited")
            got.append(line.decode("utf-8", errors="replace"))
        return "".join(got)

    def predict(self, sample_id: str, img) -> Prediction:
        png = imaging.png_bytes(img)
        with self._lock:
            start = time.perf_counter()
            try:
                raw = self.request(png)
            except RecognizerTimeout as exc:
                return failed_prediction(sample_id, "Timeout", str(exc), time.perf_counter() - start)
            except TransportError as exc:
                return failed_prediction(sample_id, "TransportError", str(exc), time.perf_counter() - start)
            latency = time.perf_counter() - start
        parsed = parse_output(raw)
        return Prediction(sample_id, parsed.manchu, parsed.roman, latency, raw, parsed.malformed)

    def close(self):
        if self._proc is not None and self._proc.poll() is None:
            try:
                self._proc.stdin.close()
                self._proc.wait(timeout=2)
            except (OSError, subprocess.TimeoutExpired):
                pass
        self._kill()


class HttpRecognizer(Recognizer):
    def __init__(self, descriptor: RecognizerDescriptor):
        self.descriptor = descriptor
        self.id = descriptor.id
        self.reentrant = descriptor.reentrant

    def request(self, png: bytes) -> str:
        req = urllib.request.Request(
            self.descriptor.endpoint, data=png, method="POST",
            headers={"Content-Type": "image/png", "Accept": "text/plain"})
        try:
            with urllib.request.urlopen(req, timeout=self.descriptor.timeout_seconds) as resp:
                if resp.status != 200:
                    raise TransportError(f"HTTP {resp.status}")
                return resp.read().decode("utf-8", errors="replace")
        except urllib.error.HTTPError as exc:
            raise TransportError(f"HTTP {exc.code}") from None
        except urllib.error.URLError as exc:
            if isinstance(exc.reason, TimeoutError):
                raise RecognizerTimeout(str(exc.reason)) from None
            raise TransportError(str(exc.reason)) from None
        except TimeoutError as exc:
            raise RecognizerTimeout(str(exc) or "read timed out") from None
        except (ConnectionError, OSError) as exc:
            raise TransportError(str(exc)) from None

    def predict(self, sample_id: str, img) -> Prediction:
        png = imaging.png_bytes(img)
        start = time.perf_counter()
        try:
            raw = self.request(png)
        except RecognizerTimeout as exc:
            return failed_prediction(sample_id, "Timeout", str(exc), time.perf_counter() - start)
        except TransportError as exc:
            return failed_prediction(sample_id, "TransportError", str(exc), time.perf_counter() - start)
        latency = time.perf_counter() - start
        parsed = parse_output(raw)
        return Prediction(sample_id, parsed.manchu, parsed.roman, latency, raw, parsed.malformed)


def recognize(recognizer: Recognizer, img, sample_id: str = "") -> Prediction:
    return recognizer.predict(sample_id, img)


# -- worker side of the stdio protocol ---------------------------------------

def serve_stdio(answer, stdin=None, stdout=None) -> None:
    """Answer length-prefixed PNG frames until EOF.

    ``answer`` maps a decoded raster to reply text; replies are forced onto
    exactly two lines.
    """
    stdin = stdin or sys.stdin.buffer
    stdout = stdout or sys.stdout.buffer
    while True:
        header = stdin.read(4)
        if len(header) < 4:
            return
        (size,) = struct.unpack(">I", header)
        data = stdin.read(size)
        if len(data) < size:
            return
        parsed = parse_output(answer(imaging.decode_png(data)))
        stdout.write((format_output(parsed.manchu, parsed.roman) + "\n").encode("utf-8"))
        stdout.flush()

