"""Word extraction from scanned pages of vertical script.

binarize -> denoise -> connected components -> column clustering on
x-centroids -> vertical merging into words.  Reading order is columns left
to right, words top to bottom.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import imaging
from .errors import ConfigError, EmptyPage, NotBinary

_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class Component:
    box: tuple[int, int, int, int]  # x, y, w, h
    area: int
    centroid: tuple[float, float]  # x, y

    @property
    def x1(self):
        return self.box[0] + self.box[2]

    @property
    def y1(self):
        return self.box[1] + self.box[3]


@dataclass
class WordBox:
    box: tuple[int, int, int, int]
    column_index: int
    order_in_column: int
    members: list[Component] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "box": list(self.box),
            "column": self.column_index,
            "order": self.order_in_column,
            "components": [list(c.box) for c in self.members],
        }


@dataclass(frozen=True)
class SegmentConfig:
    min_component_area: int = 20
    column_gap_factor: float = 1.5
    word_gap_factor: float = 1.0
    padding: int = 4
    columns_left_to_right: bool = True

    def __post_init__(self):
        if self.min_component_area < 1:
            raise ConfigError("minComponentArea must be >= 1")
        if self.column_gap_factor <= 0 or self.word_gap_factor <= 0:
            raise ConfigError("gap factors must be > 0")
        if self.padding < 0:
            raise ConfigError("padding must be >= 0")

    @classmethod
    def from_dict(cls, d: dict | None) -> "SegmentConfig":
        names = {
            "minComponentArea": "min_component_area",
            "columnGapFactor": "column_gap_factor",
            "wordGapFactor": "word_gap_factor",
            "padding": "padding",
            "columnsLeftToRight": "columns_left_to_right",
        }
        d = d or {}
        unknown = set(d) - set(names)
        if unknown:
            raise ConfigError(f"unknown segment keys: {sorted(unknown)}")
        return cls(**{names[k]: v for k, v in d.items()})


def union_box(boxes) -> tuple[int, int, int, int]:
    boxes = list(boxes)
    x0 = min(b[0] for b in boxes)
    y0 = min(b[1] for b in boxes)
    x1 = max(b[0] + b[2] for b in boxes)
    y1 = max(b[1] + b[3] for b in boxes)
    return (x0, y0, x1 - x0, y1 - y0)


def find_components(binary, min_area: int = 1) -> list[Component]:
    """8-connected components of the dark (0) class, sorted by (x, y)."""
    binary = imaging.as_raster(binary)
    if not np.isin(binary, (0, 255)).all():
        raise NotBinary("expected pixel values in {0, 255}")
    labels, count = ndimage.label(binary == 0, structure=_EIGHT)
    if count == 0:
        return []
    index = np.arange(1, count + 1)
    areas = ndimage.sum_labels(np.ones_like(labels), labels, index)
    centroids = ndimage.center_of_mass(labels > 0, labels, index)
    slices = ndimage.find_objects(labels)
    out = []
    for area, (cy, cx), sl in zip(areas, centroids, slices):
        if area < min_area:
            continue
        ys, xs = sl
        box = (xs.start, ys.start, xs.stop - xs.start, ys.stop - ys.start)
        out.append(Component(box, int(area), (float(cx), float(cy))))
    out.sort(key=lambda c: (c.box[0], c.box[1]))
    return out


def cluster_columns(components: list[Component], cfg: SegmentConfig | None = None) -> list[list[Component]]:
    """Split components into columns at large gaps between sorted x-centroids."""
    cfg = cfg or SegmentConfig()
    if not components:
        return []
    ordered = sorted(components, key=lambda c: (c.centroid[0], c.centroid[1], c.box))
    limit = cfg.column_gap_factor * float(np.median([c.box[2] for c in components]))
    columns = [[ordered[0]]]
    for prev, cur in zip(ordered, ordered[1:]):
        if cur.centroid[0] - prev.centroid[0] > limit:
            columns.append([])
        columns[-1].append(cur)
    if not cfg.columns_left_to_right:
        columns.reverse()
    return columns


def merge_words(column: list[Component], cfg: SegmentConfig | None = None,
                column_index: int = 0, median_height: float | None = None) -> list[WordBox]:
    """Merge vertically adjacent components of one column into words.

    A component joins the current word while its top edge lies within
    ``word_gap_factor * median component height`` of the word's bottom edge.
    """
    cfg = cfg or SegmentConfig()
    if not column:
        return []
    if median_height is None:
        median_height = float(np.median([c.box[3] for c in column]))
    limit = cfg.word_gap_factor * median_height
    ordered = sorted(column, key=lambda c: (c.box[1], c.box[0]))
    groups = [[ordered[0]]]
    bottom = ordered[0].y1
    for comp in ordered[1:]:
        if comp.box[1] - bottom > limit:
            groups.append([])
        groups[-1].append(comp)
        bottom = max(bottom, comp.y1) if len(groups[-1]) > 1 else comp.y1
    return [WordBox(union_box(c.box for c in g), column_index, i, g)
            for i, g in enumerate(groups)]


def layout_page(page, cfg: SegmentConfig | None = None, denoise_window: int = 3) -> tuple[np.ndarray, list[WordBox]]:
    """Polarity-normalized page and its words in reading order."""
    cfg = cfg or SegmentConfig()
    page = imaging.as_raster(page)
    if page.mean() < 128:
        page = imaging.invert(page)
    binary = imaging.otsu_binarize(page)
    if denoise_window > 1 and denoise_window <= min(binary.shape):
        binary = imaging.median_denoise(binary, denoise_window)
    components = find_components(binary, cfg.min_component_area)
    if not components:
        raise EmptyPage("no ink components survived filtering")
    median_height = float(np.median([c.box[3] for c in components]))
    words = []
    for ci, column in enumerate(cluster_columns(components, cfg)):
        words.extend(merge_words(column, cfg, ci, median_height))
    return page, words


def padded_box(box, padding: int, shape) -> tuple[int, int, int, int]:
    x, y, w, h = box
    x0, y0 = max(0, x - padding), max(0, y - padding)
    x1, y1 = min(shape[1], x + w + padding), min(shape[0], y + h + padding)
    return (x0, y0, x1 - x0, y1 - y0)


def segment_page(page, cfg: SegmentConfig | None = None,
                 preprocess_cfg: imaging.PreprocessConfig | None = None
                 ) -> tuple[list[np.ndarray], list[WordBox]]:
    """Word crops in reading order, each normalized like a dataset image.

    Crops come from the polarity-normalized grayscale page (dark ink), so
    the preprocessing pass runs with ``invert`` off.
    """
    cfg = cfg or SegmentConfig()
    base = preprocess_cfg or imaging.PreprocessConfig()
    prep_cfg = imaging.PreprocessConfig(
        base.target_width, base.target_height, base.median_window,
        base.contrast_low_pct, base.contrast_high_pct, invert=False)
    normalized, words = layout_page(page, cfg)
    crops = []
    for word in words:
        x, y, w, h = padded_box(word.box, cfg.padding, normalized.shape)
        crops.append(imaging.preprocess(normalized[y:y + h, x:x + w], prep_cfg))
    return crops, words
