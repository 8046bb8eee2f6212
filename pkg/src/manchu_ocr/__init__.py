"""Manchu word OCR toolkit: transliteration, metrics, synthetic data,
page segmentation, recognizer adapters and error analysis."""

from .metrics import MetricsReport, cer, char_f1, levenshtein
from .records import Prediction, Sample
from .script import default_table, manchu_to_roman, roman_to_manchu

__version__ = "0.1.0"

__all__ = [
    "MetricsReport", "Prediction", "Sample", "cer", "char_f1", "default_table",
    "levenshtein", "manchu_to_roman", "roman_to_manchu",
]
