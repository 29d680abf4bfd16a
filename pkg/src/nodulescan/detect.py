"""Classify a preprocessed trace against the template library.

Every template is slid across the feature matrix; the size whose template
reaches the lowest RMSE wins, with ties going to the smaller size so an
exactly zero input is always called nodule-free.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch
from .matching import best_alignment
from .preprocess import FeatureMatrix
from .templates import TemplateLibrary


@dataclass(frozen=True)
class DetectionResult:
    """Predicted size plus the full per-template score table."""

    predicted_b: int
    scores: dict[int, float]
    alignments: dict[int, int]
    presence: bool

    def to_json_dict(self) -> dict:
        return {
            "predicted_b": self.predicted_b,
            "presence": self.presence,
            "scores": {str(b): v for b, v in sorted(self.scores.items())},
            "alignments": {str(b): v for b, v in sorted(self.alignments.items())},
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "DetectionResult":
        return cls(
            predicted_b=int(d["predicted_b"]),
            scores={int(b): float(v) for b, v in d["scores"].items()},
            alignments={int(b): int(v) for b, v in d["alignments"].items()},
            presence=bool(d["presence"]),
        )


def _as_matrix(feature) -> np.ndarray:
    if isinstance(feature, FeatureMatrix):
        return feature.values
    return np.asarray(feature, dtype=float)


def classify(feature, library: TemplateLibrary) -> DetectionResult:
    """Score the trace against all six templates and pick the argmin size."""
    values = _as_matrix(feature)
    if values.shape != (library.n_sensors, library.n_columns):
        raise ShapeMismatch(
            f"feature matrix is {values.shape}, library templates are "
            f"({library.n_sensors}, {library.n_columns})"
        )
    scores: dict[int, float] = {}
    alignments: dict[int, int] = {}
    for b in sorted(library.templates):
        result = best_alignment(values, library.templates[b])
        scores[b] = result.rmse_min
        alignments[b] = result.tau_star

    predicted = 0
    best = scores[0]
    for b in sorted(scores):
        if scores[b] < best:
            predicted, best = b, scores[b]
    return DetectionResult(
        predicted_b=predicted,
        scores=scores,
        alignments=alignments,
        presence=predicted >= 1,
    )


def detect_presence(feature, library: TemplateLibrary) -> bool:
    """True when the best-matching template is any nodule size >= 1."""
    return classify(feature, library).presence


def score_margin(result: DetectionResult) -> float:
    """Gap between the best and second-best template scores (diagnostic only)."""
    ordered = sorted(result.scores.values())
    if len(ordered) < 2:
        return 0.0
    return float(ordered[1] - ordered[0])
