"""Raw multi-channel traces to fixed-size feature matrices.

Each sensor channel is z-scored, converted to a running RMS envelope, and
the channels are stacked into one matrix that is gated at a fixed threshold
and zero-extended to a library-wide width. The result is the unit every
downstream comparison operates on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    DegenerateSignal,
    ShapeMismatch,
    TraceTooLong,
    WindowTooLarge,
)

DEFAULT_WINDOW = 84
DEFAULT_THRESHOLD = 1.0
DEFAULT_COLUMNS = 1000
DEFAULT_SENSORS = 4

# A channel whose sample standard deviation falls at or below this relative
# tolerance is treated as constant (a stuck sensor) rather than normalized.
DEGENERATE_RTOL = 1e-12


@dataclass(frozen=True)
class PreprocessConfig:
    """Knobs of the trace-to-matrix pipeline, serialized with every output."""

    window: int = DEFAULT_WINDOW
    threshold: float = DEFAULT_THRESHOLD
    n_columns: int = DEFAULT_COLUMNS
    n_sensors: int = DEFAULT_SENSORS

    def validate(self) -> None:
        if self.window <= 0 or self.window % 2 != 0:
            raise ConfigError(f"window must be a positive even integer, got {self.window}")
        if self.threshold < 0:
            raise ConfigError(f"threshold must be non-negative, got {self.threshold}")
        if self.n_columns <= 0:
            raise ConfigError(f"n_columns must be positive, got {self.n_columns}")
        if self.n_sensors < 1:
            raise ConfigError(f"n_sensors must be at least 1, got {self.n_sensors}")

    def to_json_dict(self) -> dict:
        return {
            "W": self.window,
            "c": self.threshold,
            "L": self.n_columns,
            "S": self.n_sensors,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "PreprocessConfig":
        return cls(
            window=int(d["W"]),
            threshold=float(d["c"]),
            n_columns=int(d["L"]),
            n_sensors=int(d["S"]),
        )


@dataclass
class TraceSet:
    """One recorded pass: S equal-length voltage channels plus metadata.

    label is the ground-truth nodule size in millimetres (0 = none) when
    known, None otherwise.
    """

    channels: np.ndarray
    sample_rate_hz: float
    label: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.channels = np.asarray(self.channels, dtype=float)
        if self.channels.ndim != 2:
            raise ShapeMismatch(
                f"channels must be a 2-D (sensors x samples) array, got ndim={self.channels.ndim}"
            )
        if self.channels.shape[1] < 2:
            raise ShapeMismatch("each channel needs at least 2 samples")
        if not self.sample_rate_hz > 0:
            raise ConfigError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        if self.label is not None and self.label not in range(6):
            raise ConfigError(f"label must be in 0..5 or None, got {self.label}")

    @property
    def n_sensors(self) -> int:
        return self.channels.shape[0]

    @property
    def n_samples(self) -> int:
        return self.channels.shape[1]


@dataclass
class FeatureMatrix:
    """Gated envelope matrix of shape (S, L); columns past original_length are zero."""

    values: np.ndarray
    original_length: int
    window: int
    relu_threshold: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ShapeMismatch(f"values must be 2-D, got ndim={self.values.ndim}")
        if not (0 <= self.original_length <= self.values.shape[1]):
            raise ShapeMismatch(
                f"original_length {self.original_length} outside 0..{self.values.shape[1]}"
            )
        if np.any(self.values < 0):
            raise ShapeMismatch("feature matrix entries must be non-negative")
        if np.any(self.values[:, self.original_length:] != 0):
            raise ShapeMismatch("columns past original_length must be exactly zero")

    @property
    def n_sensors(self) -> int:
        return self.values.shape[0]

    @property
    def n_columns(self) -> int:
        return self.values.shape[1]

    def to_json_dict(self) -> dict:
        return {
            "S": self.n_sensors,
            "L": self.n_columns,
            "K": self.original_length,
            "W": self.window,
            "c": self.relu_threshold,
            "rows": [[float(x) for x in row] for row in self.values],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "FeatureMatrix":
        values = np.asarray(d["rows"], dtype=float)
        if values.shape != (int(d["S"]), int(d["L"])):
            raise ShapeMismatch("rows do not match the declared S x L shape")
        return cls(
            values=values,
            original_length=int(d["K"]),
            window=int(d["W"]),
            relu_threshold=float(d["c"]),
        )


def normalize(v) -> np.ndarray:
    """Z-score one channel to zero mean and unit sample standard deviation.

    Centering runs twice: sensors sit on large DC offsets, and the rounding
    residual of a single mean subtraction, amplified by 1/sigma, can exceed
    the promised 1e-9 on the output mean. Raises DegenerateSignal for a
    (near-)constant channel, which indicates a sensor fault rather than a
    usable reading.
    """
    x = np.asarray(v, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ShapeMismatch("normalize expects a 1-D vector of at least 2 samples")
    mu = float(x.mean())
    centered = x - mu
    centered -= centered.mean()
    sigma = float(centered.std(ddof=1))
    if sigma <= DEGENERATE_RTOL * max(1.0, abs(mu)):
        raise DegenerateSignal(f"channel is constant (sigma={sigma:.3e})")
    return centered / sigma


def window_divisors(n_samples: int, window: int) -> np.ndarray:
    """Position-dependent envelope divisor for every sample index.

    Interior positions divide by `window` even though the inclusive window
    holds window + 1 samples; positions near either boundary divide by the
    number of samples actually inside the truncated window, so the divisor
    ramps from window/2 + 1 at both ends up to `window`.
    """
    half = window // 2
    k = np.arange(1, n_samples + 1)
    available = np.minimum(n_samples, k + half) - np.maximum(1, k - half) + 1
    return np.minimum(window, available)


def rms_envelope(v_hat, window: int = DEFAULT_WINDOW) -> np.ndarray:
    """Running RMS of a normalized channel over a centered window.

    The window at position k spans [k - window/2, k + window/2] clipped to
    the signal, and the mean square uses the divisor from window_divisors.
    For a stationary signal the envelope sits near 1, so gating at 1 keeps
    only locally elevated power.
    """
    x = np.asarray(v_hat, dtype=float)
    if x.ndim != 1:
        raise ShapeMismatch("rms_envelope expects a 1-D vector")
    if window <= 0 or window % 2 != 0:
        raise ConfigError(f"window must be a positive even integer, got {window}")
    n = x.size
    if window >= n:
        raise WindowTooLarge(f"window {window} must be smaller than the signal length {n}")
    half = window // 2
    csum = np.concatenate(([0.0], np.cumsum(x * x)))
    k = np.arange(1, n + 1)
    hi = np.minimum(n, k + half)
    lo = np.maximum(1, k - half)
    window_sums = csum[hi] - csum[lo - 1]
    return np.sqrt(np.maximum(window_sums, 0.0) / window_divisors(n, window))


def assemble_and_gate(envelopes, threshold: float = DEFAULT_THRESHOLD) -> np.ndarray:
    """Stack per-sensor envelopes into one matrix and gate at `threshold`.

    Every entry becomes max(value - threshold, 0), suppressing the
    stationary background and keeping only above-threshold excursions.
    """
    if threshold < 0:
        raise ConfigError(f"threshold must be non-negative, got {threshold}")
    rows = [np.asarray(e, dtype=float) for e in envelopes]
    if not rows:
        raise ShapeMismatch("need at least one envelope")
    length = rows[0].size
    if any(r.ndim != 1 or r.size != length for r in rows):
        raise ShapeMismatch("all envelopes must be 1-D and share one length")
    return np.maximum(np.vstack(rows) - threshold, 0.0)


def extend_matrix(
    matrix,
    n_columns: int = DEFAULT_COLUMNS,
    *,
    window: int = DEFAULT_WINDOW,
    relu_threshold: float = DEFAULT_THRESHOLD,
) -> FeatureMatrix:
    """Zero-pad a gated matrix on the right to exactly n_columns columns.

    Refuses to truncate: a trace longer than n_columns means the acquisition
    was misconfigured.
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2:
        raise ShapeMismatch("extend_matrix expects a 2-D matrix")
    n_present = m.shape[1]
    if n_present > n_columns:
        raise TraceTooLong(f"trace has {n_present} columns, limit is {n_columns}")
    padded = np.zeros((m.shape[0], n_columns), dtype=float)
    padded[:, :n_present] = m
    return FeatureMatrix(
        values=padded,
        original_length=n_present,
        window=window,
        relu_threshold=relu_threshold,
    )


def preprocess(trace: TraceSet, cfg: PreprocessConfig = PreprocessConfig()) -> FeatureMatrix:
    """Full chain: normalize, envelope, stack + gate, zero-extend."""
    cfg.validate()
    if trace.n_sensors != cfg.n_sensors:
        raise ShapeMismatch(
            f"trace has {trace.n_sensors} channels, config expects {cfg.n_sensors}"
        )
    envelopes = [rms_envelope(normalize(ch), cfg.window) for ch in trace.channels]
    gated = assemble_and_gate(envelopes, cfg.threshold)
    return extend_matrix(
        gated,
        cfg.n_columns,
        window=cfg.window,
        relu_threshold=cfg.threshold,
    )
