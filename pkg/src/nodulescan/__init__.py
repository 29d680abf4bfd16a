"""Tactile nodule detection from multi-channel peristalsis traces.

The pipeline turns raw sensor traces into gated envelope matrices, fits
per-size templates with a particle population plus stochastic refinement,
and classifies new traces by minimum sliding RMSE against the template
library. A seeded synthetic generator stands in for the physical rig so
every stage is testable end to end.
"""

from .detect import DetectionResult, classify, detect_presence, score_margin
from .errors import (
    ConfigError,
    DataError,
    DatasetError,
    DegenerateSignal,
    EmptyFitSet,
    EmptyResults,
    MissingClass,
    MissingInput,
    PipelineError,
    ShapeMismatch,
    TraceTooLong,
    UndefinedMetric,
    WindowTooLarge,
)
from .evaluate import (
    EvalReport,
    build_report,
    precision_recall,
    render_report_plots,
    size_accuracy,
    write_report_csv,
)
from .matching import AlignmentResult, best_alignment, sliding_rmse_profile
from .particles import (
    GaussianComponent,
    ParameterBounds,
    ParticleParams,
    perturb_params,
    render_particle,
    sample_initial_params,
)
from .preprocess import (
    FeatureMatrix,
    PreprocessConfig,
    TraceSet,
    assemble_and_gate,
    extend_matrix,
    normalize,
    preprocess,
    rms_envelope,
    window_divisors,
)
from .synth import PhantomConfig, generate_batch, generate_trace_set, trace_seed
from .templates import (
    FitConfig,
    FitResult,
    TemplateLibrary,
    average_params,
    build_library,
    fit_trace,
    trace_rng,
)

__version__ = "0.1.0"

__all__ = [
    "AlignmentResult",
    "ConfigError",
    "DataError",
    "DatasetError",
    "DegenerateSignal",
    "DetectionResult",
    "EmptyFitSet",
    "EmptyResults",
    "EvalReport",
    "FeatureMatrix",
    "FitConfig",
    "FitResult",
    "GaussianComponent",
    "MissingClass",
    "MissingInput",
    "ParameterBounds",
    "ParticleParams",
    "PhantomConfig",
    "PipelineError",
    "PreprocessConfig",
    "ShapeMismatch",
    "TemplateLibrary",
    "TraceSet",
    "TraceTooLong",
    "UndefinedMetric",
    "WindowTooLarge",
    "assemble_and_gate",
    "average_params",
    "best_alignment",
    "build_library",
    "build_report",
    "classify",
    "detect_presence",
    "extend_matrix",
    "fit_trace",
    "generate_batch",
    "generate_trace_set",
    "normalize",
    "perturb_params",
    "precision_recall",
    "preprocess",
    "render_particle",
    "render_report_plots",
    "rms_envelope",
    "sample_initial_params",
    "score_margin",
    "size_accuracy",
    "sliding_rmse_profile",
    "trace_rng",
    "trace_seed",
    "window_divisors",
    "write_report_csv",
]
