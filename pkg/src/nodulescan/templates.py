"""Template library generation: per-trace particle fitting and averaging.

For every trace a population of random particles is scored by sliding
RMSE, the best one is refined by a fixed number of perturb-and-keep-if-
better steps, and the per-size fits are averaged parameter by parameter.
Rendering the averaged parameters gives one template per nodule size; the
no-nodule template is the all-zero matrix.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, EmptyFitSet, MissingClass, ShapeMismatch
from .matching import best_alignment
from .particles import (
    OPEN_INTERVAL_EPS,
    SIGMA_ITE_FLOAT,
    SIGMA_ITE_INT,
    ParameterBounds,
    ParticleParams,
    render_particle,
    sample_initial_params,
)
from .preprocess import FeatureMatrix, PreprocessConfig

NODULE_CLASSES = (1, 2, 3, 4, 5)
ALL_CLASSES = (0, 1, 2, 3, 4, 5)


@dataclass(frozen=True)
class FitConfig:
    """Sizing of the fit: population, refinement sweeps, traces per class.

    One iteration sweeps every free parameter once, so its cost is one
    render-and-align per free scalar (15 for the default 4-sensor model).
    """

    n_particles: int = 2000
    n_iterations: int = 2000
    traces_per_class: int = 20
    master_seed: int = 0

    def validate(self) -> None:
        if self.n_particles < 1:
            raise ConfigError("n_particles must be at least 1")
        if self.n_iterations < 0:
            raise ConfigError("n_iterations must be non-negative")
        if self.traces_per_class < 1:
            raise ConfigError("traces_per_class must be at least 1")

    def to_json_dict(self) -> dict:
        return {
            "n_particles": self.n_particles,
            "n_iterations": self.n_iterations,
            "traces_per_class": self.traces_per_class,
            "master_seed": self.master_seed,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "FitConfig":
        return cls(
            n_particles=int(d["n_particles"]),
            n_iterations=int(d["n_iterations"]),
            traces_per_class=int(d["traces_per_class"]),
            master_seed=int(d["master_seed"]),
        )


@dataclass(frozen=True)
class FitResult:
    """Outcome of fitting one trace.

    accepted_rmse[m] is the score of the kept parameter set after m
    refinement steps; it is non-increasing by construction since a step is
    kept only when it strictly lowers the score.
    """

    params: ParticleParams
    rmse: float
    initial_rmse: float
    accepted_rmse: np.ndarray


def _as_matrix(feature) -> np.ndarray:
    if isinstance(feature, FeatureMatrix):
        return feature.values
    return np.asarray(feature, dtype=float)


def _free_coordinates(bounds: ParameterBounds, n_sensors: int):
    """The refinement schedule: every free scalar with its noise and range.

    Vertical centers are structural and the first-row anchor is fixed, so
    neither appears here. Order matches the sampling order.
    """
    coords = []
    for i in range(n_sensors):
        coords.append(("amplitudes", i, SIGMA_ITE_FLOAT, OPEN_INTERVAL_EPS, bounds.amp_max, False))
    for i in range(n_sensors - 1):
        coords.append(("delta_mu", i, SIGMA_ITE_INT, bounds.delta_mu_min, bounds.delta_mu_max, True))
    for i in range(n_sensors):
        coords.append(("sigma_ver", i, SIGMA_ITE_FLOAT, OPEN_INTERVAL_EPS, bounds.sigma_ver_max, False))
    for i in range(n_sensors):
        coords.append(("sigma_hor", i, SIGMA_ITE_INT, bounds.sigma_hor_min, bounds.sigma_hor_max, True))
    return coords


def _with_value(params: ParticleParams, field: str, index: int, value) -> ParticleParams:
    values = list(getattr(params, field))
    values[index] = value
    return dataclasses.replace(params, **{field: tuple(values)})


def fit_trace(
    feature,
    cfg: FitConfig,
    rng: np.random.Generator,
    bounds: ParameterBounds = ParameterBounds(),
) -> FitResult:
    """Fit one particle to one feature matrix.

    Draws n_particles candidates and keeps the one with the lowest sliding
    RMSE (smallest index wins ties). Each refinement iteration then sweeps
    the free parameters one at a time: the parameter is redrawn around its
    current value with its own noise scale, clamped into range, and the
    move is kept only when the score strictly decreases. Per-parameter
    acceptance is what lets small-amplitude lobes converge; a whole-set
    redraw stalls at a noise floor far above the useful precision because
    every accepted move must win jointly across all fifteen scalars.
    """
    cfg.validate()
    values = _as_matrix(feature)
    n_sensors, n_columns = values.shape
    bounds.validate(n_sensors, n_columns)

    best_params = None
    best_rmse = np.inf
    for _ in range(cfg.n_particles):
        candidate = sample_initial_params(rng, bounds, n_sensors)
        rendered = render_particle(candidate, n_sensors, n_columns)
        rmse = best_alignment(values, rendered).rmse_min
        if rmse < best_rmse:
            best_params, best_rmse = candidate, rmse

    coords = _free_coordinates(bounds, n_sensors)
    history = [best_rmse]
    current, current_rmse = best_params, best_rmse
    for step in range(cfg.n_iterations):
        for field, index, sigma, lo, hi, is_int in coords:
            proposal = rng.normal(getattr(current, field)[index], sigma)
            if is_int:
                proposal = int(np.clip(np.rint(proposal), lo, hi))
            else:
                proposal = float(np.clip(proposal, lo, hi))
            candidate = _with_value(current, field, index, proposal)
            rendered = render_particle(candidate, n_sensors, n_columns)
            rmse = best_alignment(values, rendered).rmse_min
            if rmse < current_rmse:
                current = dataclasses.replace(candidate, iteration=step + 1)
                current_rmse = rmse
        history.append(current_rmse)

    final = dataclasses.replace(current, iteration=cfg.n_iterations)
    return FitResult(
        params=final,
        rmse=float(current_rmse),
        initial_rmse=float(best_rmse),
        accepted_rmse=np.asarray(history),
    )


def _mean_within_envelope(values) -> float:
    """Arithmetic mean clipped to [min, max] of the inputs.

    The true mean always lies inside that envelope; clipping only absorbs
    the last-ulp float error, so identical inputs average to themselves
    exactly and parameter ranges are closed under averaging.
    """
    return float(np.clip(np.mean(values), np.min(values), np.max(values)))


def _mean_rounded(values) -> int:
    return int(np.clip(np.rint(np.mean(values)), np.min(values), np.max(values)))


def average_params(fits: Sequence[ParticleParams]) -> ParticleParams:
    """Arithmetic mean of each scalar parameter over a set of fits.

    Integer-valued parameters are rounded to the nearest integer after
    averaging; peak columns follow from the shared anchor and the averaged
    increments. All fits must agree on the sensor count and the anchor.
    """
    if len(fits) == 0:
        raise EmptyFitSet("cannot average an empty set of fits")
    first = fits[0]
    for p in fits[1:]:
        if p.n_sensors != first.n_sensors:
            raise ShapeMismatch("fits disagree on the sensor count")
        if p.u != first.u:
            raise ShapeMismatch("fits disagree on the first-row anchor")
    amps = tuple(
        _mean_within_envelope([p.amplitudes[s] for p in fits]) for s in range(first.n_sensors)
    )
    sig_v = tuple(
        _mean_within_envelope([p.sigma_ver[s] for p in fits]) for s in range(first.n_sensors)
    )
    sig_h = tuple(
        _mean_rounded([p.sigma_hor[s] for p in fits]) for s in range(first.n_sensors)
    )
    deltas = tuple(
        _mean_rounded([p.delta_mu[s] for p in fits]) for s in range(first.n_sensors - 1)
    )
    return ParticleParams(
        u=first.u,
        delta_mu=deltas,
        amplitudes=amps,
        sigma_ver=sig_v,
        sigma_hor=sig_h,
        iteration=0,
    )


@dataclass
class TemplateLibrary:
    """Rendered templates for sizes 0..5 plus the parameters behind them.

    templates[0] is the all-zero matrix; templates[b] for b >= 1 is the
    render of fitted_params[b]. provenance carries seeds and per-trace fit
    scores so a library is reproducible from its file alone.
    """

    templates: dict[int, np.ndarray]
    fitted_params: dict[int, ParticleParams]
    fit_config: FitConfig
    bounds: ParameterBounds = ParameterBounds()
    preprocess_config: PreprocessConfig | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.templates = {int(b): np.asarray(t, dtype=float) for b, t in self.templates.items()}
        if sorted(self.templates) != list(ALL_CLASSES):
            raise MissingClass(f"library must cover sizes {list(ALL_CLASSES)}")
        shapes = {t.shape for t in self.templates.values()}
        if len(shapes) != 1:
            raise ShapeMismatch(f"templates disagree on shape: {shapes}")
        if np.any(self.templates[0] != 0):
            raise ShapeMismatch("the no-nodule template must be exactly zero")

    @property
    def n_sensors(self) -> int:
        return self.templates[0].shape[0]

    @property
    def n_columns(self) -> int:
        return self.templates[0].shape[1]

    def to_json_dict(self) -> dict:
        return {
            "S": self.n_sensors,
            "L": self.n_columns,
            "templates": {
                str(b): [[float(x) for x in row] for row in t]
                for b, t in sorted(self.templates.items())
            },
            "fitted_params": {
                str(b): p.to_json_dict() for b, p in sorted(self.fitted_params.items())
            },
            "fit_config": self.fit_config.to_json_dict(),
            "bounds": self.bounds.to_json_dict(),
            "preprocess": None
            if self.preprocess_config is None
            else self.preprocess_config.to_json_dict(),
            "provenance": self.provenance,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "TemplateLibrary":
        return cls(
            templates={int(b): np.asarray(t, dtype=float) for b, t in d["templates"].items()},
            fitted_params={
                int(b): ParticleParams.from_json_dict(p) for b, p in d["fitted_params"].items()
            },
            fit_config=FitConfig.from_json_dict(d["fit_config"]),
            bounds=ParameterBounds.from_json_dict(d["bounds"]),
            preprocess_config=None
            if d.get("preprocess") is None
            else PreprocessConfig.from_json_dict(d["preprocess"]),
            provenance=d.get("provenance", {}),
        )


def trace_rng(master_seed: int, size_class: int, trace_index: int) -> np.random.Generator:
    """Independent, schedule-free random stream for one (class, trace) fit."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(size_class, trace_index))
    return np.random.Generator(np.random.PCG64(ss))


def _fit_one(payload) -> FitResult:
    values, cfg, bounds, size_class, trace_index = payload
    rng = trace_rng(cfg.master_seed, size_class, trace_index)
    return fit_trace(values, cfg, rng, bounds)


def build_library(
    dataset: Mapping[int, Sequence],
    cfg: FitConfig,
    bounds: ParameterBounds = ParameterBounds(),
    preprocess_config: PreprocessConfig | None = None,
    workers: int = 1,
) -> TemplateLibrary:
    """Fit every trace, average per size, render the six templates.

    dataset maps nodule size (1..5) to that size's feature matrices. Each
    trace gets its own seed stream derived from (master_seed, size, index),
    so the result is identical no matter how the fits are scheduled;
    workers > 1 spreads the per-trace fits over processes.
    """
    cfg.validate()
    for b in NODULE_CLASSES:
        if b not in dataset or len(dataset[b]) == 0:
            raise MissingClass(f"no traces for nodule size {b}")

    jobs = []
    for b in NODULE_CLASSES:
        for q, feature in enumerate(dataset[b]):
            jobs.append((_as_matrix(feature), cfg, bounds, b, q))
    shapes = {j[0].shape for j in jobs}
    if len(shapes) != 1:
        raise ShapeMismatch(f"dataset matrices disagree on shape: {shapes}")
    n_sensors, n_columns = jobs[0][0].shape

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_fit_one, jobs, chunksize=1))
    else:
        results = [_fit_one(j) for j in jobs]

    by_class: dict[int, list[FitResult]] = {b: [] for b in NODULE_CLASSES}
    for (_, _, _, b, _), res in zip(jobs, results):
        by_class[b].append(res)

    templates: dict[int, np.ndarray] = {0: np.zeros((n_sensors, n_columns))}
    fitted: dict[int, ParticleParams] = {}
    per_trace = []
    for b in NODULE_CLASSES:
        averaged = average_params([r.params for r in by_class[b]])
        averaged.validate(bounds, n_columns)
        fitted[b] = averaged
        templates[b] = render_particle(averaged, n_sensors, n_columns)
        for q, res in enumerate(by_class[b]):
            per_trace.append(
                {
                    "b": b,
                    "q": q,
                    "initial_rmse": res.initial_rmse,
                    "final_rmse": res.rmse,
                }
            )

    provenance = {
        "master_seed": cfg.master_seed,
        "seed_scheme": "per-trace PCG64 stream spawned from (master_seed, b, q)",
        "per_trace": per_trace,
    }
    return TemplateLibrary(
        templates=templates,
        fitted_params=fitted,
        fit_config=cfg,
        bounds=bounds,
        preprocess_config=preprocess_config,
        provenance=provenance,
    )
