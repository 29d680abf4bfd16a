"""Candidate surfaces: stacks of diagonally arranged Gaussian lobes.

A particle hypothesizes the matrix signature a nodule leaves across S
sensors: one unnormalized Gaussian lobe per sensor row, with the lobe
centers marching rightward from a fixed first-row anchor by per-step
column increments. Rendering composes lobes with a pointwise max, never a
sum, so the peak of each lobe stays equal to its amplitude.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeMismatch

# Clamp floor for parameters whose legal range is open at zero.
OPEN_INTERVAL_EPS = 1e-9

# Spread of the per-iteration redraw: continuous parameters move with
# sigma 0.1, integer-valued parameters with sigma 1 (then rounded).
SIGMA_ITE_FLOAT = 0.1
SIGMA_ITE_INT = 1.0


@dataclass(frozen=True)
class ParameterBounds:
    """Legal ranges for every particle parameter.

    Amplitudes live in (0, amp_max], vertical sigmas in (0, sigma_ver_max],
    horizontal sigmas and column increments are integers in closed ranges.
    The first-row peak column u is a fixed anchor, never sampled or
    perturbed.
    """

    amp_max: float = 1.5
    sigma_ver_max: float = 1.0
    sigma_hor_min: int = 1
    sigma_hor_max: int = 60
    delta_mu_min: int = 100
    delta_mu_max: int = 250
    u: int = 150

    def validate(self, n_sensors: int, n_columns: int) -> None:
        if self.amp_max <= 0 or self.sigma_ver_max <= 0:
            raise ConfigError("amp_max and sigma_ver_max must be positive")
        if not (1 <= self.sigma_hor_min <= self.sigma_hor_max):
            raise ConfigError("need 1 <= sigma_hor_min <= sigma_hor_max")
        if not (1 <= self.delta_mu_min <= self.delta_mu_max):
            raise ConfigError("need 1 <= delta_mu_min <= delta_mu_max")
        if self.u < 1:
            raise ConfigError("u must be a positive column index")
        reach = self.u + (n_sensors - 1) * self.delta_mu_max
        if reach > n_columns:
            raise ConfigError(
                f"last peak column can reach {reach}, beyond the {n_columns}-column matrix"
            )

    def to_json_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_json_dict(cls, d: dict) -> "ParameterBounds":
        return cls(**d)


@dataclass(frozen=True)
class GaussianComponent:
    """One lobe: peak amplitude at (mu_ver, mu_hor), axis-aligned spreads."""

    amplitude: float
    mu_ver: int
    mu_hor: int
    sigma_ver: float
    sigma_hor: int


@dataclass(frozen=True)
class ParticleParams:
    """Scalar parameters of one particle.

    delta_mu[s] is the column increment from row s+1's peak to row s+2's
    peak (length S - 1); amplitudes, sigma_ver and sigma_hor have one entry
    per sensor row. iteration counts refinement steps applied so far.
    """

    u: int
    delta_mu: tuple[int, ...]
    amplitudes: tuple[float, ...]
    sigma_ver: tuple[float, ...]
    sigma_hor: tuple[int, ...]
    iteration: int = 0

    @property
    def n_sensors(self) -> int:
        return len(self.amplitudes)

    @property
    def mu_hor(self) -> tuple[int, ...]:
        cols = [self.u]
        for step in self.delta_mu:
            cols.append(cols[-1] + step)
        return tuple(cols)

    @property
    def components(self) -> tuple[GaussianComponent, ...]:
        cols = self.mu_hor
        return tuple(
            GaussianComponent(
                amplitude=self.amplitudes[s],
                mu_ver=s + 1,
                mu_hor=cols[s],
                sigma_ver=self.sigma_ver[s],
                sigma_hor=self.sigma_hor[s],
            )
            for s in range(self.n_sensors)
        )

    def validate(self, bounds: ParameterBounds, n_columns: int | None = None) -> None:
        s = self.n_sensors
        if len(self.delta_mu) != s - 1 or len(self.sigma_ver) != s or len(self.sigma_hor) != s:
            raise ShapeMismatch("parameter tuple lengths disagree on the sensor count")
        if self.u != bounds.u:
            raise ConfigError(f"first-row anchor {self.u} differs from bounds anchor {bounds.u}")
        if self.iteration < 0:
            raise ConfigError("iteration must be non-negative")
        for a in self.amplitudes:
            if not (0 < a <= bounds.amp_max):
                raise ConfigError(f"amplitude {a} outside (0, {bounds.amp_max}]")
        for sv in self.sigma_ver:
            if not (0 < sv <= bounds.sigma_ver_max):
                raise ConfigError(f"sigma_ver {sv} outside (0, {bounds.sigma_ver_max}]")
        for sh in self.sigma_hor:
            if not (bounds.sigma_hor_min <= sh <= bounds.sigma_hor_max):
                raise ConfigError(
                    f"sigma_hor {sh} outside [{bounds.sigma_hor_min}, {bounds.sigma_hor_max}]"
                )
        for d in self.delta_mu:
            if not (bounds.delta_mu_min <= d <= bounds.delta_mu_max):
                raise ConfigError(
                    f"delta_mu {d} outside [{bounds.delta_mu_min}, {bounds.delta_mu_max}]"
                )
        if n_columns is not None and self.mu_hor[-1] > n_columns:
            raise ConfigError(
                f"last peak column {self.mu_hor[-1]} beyond the {n_columns}-column matrix"
            )

    def to_json_dict(self) -> dict:
        return {
            "u": self.u,
            "delta_mu": list(self.delta_mu),
            "amplitudes": list(self.amplitudes),
            "sigma_ver": list(self.sigma_ver),
            "sigma_hor": list(self.sigma_hor),
            "mu_hor": list(self.mu_hor),
            "iteration": self.iteration,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ParticleParams":
        return cls(
            u=int(d["u"]),
            delta_mu=tuple(int(x) for x in d["delta_mu"]),
            amplitudes=tuple(float(x) for x in d["amplitudes"]),
            sigma_ver=tuple(float(x) for x in d["sigma_ver"]),
            sigma_hor=tuple(int(x) for x in d["sigma_hor"]),
            iteration=int(d.get("iteration", 0)),
        )


def sample_initial_params(
    rng: np.random.Generator,
    bounds: ParameterBounds = ParameterBounds(),
    n_sensors: int = 4,
) -> ParticleParams:
    """Draw a fresh particle uniformly inside the legal ranges.

    Continuous parameters with a half-open range (0, hi] are drawn as
    hi * (1 - U[0, 1)) so zero is excluded; integer parameters are uniform
    over their closed set. Draw order is fixed (amplitudes, column steps,
    vertical sigmas, horizontal sigmas) so a seeded generator reproduces
    the same particle.
    """
    amps = bounds.amp_max * (1.0 - rng.random(n_sensors))
    deltas = rng.integers(bounds.delta_mu_min, bounds.delta_mu_max, endpoint=True, size=n_sensors - 1)
    sig_v = bounds.sigma_ver_max * (1.0 - rng.random(n_sensors))
    sig_h = rng.integers(bounds.sigma_hor_min, bounds.sigma_hor_max, endpoint=True, size=n_sensors)
    return ParticleParams(
        u=bounds.u,
        delta_mu=tuple(int(d) for d in deltas),
        amplitudes=tuple(float(a) for a in amps),
        sigma_ver=tuple(float(s) for s in sig_v),
        sigma_hor=tuple(int(s) for s in sig_h),
        iteration=0,
    )


def render_particle(
    params: ParticleParams,
    n_sensors: int | None = None,
    n_columns: int = 1000,
) -> np.ndarray:
    """Evaluate a particle on the (S, L) grid; rows and columns are 1-based.

    Entry (i, j) is the pointwise maximum over the per-sensor lobes
    amplitude * exp(-((i - mu_ver)^2 / (2 sigma_ver^2)
                      + (j - mu_hor)^2 / (2 sigma_hor^2))).
    The kernel is deliberately unnormalized: its peak equals the amplitude,
    matching the scale of gated envelope data.
    """
    s_count = params.n_sensors
    if n_sensors is not None and n_sensors != s_count:
        raise ShapeMismatch(f"particle has {s_count} rows, requested {n_sensors}")
    rows = np.arange(1, s_count + 1, dtype=float)
    cols = np.arange(1, n_columns + 1, dtype=float)
    out = np.zeros((s_count, n_columns))
    for comp in params.components:
        row_w = np.exp(-0.5 * ((rows - comp.mu_ver) / comp.sigma_ver) ** 2)
        col_w = np.exp(-0.5 * ((cols - comp.mu_hor) / comp.sigma_hor) ** 2)
        np.maximum(out, comp.amplitude * row_w[:, None] * col_w[None, :], out=out)
    return out


def perturb_params(
    params: ParticleParams,
    rng: np.random.Generator,
    bounds: ParameterBounds = ParameterBounds(),
) -> ParticleParams:
    """Redraw every free parameter around its current value and clamp.

    Vertical centers are structurally pinned to the sensor index and the
    first-row anchor u is never touched. Continuous parameters move by
    Normal(value, 0.1^2), integer parameters by Normal(value, 1^2) rounded
    to the nearest integer; everything is clamped back into its legal
    range. All parameters move in one step and the caller accepts or
    rejects the whole set. The iteration counter advances by one.
    """
    amps = tuple(
        float(np.clip(rng.normal(a, SIGMA_ITE_FLOAT), OPEN_INTERVAL_EPS, bounds.amp_max))
        for a in params.amplitudes
    )
    deltas = tuple(
        int(np.clip(np.rint(rng.normal(d, SIGMA_ITE_INT)), bounds.delta_mu_min, bounds.delta_mu_max))
        for d in params.delta_mu
    )
    sig_v = tuple(
        float(np.clip(rng.normal(s, SIGMA_ITE_FLOAT), OPEN_INTERVAL_EPS, bounds.sigma_ver_max))
        for s in params.sigma_ver
    )
    sig_h = tuple(
        int(np.clip(np.rint(rng.normal(s, SIGMA_ITE_INT)), bounds.sigma_hor_min, bounds.sigma_hor_max))
        for s in params.sigma_hor
    )
    return ParticleParams(
        u=params.u,
        delta_mu=deltas,
        amplitudes=amps,
        sigma_ver=sig_v,
        sigma_hor=sig_h,
        iteration=params.iteration + 1,
    )
