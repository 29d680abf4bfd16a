"""Sliding-RMSE comparison between two equally shaped sensor matrices.

The data matrix is framed between two all-zero blocks of its own size, and
the probe matrix slides across that frame one column at a time. Offset tau
(1-based, tau in 1..2L) places the probe's first column on frame column
tau; tau = L + 1 overlays the probe exactly on the data block. Every offset
is scored by the root-mean-square difference over the whole S x 3L frame,
so the score is comparable across offsets and across probes.

Production code never materializes the 3L x 3L shift operator; the profile
is computed with index arithmetic (per-row cross-correlations) that is
numerically equal to the explicit shifted-matrix evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch

# Residuals at or below this fraction of the combined input energy are
# recomputed with the direct slice formula: the fast path loses about
# 1e-16 * scale to cancellation, which matters exactly when the true
# residual is zero (perfect overlap).
_CANCELLATION_RTOL = 1e-10


@dataclass(frozen=True)
class AlignmentResult:
    """Best sliding offset for one (data, probe) pair.

    rmse_min is the smallest profile value and tau_star the smallest
    1-based offset attaining it. profile, when kept, has 2L entries with
    profile[i] belonging to tau = i + 1.
    """

    rmse_min: float
    tau_star: int
    profile: np.ndarray | None = None


def _check_pair(data, probe) -> tuple[np.ndarray, np.ndarray]:
    f = np.ascontiguousarray(data, dtype=float)
    p = np.ascontiguousarray(probe, dtype=float)
    if f.ndim != 2 or p.ndim != 2:
        raise ShapeMismatch("both matrices must be 2-D")
    if f.shape != p.shape:
        raise ShapeMismatch(f"shape mismatch: {f.shape} vs {p.shape}")
    return f, p


def _residual_sq_at(f: np.ndarray, p: np.ndarray, shift: int) -> float:
    """Exact squared residual with the probe block starting at frame column `shift`.

    Frame columns are 0-based: the data block occupies [L, 2L), the shifted
    probe block [shift, shift + L). Columns where only one matrix has
    support contribute its squared entries; the overlap contributes squared
    differences. Summing differences directly keeps a perfect overlap at
    exactly zero.
    """
    n_cols = f.shape[1]
    lo = max(n_cols, shift)
    hi = min(2 * n_cols, shift + n_cols)
    if lo >= hi:
        return float(np.sum(f * f) + np.sum(p * p))
    diff = f[:, lo - n_cols : hi - n_cols] - p[:, lo - shift : hi - shift]
    total = float(np.sum(diff * diff))
    total += float(np.sum(f[:, : lo - n_cols] ** 2))
    total += float(np.sum(f[:, hi - n_cols :] ** 2))
    total += float(np.sum(p[:, : lo - shift] ** 2))
    total += float(np.sum(p[:, hi - shift :] ** 2))
    return total


def sliding_rmse_profile(data, probe) -> np.ndarray:
    """RMSE at every sliding offset; entry i belongs to tau = i + 1.

    Expanding the squared residual gives ||data||^2 + ||probe||^2 minus
    twice the overlap product, and the overlap products for all offsets are
    exactly the per-row full cross-correlations, so one pass of
    np.correlate per row covers the whole profile.
    """
    f, p = _check_pair(data, probe)
    n_sensors, n_cols = f.shape
    f_sq = float(np.sum(f * f))
    p_sq = float(np.sum(p * p))

    # Offset tau = d + 1 puts the probe block at frame columns [d, d + L):
    # no overlap at d = 0, then cross[d] = corr[d - 1] for d >= 1.
    cross = np.zeros(2 * n_cols)
    corr = np.zeros(2 * n_cols - 1)
    for i in range(n_sensors):
        corr += np.correlate(f[i], p[i], mode="full")
    cross[1:] = corr

    residual_sq = f_sq + p_sq - 2.0 * cross
    scale = f_sq + p_sq
    if scale > 0.0:
        for d in np.flatnonzero(residual_sq <= _CANCELLATION_RTOL * scale):
            residual_sq[d] = _residual_sq_at(f, p, int(d))
    np.maximum(residual_sq, 0.0, out=residual_sq)
    return np.sqrt(residual_sq / (n_sensors * 3 * n_cols))


def best_alignment(data, probe, keep_profile: bool = False) -> AlignmentResult:
    """Minimum sliding RMSE and the smallest offset attaining it."""
    profile = sliding_rmse_profile(data, probe)
    idx = int(np.argmin(profile))
    return AlignmentResult(
        rmse_min=float(profile[idx]),
        tau_star=idx + 1,
        profile=profile if keep_profile else None,
    )
