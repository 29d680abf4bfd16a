"""Shared test oracles and fixtures.

The oracles here are deliberately naive re-statements of the contracts:
the sliding comparison is evaluated by materializing the full shift
operator and multiplying it out, and the envelope by explicit per-sample
loops. Production code must agree with them, not the other way round.
"""

import numpy as np
import pytest


def oracle_profile(data: np.ndarray, probe: np.ndarray) -> np.ndarray:
    """Sliding RMSE via the materialized 3L x 3L one-step shift operator."""
    S, L = data.shape
    n = 3 * L
    shift = np.zeros((n, n))
    for i in range(n - 1):
        shift[i, i + 1] = 1.0
    framed = np.hstack([np.zeros((S, L)), data, np.zeros((S, L))])
    padded = np.hstack([probe, np.zeros((S, 2 * L))])
    out = np.zeros(2 * L)
    current = padded.copy()
    for tau in range(1, 2 * L + 1):
        out[tau - 1] = np.linalg.norm(framed - current, "fro") / np.sqrt(S * n)
        current = current @ shift
    return out


def oracle_divisor(k: int, n_samples: int, window: int) -> int:
    """Piecewise envelope divisor for 1-based position k.

    Ramps with the available sample count near both boundaries (the tail
    mirrors the head) and stays at `window` in the interior.
    """
    half = window // 2
    if k < half:
        return k + half
    if k <= n_samples - half:
        return window
    return (n_samples - k + 1) + half


def oracle_envelope(x: np.ndarray, window: int) -> np.ndarray:
    """RMS envelope evaluated sample by sample with explicit loops."""
    n = x.size
    half = window // 2
    out = np.zeros(n)
    for k in range(1, n + 1):
        lo = max(1, k - half)
        hi = min(n, k + half)
        total = 0.0
        for j in range(lo, hi + 1):
            total += x[j - 1] ** 2
        out[k - 1] = np.sqrt(total / oracle_divisor(k, n, window))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
