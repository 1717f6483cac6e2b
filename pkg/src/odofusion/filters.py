"""Real-time estimators: recursive asymptotic filter and windowed filters.

The recursive filter blends the dead-reckoned prediction with each GPS fix
using fixed weights ``(w1, w2)`` that minimize the steady-state variance.
Unrolled, it is a geometric weighting of the backward single-fix estimators;
cutting that sum to ``N`` fixes gives the truncated filter, and replacing
the geometric weights by the exact minimum-variance weights for the window
gives the optimal filter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .covariance import WindowSpec, build_sigma_minus, spd_solve
from .errors import ConfigurationError
from .estimates import (
    EstimateSeries,
    WindowEstimate,
    WindowPlan,
    available_backward,
    backward_fix_epochs,
    require_fix,
    window_series,
)
from .model import NoiseSpec, SensorTrace

_EMPTY = np.zeros(0)
_EMPTY.setflags(write=False)


@dataclass(frozen=True)
class AsymptoticWeights:
    """Prediction weight ``w1`` and GPS weight ``w2 = 1 - w1``."""

    w1: float
    w2: float

    @classmethod
    def from_w1(cls, w1: float) -> "AsymptoticWeights":
        if not 0.0 <= w1 <= 1.0:
            raise ConfigurationError(f"w1 must lie in [0, 1], got {w1!r}")
        return cls(float(w1), 1.0 - float(w1))


def optimal_asymptotic_weights(r: float, lam: int) -> AsymptoticWeights:
    """Weights minimizing the steady-state variance of the recursive filter.

    ``w1 = (lam r + 2 - sqrt(lam r (lam r + 4))) / 2``.
    """
    if r < 0 or lam < 1:
        raise ConfigurationError(f"need r >= 0 and lam >= 1, got r={r!r}, lam={lam!r}")
    lr = lam * r
    root = math.sqrt(lr * (lr + 4.0))
    # w2 from its own closed form avoids cancellation in 1 - w1 for small lam*r.
    w2 = (root - lr) / 2.0
    w1 = (lr + 2.0 - root) / 2.0
    return AsymptoticWeights(w1, w2)


def asymptotic_objective(w1, r: float, lam: int, var_od: float):
    """Steady-state variance of the recursive filter as a function of ``w1``.

    ``phi(w) = var_od (lam w^2 + (1 - w)^2 / r) / (1 - w^2)``, convex on [0, 1).
    """
    w1 = np.asarray(w1, dtype=float)
    return var_od * (lam * w1 ** 2 + (1.0 - w1) ** 2 / r) / (1.0 - w1 ** 2)


def asymptotic_variance(w: AsymptoticWeights, lam: int, noise: NoiseSpec) -> float:
    """Limit of the recursive filter variance as ``t -> infinity``.

    Written as ``(lam w1^2 s_od^2 + w2^2 s_gps^2) / (1 - w1^2)``, which equals
    ``s_od^2 (lam w1^2 + w2^2 / r) / (1 - w1^2)`` and stays finite at r = 0.
    """
    num = lam * w.w1 ** 2 * noise.var_od + w.w2 ** 2 * noise.var_gps
    den = 1.0 - w.w1 ** 2
    if den <= 0.0:
        return 0.0 if num == 0.0 else math.inf
    return num / den


def gps_epoch_variances(w: AsymptoticWeights, lam: int, noise: NoiseSpec, count: int, v0=None):
    """Recursive filter variance at GPS epochs ``j = 0..count``.

    Iterates ``v_j = w1^2 v_{j-1} + w1^2 lam s_od^2 + w2^2 s_gps^2`` from
    ``v_0`` (the t0 fix variance by default).
    """
    v = np.empty(count + 1)
    v[0] = noise.var_gps if v0 is None else v0
    a = w.w1 ** 2
    c = a * lam * noise.var_od + w.w2 ** 2 * noise.var_gps
    for j in range(1, count + 1):
        v[j] = a * v[j - 1] + c
    return v


def filter_recursive(trace: SensorTrace, w: AsymptoticWeights, noise: NoiseSpec = None) -> EstimateSeries:
    """Run the fixed-weight recursive filter over every epoch of ``trace``.

    Starts from the t0 fix when present, otherwise from ``y_od(t0)``. A
    missing fix later on leaves the dead-reckoned prediction unchanged.
    Analytic variances are returned when ``noise`` is given.
    """
    lam, m = trace.lam, trace.m
    od, gps = trace.odometer, trace.gps
    if od.size == 0:
        raise ConfigurationError("empty trace")
    est = np.empty(trace.n + 1)
    var = np.empty(trace.n + 1)
    if trace.has_t0_fix:
        x, v = float(gps[0]), (noise.var_gps if noise is not None else 0.0)
    else:
        x, v = float(od[0]), 0.0
    est[0], var[0] = x, v
    q = noise.var_od if noise is not None else 0.0
    steps = np.arange(1, lam + 1)
    w1, w2 = w.w1, w.w2
    for j in range(1, m + 1):
        lo, hi = (j - 1) * lam, j * lam
        est[lo + 1 : hi + 1] = x + (od[lo + 1 : hi + 1] - od[lo])
        var[lo + 1 : hi + 1] = v + q * steps
        if np.isfinite(gps[j]):
            est[hi] = w1 * est[hi] + w2 * gps[j]
            if noise is not None:
                var[hi] = w1 ** 2 * var[hi] + w2 ** 2 * noise.var_gps
        x, v = est[hi], var[hi]
    return EstimateSeries(
        "rt_recursive",
        np.arange(trace.n + 1),
        est,
        var if noise is not None else None,
        metadata={"w1": w1, "w2": w2, "t0_fix": trace.has_t0_fix},
    )


@dataclass(frozen=True)
class WindowWeights:
    """Weights of the backward single-fix estimators, nearest fix first."""

    kind: str
    values: np.ndarray

    def __len__(self):
        return len(self.values)


def truncated_weights(N: int, w: AsymptoticWeights) -> WindowWeights:
    """Geometric weights ``w2 w1^(j-1)`` for ``j < N`` and ``w1^(N-1)`` for ``j = N``."""
    if N < 1:
        raise ConfigurationError(f"N must be >= 1, got {N}")
    values = w.w2 * w.w1 ** np.arange(N, dtype=float)
    values[-1] = w.w1 ** (N - 1)
    values.setflags(write=False)
    return WindowWeights("truncated", values)


def variance_truncated(N: int, d: int, lam: int, noise: NoiseSpec) -> float:
    """Closed-form variance of the truncated filter with N fixes at phase d."""
    r = noise.ratio
    w1 = optimal_asymptotic_weights(r, lam).w1
    return noise.var_gps * (_sum_sq_truncated(w1, N) + r * (d + lam * _geometric_tail(w1, N)))


def variance_truncated_forward(N: int, d: int, lam: int, noise: NoiseSpec) -> float:
    """Variance of the geometric combination of the N forward estimators.

    Same weights as the backward side; the nearest forward fix sits
    ``lam - d`` odometer steps away.
    """
    r = noise.ratio
    w1 = optimal_asymptotic_weights(r, lam).w1
    return noise.var_gps * (
        _sum_sq_truncated(w1, N) + r * (lam * (1.0 + _geometric_tail(w1, N)) - d)
    )


def _sum_sq_truncated(w1, N):
    # sum of squared truncated weights
    if w1 >= 1.0:
        return 1.0
    return ((1.0 - w1) ** 2 + 2.0 * w1 ** (2 * N - 1) * (1.0 - w1)) / (1.0 - w1 ** 2)


def _geometric_tail(w1, N):
    # sum_{k=2..N} w1^(2(k-1))
    if w1 >= 1.0:
        return float(N - 1)
    return (w1 ** 2 - w1 ** (2 * N)) / (1.0 - w1 ** 2)


def optimal_window_weights(sigma_minus) -> tuple[WindowWeights, float]:
    """Minimum-variance weights summing to one for covariance ``sigma_minus``.

    Solves ``sigma_minus v = 1`` with Cholesky, ``c = sum(v)`` and returns
    ``(v / c, c)``; the resulting variance is ``1 / c``.
    """
    v = spd_solve(sigma_minus, np.ones(len(sigma_minus)))
    c = float(v.sum())
    values = v / c
    values.setflags(write=False)
    return WindowWeights("optimal", values), c


@lru_cache(maxsize=4096)
def _truncated_cached(n_eff: int, d: int, lam: int, noise: NoiseSpec):
    w = optimal_asymptotic_weights(noise.ratio, lam)
    return truncated_weights(n_eff, w).values, variance_truncated(n_eff, d, lam, noise)


@lru_cache(maxsize=4096)
def _optimal_cached(n_eff: int, d: int, lam: int, noise: NoiseSpec):
    weights, c = optimal_window_weights(build_sigma_minus(WindowSpec(n_eff, d, lam, noise)))
    return weights.values, 1.0 / c


def rt_optimal_variance(N: int, d: int, lam: int, noise: NoiseSpec) -> float:
    """``1 / c_rt`` for a full window of N fixes at phase d."""
    return _optimal_cached(N, d, lam, noise)[1]


def _filter_plan(cached, i: int, N: int, lam: int, noise: NoiseSpec, has_t0: bool) -> WindowPlan:
    if N < 1:
        raise ConfigurationError(f"N must be >= 1, got {N}")
    n_eff = min(N, available_backward(i, lam, has_t0))
    require_fix(n_eff, 0, i)
    values, variance = cached(n_eff, i % lam, lam, noise)
    return WindowPlan(i, backward_fix_epochs(i, lam, n_eff), values, _EMPTY, _EMPTY, variance)


def truncated_plan(i: int, N: int, lam: int, noise: NoiseSpec, has_t0_fix: bool = True) -> WindowPlan:
    """Weights of the truncated filter at epoch ``i`` (window clamped to the data)."""
    return _filter_plan(_truncated_cached, i, N, lam, noise, has_t0_fix)


def optimal_plan(i: int, N: int, lam: int, noise: NoiseSpec, has_t0_fix: bool = True) -> WindowPlan:
    """Weights of the optimal filter at epoch ``i`` (window clamped to the data)."""
    return _filter_plan(_optimal_cached, i, N, lam, noise, has_t0_fix)


def filter_truncated(trace: SensorTrace, i: int, N: int, noise: NoiseSpec) -> WindowEstimate:
    """Truncated geometric-weight filter over the N latest fixes at or before ``i``.

    Fewer than N available fixes clamp the window; the effective size is in
    ``n_backward``.

    Raises:
        NoAbsoluteFixError: no GPS fix at or before epoch ``i``.
    """
    return truncated_plan(i, N, trace.lam, noise, trace.has_t0_fix).apply(trace)


def filter_optimal(trace: SensorTrace, i: int, N: int, noise: NoiseSpec) -> WindowEstimate:
    """Minimum-variance unbiased filter over the N latest fixes at or before ``i``."""
    return optimal_plan(i, N, trace.lam, noise, trace.has_t0_fix).apply(trace)


def truncated_series(trace: SensorTrace, N: int, noise: NoiseSpec, epochs=None) -> EstimateSeries:
    return window_series(
        "rt_truncated", trace, epochs, lambda tr, i: filter_truncated(tr, i, N, noise), N
    )


def optimal_series(trace: SensorTrace, N: int, noise: NoiseSpec, epochs=None) -> EstimateSeries:
    return window_series(
        "rt_optimal", trace, epochs, lambda tr, i: filter_optimal(tr, i, N, noise), N
    )
