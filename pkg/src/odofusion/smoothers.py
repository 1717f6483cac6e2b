"""Post-processing moving fixed-interval smoothers.

A smoother at epoch ``i`` combines up to N backward single-fix estimators
(fixes at or before ``i``) with up to N forward ones (fixes after ``i``).
The two groups share no odometer increment, so their joint covariance is
block diagonal. Near the ends of a trace each side is clamped to the fixes
that exist; at the last GPS epoch the smoother reduces to the filter.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .covariance import WindowSpec, build_sigma_minus, build_sigma_plus, build_sigma_pp, spd_solve
from .errors import ConfigurationError
from .estimates import (
    EstimateSeries,
    WindowEstimate,
    WindowPlan,
    available_backward,
    available_forward,
    backward_estimates,
    backward_fix_epochs,
    forward_estimates,
    forward_fix_epochs,
    require_fix,
    window_series,
)
from .filters import (
    optimal_asymptotic_weights,
    truncated_weights,
    variance_truncated,
    variance_truncated_forward,
)
from .model import NoiseSpec, SensorTrace

_EMPTY = np.zeros(0)
_EMPTY.setflags(write=False)


@dataclass(frozen=True)
class SmootherWindow:
    """Backward and forward single-fix estimates around one epoch."""

    epoch: int
    backward_epochs: np.ndarray
    backward: np.ndarray
    forward_epochs: np.ndarray
    forward: np.ndarray

    @property
    def n_backward(self) -> int:
        return len(self.backward)

    @property
    def n_forward(self) -> int:
        return len(self.forward)


def backward_forward_estimates(trace: SensorTrace, i: int, N: int) -> SmootherWindow:
    """Single-fix estimates from up to N fixes on each side of epoch ``i``.

    Raises:
        NoAbsoluteFixError: neither side has a fix.
    """
    if N < 1:
        raise ConfigurationError(f"N must be >= 1, got {N}")
    b_epochs, back = backward_estimates(trace, i, N)
    f_epochs, fwd = forward_estimates(trace, i, N)
    require_fix(len(back), len(fwd), i)
    return SmootherWindow(i, b_epochs, back, f_epochs, fwd)


def _clamp(i, N, lam, m, has_t0):
    if N < 1:
        raise ConfigurationError(f"N must be >= 1, got {N}")
    nb = min(N, available_backward(i, lam, has_t0))
    nf = max(0, min(N, available_forward(i, lam, m)))
    require_fix(nb, nf, i)
    return nb, nf


@lru_cache(maxsize=4096)
def _optimal_pp_cached(nb: int, nf: int, d: int, lam: int, noise: NoiseSpec, full_matrix: bool):
    if full_matrix and nb:
        sigma = build_sigma_pp(WindowSpec(nb, d, lam, noise), n_forward=nf)
        v = spd_solve(sigma, np.ones(nb + nf))
        vb, vf = v[:nb], v[nb:]
    else:
        # block-diagonal covariance: the two solves decouple
        vb = spd_solve(build_sigma_minus(WindowSpec(nb, d, lam, noise)), np.ones(nb)) if nb else _EMPTY
        vf = spd_solve(build_sigma_plus(WindowSpec(nf, d, lam, noise)), np.ones(nf)) if nf else _EMPTY
    c = float(vb.sum() + vf.sum())
    return _readonly(vb / c), _readonly(vf / c), 1.0 / c


@lru_cache(maxsize=4096)
def _asymptotic_pp_cached(nb: int, nf: int, d: int, lam: int, noise: NoiseSpec):
    w = optimal_asymptotic_weights(noise.ratio, lam)
    if nf == 0:
        return truncated_weights(nb, w).values, _EMPTY, variance_truncated(nb, d, lam, noise)
    if nb == 0:
        return _EMPTY, truncated_weights(nf, w).values, variance_truncated_forward(nf, d, lam, noise)
    v_back = variance_truncated(nb, d, lam, noise)
    v_fwd = variance_truncated_forward(nf, d, lam, noise)
    total = v_back + v_fwd
    wb = truncated_weights(nb, w).values * (v_fwd / total)
    wf = truncated_weights(nf, w).values * (v_back / total)
    return _readonly(wb), _readonly(wf), v_back * v_fwd / total


def _readonly(a):
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


def optimal_pp_plan(
    i: int, N: int, lam: int, m: int, noise: NoiseSpec, has_t0_fix: bool = True, full_matrix: bool = False
) -> WindowPlan:
    """Minimum-variance smoother weights at epoch ``i``.

    ``full_matrix`` solves the stacked 2N system instead of the two blocks;
    the results agree to rounding.
    """
    nb, nf = _clamp(i, N, lam, m, has_t0_fix)
    wb, wf, var = _optimal_pp_cached(nb, nf, i % lam, lam, noise, bool(full_matrix))
    return WindowPlan(i, backward_fix_epochs(i, lam, nb), wb, forward_fix_epochs(i, lam, nf), wf, var)


def asymptotic_pp_plan(
    i: int, N: int, lam: int, m: int, noise: NoiseSpec, has_t0_fix: bool = True
) -> WindowPlan:
    """Weights of the two-sided geometric smoother at epoch ``i``."""
    nb, nf = _clamp(i, N, lam, m, has_t0_fix)
    wb, wf, var = _asymptotic_pp_cached(nb, nf, i % lam, lam, noise)
    return WindowPlan(i, backward_fix_epochs(i, lam, nb), wb, forward_fix_epochs(i, lam, nf), wf, var)


def smoother_optimal(
    trace: SensorTrace, i: int, N: int, noise: NoiseSpec, full_matrix: bool = False
) -> WindowEstimate:
    """Minimum-variance unbiased smoother with up to N fixes per side."""
    plan = optimal_pp_plan(i, N, trace.lam, trace.m, noise, trace.has_t0_fix, full_matrix)
    return plan.apply(trace)


def smoother_asymptotic(trace: SensorTrace, i: int, N: int, noise: NoiseSpec) -> WindowEstimate:
    """Inverse-variance blend of the backward and forward truncated filters.

    Each side uses the geometric weights of the truncated filter; the sides
    are mixed with weights ``V+ / (V- + V+)`` and ``V- / (V- + V+)`` giving
    variance ``V- V+ / (V- + V+)``.
    """
    return asymptotic_pp_plan(i, N, trace.lam, trace.m, noise, trace.has_t0_fix).apply(trace)


def side_variances(N: int, d: int, lam: int, noise: NoiseSpec) -> tuple[float, float]:
    """Closed-form ``(V-, V+)`` of the backward and forward geometric sides."""
    return variance_truncated(N, d, lam, noise), variance_truncated_forward(N, d, lam, noise)


def pp_asymptotic_variance(N: int, d: int, lam: int, noise: NoiseSpec) -> float:
    """Variance of the two-sided geometric smoother with N fixes on each side."""
    v_back, v_fwd = side_variances(N, d, lam, noise)
    return v_back * v_fwd / (v_back + v_fwd)


def pp_optimal_variance(N: int, d: int, lam: int, noise: NoiseSpec) -> float:
    """``1 / c_pp`` with N fixes on each side."""
    return _optimal_pp_cached(N, N, d, lam, noise, False)[2]


def pp_asymptotic_limit(noise: NoiseSpec, lam: int, d: int = 0) -> float:
    """Limit of :func:`pp_asymptotic_variance` as ``N -> infinity``."""
    r = noise.ratio
    w1 = optimal_asymptotic_weights(r, lam).w1
    if w1 >= 1.0:
        return 0.0
    base = (1.0 - w1) ** 2 / (1.0 - w1 ** 2)
    tail = w1 ** 2 / (1.0 - w1 ** 2)
    v_back = noise.var_gps * (base + r * (d + lam * tail))
    v_fwd = noise.var_gps * (base + r * (lam * (1.0 + tail) - d))
    total = v_back + v_fwd
    return v_back * v_fwd / total if total > 0 else 0.0


def optimal_pp_series(
    trace: SensorTrace, N: int, noise: NoiseSpec, epochs=None, full_matrix: bool = False
) -> EstimateSeries:
    return window_series(
        "pp_optimal", trace, epochs, lambda tr, i: smoother_optimal(tr, i, N, noise, full_matrix), N
    )


def asymptotic_pp_series(trace: SensorTrace, N: int, noise: NoiseSpec, epochs=None) -> EstimateSeries:
    return window_series(
        "pp_asymptotic", trace, epochs, lambda tr, i: smoother_asymptotic(tr, i, N, noise), N
    )
