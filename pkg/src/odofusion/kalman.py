"""Scalar odometer-driven Kalman filter used as the comparison baseline.

The state is the position itself. Prediction runs at the odometer rate,
adding each odometer increment and ``sigma_od**2`` of variance; the GPS
update runs only at epochs where a fix exists.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .estimates import EstimateSeries
from .model import NoiseSpec, SensorTrace

#: Prior variance (m^2) used when the trace has no t0 fix.
DIFFUSE_PRIOR_VARIANCE = 1.0e6


@dataclass(frozen=True)
class KalmanState:
    estimate: float
    variance: float
    gain: float = 0.0


def kalman_predict(state: KalmanState, increment: float, var_od: float) -> KalmanState:
    return KalmanState(state.estimate + increment, state.variance + var_od, state.gain)


def kalman_update(state: KalmanState, y_gps: float, var_gps: float) -> KalmanState:
    prior = state.variance
    denom = prior + var_gps
    gain = prior / denom if denom > 0 else 0.0
    return KalmanState(
        state.estimate + gain * (y_gps - state.estimate),
        (1.0 - gain) * prior,
        gain,
    )


def kalman_filter(trace: SensorTrace, noise: NoiseSpec) -> EstimateSeries:
    """Filter every epoch of ``trace``.

    Initialized from the t0 fix with variance ``sigma_gps**2``; without that
    fix it starts from ``y_od(t0)`` with :data:`DIFFUSE_PRIOR_VARIANCE`,
    which is recorded in ``metadata["init"]``.
    """
    lam, m = trace.lam, trace.m
    od, gps = trace.odometer, trace.gps
    var_od, var_gps = noise.var_od, noise.var_gps
    est = np.empty(trace.n + 1)
    var = np.empty(trace.n + 1)
    gains = np.full(m + 1, np.nan)
    if trace.has_t0_fix:
        x, p, init = float(gps[0]), var_gps, "t0_fix"
    else:
        x, p, init = float(od[0]), DIFFUSE_PRIOR_VARIANCE, "diffuse_prior"
    est[0], var[0] = x, p
    steps = np.arange(1, lam + 1)
    for j in range(1, m + 1):
        lo, hi = (j - 1) * lam, j * lam
        # lam chained predictions collapse to one displacement and lam*var_od
        est[lo + 1 : hi + 1] = x + (od[lo + 1 : hi + 1] - od[lo])
        var[lo + 1 : hi + 1] = p + var_od * steps
        state = KalmanState(est[hi], var[hi])
        if np.isfinite(gps[j]):
            state = kalman_update(state, float(gps[j]), var_gps)
            gains[j] = state.gain
        est[hi], var[hi] = state.estimate, state.variance
        x, p = state.estimate, state.variance
    return EstimateSeries(
        "kf",
        np.arange(trace.n + 1),
        est,
        var,
        metadata={"gains": gains, "init": init},
    )


def steady_state_gain(noise: NoiseSpec, lam: int) -> float:
    """Fixed point of the gain for ``lam`` predictions per GPS update.

    With ``q`` the steady prior variance over ``sigma_gps**2``,
    ``q = (lam r + sqrt(lam r (lam r + 4))) / 2`` and ``K = q / (q + 1)``.
    """
    lr = lam * noise.ratio
    q = (lr + math.sqrt(lr * (lr + 4.0))) / 2.0
    return q / (q + 1.0)
