"""Window bookkeeping shared by the windowed filters and smoothers.

Every windowed estimator is a convex combination of single-fix estimators:
a backward estimator anchors on a GPS fix at epoch ``g <= i`` and adds the
odometer displacement from ``g`` to ``i``, a forward one anchors on a fix at
``g > i`` and subtracts the displacement from ``i`` to ``g``. Both reduce to
``y_gps(g) + y_od(i) - y_od(g)``, the odometer increments telescoping.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import MissingFixError, NoAbsoluteFixError
from .model import SensorTrace


def available_backward(i: int, lam: int, has_t0_fix: bool = True) -> int:
    """Number of scheduled GPS fixes at or before epoch ``i``."""
    return i // lam + (1 if has_t0_fix else 0)


def available_forward(i: int, lam: int, m: int) -> int:
    """Number of scheduled GPS fixes strictly after epoch ``i``."""
    return m - i // lam


def backward_fix_epochs(i: int, lam: int, count: int) -> np.ndarray:
    """Epochs ``g-_i(j)`` for ``j = 1..count``, nearest first."""
    return lam * (i // lam) - lam * np.arange(count)


def forward_fix_epochs(i: int, lam: int, count: int) -> np.ndarray:
    """Epochs ``g+_i(j)`` for ``j = 1..count``, nearest first."""
    return lam * (i // lam) + lam * np.arange(1, count + 1)


def single_fix_estimates(trace: SensorTrace, i: int, fix_epochs) -> np.ndarray:
    """Dead-reckon each GPS fix in ``fix_epochs`` to epoch ``i``.

    Raises:
        MissingFixError: if one of the requested fixes is absent.
    """
    fix_epochs = np.asarray(fix_epochs, dtype=np.int64)
    fixes = trace.gps[fix_epochs // trace.lam]
    if not np.all(np.isfinite(fixes)):
        missing = fix_epochs[~np.isfinite(fixes)]
        raise MissingFixError(
            f"GPS fix at epoch {int(missing[0])} missing inside the window for epoch {i}"
        )
    return fixes + (trace.odometer[i] - trace.odometer[fix_epochs])


def backward_estimates(trace: SensorTrace, i: int, N: int):
    """Backward single-fix estimates at epoch ``i``, window clamped to the data.

    Returns:
        (epochs, values): fix epochs nearest first and the estimates.
    """
    count = min(N, available_backward(i, trace.lam, trace.has_t0_fix))
    epochs = backward_fix_epochs(i, trace.lam, count)
    return epochs, single_fix_estimates(trace, i, epochs)


def forward_estimates(trace: SensorTrace, i: int, N: int):
    """Forward single-fix estimates at epoch ``i``, window clamped to the data."""
    count = max(0, min(N, available_forward(i, trace.lam, trace.m)))
    epochs = forward_fix_epochs(i, trace.lam, count)
    return epochs, single_fix_estimates(trace, i, epochs)


@dataclass(frozen=True)
class WindowPlan:
    """Weights of a windowed estimator at one epoch.

    The estimate is ``sum(w * xhat)`` over the backward then forward
    single-fix estimators; ``variance`` is its analytic variance.
    """

    epoch: int
    backward_epochs: np.ndarray
    backward_weights: np.ndarray
    forward_epochs: np.ndarray
    forward_weights: np.ndarray
    variance: float

    @property
    def n_backward(self) -> int:
        return len(self.backward_epochs)

    @property
    def n_forward(self) -> int:
        return len(self.forward_epochs)

    @property
    def weights(self) -> np.ndarray:
        return np.concatenate((self.backward_weights, self.forward_weights))

    def apply(self, trace: SensorTrace) -> "WindowEstimate":
        i = self.epoch
        estimate = 0.0
        if self.n_backward:
            estimate += self.backward_weights @ single_fix_estimates(trace, i, self.backward_epochs)
        if self.n_forward:
            estimate += self.forward_weights @ single_fix_estimates(trace, i, self.forward_epochs)
        return WindowEstimate(float(estimate), self.variance, self.n_backward, self.n_forward)


@dataclass(frozen=True)
class WindowEstimate:
    """Position estimate at one epoch with its analytic variance."""

    estimate: float
    variance: float
    n_backward: int
    n_forward: int = 0


def require_fix(n_backward: int, n_forward: int, i: int):
    if n_backward + n_forward == 0:
        raise NoAbsoluteFixError(f"no GPS fix available for the window at epoch {i}")


@dataclass
class EstimateSeries:
    """Per-epoch estimates of one estimator over a trace.

    Attributes:
        kind: estimator tag (``"kf"``, ``"rt_optimal"``, ...).
        epochs: epoch indices the estimates refer to.
        estimates: position estimates in meters.
        variances: analytic variances in m^2, or None.
        N: requested window size, for windowed estimators.
        n_backward, n_forward: effective (clamped) window sizes per epoch.
        metadata: free-form extras (e.g. Kalman gains, initialization).
    """

    kind: str
    epochs: np.ndarray
    estimates: np.ndarray
    variances: Optional[np.ndarray] = None
    N: Optional[int] = None
    n_backward: Optional[np.ndarray] = None
    n_forward: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.epochs)

    @property
    def std(self) -> Optional[np.ndarray]:
        return None if self.variances is None else np.sqrt(self.variances)


def window_series(kind, trace, epochs, estimate_at, N=None) -> EstimateSeries:
    """Evaluate a per-epoch windowed estimator over ``epochs``."""
    epochs = np.arange(trace.n + 1) if epochs is None else np.asarray(epochs, dtype=np.int64)
    est = np.empty(len(epochs))
    var = np.empty(len(epochs))
    nb = np.empty(len(epochs), dtype=np.int64)
    nf = np.empty(len(epochs), dtype=np.int64)
    for k, i in enumerate(epochs):
        res = estimate_at(trace, int(i))
        est[k], var[k], nb[k], nf[k] = res.estimate, res.variance, res.n_backward, res.n_forward
    return EstimateSeries(kind, epochs, est, var, N=N, n_backward=nb, n_forward=nf)
