"""Name-based access to every estimator, as used by the CLI and experiments."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigurationError
from .estimates import EstimateSeries
from .filters import filter_recursive, optimal_asymptotic_weights, optimal_series, truncated_series
from .kalman import kalman_filter
from .model import NoiseSpec, SensorTrace
from .smoothers import asymptotic_pp_series, optimal_pp_series

WINDOWED = ("rt_truncated", "rt_optimal", "pp_optimal", "pp_asymptotic")
UNWINDOWED = ("odometer", "gps", "rt_recursive", "kf")
KINDS = UNWINDOWED + WINDOWED

LABELS = {
    "odometer": "Odometer",
    "gps": "GPS",
    "rt_recursive": "RT asymptotic (recursive)",
    "rt_truncated": "RT asymptotic, N fixed",
    "rt_optimal": "RT optimal, N fixed",
    "kf": "Kalman filter",
    "pp_optimal": "PP optimal, N fixed",
    "pp_asymptotic": "PP asymptotic, N fixed",
}


@dataclass(frozen=True)
class EstimatorSpec:
    """An estimator kind plus its window size when it takes one."""

    kind: str
    N: Optional[int] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown estimator {self.kind!r}; expected one of {KINDS}")
        if self.kind in WINDOWED:
            if self.N is None or self.N < 1:
                raise ConfigurationError(f"estimator {self.kind!r} needs a window size N >= 1")
        elif self.N is not None:
            raise ConfigurationError(f"estimator {self.kind!r} takes no window size")

    @property
    def tag(self) -> str:
        return self.kind if self.N is None else f"{self.kind}_N{self.N}"

    @property
    def label(self) -> str:
        return LABELS[self.kind] if self.N is None else f"{LABELS[self.kind]} (N={self.N})"

    @classmethod
    def parse(cls, text: str) -> "EstimatorSpec":
        """Parse ``kind`` or ``kind:N`` (e.g. ``rt_optimal:20``)."""
        kind, _, n = text.strip().partition(":")
        try:
            return cls(kind, int(n) if n else None)
        except ValueError as exc:
            if isinstance(exc, ConfigurationError):
                raise
            raise ConfigurationError(f"bad window size in {text!r}") from exc


def parse_roster(text: str) -> tuple[EstimatorSpec, ...]:
    items = [part for part in text.split(",") if part.strip()]
    if not items:
        raise ConfigurationError("empty estimator roster")
    return tuple(EstimatorSpec.parse(part) for part in items)


def run_estimator(spec: EstimatorSpec, trace: SensorTrace, noise: NoiseSpec, epochs=None) -> EstimateSeries:
    """Run ``spec`` on ``trace`` and return the series restricted to ``epochs``."""
    kind, N = spec.kind, spec.N
    if kind in WINDOWED:
        runner = {
            "rt_truncated": truncated_series,
            "rt_optimal": optimal_series,
            "pp_optimal": optimal_pp_series,
            "pp_asymptotic": asymptotic_pp_series,
        }[kind]
        series = runner(trace, N, noise, epochs)
        series.kind = spec.tag
        return series

    all_epochs = np.arange(trace.n + 1)
    if kind == "odometer":
        series = EstimateSeries(
            kind, all_epochs, trace.odometer.copy(), noise.var_od * all_epochs.astype(float)
        )
    elif kind == "gps":
        dense = trace.gps_dense()
        variances = np.where(np.isfinite(dense), noise.var_gps, np.nan)
        series = EstimateSeries(kind, all_epochs, dense, variances)
    elif kind == "rt_recursive":
        series = filter_recursive(trace, optimal_asymptotic_weights(noise.ratio, trace.lam), noise)
    else:
        series = kalman_filter(trace, noise)
    return restrict(series, epochs)


def restrict(series: EstimateSeries, epochs) -> EstimateSeries:
    """Subset a full-trace series to ``epochs``."""
    if epochs is None:
        return series
    epochs = np.asarray(epochs, dtype=np.int64)
    pick = lambda a: None if a is None else a[epochs]
    return EstimateSeries(
        series.kind,
        series.epochs[epochs],
        series.estimates[epochs],
        pick(series.variances),
        series.N,
        pick(series.n_backward),
        pick(series.n_forward),
        series.metadata,
    )
