"""RMSE metrics, the Monte-Carlo experiment and the window-size thresholds."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigurationError, ConvergenceError, ExperimentError, FusionError
from .estimators import EstimatorSpec, run_estimator
from .filters import (
    asymptotic_variance,
    optimal_asymptotic_weights,
    rt_optimal_variance,
    variance_truncated,
)
from .model import (
    REFERENCE_DISTANCE,
    REFERENCE_GRID,
    REFERENCE_NOISE,
    NoiseSpec,
    TimeGrid,
    constant_speed_trajectory,
    simulate_sensors,
)
from .smoothers import pp_asymptotic_limit, pp_asymptotic_variance, pp_optimal_variance

log = logging.getLogger(__name__)


def _roster(*items):
    return tuple(EstimatorSpec.parse(item) for item in items)


#: Estimators of the real-time comparison table.
REALTIME_ROSTER = _roster(
    "odometer", "gps", "rt_recursive",
    "rt_truncated:4", "rt_truncated:20", "rt_truncated:40",
    "rt_optimal:4", "rt_optimal:20", "rt_optimal:40",
    "kf",
)
#: Estimators of the post-processing comparison table.
SMOOTHING_ROSTER = _roster(
    "odometer", "gps",
    "pp_optimal:4", "pp_optimal:17", "pp_optimal:36",
    "pp_asymptotic:4", "pp_asymptotic:17", "pp_asymptotic:36",
    "kf",
)
FULL_ROSTER = tuple(dict.fromkeys(REALTIME_ROSTER + SMOOTHING_ROSTER))


def rmse(estimates, truth) -> float:
    """Root mean squared componentwise error."""
    estimates = np.asarray(estimates, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimates.shape != truth.shape:
        raise ConfigurationError(f"length mismatch: {estimates.shape} vs {truth.shape}")
    if estimates.size == 0:
        raise ConfigurationError("rmse of an empty series")
    return float(np.sqrt(np.mean((estimates - truth) ** 2)))


def bias_variance(ensemble, truth) -> tuple[float, float]:
    """Sample bias and population variance of an ensemble of estimates.

    With the population convention ``mean((e - truth)**2) = bias**2 + var``
    holds on the sample itself.
    """
    ensemble = np.asarray(ensemble, dtype=float)
    if ensemble.size == 0:
        raise ConfigurationError("empty ensemble")
    errors = ensemble - truth
    bias = float(errors.mean())
    return bias, float(np.mean((errors - bias) ** 2))


@dataclass(frozen=True)
class ExperimentConfig:
    """Monte-Carlo experiment definition.

    ``noise`` drives the simulation; ``estimator_noise`` (default: the same)
    is the noise model the estimators assume when forming their weights, so
    a noise-free simulation can still run every estimator.
    ``report_epochs`` defaults to the GPS epochs. Each simulation ``k`` draws
    from substream ``(seed, k)`` so that results do not depend on the order
    in which simulations are run.
    """

    grid: TimeGrid = REFERENCE_GRID
    noise: NoiseSpec = REFERENCE_NOISE
    distance: float = REFERENCE_DISTANCE
    n_sims: int = 100
    roster: tuple = FULL_ROSTER
    seed: int = 42
    report_epochs: Optional[tuple] = None
    estimator_noise: Optional[NoiseSpec] = None

    @property
    def model_noise(self) -> NoiseSpec:
        return self.noise if self.estimator_noise is None else self.estimator_noise

    def __post_init__(self):
        if self.n_sims < 1:
            raise ConfigurationError(f"simulation count must be >= 1, got {self.n_sims}")
        if not self.roster:
            raise ConfigurationError("empty estimator roster")
        for spec in self.roster:
            if not isinstance(spec, EstimatorSpec):
                raise ConfigurationError(f"roster entry {spec!r} is not an EstimatorSpec")
        epochs = self.epochs()
        if epochs.size == 0 or epochs.min() < 0 or epochs.max() > self.grid.n:
            raise ConfigurationError(f"report epochs must lie in [0, {self.grid.n}]")
        if any(s.kind == "gps" for s in self.roster) and np.any(epochs % self.grid.lam):
            raise ConfigurationError("the raw GPS estimator can only be reported at GPS epochs")

    def epochs(self) -> np.ndarray:
        if self.report_epochs is None:
            return self.grid.gps_epochs()
        return np.asarray(self.report_epochs, dtype=np.int64)

    def to_dict(self) -> dict:
        return {
            "m": self.grid.m,
            "lambda": self.grid.lam,
            "horizon_s": self.grid.horizon,
            "sigma_od": self.noise.sigma_od,
            "sigma_gps": self.noise.sigma_gps,
            "distance_m": self.distance,
            "sims": self.n_sims,
            "seed": self.seed,
            "roster": ",".join(s.kind if s.N is None else f"{s.kind}:{s.N}" for s in self.roster),
            "estimator_sigma_od": self.model_noise.sigma_od,
            "estimator_sigma_gps": self.model_noise.sigma_gps,
            "report_epochs": "gps" if self.report_epochs is None else list(map(int, self.report_epochs)),
        }


@dataclass
class RmseReport:
    """Ensemble error statistics per estimator and report epoch.

    ``errors[tag]`` has shape ``(n_sims, n_epochs)``. Variances use the
    population convention.
    """

    config: ExperimentConfig
    epochs: np.ndarray
    times: np.ndarray
    tags: list
    labels: dict
    errors: dict
    analytic_variance: dict = field(default_factory=dict)
    n_backward: dict = field(default_factory=dict)
    n_forward: dict = field(default_factory=dict)

    def bias(self, tag) -> np.ndarray:
        return self.errors[tag].mean(axis=0)

    def variance(self, tag) -> np.ndarray:
        err = self.errors[tag]
        return np.mean((err - err.mean(axis=0)) ** 2, axis=0)

    def mse(self, tag) -> np.ndarray:
        return np.mean(self.errors[tag] ** 2, axis=0)

    def rmse(self, tag) -> np.ndarray:
        return np.sqrt(self.mse(tag))

    def mean_rmse(self, tag) -> float:
        return float(self.rmse(tag).mean())

    def max_rmse(self, tag) -> float:
        return float(self.rmse(tag).max())

    def identity_gap(self, tag) -> float:
        """Largest ``|mse - (bias**2 + var)|`` over the report epochs."""
        return float(np.max(np.abs(self.mse(tag) - (self.bias(tag) ** 2 + self.variance(tag)))))

    def summary(self) -> list[tuple[str, str, float, float]]:
        """Rows ``(tag, label, mean RMSE, max RMSE)`` in roster order."""
        return [(t, self.labels[t], self.mean_rmse(t), self.max_rmse(t)) for t in self.tags]


def simulate_errors(config: ExperimentConfig, index: int) -> dict:
    """Estimation errors at the report epochs for simulation ``index``."""
    traj = constant_speed_trajectory(config.grid, config.distance)
    trace = simulate_sensors(traj, config.noise, config.grid, config.seed, substream=index)
    epochs = config.epochs()
    truth = trace.truth[epochs]
    out = {}
    for spec in config.roster:
        try:
            series = run_estimator(spec, trace, config.model_noise, epochs)
        except FusionError as exc:
            raise ExperimentError(index, spec.tag, exc) from exc
        out[spec.tag] = (series.estimates - truth, series)
    return out


def _errors_only(args):
    config, index = args
    return {tag: err for tag, (err, _) in simulate_errors(config, index).items()}


def run_monte_carlo(config: ExperimentConfig, workers: int = 1) -> RmseReport:
    """Simulate ``config.n_sims`` traces and collect every roster estimator's errors.

    ``workers > 1`` spreads simulations over processes; the report is
    identical to the serial one because each simulation owns its substream
    and results are stored by simulation index.
    """
    epochs = config.epochs()
    tags = [spec.tag for spec in config.roster]
    if len(set(tags)) != len(tags):
        raise ConfigurationError("duplicate estimator in roster")
    errors = {tag: np.empty((config.n_sims, len(epochs))) for tag in tags}

    first = simulate_errors(config, 0)
    for tag, (err, _) in first.items():
        errors[tag][0] = err
    if workers > 1 and config.n_sims > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            jobs = ((config, k) for k in range(1, config.n_sims))
            for k, result in enumerate(pool.map(_errors_only, jobs, chunksize=8), start=1):
                for tag, err in result.items():
                    errors[tag][k] = err
    else:
        for k in range(1, config.n_sims):
            for tag, err in _errors_only((config, k)).items():
                errors[tag][k] = err
    log.debug("ran %d simulations x %d estimators", config.n_sims, len(tags))

    # window sizes and analytic variances depend only on the grid, not the draw
    report = RmseReport(
        config=config,
        epochs=epochs,
        times=config.grid.time(epochs),
        tags=tags,
        labels={spec.tag: spec.label for spec in config.roster},
        errors=errors,
    )
    for tag, (_, series) in first.items():
        if series.variances is not None:
            report.analytic_variance[tag] = series.variances
        if series.n_backward is not None:
            report.n_backward[tag] = series.n_backward
            report.n_forward[tag] = series.n_forward
    return report


FAMILIES = ("rt_optimal", "rt_truncated", "pp_optimal", "pp_asymptotic")
_FAMILY_ALIASES = {"pp_truncated": "pp_asymptotic"}


def family_variance(kind: str, N: int, d: int, lam: int, noise: NoiseSpec) -> float:
    """Analytic variance of a windowed family with a full window of N fixes."""
    kind = _FAMILY_ALIASES.get(kind, kind)
    if kind == "rt_optimal":
        return rt_optimal_variance(N, d, lam, noise)
    if kind == "rt_truncated":
        return variance_truncated(N, d, lam, noise)
    if kind == "pp_optimal":
        return pp_optimal_variance(N, d, lam, noise)
    if kind == "pp_asymptotic":
        return pp_asymptotic_variance(N, d, lam, noise)
    raise ConfigurationError(f"unknown estimator family {kind!r}; expected one of {FAMILIES}")


def family_limit(kind: str, noise: NoiseSpec, lam: int) -> float:
    """Large-N variance the family approaches at GPS epochs."""
    kind = _FAMILY_ALIASES.get(kind, kind)
    if kind.startswith("rt_"):
        return asymptotic_variance(optimal_asymptotic_weights(noise.ratio, lam), lam, noise)
    if kind.startswith("pp_"):
        return pp_asymptotic_limit(noise, lam, d=0)
    raise ConfigurationError(f"unknown estimator family {kind!r}")


def find_threshold_N(
    kind: str, noise: NoiseSpec, lam: int, criterion: float = 0.1, max_N: int = 10_000
) -> int:
    """Smallest N whose std-dev at a GPS epoch is within ``criterion`` of the limit.

    Raises:
        ConvergenceError: no N up to ``max_N`` qualifies.
    """
    if kind not in FAMILIES and kind not in _FAMILY_ALIASES:
        raise ConfigurationError(f"unknown estimator family {kind!r}; expected one of {FAMILIES}")
    limit_std = math.sqrt(family_limit(kind, noise, lam))
    for N in range(1, max_N + 1):
        gap = abs(math.sqrt(family_variance(kind, N, 0, lam, noise)) - limit_std)
        if gap < criterion:
            return N
    raise ConvergenceError(
        f"{kind}: std-dev still {gap:.3g} m from its limit at N = {max_N} (criterion {criterion})"
    )
