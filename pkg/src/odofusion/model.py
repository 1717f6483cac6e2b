"""Sampling grid, sensor error model and the GPS index helpers.

Positions are curvilinear abscissae in meters, times in seconds. Epoch
indices ``i = 0..n`` are the canonical time handle: odometer readings exist
at every epoch, GPS fixes at every ``lam``-th epoch (``i % lam == 0``),
so GPS fix ``j`` lives at epoch ``j * lam``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigurationError, WindowExceedsTraceError


@dataclass(frozen=True)
class TimeGrid:
    """Odometer/GPS sampling structure over ``[0, horizon]``.

    Args:
        m: number of GPS epochs after t0.
        lam: odometer-to-GPS frequency ratio (positive integer).
        horizon: trip duration T in seconds.
    """

    m: int
    lam: int
    horizon: float

    def __post_init__(self):
        if int(self.lam) != self.lam or self.lam < 1:
            raise ConfigurationError(f"lam must be a positive integer, got {self.lam!r}")
        if int(self.m) != self.m or self.m < 1:
            raise ConfigurationError(f"m must be a positive integer, got {self.m!r}")
        if not self.horizon > 0:
            raise ConfigurationError(f"horizon must be positive, got {self.horizon!r}")
        object.__setattr__(self, "lam", int(self.lam))
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "horizon", float(self.horizon))

    @classmethod
    def from_frequencies(cls, f_od, f_gps, horizon):
        """Build a grid from sampling rates in Hz; the ratio must be integral."""
        ratio = f_od / f_gps
        lam = int(round(ratio))
        if lam < 1 or abs(ratio - lam) > 1e-9 * max(1.0, ratio):
            raise ConfigurationError(f"f_od / f_gps = {ratio!r} is not a positive integer")
        m = horizon * f_gps
        if abs(m - round(m)) > 1e-9 * max(1.0, m):
            raise ConfigurationError("horizon must hold a whole number of GPS periods")
        return cls(m=int(round(m)), lam=lam, horizon=horizon)

    @property
    def n(self) -> int:
        return self.lam * self.m

    @property
    def f_od(self) -> float:
        return self.n / self.horizon

    @property
    def f_gps(self) -> float:
        return self.m / self.horizon

    @property
    def dt(self) -> float:
        return self.horizon / self.n

    def time(self, i):
        """Epoch time ``t_i = i T / n``."""
        return np.asarray(i) * self.horizon / self.n

    def times(self) -> np.ndarray:
        return self.time(np.arange(self.n + 1))

    def gps_epochs(self) -> np.ndarray:
        return np.arange(0, self.n + 1, self.lam)


@dataclass(frozen=True)
class NoiseSpec:
    """Sensor error levels.

    ``sigma_od`` is the std-dev of one odometer increment error and
    ``sigma_gps`` the std-dev of a map-matched fix, both in meters. Zero
    values are accepted so that noiseless fixtures can be simulated; the
    estimators need ``sigma_gps > 0`` (see :attr:`ratio`).
    """

    sigma_od: float
    sigma_gps: float

    def __post_init__(self):
        for name in ("sigma_od", "sigma_gps"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ConfigurationError(f"{name} must be finite and >= 0, got {value!r}")
            object.__setattr__(self, name, float(value))

    @property
    def var_od(self) -> float:
        return self.sigma_od ** 2

    @property
    def var_gps(self) -> float:
        return self.sigma_gps ** 2

    @property
    def ratio(self) -> float:
        """Variance ratio ``r = sigma_od**2 / sigma_gps**2``."""
        if self.sigma_gps == 0:
            raise ConfigurationError("variance ratio undefined for sigma_gps = 0")
        return self.var_od / self.var_gps


#: Reference simulation noise (0.05 m odometer step, 3 m GPS).
REFERENCE_NOISE = NoiseSpec(sigma_od=0.05, sigma_gps=3.0)
#: 300 s trip, 10 Hz odometer, 1 Hz GPS.
REFERENCE_GRID = TimeGrid(m=300, lam=10, horizon=300.0)
REFERENCE_DISTANCE = 4000.0


@dataclass(frozen=True)
class Trajectory:
    """True positions ``x(t_i)``, ``i = 0..n``, with ``x(t0) = 0``."""

    positions: np.ndarray

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        if pos.ndim != 1 or pos.size < 2:
            raise ConfigurationError("trajectory needs a 1-D array of at least two positions")
        if pos[0] != 0.0:
            raise ConfigurationError(f"trajectory must start at x(t0) = 0, got {pos[0]!r}")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    def __len__(self):
        return self.positions.size


def constant_speed_trajectory(grid: TimeGrid, distance: float = REFERENCE_DISTANCE) -> Trajectory:
    """Uniform motion covering ``distance`` meters over the grid horizon."""
    return Trajectory(np.arange(grid.n + 1) * (distance / grid.n))


@dataclass(frozen=True, eq=False)
class SensorTrace:
    """Synchronized odometer and GPS readings on a :class:`TimeGrid`.

    Attributes:
        grid: sampling grid.
        odometer: ``y_od(t_i)`` for ``i = 0..n``.
        gps: fix ``j`` at epoch ``j * lam`` for ``j = 0..m``; NaN marks a
            missing fix (in particular a missing t0 fix).
        truth: optional true positions on the same epochs.
        seed: RNG seed used to simulate the trace, None for ingested data.
    """

    grid: TimeGrid
    odometer: np.ndarray
    gps: np.ndarray
    truth: Optional[np.ndarray] = None
    seed: Optional[object] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        od = _frozen(self.odometer)
        gps = _frozen(self.gps)
        if od.shape != (self.grid.n + 1,):
            raise ConfigurationError(
                f"odometer has {od.size} samples, grid expects {self.grid.n + 1}"
            )
        if gps.shape != (self.grid.m + 1,):
            raise ConfigurationError(f"gps has {gps.size} slots, grid expects {self.grid.m + 1}")
        if not np.all(np.isfinite(od)):
            raise ConfigurationError("odometer readings must be finite")
        object.__setattr__(self, "odometer", od)
        object.__setattr__(self, "gps", gps)
        if self.truth is not None:
            truth = _frozen(self.truth)
            if truth.shape != od.shape:
                raise ConfigurationError("truth must have one value per odometer epoch")
            object.__setattr__(self, "truth", truth)

    @property
    def lam(self) -> int:
        return self.grid.lam

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def m(self) -> int:
        return self.grid.m

    @property
    def has_t0_fix(self) -> bool:
        return bool(np.isfinite(self.gps[0]))

    @property
    def fix_present(self) -> np.ndarray:
        return np.isfinite(self.gps)

    @property
    def gps_count(self) -> int:
        return int(self.fix_present.sum())

    def gps_at(self, epoch: int) -> float:
        """GPS reading at ``epoch`` (must be a GPS epoch); NaN if missing."""
        if epoch % self.lam:
            raise ValueError(f"epoch {epoch} is not a GPS epoch (lam={self.lam})")
        return float(self.gps[epoch // self.lam])

    def gps_dense(self) -> np.ndarray:
        """GPS readings spread on the odometer epochs, NaN elsewhere."""
        out = np.full(self.n + 1, np.nan)
        out[:: self.lam] = self.gps
        return out


def _frozen(values):
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


def simulation_rng(seed, substream=None) -> np.random.Generator:
    """PCG64 generator for ``seed`` or for substream ``(seed, substream)``."""
    if substream is None:
        return np.random.default_rng(seed)
    return np.random.default_rng([int(seed), int(substream)])


def simulate_sensors(
    traj: Trajectory,
    noise: NoiseSpec,
    grid: TimeGrid,
    seed: int,
    substream: Optional[int] = None,
) -> SensorTrace:
    """Draw odometer and GPS readings from the additive error model.

    The odometer accumulates i.i.d. N(0, sigma_od**2) increment errors from
    t0, GPS fixes carry independent N(0, sigma_gps**2) errors. A t0 fix is
    always generated. Deterministic given ``(seed, substream)``.
    """
    if len(traj) != grid.n + 1:
        raise ConfigurationError(f"trajectory has {len(traj)} samples, grid expects {grid.n + 1}")
    rng = simulation_rng(seed, substream)
    x = traj.positions
    od_err = rng.normal(0.0, noise.sigma_od, grid.n)
    gps_err = rng.normal(0.0, noise.sigma_gps, grid.m + 1)
    odometer = x - x[0] + np.concatenate(([0.0], np.cumsum(od_err)))
    gps = x[:: grid.lam] + gps_err
    stored_seed = seed if substream is None else (seed, substream)
    return SensorTrace(grid=grid, odometer=odometer, gps=gps, truth=x, seed=stored_seed)


def gps_phase(i: int, lam: int) -> int:
    """Odometer epochs elapsed since the latest GPS epoch at or before ``i``."""
    return i % lam


def gps_index_before(i: int, lam: int, j: int, n: Optional[int] = None) -> int:
    """Epoch of the ``j``-th GPS fix at or before epoch ``i`` (``j >= 1``).

    A fix at ``i`` itself counts as the first one.
    """
    if j < 1:
        raise ValueError(f"j must be >= 1, got {j}")
    epoch = lam * (i // lam) - lam * (j - 1)
    _check_in_trace(epoch, n)
    return epoch


def gps_index_after(i: int, lam: int, j: int, n: Optional[int] = None) -> int:
    """Epoch of the ``j``-th GPS fix strictly after epoch ``i`` (``j >= 1``)."""
    if j < 1:
        raise ValueError(f"j must be >= 1, got {j}")
    epoch = lam * (i // lam) + lam * j
    _check_in_trace(epoch, n)
    return epoch


def _check_in_trace(epoch, n):
    if epoch < 0 or (n is not None and epoch > n):
        bound = "" if n is None else f", {n}"
        raise WindowExceedsTraceError(f"GPS epoch {epoch} outside [0{bound}]")
