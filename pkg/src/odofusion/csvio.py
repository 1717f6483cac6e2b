"""CSV serialization of traces, estimates and reports, and sensor-log ingestion.

Every file written here starts with one ``# manifest: {...}`` comment line
holding the JSON :class:`RunManifest`, followed by a headered CSV body.
Floats are written with ``repr`` (shortest round-trip form); missing
values are empty cells.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .errors import AlignmentError, ConfigurationError, TraceFormatError
from .estimates import EstimateSeries
from .model import SensorTrace, TimeGrid

log = logging.getLogger(__name__)

MANIFEST_PREFIX = "# manifest: "
TRACE_COLUMNS = ("epoch", "time_s", "y_od_m", "y_gps_m", "truth_m")
ESTIMATE_COLUMNS = ("epoch", "time_s", "estimate_m", "variance_m2", "n_backward", "n_forward")


@dataclass
class RunManifest:
    command: str
    config: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    version: str = __version__
    seed: Optional[object] = None

    def to_line(self) -> str:
        return MANIFEST_PREFIX + json.dumps(asdict(self), sort_keys=True, default=_jsonable)

    @classmethod
    def from_line(cls, line: str) -> "RunManifest":
        return cls(**json.loads(line[len(MANIFEST_PREFIX):]))


def _jsonable(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (tuple, set, np.ndarray)):
        return list(value)
    return str(value)


def fmt(value) -> str:
    """Shortest round-trip text for a number; empty for None/NaN."""
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    return "" if math.isnan(value) else repr(value)


def _parse_float(text: str, row: int, column: str) -> float:
    text = text.strip()
    if not text:
        return math.nan
    try:
        return float(text)
    except ValueError:
        raise TraceFormatError(f"row {row}: column {column!r} is not a number: {text!r}") from None


def _write(path, manifest: RunManifest, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(manifest.to_line() + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) if not isinstance(v, str) else v for v in row])
    return path


def read_csv(path, required=()):
    """Read a headered CSV, returning ``(manifest or None, header, rows)``.

    Rows are lists of strings paired with their 1-based line number in the
    body (header is line 1).
    """
    manifest = None
    comments = []
    body = []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                if line.startswith(MANIFEST_PREFIX):
                    manifest = RunManifest.from_line(line.strip())
                comments.append(line)
            elif line.strip():
                body.append(line)
    if not body:
        raise TraceFormatError(f"{path}: no CSV header")
    reader = csv.reader(body)
    header = [h.strip() for h in next(reader)]
    missing = [c for c in required if c not in header]
    if missing:
        raise TraceFormatError(f"{path}: missing column(s) {missing}; header is {header}")
    rows = [(k, r) for k, r in enumerate(reader, start=2)]
    return manifest, header, rows


# --- traces ---------------------------------------------------------------


def write_trace_csv(trace: SensorTrace, path, manifest: Optional[RunManifest] = None):
    manifest = manifest or RunManifest("trace", seed=trace.seed)
    manifest.config.setdefault("lambda", trace.lam)
    gps = trace.gps_dense()
    truth = trace.truth
    times = trace.grid.times()

    def rows():
        for i in range(trace.n + 1):
            yield (i, times[i], trace.odometer[i], gps[i], None if truth is None else truth[i])

    return _write(path, manifest, TRACE_COLUMNS, rows())


def read_trace_csv(path, lam: Optional[int] = None) -> SensorTrace:
    """Load a trace written by :func:`write_trace_csv`."""
    manifest, header, rows = read_csv(path, required=TRACE_COLUMNS[:4])
    col = {name: header.index(name) for name in header}
    if lam is None and manifest is not None:
        lam = manifest.config.get("lambda")
    if lam is None:
        raise TraceFormatError(f"{path}: lambda not recorded in the manifest; pass it explicitly")
    lam = int(lam)
    epochs, times, od, gps, truth = [], [], [], [], []
    for line, row in rows:
        try:
            epoch = int(row[col["epoch"]])
        except ValueError:
            raise TraceFormatError(f"row {line}: bad epoch {row[col['epoch']]!r}") from None
        if epoch != len(epochs):
            raise TraceFormatError(f"row {line}: epochs must run 0, 1, 2, ... (got {epoch})")
        epochs.append(epoch)
        times.append(_parse_float(row[col["time_s"]], line, "time_s"))
        od.append(_parse_float(row[col["y_od_m"]], line, "y_od_m"))
        g = _parse_float(row[col["y_gps_m"]], line, "y_gps_m")
        if not math.isnan(g) and epoch % lam:
            raise AlignmentError(f"GPS value at epoch {epoch}, not a multiple of lambda={lam}", line)
        gps.append(g)
        if "truth_m" in col:
            truth.append(_parse_float(row[col["truth_m"]], line, "truth_m"))
    n = len(epochs) - 1
    if n < lam or n % lam:
        raise TraceFormatError(f"{path}: {n} steps is not a positive multiple of lambda={lam}")
    _check_monotone(times, "time_s")
    grid = TimeGrid(m=n // lam, lam=lam, horizon=times[-1] - times[0])
    truth_arr = np.array(truth) if truth and not np.all(np.isnan(truth)) else None
    seed = manifest.seed if manifest is not None else None
    return SensorTrace(grid, np.array(od), np.array(gps[::lam]), truth_arr, seed=seed)


def _check_monotone(times, name, first_line=2):
    for k in range(1, len(times)):
        if not times[k] > times[k - 1]:
            raise TraceFormatError(f"row {first_line + k}: {name} not strictly increasing")


def write_sensor_logs(trace: SensorTrace, directory, t0: float = 0.0) -> dict:
    """Split a trace into raw ``odometer.csv``, ``gps.csv`` and ``truth.csv`` logs."""
    directory = Path(directory)
    manifest = RunManifest("sensor_logs", config={"lambda": trace.lam}, seed=trace.seed)
    times = t0 + trace.grid.times()
    paths = {
        "odometer": _write(
            directory / "odometer.csv", manifest, ("time_s", "y_od_m"), zip(times, trace.odometer)
        )
    }
    present = np.flatnonzero(trace.fix_present)
    paths["gps"] = _write(
        directory / "gps.csv",
        manifest,
        ("time_s", "y_gps_m"),
        ((times[j * trace.lam], trace.gps[j]) for j in present),
    )
    if trace.truth is not None:
        paths["truth"] = _write(
            directory / "truth.csv", manifest, ("time_s", "truth_m"), zip(times, trace.truth)
        )
    return paths


def _read_log(path, value_column):
    _, header, rows = read_csv(path, required=("time_s", value_column))
    ti, vi = header.index("time_s"), header.index(value_column)
    times, values, lines = [], [], []
    for line, row in rows:
        times.append(_parse_float(row[ti], line, "time_s"))
        values.append(_parse_float(row[vi], line, value_column))
        lines.append(line)
        if math.isnan(times[-1]):
            raise TraceFormatError(f"row {line}: empty timestamp")
    for k in range(1, len(times)):
        if not times[k] > times[k - 1]:
            raise TraceFormatError(f"{path}: row {lines[k]}: timestamps not strictly increasing")
    return np.array(times), np.array(values), lines


def ingest_trace(odometer_path, gps_path, truth_path=None, lam: int = 10, tolerance: Optional[float] = None) -> SensorTrace:
    """Build a trace from synchronized odometer, GPS and optional truth logs.

    The odometer log defines the epoch grid (uniform period). GPS rows must
    land on every ``lam``-th epoch within ``tolerance`` seconds (default half
    an odometer period); slots without a row become missing fixes. Odometer
    rows past the last whole GPS period are dropped.

    Raises:
        TraceFormatError: unparsable or non-monotone timestamps, irregular
            odometer sampling, incomplete truth.
        AlignmentError: a GPS timestamp that does not snap onto a GPS epoch.
    """
    if lam < 1:
        raise ConfigurationError(f"lambda must be >= 1, got {lam}")
    t_od, y_od, od_lines = _read_log(odometer_path, "y_od_m")
    if t_od.size < lam + 1:
        raise TraceFormatError(f"{odometer_path}: need at least {lam + 1} odometer rows")
    if np.any(np.isnan(y_od)):
        bad = od_lines[int(np.flatnonzero(np.isnan(y_od))[0])]
        raise TraceFormatError(f"{odometer_path}: row {bad}: missing odometer value")
    t0 = t_od[0]
    dt = (t_od[-1] - t0) / (t_od.size - 1)
    tol = dt / 2 if tolerance is None else float(tolerance)
    drift = np.abs(t_od - (t0 + dt * np.arange(t_od.size)))
    if np.any(drift > tol):
        k = int(np.argmax(drift > tol))
        raise TraceFormatError(f"{odometer_path}: row {od_lines[k]}: off the uniform odometer grid")

    n = (t_od.size - 1) // lam * lam
    if n < t_od.size - 1:
        log.warning("dropping %d trailing odometer rows past the last GPS epoch", t_od.size - 1 - n)
    m = n // lam
    grid = TimeGrid(m=m, lam=lam, horizon=dt * n)

    t_gps, y_gps, gps_lines = _read_log(gps_path, "y_gps_m")
    gps = np.full(m + 1, np.nan)
    gps_period = lam * dt
    for t, value, line in zip(t_gps, y_gps, gps_lines):
        j = int(round((t - t0) / gps_period))
        if abs(t - t0 - j * gps_period) > tol or j < 0:
            raise AlignmentError(f"GPS time {t!r} s is more than {tol:g} s from any GPS epoch", line)
        if j > m:
            log.warning("row %d: GPS fix past the end of the odometer grid ignored", line)
            continue
        if not math.isnan(gps[j]):
            raise AlignmentError(f"second GPS row for epoch {j * lam}", line)
        gps[j] = value

    truth = None
    if truth_path is not None:
        t_tr, y_tr, tr_lines = _read_log(truth_path, "truth_m")
        truth = np.full(n + 1, np.nan)
        for t, value, line in zip(t_tr, y_tr, tr_lines):
            i = int(round((t - t0) / dt))
            if abs(t - t0 - i * dt) > tol or i < 0:
                raise AlignmentError(f"truth time {t!r} s is off the odometer grid", line)
            if i <= n:
                truth[i] = value
        if np.any(np.isnan(truth)):
            first = int(np.flatnonzero(np.isnan(truth))[0])
            raise TraceFormatError(f"{truth_path}: no truth value for epoch {first}")

    return SensorTrace(
        grid, y_od[: n + 1], gps, truth, seed=None, metadata={"t0_s": float(t0), "source": str(odometer_path)}
    )


# --- estimates and reports -------------------------------------------------


def write_estimate_csv(series: EstimateSeries, grid: TimeGrid, path, manifest: RunManifest):
    times = grid.time(series.epochs)
    nan = [None] * len(series)
    var = series.variances if series.variances is not None else nan
    nb = series.n_backward if series.n_backward is not None else nan
    nf = series.n_forward if series.n_forward is not None else nan
    rows = zip(series.epochs, times, series.estimates, var, nb, nf)
    return _write(path, manifest, ESTIMATE_COLUMNS, rows)


def read_estimate_csv(path):
    """Return ``(manifest, epochs, estimates, variances)`` from an estimate CSV."""
    manifest, header, rows = read_csv(path, required=ESTIMATE_COLUMNS[:3])
    ei, xi, vi = header.index("epoch"), header.index("estimate_m"), header.index("variance_m2")
    epochs = np.array([int(r[ei]) for _, r in rows])
    est = np.array([_parse_float(r[xi], k, "estimate_m") for k, r in rows])
    var = np.array([_parse_float(r[vi], k, "variance_m2") for k, r in rows])
    return manifest, epochs, est, var


def write_report(report, directory, manifest: RunManifest) -> dict:
    """Write ``report.csv`` (per-epoch RMSE), ``bias_variance.csv`` and ``summary.csv``."""
    directory = Path(directory)
    tags = report.tags
    rmse = {t: report.rmse(t) for t in tags}
    rows = (
        [e, report.times[k]] + [rmse[t][k] for t in tags] for k, e in enumerate(report.epochs)
    )
    paths = {
        "report": _write(
            directory / "report.csv", manifest, ["epoch", "time_s"] + [f"{t}_rmse_m" for t in tags], rows
        )
    }
    bias = {t: report.bias(t) for t in tags}
    var = {t: report.variance(t) for t in tags}
    header = ["epoch", "time_s"]
    for t in tags:
        header += [f"{t}_bias_m", f"{t}_var_m2"]
    rows = (
        [e, report.times[k]] + [x for t in tags for x in (bias[t][k], var[t][k])]
        for k, e in enumerate(report.epochs)
    )
    paths["bias_variance"] = _write(directory / "bias_variance.csv", manifest, header, rows)
    paths["summary"] = _write(
        directory / "summary.csv",
        manifest,
        ("estimator", "label", "mean_rmse_m", "max_rmse_m"),
        report.summary(),
    )
    return paths
