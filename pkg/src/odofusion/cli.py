"""Command-line front end: ``odofusion <command> [options]``.

Commands: simulate, ingest, estimate, evaluate, thresholds, variance.
Exit status 0 on success, 2 for usage/configuration/input errors, 3 for
numerical failures.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path

from . import __version__
from .csvio import (
    RunManifest,
    fmt,
    ingest_trace,
    read_csv,
    read_trace_csv,
    write_estimate_csv,
    write_report,
    write_trace_csv,
)
from .errors import ConfigurationError, ExperimentError, FusionError, NumericalError
from .estimators import EstimatorSpec, parse_roster, run_estimator
from .evaluation import FAMILIES, FULL_ROSTER, ExperimentConfig, family_variance, find_threshold_N, run_monte_carlo
from .model import NoiseSpec, TimeGrid, constant_speed_trajectory, simulate_sensors

log = logging.getLogger("odofusion")

OUTPUT_DIR_ENV = "ODOFUSION_OUTPUT_DIR"

#: Flat configuration keys with their defaults (the simulation setup of the
#: comparison tables).
DEFAULTS = {
    "sigma_od": "0.05",
    "sigma_gps": "3",
    "lambda": "10",
    "f_gps": "1",
    "horizon_s": "300",
    "distance_m": "4000",
    "sims": "100",
    "seed": "42",
    "roster": ",".join(s.kind if s.N is None else f"{s.kind}:{s.N}" for s in FULL_ROSTER),
    "workers": "1",
    # noise assumed by the estimators; empty means the simulated noise
    "model_sigma_od": "",
    "model_sigma_gps": "",
}
PRESETS = {
    "paper-sim": {},
    "zero-noise": {
        "sigma_od": "0",
        "sigma_gps": "0",
        "sims": "1",
        "model_sigma_od": "0.05",
        "model_sigma_gps": "3",
    },
}


class UsageError(FusionError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def load_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip().replace("-", "_")
            if not sep or not key:
                raise ConfigurationError(f"{path}:{lineno}: expected key = value")
            if key not in DEFAULTS:
                raise ConfigurationError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = value.strip()
    return values


def resolve_config(args, base=None) -> dict:
    """Defaults < trace manifest (``base``) < preset/config file < CLI flags."""
    cfg = dict(DEFAULTS)
    if base:
        cfg.update({k: str(v) for k, v in base.items() if k in DEFAULTS})
    source = getattr(args, "config", None)
    if source:
        if source in PRESETS:
            cfg.update(PRESETS[source])
        else:
            cfg.update(load_config_file(source))
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = str(value)
    return cfg


def _num(cfg, key, kind=float):
    try:
        value = kind(cfg[key])
    except ValueError:
        raise ConfigurationError(f"{key} = {cfg[key]!r} is not a valid {kind.__name__}") from None
    return value


def noise_from(cfg) -> NoiseSpec:
    return NoiseSpec(_num(cfg, "sigma_od"), _num(cfg, "sigma_gps"))


def model_noise_from(cfg) -> NoiseSpec:
    """Noise for estimator weights: ``model_sigma_*`` when set, else ``sigma_*``."""
    od = cfg["model_sigma_od"] or cfg["sigma_od"]
    gps = cfg["model_sigma_gps"] or cfg["sigma_gps"]
    return noise_from({"sigma_od": od, "sigma_gps": gps})


def grid_from(cfg) -> TimeGrid:
    lam = _num(cfg, "lambda", int)
    f_gps = _num(cfg, "f_gps")
    return TimeGrid.from_frequencies(lam * f_gps, f_gps, _num(cfg, "horizon_s"))


def experiment_from(cfg) -> ExperimentConfig:
    return ExperimentConfig(
        grid=grid_from(cfg),
        noise=noise_from(cfg),
        estimator_noise=model_noise_from(cfg),
        distance=_num(cfg, "distance_m"),
        n_sims=_num(cfg, "sims", int),
        roster=parse_roster(cfg["roster"]),
        seed=_num(cfg, "seed", int),
    )


def _out_path(path, default_name):
    if path:
        return Path(path)
    return Path(os.environ.get(OUTPUT_DIR_ENV, ".")) / default_name


def _manifest_config(cfg, keys):
    return {k: cfg[k] for k in keys}


# --- commands --------------------------------------------------------------


def cmd_simulate(args):
    cfg = resolve_config(args)
    grid, noise = grid_from(cfg), noise_from(cfg)
    seed = _num(cfg, "seed", int)
    traj = constant_speed_trajectory(grid, _num(cfg, "distance_m"))
    trace = simulate_sensors(traj, noise, grid, seed)
    out = _out_path(args.output, "trace.csv")
    keys = ("sigma_od", "sigma_gps", "model_sigma_od", "model_sigma_gps", "lambda", "f_gps", "horizon_s",
            "distance_m", "seed")
    manifest = RunManifest("simulate", _manifest_config(cfg, keys), outputs={"trace": str(out)}, seed=seed)
    write_trace_csv(trace, out, manifest)
    print(out)


def cmd_ingest(args):
    lam = args.lam if args.lam is not None else int(DEFAULTS["lambda"])
    trace = ingest_trace(args.odometer, args.gps, args.truth, lam=lam, tolerance=args.tolerance)
    out = _out_path(args.output, "trace.csv")
    inputs = {"odometer": args.odometer, "gps": args.gps, "truth": args.truth}
    manifest = RunManifest(
        "ingest", {"lambda": lam, "tolerance_s": args.tolerance}, inputs=inputs, outputs={"trace": str(out)}
    )
    write_trace_csv(trace, out, manifest)
    print(out)


def cmd_estimate(args):
    trace = read_trace_csv(args.trace, lam=args.lam)
    manifest_in, _, _ = read_csv(args.trace)
    base = manifest_in.config if manifest_in else None
    cfg = resolve_config(args, base)
    noise = model_noise_from(cfg)
    spec = EstimatorSpec(args.estimator, args.N)
    epochs = trace.grid.gps_epochs() if args.epochs == "gps" else None
    series = run_estimator(spec, trace, noise, epochs)
    out = _out_path(args.output, f"estimate_{spec.tag}.csv")
    manifest = RunManifest(
        "estimate",
        {"estimator": spec.tag, "sigma_od": noise.sigma_od, "sigma_gps": noise.sigma_gps,
         "lambda": trace.lam, "epochs": args.epochs},
        inputs={"trace": str(args.trace)},
        outputs={"estimate": str(out)},
        seed=trace.seed,
    )
    write_estimate_csv(series, trace.grid, out, manifest)
    print(out)


def cmd_evaluate(args):
    cfg = resolve_config(args)
    config = experiment_from(cfg)
    report = run_monte_carlo(config, workers=_num(cfg, "workers", int))
    directory = _out_path(args.output_dir, "")
    manifest = RunManifest("evaluate", config.to_dict(), outputs={"dir": str(directory)}, seed=config.seed)
    write_report(report, directory, manifest)
    width = max(len(label) for _, label, _, _ in report.summary())
    print(f"{'estimator':<{width}}  mean RMSE (m)  max RMSE (m)")
    for _, label, mean, peak in report.summary():
        print(f"{label:<{width}}  {mean:13.2f}  {peak:12.2f}")


def cmd_thresholds(args):
    cfg = resolve_config(args)
    noise, lam = model_noise_from(cfg), _num(cfg, "lambda", int)
    for kind in FAMILIES:
        print(f"{kind} {find_threshold_N(kind, noise, lam, args.criterion, args.max_n)}")


def cmd_variance(args):
    cfg = resolve_config(args)
    noise, lam = model_noise_from(cfg), _num(cfg, "lambda", int)
    phases = range(lam) if args.phase is None else [args.phase]
    header = ["N", "d"] + [f"{k}_std_m" for k in FAMILIES]
    lines = [",".join(header)]
    for N in range(1, args.max_n + 1):
        for d in phases:
            stds = [math.sqrt(family_variance(k, N, d, lam, noise)) for k in FAMILIES]
            lines.append(",".join([str(N), str(d)] + [fmt(s) for s in stds]))
    text = "\n".join(lines) + "\n"
    if args.output:
        keys = ("sigma_od", "sigma_gps", "model_sigma_od", "model_sigma_gps", "lambda")
        manifest = RunManifest("variance", _manifest_config(cfg, keys))
        Path(args.output).write_text(manifest.to_line() + "\n" + text)
        print(args.output)
    else:
        sys.stdout.write(text)


def _noise_flags(p, model_only=False, lam=True):
    # analysis-only commands take the noise the estimators assume
    prefix = "model_" if model_only else ""
    p.add_argument("--sigma-od", dest=prefix + "sigma_od", type=float, help="odometer step std-dev (m)")
    p.add_argument("--sigma-gps", dest=prefix + "sigma_gps", type=float, help="GPS std-dev (m)")
    if not model_only:
        p.add_argument("--model-sigma-od", dest="model_sigma_od", type=float,
                       help="odometer std-dev assumed by the estimators (default: --sigma-od)")
        p.add_argument("--model-sigma-gps", dest="model_sigma_gps", type=float,
                       help="GPS std-dev assumed by the estimators (default: --sigma-gps)")
    if lam:
        p.add_argument("--lambda", dest="lambda", type=int, help="odometer/GPS frequency ratio")


def _grid_flags(p):
    p.add_argument("--f-gps", dest="f_gps", type=float, help="GPS rate (Hz)")
    p.add_argument("--horizon", dest="horizon_s", type=float, help="trip duration (s)")
    p.add_argument("--distance", dest="distance_m", type=float, help="trip length (m)")
    p.add_argument("--seed", type=int, help="master RNG seed")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="odofusion", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"odofusion {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate a sensor trace")
    p.add_argument("--config", help="preset name or key=value file")
    _noise_flags(p)
    _grid_flags(p)
    p.add_argument("-o", "--output", help="trace CSV path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ingest", help="build a trace CSV from odometer/GPS logs")
    p.add_argument("--odometer", required=True)
    p.add_argument("--gps", required=True)
    p.add_argument("--truth")
    p.add_argument("--lambda", dest="lam", type=int)
    p.add_argument("--tolerance", type=float, help="GPS snapping tolerance (s)")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("estimate", help="run one estimator over a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--estimator", required=True)
    p.add_argument("-N", "--N", dest="N", type=int, help="window size for windowed estimators")
    p.add_argument("--epochs", choices=("all", "gps"), default="all")
    p.add_argument("--config", help="preset name or key=value file")
    _noise_flags(p, model_only=True, lam=False)
    p.add_argument("--lambda", dest="lam", type=int, help="override the trace's lambda")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("evaluate", help="Monte-Carlo RMSE experiment")
    p.add_argument("--config", help="preset name or key=value file")
    _noise_flags(p)
    _grid_flags(p)
    p.add_argument("--sims", type=int)
    p.add_argument("--roster", help="comma list of kind or kind:N")
    p.add_argument("--workers", type=int)
    p.add_argument("-o", "--output-dir", dest="output_dir")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("thresholds", help="smallest window sizes near the asymptotic accuracy")
    p.add_argument("--config", help="preset name or key=value file")
    _noise_flags(p, model_only=True)
    p.add_argument("--criterion", type=float, default=0.1, help="std-dev gap (m)")
    p.add_argument("--max-n", dest="max_n", type=int, default=10_000)
    p.set_defaults(func=cmd_thresholds)

    p = sub.add_parser("variance", help="tabulate analytic std-devs against N and phase")
    p.add_argument("--config", help="preset name or key=value file")
    _noise_flags(p, model_only=True)
    p.add_argument("--max-n", dest="max_n", type=int, default=40)
    p.add_argument("--phase", type=int, help="single phase d (default: all)")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_variance)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"odofusion: error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (NumericalError, ExperimentError) as exc:
        print(f"odofusion: numerical failure: {exc}", file=sys.stderr)
        return 3
    except (FusionError, OSError) as exc:
        print(f"odofusion: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
