"""Command-line experiments writing CSV.

    mmwave-hetnet associate --grid-min 1 --grid-max 1e4 --grid-points 60
    mmwave-hetnet coverage --delta 1e5 1e6 3.16e6 1e7
    mmwave-hetnet optimize --delta 3162277.66
    mmwave-hetnet simulate --trials 100000 --seed 42 --delta 1e6
    mmwave-hetnet sweep --axis beamwidths --values 0.1:0.2 0.2:0.4 --delta 1e6
    mmwave-hetnet validate --trials 10000 --seed 42
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import montecarlo as mc
from .analysis import association_probabilities, rate_coverage
from .config import ConfigError, load_config
from .optimizer import SWEEP_COLUMNS, SearchSpec, optimize_bias, sweep

log = logging.getLogger("mmwave_hetnet")

COMMANDS = ("associate", "coverage", "optimize", "simulate", "sweep", "validate")
VALIDATE_BIASES = (1.0, 10.0, 100.0, 1e3, 1e4)
VALIDATE_DELTAS = (1e5, 1e6, 10 ** 6.5, 1e7)
COVERAGE_TOL = 0.02


@dataclass
class RunManifest:
    command: str
    config_path: str | None = None
    output_path: str = "-"
    seed: int = 42
    trials: int = 10_000
    exact_exclusion: bool = False
    deltas: tuple = ()
    grid: tuple = ()
    axis: str | None = None
    values: tuple = ()
    workers: int = 1
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        if self.command in ("simulate", "validate") and self.trials < 1:
            raise ValueError("--trials must be >= 1")


def fmt(v) -> str:
    """Round-trip decimal text for floats; empty for missing values."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write(path: str, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    if path == "-":
        sys.stdout.write(buf.getvalue())
    else:
        Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="\n")


def _sweep_csv(path, rows) -> int:
    header = list(SWEEP_COLUMNS) + ["error"]
    recs = [r.as_record() for r in rows]
    _write(path, header, ([rec[c] for c in header] for rec in recs))
    return 1 if any(not r.ok for r in rows) else 0


def _cmd_associate(man, cfg):
    delta = man.deltas[0] if man.deltas else None
    return _sweep_csv(man.output_path, sweep(cfg, "bias", man.grid, delta=delta,
                                             exact_exclusion=man.exact_exclusion,
                                             workers=man.workers))


def _cmd_coverage(man, cfg):
    return _sweep_csv(man.output_path, sweep(cfg, "delta", man.deltas,
                                             exact_exclusion=man.exact_exclusion,
                                             workers=man.workers))


def _cmd_sweep(man, cfg):
    if man.axis is None:
        raise ValueError("sweep requires --axis")
    delta = man.deltas[0] if man.deltas else None
    return _sweep_csv(man.output_path, sweep(cfg, man.axis, man.values, delta=delta,
                                             exact_exclusion=man.exact_exclusion,
                                             workers=man.workers))


def _cmd_optimize(man, cfg):
    rows = []
    status = 0
    for delta in man.deltas:
        opt = optimize_bias(cfg, SearchSpec(delta, man.grid),
                            exact_exclusion=man.exact_exclusion, workers=man.workers)
        for a_s, p_c in opt.curve:
            rows.append((delta, a_s, p_c, a_s == opt.a_s_opt, ""))
        for a_s, err in opt.failed:
            rows.append((delta, a_s, None, False, err))
            status = 1
    _write(man.output_path, ["delta", "A_s", "P_c", "optimum", "error"], rows)
    return status


def _cmd_simulate(man, cfg):
    sample = mc.simulate(cfg, man.trials, man.seed, man.workers)
    pm, ps = mc.estimate_association(cfg, man.trials, man.seed)
    rows = [("P_tm", None, pm), ("P_ts", None, ps)]
    for s, est in mc.estimate_scenario_coverage(cfg, 0.0, 0.0, 0, 0, sample=sample).items():
        rows.append((f"Pr_scenario{s}", None, est))
    if man.deltas:
        for d, est in zip(man.deltas, mc.estimate_rate_coverage(
                cfg, list(man.deltas), 0, 0, sample=sample)):
            rows.append(("P_c", d, est))
    _write(man.output_path, ["metric", "delta", "mean", "half_width_95", "trials", "seed"],
           ((name, d, e.mean, e.half_width_95, e.trials, e.seed) for name, d, e in rows))
    return 0


def validation_rows(cfg, trials, seed, deltas=VALIDATE_DELTAS, biases=VALIDATE_BIASES,
                    exact_exclusion=False, workers=1):
    """Analysis-vs-simulation comparison rows.

    Each row: (metric, setting, analysis, monte_carlo, half_width, abs_delta,
    tolerance, passed).  Association uses ``max(0.01, 3 * half_width)``;
    rate coverage uses a fixed 0.02.  Coverage rows for the variant not
    selected by ``exact_exclusion`` are reported with ``passed = None``.
    """
    rows = []
    for bias, pm, ps in mc.estimate_association_sweep(cfg, biases, trials, seed):
        rep = association_probabilities(cfg.with_bias(bias))
        for name, ana, est in (("P_tm", rep.p_assoc_macro, pm), ("P_ts", rep.p_assoc_micro, ps)):
            tol = max(0.01, 3 * est.half_width_95)
            diff = abs(ana - est.mean)
            rows.append((name, f"A_s={bias!r}", ana, est.mean, est.half_width_95, diff, tol,
                         diff <= tol))
    sample = mc.simulate(cfg, trials, seed, workers)
    ests = mc.estimate_rate_coverage(cfg, list(deltas), 0, 0, sample=sample)
    for d, est in zip(deltas, ests):
        for variant in (False, True):
            ana = rate_coverage(cfg, d, exact_exclusion=variant).p_c
            diff = abs(ana - est.mean)
            label = "P_c_exact_exclusion" if variant else "P_c"
            judged = diff <= COVERAGE_TOL if variant == exact_exclusion else None
            rows.append((label, f"delta={d!r}", ana, est.mean, est.half_width_95, diff,
                         COVERAGE_TOL, judged))
    return rows


def _cmd_validate(man, cfg):
    rows = validation_rows(cfg, man.trials, man.seed, man.deltas or VALIDATE_DELTAS,
                           exact_exclusion=man.exact_exclusion, workers=man.workers)
    header = ["metric", "setting", "analysis", "monte_carlo", "half_width_95",
              "abs_delta", "tolerance", "pass"]
    _write(man.output_path, header,
           (r[:-1] + ("" if r[-1] is None else ("pass" if r[-1] else "FAIL"),) for r in rows))
    failed = [r for r in rows if r[-1] is False]
    for r in failed:
        log.error("validation failed: %s %s delta=%.4g > %.4g", r[0], r[1], r[5], r[6])
    return 1 if failed else 0


_HANDLERS = {
    "associate": _cmd_associate,
    "coverage": _cmd_coverage,
    "optimize": _cmd_optimize,
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
    "validate": _cmd_validate,
}


def run(man: RunManifest) -> int:
    """Execute a manifest; returns the process exit status."""
    try:
        cfg = load_config(man.config_path)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return 2
    try:
        return _HANDLERS[man.command](man, cfg)
    except (ValueError, ArithmeticError) as exc:
        log.error("%s failed: %s", man.command, exc)
        return 1


def _parse_values(axis, raw):
    if axis == "beamwidths":
        out = []
        for item in raw:
            parts = item.split(":")
            if len(parts) != 2:
                raise argparse.ArgumentTypeError(
                    f"beamwidth value {item!r} must look like theta_m:theta_s")
            out.append((float(parts[0]), float(parts[1])))
        return tuple(out)
    return tuple(float(v) for v in raw)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mmwave-hetnet",
                                description="Rate coverage and bias optimization for a "
                                            "two-tier mmWave HetNet.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", default=None,
                   help="YAML network config (default: bundled reference network)")
    p.add_argument("--out", default="-", help="output CSV path ('-' for stdout)")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--delta", type=float, nargs="+", default=None,
                   help="rate threshold(s) in bit/s")
    p.add_argument("--grid-min", type=float, default=1.0)
    p.add_argument("--grid-max", type=float, default=1e4)
    p.add_argument("--grid-points", type=int, default=60)
    p.add_argument("--axis", choices=("bias", "delta", "lambda_s", "beamwidths"))
    p.add_argument("--values", nargs="+", default=(),
                   help="sweep values; beamwidths as theta_m:theta_s")
    p.add_argument("--exact-exclusion", action="store_true",
                   help="exclude the association disk of the non-serving tier")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "optimize" and not args.delta:
        args.delta = [10 ** 6.5]
    if args.command == "coverage" and not args.delta:
        parser.error("coverage requires --delta")
    if args.grid_points < 1 or not (1 <= args.grid_min <= args.grid_max):
        parser.error("grid requires 1 <= --grid-min <= --grid-max and --grid-points >= 1")
    grid = tuple(float(v) for v in np.logspace(math.log10(args.grid_min),
                                               math.log10(args.grid_max), args.grid_points))
    try:
        values = _parse_values(args.axis, args.values) if args.axis else ()
        if args.command == "sweep" and args.axis is None:
            parser.error("sweep requires --axis")
        if args.command == "sweep" and not values:
            values = grid if args.axis == "bias" else ()
            if not values:
                parser.error("sweep requires --values for this axis")
        man = RunManifest(command=args.command, config_path=args.config,
                          output_path=args.out, seed=args.seed, trials=args.trials,
                          exact_exclusion=args.exact_exclusion,
                          deltas=tuple(args.delta or ()), grid=grid, axis=args.axis,
                          values=values, workers=args.workers)
    except (ValueError, argparse.ArgumentTypeError) as exc:
        parser.error(str(exc))
    return run(man)


if __name__ == "__main__":
    sys.exit(main())
