"""Command-line experiment runner: one JSON config per experiment, eight
subcommands, deterministic CSV/JSON outputs stamped with the config hash and
seed.

Exit codes: 0 success, 1 configuration or validation problem (including
bad usage), 2 numerical failure during the run.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from multiprocessing import Pool

from .attractor import section_sample, summarize_sections, write_scan_csv
from .baseflow import sample_base
from .bifurcation import pitchfork_report, sweep, write_sweep_csv
from .chaos import fiber_chaos_scan, write_chaos_csv
from .cocycle import (classify_boundedness, cocycle_trace, format_exponent_report,
                      lyapunov_exponent, write_trace_csv)
from .coeffs import calibrate_zero_exponent
from .config import VERSION, ExperimentConfig, validate_config
from .errors import NumericalError, ValidationError, ConfigurationError
from .solver import first_eigenpair


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; the contract here is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="qprd",
                     description="quasi-periodic reaction-diffusion experiments")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", required=True,
                        help="path to the experiment JSON config")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry (dotted path, JSON value)")
    common.add_argument("--out", default=None,
                        help="output file (default: derived from output.dir)")
    common.add_argument("--jobs", type=int, default=1,
                        help="worker processes for sample scans")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name, descr in (
            ("eigen", "first eigenpair of the stationary operator"),
            ("lyapunov", "upper Lyapunov exponent of the linear part"),
            ("trace", "log-multiplier trace CSV"),
            ("classify", "bounded/unbounded call at the reference point"),
            ("pullback", "attractor section scan CSV"),
            ("chaos", "Li-Yorke pair scan CSV"),
            ("bifurcate", "gamma sweep diagram CSV"),
            ("calibrate", "shift the linear part to zero exponent"),
    ):
        sub.add_parser(name, parents=[common], help=descr)
    return parser


def _emit(payload: str, out_path) -> None:
    print(payload)
    if out_path:
        _ensure_dir(out_path)
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(payload + "\n")


def _ensure_dir(path) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def _default_out(cfg: ExperimentConfig, name: str) -> str:
    os.makedirs(cfg.outdir, exist_ok=True)
    return os.path.join(cfg.outdir, name)


def _stamp(cfg: ExperimentConfig, extra: dict) -> str:
    out = {"config_hash": cfg.hash, "seed": cfg.seed}
    out.update(extra)
    return json.dumps(out, sort_keys=True)


def _section_worker(job):
    p, prob, acfg = job
    return section_sample(p, prob, acfg)


def _parallel_map(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with Pool(processes=min(jobs, len(items))) as pool:
        return pool.map(fn, items)


def _scan(cfg: ExperimentConfig, jobs: int):
    points = sample_base(cfg.n_samples, cfg.seed, cfg.omega)
    return _parallel_map(_section_worker,
                         [(p, cfg.prob, cfg.attractor) for p in points], jobs)


def _summary_payload(summary: dict) -> dict:
    out = dict(summary)
    out["crosstab"] = {f"{cls}|{band}": n
                       for (cls, band), n in summary["crosstab"].items() if n}
    return out


def _cmd_eigen(cfg: ExperimentConfig, args) -> int:
    gamma0, e0 = first_eigenpair(cfg.grid, cfg.bc)
    print(f"gamma0={gamma0:.17g}")
    print(_stamp(cfg, {"bc": cfg.bc.kind, "n_cells": cfg.grid.n_cells}))
    if args.out:
        _ensure_dir(args.out)
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(f"# version={VERSION} config_hash={cfg.hash} seed={cfg.seed}\n")
            fh.write("x,e0\n")
            for x, v in zip(cfg.grid.nodes, e0):
                fh.write(f"{x:.12g},{v:.12g}\n")
        print(f"wrote {args.out}")
    return 0


def _cmd_lyapunov(cfg: ExperimentConfig, args) -> int:
    est = lyapunov_exponent(cfg.point, cfg.h_eff, cfg.bc,
                            cfg.cocycle.T_exponent, cfg.cocycle)
    report = json.loads(format_exponent_report(est))
    _emit(_stamp(cfg, report), args.out)
    return 0


def _cmd_trace(cfg: ExperimentConfig, args) -> int:
    tr = cocycle_trace(cfg.point, cfg.h_eff, cfg.bc,
                       cfg.cocycle.T_exponent, cfg.cocycle)
    path = args.out or _default_out(cfg, "trace.csv")
    _ensure_dir(path)
    write_trace_csv(tr, path, version=VERSION, config_hash=cfg.hash, seed=cfg.seed)
    print(f"wrote {path}")
    return 0


def _cmd_classify(cfg: ExperimentConfig, args) -> int:
    verdict = classify_boundedness(cfg.point, cfg.h_eff, cfg.bc, cfg.cocycle)
    _emit(_stamp(cfg, {"class": verdict, "theta": list(cfg.point.theta),
                       "T_max": cfg.cocycle.T_max,
                       "M_bound": cfg.cocycle.M_bound}), args.out)
    return 0


def _cmd_pullback(cfg: ExperimentConfig, args) -> int:
    _require_g(cfg)
    samples = _scan(cfg, args.jobs)
    summary = summarize_sections(samples, cfg.attractor)
    path = args.out or _default_out(cfg, "pullback.csv")
    _ensure_dir(path)
    write_scan_csv(samples, path, version=VERSION, config_hash=cfg.hash,
                   seed=cfg.seed)
    print(_stamp(cfg, _summary_payload(summary)))
    print(f"wrote {path}")
    return 0


def _cmd_chaos(cfg: ExperimentConfig, args) -> int:
    _require_g(cfg)
    samples = _scan(cfg, args.jobs)
    result = fiber_chaos_scan(samples, cfg.prob, cfg.chaos)
    path = args.out or _default_out(cfg, "chaos.csv")
    _ensure_dir(path)
    write_chaos_csv(result, path, version=VERSION, config_hash=cfg.hash,
                    seed=cfg.seed)
    print(_stamp(cfg, {
        "fraction": result.fraction if math.isfinite(result.fraction) else None,
        "n_tested": result.n_tested,
        "n_flagged": result.n_flagged,
        "threshold_lo": result.threshold_lo,
        "threshold_hi": result.threshold_hi
        if math.isfinite(result.threshold_hi) else None,
    }))
    print(f"wrote {path}")
    return 0


def _cmd_bifurcate(cfg: ExperimentConfig, args) -> int:
    _require_g(cfg)
    records = sweep(cfg.gammas, cfg.prob, cfg.point, cfg.attractor)
    path = args.out or _default_out(cfg, "bifurcation.csv")
    _ensure_dir(path)
    write_sweep_csv(records, path, version=VERSION, config_hash=cfg.hash,
                    seed=cfg.seed)
    print(_stamp(cfg, pitchfork_report(records)))
    print(f"wrote {path}")
    return 0


def _cmd_calibrate(cfg: ExperimentConfig, args) -> int:
    shifted = calibrate_zero_exponent(cfg.h_eff, cfg.cocycle)
    _emit(_stamp(cfg, {
        "constant_shift_before": cfg.h_eff.constant_shift,
        "constant_shift_after": shifted.constant_shift,
        "applied_delta": shifted.constant_shift - cfg.h_eff.constant_shift,
        "T_exponent": cfg.cocycle.T_exponent,
    }), args.out)
    return 0


def _require_g(cfg: ExperimentConfig) -> None:
    if cfg.g is None:
        raise ConfigurationError("this subcommand needs the nonlinearity; set g")


_DISPATCH = {
    "eigen": _cmd_eigen,
    "lyapunov": _cmd_lyapunov,
    "trace": _cmd_trace,
    "classify": _cmd_classify,
    "pullback": _cmd_pullback,
    "chaos": _cmd_chaos,
    "bifurcate": _cmd_bifurcate,
    "calibrate": _cmd_calibrate,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        print("qprd: error: a subcommand is required", file=sys.stderr)
        return 1
    cfg, errors, warnings = validate_config(args.config, args.set)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    if cfg is None:
        for e in errors:
            print(f"error: {e}", file=sys.stderr)
        return 1
    try:
        return _DISPATCH[args.command](cfg, args)
    except (ConfigurationError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
