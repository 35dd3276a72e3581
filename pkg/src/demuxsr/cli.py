"""Command-line entry point.

Subcommands: ``scan``, ``fig2``, ``sweep``, ``qubit``, ``budget``, ``fisher``.
Exit codes: 0 success, 2 config error, 3 numerical/model error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from . import __version__, experiments, inference
from .config import ExperimentConfig, default_config, load_config
from .errors import ConfigError, DemuxError
from .output import csv_text, json_text, write_text

log = logging.getLogger("demuxsr")

EXIT_OK, EXIT_CONFIG, EXIT_MODEL, EXIT_IO = 0, 2, 3, 4


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", type=Path, default=default, help="YAML experiment config")
    parser.add_argument("--seed", type=int, default=default, help="master seed, overrides the config")
    parser.add_argument("--out", type=Path, default=default, help="output directory")
    parser.add_argument("--expected-counts", action="store_true",
                        default=argparse.SUPPRESS if suppress else False,
                        help="use expected instead of sampled counts (noiseless mode)")
    parser.add_argument("--threads", type=int, default=argparse.SUPPRESS if suppress else 1,
                        help="worker threads; never changes results")
    parser.add_argument("--repetitions", type=int, default=default,
                        help="override the repetition count of the command")
    parser.add_argument("--timing", action="store_true", default=argparse.SUPPRESS if suppress else False,
                        help="record wall-clock timing in the manifest")
    parser.add_argument("-v", "--verbose", action="store_true",
                        default=argparse.SUPPRESS if suppress else False)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="demuxsr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in [
        ("scan", "one demultiplexed scan and its parabola fit"),
        ("fig2", "repeated scans and the histogram of fitted I_C"),
        ("sweep", "demultiplexing vs direct-imaging precision sweep"),
        ("qubit", "qubit-model report (density matrix, QFI, bounds)"),
        ("budget", "optimal centroid/demultiplexing photon split"),
        ("fisher", "per-photon Fisher information of both strategies"),
    ]:
        p = sub.add_parser(name, help=text)
        _global_flags(p, suppress=True)
        if name == "qubit":
            p.add_argument("--eps", type=float)
            p.add_argument("--theta", type=float)
            p.add_argument("-n", type=int)
        if name == "fisher":
            p.add_argument("-d", type=float)
            p.add_argument("-n", type=int)
    return parser


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else default_config()
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def _metadata(cfg: ExperimentConfig, command: str) -> dict:
    return {"command": command, "version": __version__, "config_hash": cfg.hash(), "seed": cfg.seed}


def _write_manifest(out: Path, cfg, command, summary, started, args) -> None:
    manifest = {"config": cfg.to_dict(), "summary": summary}
    if args.timing:
        manifest["timing"] = {"wall_seconds": time.perf_counter() - started}
    write_text(out / f"manifest_{command}.json", json_text(manifest, _metadata(cfg, command)))


def cmd_scan(cfg, args, out, meta):
    result = experiments.run_scan(cfg, expected_counts=args.expected_counts)
    write_text(out / "scan.csv", result.dataset.to_csv(meta))
    write_text(out / "scan_fit.json", json_text(result.fit.to_dict(), meta))
    print(f"I_C = {result.fit.i_c_hat:.6g} +/- {result.fit.std_errors[0]:.2g}, "
          f"x_C = {result.fit.x_c_hat:.6g} +/- {result.fit.std_errors[1]:.2g}")
    return result.fit.to_dict()


def cmd_fig2(cfg, args, out, meta):
    res = experiments.replicate_fig2(cfg, threads=args.threads, repetitions=args.repetitions,
                                     expected_counts=args.expected_counts)
    rows = [(float(a), float(b), int(c)) for a, b, c in zip(res.bin_edges[:-1], res.bin_edges[1:], res.counts)]
    write_text(out / "fig2_histogram.csv", csv_text(["bin_left", "bin_right", "count"], rows, meta))
    values = [(k, float(a), float(b)) for k, (a, b) in enumerate(zip(res.i_c_values, res.x_c_values))]
    write_text(out / "fig2_values.csv", csv_text(["repetition", "i_c_hat", "x_c_hat"], values, meta))
    summary = res.summary()
    write_text(out / "fig2_summary.json", json_text(summary, meta))
    print(f"mean I_C = {res.mean:.6g} +/- {res.sem:.2g} over {res.i_c_values.size} repetitions")
    return summary


def cmd_sweep(cfg, args, out, meta):
    rows = experiments.sweep_precision(cfg, repetitions=args.repetitions)
    cols = ["d", "n_photons", "demux_mc_std", "demux_crlb", "direct_crlb", "direct_asymptote", "advantage"]
    write_text(out / "sweep.csv", csv_text(cols, rows, meta))
    for r in rows:
        print(f"d={r['d']:<6g} N={r['n_photons']:<8d} demux={r['demux_mc_std']:.4g} "
              f"(CRLB {r['demux_crlb']:.4g})  direct={r['direct_crlb']:.4g}")
    return {"cells": len(rows)}


def cmd_qubit(cfg, args, out, meta):
    q = cfg["qubit"]
    eps = q["eps"] if args.eps is None else args.eps
    theta = q["theta"] if args.theta is None else args.theta
    n = q["n"] if args.n is None else args.n
    report = experiments.report_qubit(eps, theta, n)
    write_text(out / "qubit.json", json_text(report, meta))
    print(json_text(report, meta), end="")
    return {"eps": eps, "theta": theta, "qfi": report["qfi"]}


def cmd_budget(cfg, args, out, meta):
    b = cfg["budget"]
    reps = b["repetitions"] if args.repetitions is None else args.repetitions
    res = inference.optimize_budget(int(b["n_total"]), cfg.ensemble, cfg.sigma, int(reps), cfg.seed,
                                    threads=args.threads, alpha_points=int(b["alpha_points"]))
    rows = [(p.alpha, p.n_centroid, p.rmse, p.rmse_stderr) for p in res.curve]
    write_text(out / "budget.csv", csv_text(["alpha", "n_centroid", "rmse", "rmse_stderr"], rows, meta))
    summary = {
        "n_total": res.plan.n_total,
        "n_centroid": res.plan.n_centroid,
        "alpha": res.plan.alpha,
        "rmse": res.rmse,
        "rmse_stderr": res.rmse_stderr,
        "d_true": res.d_true,
    }
    write_text(out / "budget.json", json_text(summary, meta))
    print(f"best split n = {res.plan.n_centroid} (alpha = {res.plan.alpha:.3f}), RMSE = {res.rmse:.4g}")
    return summary


def cmd_fisher(cfg, args, out, meta):
    f = cfg["fisher"]
    d = f["d"] if args.d is None else args.d
    n = f["n"] if args.n is None else args.n
    report = experiments.report_fisher(d, cfg.sigma, n)
    write_text(out / "fisher.json", json_text(report, meta))
    for key, value in report.items():
        print(f"{key:>26}: {value:.6g}")
    return report


COMMANDS = {
    "scan": cmd_scan, "fig2": cmd_fig2, "sweep": cmd_sweep,
    "qubit": cmd_qubit, "budget": cmd_budget, "fisher": cmd_fisher,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    started = time.perf_counter()
    try:
        cfg = _load(args)
        out = args.out or Path(cfg["output_path"])
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        meta = _metadata(cfg, args.command)
        summary = COMMANDS[args.command](cfg, args, out, meta)
        _write_manifest(out, cfg, args.command, summary, started, args)
        log.info("%s finished in %.2f s", args.command, time.perf_counter() - started)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (DemuxError, ValueError, ArithmeticError) as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
