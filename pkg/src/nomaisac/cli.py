"""Command-line entry point: ``nomaisac <subcommand> [options]``."""
from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import harness
from .rates import SCHEMES
from .scenario import SystemConfig, dump_config, load_config

log = logging.getLogger("nomaisac")


def parse_eps(text: str) -> list[float]:
    """``a,b,c`` is an explicit list; ``lo:hi:n`` is ``n`` log-spaced values."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError("range must look like lo:hi:n")
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
        if lo <= 0 or hi <= 0 or n < 1:
            raise argparse.ArgumentTypeError("log range needs positive bounds and n >= 1")
        return [float(x) for x in np.geomspace(lo, hi, n)]
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    if not vals:
        raise argparse.ArgumentTypeError("empty eps list")
    return vals


def parse_schemes(text: str) -> list[str]:
    out = [s.strip() for s in text.split(",") if s.strip()]
    bad = [s for s in out if s not in SCHEMES]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown scheme(s) {bad}; choose from {list(SCHEMES)}")
    return out


def parse_ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def seed_type(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI file with a [system] section")
    common.add_argument("--profile", choices=sorted(harness.PROFILES), default="ci",
                        help="size preset applied before the config file (default: ci)")
    common.add_argument("--seed", type=seed_type, help="master seed (overrides the config)")
    common.add_argument("--schemes", type=parse_schemes, help="comma-separated schemes")
    common.add_argument("--eps", type=parse_eps, help="list a,b,c or log range lo:hi:n")
    common.add_argument("--q", type=int, help="number of multicast streams")
    common.add_argument("--realizations", type=int, help="channel realizations to average over")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("--plot", action="store_true", help="also render SVG figures")
    common.add_argument("--timing", action="store_true", help="fill the wall-time column (breaks byte-identity)")
    common.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = argparse.ArgumentParser(prog="nomaisac", description="NOMA-inspired ISAC beamforming experiments")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("tradeoff", parents=[common], help="throughput vs matching-loss sweep")
    bp = sub.add_parser("beampattern", parents=[common], help="transmit beampatterns at one eps")
    bp.add_argument("--target-throughput", type=float, help="bisect eps per scheme to match this throughput")
    qs = sub.add_parser("q-sweep", parents=[common], help="NOMA throughput against Q")
    qs.add_argument("--q-values", type=parse_ints, help="comma-separated Q values (default 1..N)")
    su = sub.add_parser("single-user", parents=[common], help="single-user trade-off of the three programs")
    su.add_argument("--points", type=int, default=8, help="grid points when --eps is not given")
    su.add_argument("--pattern-rate", type=float, help="rate for the beampattern comparison")
    sub.add_parser("convergence", parents=[common], help="per-iteration trace of one solve")
    oc = sub.add_parser("oracle-check", parents=[common], help="N=2 grid-search oracle vs the convex program")
    oc.add_argument("--resolution", type=int, default=200, help="grid points per axis")
    return p


def resolve_config(args) -> SystemConfig:
    base = SystemConfig().with_(**harness.PROFILES[args.profile])
    cfg = load_config(args.config, base) if args.config else base
    if args.seed is not None:
        cfg = cfg.with_(rng_seed=args.seed)
    if args.q is not None:
        cfg = cfg.with_(q_streams=args.q)
    return cfg


def _write(path: Path, text: str):
    path.write_text(text)
    log.info("wrote %s", path)


def _maybe_plot(args, fn, src: Path, name: str):
    if not args.plot:
        return
    try:
        fn(src, args.out / name)
    except ImportError:
        log.warning("matplotlib is not installed; skipping %s", name)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    cfg = resolve_config(args)
    args.out.mkdir(parents=True, exist_ok=True)
    _write(args.out / "config.ini", dump_config(cfg))
    n_real = args.realizations or harness.PROFILE_REALIZATIONS[args.profile]
    failed = False
    from . import plots

    if args.command == "tradeoff":
        schemes = args.schemes or ["noma", "ideal_senic", "no_senic"]
        eps = args.eps or list(harness.DEFAULT_EPS)
        curve = harness.run_tradeoff(cfg, schemes, eps, n_real, workers=args.workers)
        _write(args.out / "tradeoff.csv", curve.to_csv(timing=args.timing))
        _write(args.out / "tradeoff_avg.csv", curve.averaged_csv())
        failed = bool(curve.failures())
        _maybe_plot(args, plots.plot_tradeoff, args.out / "tradeoff_avg.csv", "tradeoff.svg")

    elif args.command == "beampattern":
        schemes = args.schemes or ["noma", "ideal_senic", "no_senic"]
        eps = (args.eps or [1e-3])[0]
        res = harness.run_beampattern(cfg, schemes, eps, args.target_throughput)
        _write(args.out / "beampattern.csv", res.to_csv())
        _write(args.out / "beampattern_meta.csv", res.meta_csv())
        failed = any(str(m[4]).split("/")[0] in harness.FAILURE_STATUSES for m in res.meta)
        _maybe_plot(args, plots.plot_beampattern, args.out / "beampattern.csv", "beampattern.svg")

    elif args.command == "q-sweep":
        qv = args.q_values or list(range(1, cfg.n_antennas + 1))
        eps = (args.eps or [1e-3])[0]
        res = harness.run_q_sweep(cfg, qv, eps, n_real, workers=args.workers)
        _write(args.out / "qsweep.csv", res.to_csv())
        _write(args.out / "qsweep_records.csv", res.records_csv())
        failed = any(r[4] in harness.FAILURE_STATUSES for r in res.records)
        _maybe_plot(args, plots.plot_q_sweep, args.out / "qsweep.csv", "qsweep.svg")

    elif args.command == "single-user":
        run = harness.run_single_user(cfg, args.eps, points=args.points, pattern_rate=args.pattern_rate)
        _write(args.out / "tradeoff.csv", run.curve.to_csv(timing=args.timing))
        _write(args.out / "beampattern.csv", run.beampattern.to_csv())
        failed = bool(run.curve.failures())
        print(f"max relative loss gap across programs: {run.max_loss_gap:.3e}")
        _maybe_plot(args, plots.plot_single_user, args.out / "tradeoff.csv", "single_user.svg")
        _maybe_plot(args, plots.plot_beampattern, args.out / "beampattern.csv", "beampattern.svg")

    elif args.command == "convergence":
        scheme = (args.schemes or ["noma"])[0]
        eps = (args.eps or [1e-3])[0]
        trace = harness.run_convergence(cfg, eps, scheme)
        _write(args.out / "convergence.csv", harness.convergence_csv(trace))
        _write(args.out / "trace.jsonl", trace.to_jsonl() + "\n" if args.timing else _strip_timing(trace))
        failed = trace.status in harness.FAILURE_STATUSES
        _maybe_plot(args, plots.plot_convergence, args.out / "convergence.csv", "convergence.svg")

    elif args.command == "oracle-check":
        rows = harness.run_oracle_check(cfg, resolution=args.resolution)
        _write(args.out / "oracle.csv", harness.oracle_csv(rows))
        failed = any(r[4] in harness.FAILURE_STATUSES for r in rows)
        worst = max((r[3] for r in rows if not math.isnan(r[3])), default=math.nan)
        print(f"worst relative gap oracle vs convex program: {worst:.3e}")

    return 1 if failed else 0


def _strip_timing(trace) -> str:
    import json
    from dataclasses import asdict
    lines = []
    for r in trace.records:
        d = asdict(r)
        d.pop("wall_ms")
        lines.append(json.dumps(d))
    return "\n".join(lines) + "\n"


if __name__ == "__main__":
    sys.exit(main())
