"""Command-line entry point: ``cfidd simulate | complexity | signaling``."""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from cfidd.simulator import config as cfgmod
from cfidd.simulator.counts import DETECTORS as COUNT_DETECTORS
from cfidd.simulator.counts import complexity_count, signaling_count

log = logging.getLogger("cfidd")


def _snr_grid(args, current):
    if args.snr_min is None and args.snr_max is None:
        return current
    lo = current[0] if args.snr_min is None else args.snr_min
    hi = current[-1] if args.snr_max is None else args.snr_max
    step = args.snr_step if args.snr_step is not None else 5.0
    if step <= 0 or hi < lo:
        raise cfgmod.ConfigurationError("need snr-step > 0 and snr-max >= snr-min")
    return tuple(float(v) for v in np.arange(lo, hi + step / 2, step))


def _simulate(args) -> int:
    from cfidd.simulator.results import emit_results, write_gnuplot
    from cfidd.simulator.trial import run_sweep

    cfg = cfgmod.load_config(args.config) if args.config else cfgmod.SimConfig()
    changes = {"snr_grid": _snr_grid(args, cfg.snr_grid)}
    for flag, key in (("detector", "detectors"), ("mode", "modes"), ("fusion", "fusion"), ("csi", "csi"),
                      ("aps", "ap_mode")):
        value = getattr(args, flag)
        if value:
            changes[key] = tuple(value)
    for flag, key in (("seed", "seed"), ("trials", "max_trials"), ("min_errors", "min_bit_errors"),
                      ("jobs", "n_jobs"), ("idd_iters", "idd_iters")):
        value = getattr(args, flag)
        if value is not None:
            changes[key] = value
    cfg = cfg.replace(**changes)

    def progress(snr_db, trials, errors):
        log.info("SNR %5.1f dB: %d trials, min errors %.1f", snr_db, trials, float(np.min(errors)))

    records = run_sweep(cfg, progress)
    emit_results(records, args.out)
    if args.plot:
        write_gnuplot(records, args.out, args.plot)
    for rec in records:
        print(f"{rec.snr_db:6.1f} dB  {rec.label:45s} BER {rec.ber:.4e}  ({rec.trials} trials)")
    return 0


def _complexity(args) -> int:
    detectors = args.detector or COUNT_DETECTORS
    modes = args.mode or cfgmod.MODES
    for mode in modes:
        for det in detectors:
            print(f"{mode:13s} {det:6s} {complexity_count(det, mode, args.N, args.L, args.K, args.Mc)}")
    return 0


def _signaling(args) -> int:
    for mode in args.mode or cfgmod.MODES:
        load = signaling_count(mode, args.tau_c, args.tau_p, args.N, args.L, args.K, args.C_leng)
        print(f"{mode:13s} per_block {load.per_block}  statistical {load.statistical}  "
              f"llr_load {load.llr_load}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cfidd", description="Cell-free massive MIMO IDD link simulator")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a BER sweep and write a CSV")
    sim.add_argument("--config", help="INI configuration file")
    sim.add_argument("--out", required=True, help="output CSV path")
    sim.add_argument("--plot", help="also write a gnuplot script to this path")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--snr-min", type=float)
    sim.add_argument("--snr-max", type=float)
    sim.add_argument("--snr-step", type=float)
    sim.add_argument("--detector", nargs="+", choices=cfgmod.DETECTORS)
    sim.add_argument("--mode", nargs="+", choices=cfgmod.MODES)
    sim.add_argument("--fusion", nargs="+", choices=cfgmod.FUSIONS)
    sim.add_argument("--csi", nargs="+", choices=cfgmod.CSI)
    sim.add_argument("--aps", nargs="+", choices=cfgmod.AP_MODES)
    sim.add_argument("--trials", type=int, help="maximum trials per SNR point")
    sim.add_argument("--min-errors", type=int, help="stop a point after this many bit errors (0 disables)")
    sim.add_argument("--idd-iters", type=int)
    sim.add_argument("--jobs", type=int, help="worker processes")
    sim.set_defaults(func=_simulate)

    for name, func, helptext in (("complexity", _complexity, "print per-detector multiplication counts"),
                                 ("signaling", _signaling, "print fronthaul signaling loads")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--mode", nargs="+", choices=cfgmod.MODES)
        p.add_argument("-N", type=int, default=4)
        p.add_argument("-L", type=int, default=4)
        p.add_argument("-K", type=int, default=4)
        if name == "complexity":
            p.add_argument("--detector", nargs="+", choices=COUNT_DETECTORS + ("lmmse", "softic"))
            p.add_argument("--Mc", type=int, default=2)
        else:
            p.add_argument("--tau-c", type=int, default=200)
            p.add_argument("--tau-p", type=int, default=10)
            p.add_argument("--C-leng", type=int, default=256)
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ValueError, ArithmeticError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
