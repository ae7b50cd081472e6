"""Command line entry point.

    irsdirect run <config> [--seed N] [--threads N] [--out PATH]
    irsdirect single <config> --scheme ID --trial N [--seed N]
    irsdirect check

`config` is a file path or one of the shipped presets fig2, fig3, fig4, fig5.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

import argparse
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from .harness import ConfigError, emit_csv, load_config, parse_config, run_experiment, self_check
from .schemes import SCHEMES, TrialSeeds, prepare_trial, run_scheme

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def build_parser():
    parser = argparse.ArgumentParser(
        prog="irsdirect",
        description="Multi-cell IRS phase optimization benchmarks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a full sweep and write CSV")
    run.add_argument("config", help="config file or preset name (fig2 ... fig5)")
    run.add_argument("--seed", type=int, help="base seed (overrides rng_seed)")
    run.add_argument("--threads", type=int, default=1, help="worker processes")
    run.add_argument("--out", help="CSV path (overrides [experiment] output)")

    single = sub.add_parser("single", help="run one trial of one scheme verbosely")
    single.add_argument("config")
    single.add_argument("--scheme", required=True, choices=SCHEMES)
    single.add_argument("--trial", type=int, default=0)
    single.add_argument("--seed", type=int)

    sub.add_parser("check", help="run built-in invariant checks")
    return parser


PRESETS = ("fig2", "fig3", "fig4", "fig5")


def _load(args):
    if args.config in PRESETS and not Path(args.config).exists():
        text = resources.files(__package__).joinpath("presets", args.config + ".ini").read_text()
        spec = parse_config(text, source=args.config)
    else:
        spec = load_config(args.config)
    if args.seed is not None:
        spec = spec.replace(base=spec.base.replace(rng_seed=args.seed))
    return spec


def cmd_run(args):
    spec = _load(args)
    if getattr(args, "out", None):
        spec = spec.replace(output_path=args.out)
    if args.threads < 1:
        raise ConfigError(f"--threads must be >= 1, got {args.threads}")
    t0 = time.perf_counter()
    table = run_experiment(spec, threads=args.threads)
    path = emit_csv(table, spec.output_path)
    print(f"wrote {path} ({len(table.values)} rows, {spec.n_trials} trials, "
          f"{time.perf_counter() - t0:.1f} s)")
    if table.total_failed:
        for j, s in enumerate(table.schemes):
            nf = int(table.n_failed[:, j].sum())
            if nf:
                print(f"warning: {s}: {nf} failed trial(s) excluded", file=sys.stderr)
    return EXIT_OK


def cmd_single(args):
    spec = _load(args)
    np.set_printoptions(precision=4, suppress=True)
    for value in spec.sweep_values:
        cfg = spec.config_at(value)
        seeds = TrialSeeds.from_trial(cfg.rng_seed, args.trial)
        data = prepare_trial(cfg, seeds)
        t0 = time.perf_counter()
        res = run_scheme(args.scheme, None, cfg, None, spec.settings, data=data)
        print(f"{spec.sweep_variable} = {value}")
        print(f"  scheme            {res.scheme}")
        print(f"  seeds             {seeds}")
        print(f"  DL per-user rate  {res.per_user_dl_rate}")
        print(f"  DL sum rate       {res.dl_sum_rate:.6g}")
        print(f"  UL per-user rate  {res.per_user_ul_rate}")
        print(f"  UL sum rate       {res.ul_sum_rate:.6g}")
        print(f"  training symbols  {res.training_symbols_used}")
        print(f"  ascent iterations {res.iterations}")
        print(f"  flags             {res.flags}")
        print(f"  elapsed           {time.perf_counter() - t0:.2f} s")
    return EXIT_OK


def cmd_check(args):
    failed = 0
    for name, ok, detail in self_check():
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        failed += not ok
    return EXIT_OK if not failed else EXIT_RUNTIME


def main(argv=None):
    args = build_parser().parse_args(argv)
    handler = {"run": cmd_run, "single": cmd_single, "check": cmd_check}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
