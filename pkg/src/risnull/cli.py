"""Command-line front end.

Experiment subcommands read a config file, run the seeded Monte Carlo
sweep, write the CSV (and optionally a plot script), and exit with 0 on
success, 1 on configuration or validation problems, and 2 when every trial
of some grid cell failed numerically.  ``solve`` runs one seeded instance
through a single solver and prints a summary.
"""

import argparse
import sys
from dataclasses import replace

import numpy as np

from .channels import gen_channels, signal_level
from .config import ConfigError, load_config
from .experiments import emit_plot_script, failed_cells, run_experiment, to_db, write_csv
from .solvers import METHODS, RankDeficientError, SolverSpec, solve_channel

_SUBCOMMAND_EXPERIMENT = {
    "snr-sweep": "snr_sweep",
    "perturb-sweep": "perturb_sweep",
    "correct": "correction",
    "drift": "drift",
}


def _add_experiment_parser(sub, name):
    p = sub.add_parser(name, help=f"run the {_SUBCOMMAND_EXPERIMENT[name]} experiment")
    p.add_argument("--config", required=True, help="experiment config file")
    p.add_argument("--out", help="output CSV path (overrides config output_path)")
    p.add_argument("--seed", type=int, help="override base_seed")
    p.add_argument("--trials", type=int, help="override trials")
    p.add_argument("--plot", action="store_true",
                   help="also emit a plot script next to the CSV")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="risnull",
        description="RIS reflection-coefficient nulling: solvers, sensitivity, experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _SUBCOMMAND_EXPERIMENT:
        _add_experiment_parser(sub, name)

    p = sub.add_parser("solve", help="solve one seeded instance and print a summary")
    p.add_argument("--m", type=int, required=True, help="receive antennas")
    p.add_argument("--n", type=int, required=True, help="RIS elements")
    p.add_argument("--seed", type=int, default=0, help="channel seed")
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="regularization weight (ridge / lasso)")
    return parser


def _run_experiment_command(args, experiment: str) -> int:
    try:
        cfg = load_config(args.config)
        if cfg.experiment != experiment:
            raise ConfigError(
                f"config declares experiment '{cfg.experiment}' but the "
                f"subcommand runs '{experiment}'"
            )
        if args.seed is not None:
            cfg = replace(cfg, base_seed=args.seed)
        if args.trials is not None:
            cfg = replace(cfg, trials=args.trials)
        if args.out is not None:
            cfg = replace(cfg, output_path=args.out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    records = run_experiment(cfg)
    write_csv(records, cfg.output_path)
    print(f"wrote {len(records)} records to {cfg.output_path}")
    if args.plot:
        script_path = str(cfg.output_path) + ".plot.py"
        with open(script_path, "w", encoding="utf-8") as fh:
            fh.write(emit_plot_script(cfg.output_path, experiment))
        print(f"wrote plot script to {script_path}")

    dead = failed_cells(records)
    if dead:
        for cell in dead:
            print(f"error: all trials failed in cell {cell}", file=sys.stderr)
        return 2
    return 0


def _run_solve_command(args) -> int:
    try:
        if args.lam is None:
            spec = SolverSpec(args.method) if args.method not in ("ridge", "lasso_ista") \
                else SolverSpec(args.method, lam=0.1)
        else:
            spec = SolverSpec(args.method, lam=args.lam)
        ch = gen_channels(args.m, args.n, args.seed)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    try:
        res = solve_channel(spec, ch)
    except (RankDeficientError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"error: solve failed: {exc}", file=sys.stderr)
        return 2

    s = signal_level(ch, res.d)
    print(f"method            {spec.tag}")
    print(f"instance          m={args.m} n={args.n} seed={args.seed}")
    print(f"signal level      {s:.6e}  ({to_db(s):.2f} dB)")
    print(f"objective         {res.objective:.6e}")
    print(f"coefficient norm  {np.linalg.norm(res.vector):.6f}")
    print(f"max |d_i|         {np.abs(res.vector).max():.6f}")
    if res.objective_trace:
        print(f"iterations        {res.iterations} (converged: {res.converged})")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "solve":
        return _run_solve_command(args)
    return _run_experiment_command(args, _SUBCOMMAND_EXPERIMENT[args.command])


if __name__ == "__main__":
    sys.exit(main())
