"""Command-line driver.

Examples::

    moskcsk fig4 --out fig4.csv
    moskcsk ser-single --set gap_um=4 --set estimators=analytical,mc
    moskcsk sweep --config run.cfg --set sweep_param=density_per_um3 --set sweep_values=0,1e-4
"""
from __future__ import annotations

import argparse
import logging
import sys
import warnings

from .analysis import NumericalConvergenceError
from .config import ConfigError, ExperimentConfig
from .experiments import PRESETS, run

log = logging.getLogger("moskcsk")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

SUBCOMMANDS = ("channel", "ser-single", "ser-multi", "mc", "particle", "fig3", "fig4", "fig5", "sweep")

# which count --trials sets for each mode
_TRIALS_KEY = {
    "channel": "particle_molecules",
    "particle": "particle_molecules",
    "ser-single": "poisson_draws",
    "fig3": "poisson_draws",
    "ser-multi": "realizations",
    "mc": "realizations",
    "fig4": "realizations",
    "fig5": "realizations",
}


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="moskcsk", description="Hybrid MoSK-CSK error rate experiments")
    parser.add_argument("command", choices=SUBCOMMANDS)
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--seed", type=int, help="RNG seed (u64)")
    parser.add_argument("--out", help="CSV output path (default: stdout)")
    parser.add_argument("--trials", type=int, help="main Monte Carlo count for the mode")
    parser.add_argument("--workers", type=int, help="worker processes")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key (repeatable)")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def load_config(args) -> ExperimentConfig:
    if args.command in PRESETS:
        cfg = PRESETS[args.command]()
    else:
        cfg = ExperimentConfig()
        if args.command != "sweep":
            cfg.mode = args.command
    if args.config:
        cfg = ExperimentConfig.from_file(args.config, base=cfg)
    for item in args.overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        cfg.set(key, value)
    if args.command != "sweep":
        cfg.mode = args.command
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")
        cfg.seed = args.seed
    if args.trials is not None:
        setattr(cfg, _TRIALS_KEY.get(cfg.mode, "realizations"), args.trials)
    if args.workers is not None:
        cfg.workers = args.workers
    if args.out:
        cfg.out = args.out
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        log.info("running %s with seed %d", cfg.mode, cfg.seed)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            result = run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalConvergenceError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    text = result.to_csv()
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
        log.info("wrote %d rows to %s", len(result.rows), cfg.out)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
