"""``expcli``: command-line driver for SIC experiments."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config, validate_config

log = logging.getLogger("starsic")


def _add_common(p: argparse.ArgumentParser, config_required=True):
    p.add_argument("--config", required=config_required, help="experiment config (YAML)")
    p.add_argument("--out", help="output directory (overrides output.directory)")
    p.add_argument("--preset", choices=["desk", "paper"], help="training/test size preset")


def _cmd_run(args) -> int:
    from .campaign import run_campaign

    cfg = load_config(args.config, args.preset)
    paths = run_campaign(cfg, args.out, args.workers)
    for p in paths:
        print(p)
    return 0


def _cmd_validate(args) -> int:
    diags = validate_config(args.config, args.preset)
    if diags:
        for d in diags:
            print(f"{args.config}: {d}", file=sys.stderr)
        return 1
    print(f"{args.config}: ok")
    return 0


def _cmd_fit(args) -> int:
    from .cpan import fit_params, mean_phase_offset
    from .fiber import load_dataset

    _, xs, ys = load_dataset(args.data)
    pairs = list(zip(xs, ys))
    offset = mean_phase_offset(pairs) if args.remove_common_phase else 0.0
    if offset:
        pairs = [(x, y * np.exp(-1j * offset)) for x, y in pairs]
    params = fit_params(pairs)
    d = params.to_dict()
    d["common_phase_rad"] = offset
    text = json.dumps(d, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def _cmd_awgn(args) -> int:
    from .campaign import run_awgn

    cfg = load_config(args.config, args.preset)
    print(run_awgn(cfg, args.out))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="expcli", description="SIC receiver experiments for star-QAM over phase-noise channels"
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the power / n_phases / stage sweep")
    _add_common(p)
    p.add_argument("--workers", type=int, help="parallel sweep points")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("validate", help="check a config without running it")
    p.add_argument("--config", required=True)
    p.add_argument("--preset", choices=["desk", "paper"])
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("fit", help="fit CPAN parameters from a saved dataset (.npz)")
    p.add_argument("--data", required=True, help="dataset written by `run` with save_datasets")
    p.add_argument("--out", help="write the fitted parameters (JSON) here")
    p.add_argument(
        "--remove-common-phase",
        action="store_true",
        help="remove the circular-mean phase rotation before fitting",
    )
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("awgn", help="memoryless AWGN sweep (star-QAM vs Gaussian)")
    _add_common(p)
    p.set_defaults(func=_cmd_awgn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as e:
        for d in e.diagnostics:
            print(f"error: {d}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
