"""``v2v-sf`` command line.

Exit codes: 0 success, 1 usage error, 2 configuration error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .errors import ConfigError, NumericalError, ParameterError
from .experiments import NAMED, named_config, run_sweep

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("v2v_sf")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _key_value(text: str):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    key, value = text.split("=", 1)
    return key.strip(), value.strip()


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="v2v-sf", description="Inter-lane V2V signal-fraction analysis and simulation.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in NAMED:
        p = sub.add_parser(name, help=f"reproduce {name}")
        p.add_argument("--seed", type=int)
        p.add_argument("--trials", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--out", default=f"results/{name}")
        p.add_argument("--set", dest="overrides", action="append", type=_key_value, default=[], metavar="KEY=VALUE")
    p = sub.add_parser("sweep", help="sweep one parameter from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "sweep":
            tables = run_sweep(args.config, args.out)
        else:
            overrides = dict(args.overrides)
            seed = args.seed if args.seed is not None else os.environ.get("V2V_SF_SEED")
            for key, value in (("seed", seed), ("trials", args.trials), ("workers", args.workers)):
                if value is not None:
                    overrides[key] = value
            try:
                cfg = named_config(args.command, overrides)
            except ConfigError as exc:
                raise ParameterError(str(exc)) from None
            fn, _ = NAMED[args.command]
            tables = fn(cfg, Path(args.out))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ParameterError as exc:
        print(f"parameter error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for t in tables:
        print(f"{t.name}: {len(t.rows)} rows -> {args.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
