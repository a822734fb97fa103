"""``rarepath`` command line.

Exit codes: 0 success, 1 suite or assertion failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import os
import sys

from ..sampler import ConfigError
from .commands import CONFIG, COMMANDS, cmd_verify
from .config import load_config


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rarepath", description="Sample, trace, ablate and verify adaptive staged samplers on analytic concepts.")
    p.add_argument("command", choices=("verify", *COMMANDS))
    p.add_argument("--config", help="run configuration (TOML); required except for verify")
    p.add_argument("--out", help="output directory (overrides outputs.dir)")
    p.add_argument("--seed", type=int, help="base seed (overrides sampler.seed)")
    p.add_argument("--filter", dest="name_filter", help="verify: run only suites whose name contains this")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            return cmd_verify(args.out or "rarepath-out", args.name_filter)
        if not args.config:
            raise ConfigError(f"{args.command} needs --config")
        cfg = load_config(args.config, args.out, args.seed)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return CONFIG
    except BrokenPipeError:
        # output piped into e.g. head; silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0


if __name__ == "__main__":
    sys.exit(main())
