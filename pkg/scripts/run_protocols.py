#!/usr/bin/env python3
"""Run the desk-scale experiment protocols and write their reports.

Thin wrapper over the CLI repro command so results land as deterministic
JSON plus CSV tables in one output directory per protocol.
"""

import argparse
import sys

from phdkit.cli import main as cli_main
from phdkit.protocols import PROTOCOLS


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("protocols", nargs="*", default=[], help=f"subset of {sorted(PROTOCOLS)}")
    ap.add_argument("--out", default="runs", help="output root directory")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--set", action="append", default=[], dest="overrides",
                    help="config override forwarded to every protocol (key=value)")
    args = ap.parse_args()
    names = args.protocols or sorted(PROTOCOLS)
    for name in names:
        if name not in PROTOCOLS:
            ap.error(f"unknown protocol {name!r}; expected one of {sorted(PROTOCOLS)}")
    for name in names:
        argv = ["--seed", str(args.seed), "--out", f"{args.out}/{name}", "--format", "csv",
                "repro", name]
        for ov in args.overrides:
            argv += ["--set", ov]
        print(f"== {name} -> {args.out}/{name}")
        code = cli_main(argv)
        if code != 0:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
