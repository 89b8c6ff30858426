"""Command line: ``tabudrop run|compare|selftest``.

Exit codes: 0 success, 1 failed check or data error, 2 usage error.
"""
from __future__ import annotations

import argparse
import sys

from .checks import selftest
from .config import load_config
from .errors import ConsistencyError, FormatError, UsageError
from .runner import OUT_DIR_ENV, compare, default_out_dir, format_table, run


def _overrides(args):
    return {"base_seed": args.seed, "replicates": args.replicates}


def build_parser():
    ap = argparse.ArgumentParser(prog="tabudrop", description="Tabu-tenure dropout experiments")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out-dir", help=f"output directory (default ${OUT_DIR_ENV} or ./results)")
        p.add_argument("--seed", type=int, help="override base_seed")
        p.add_argument("--replicates", type=int, help="override replicates")

    p = sub.add_parser("run", help="train every replicate of one config")
    p.add_argument("config")
    common(p)
    p = sub.add_parser("compare", help="run several configs and tabulate final errors")
    p.add_argument("configs", nargs="+")
    common(p)
    sub.add_parser("selftest", help="run the fast invariant checks")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "selftest":
        return 0 if selftest() else 1
    out_dir = args.out_dir or default_out_dir()
    try:
        if args.command == "run":
            result = run(load_config(args.config, **_overrides(args)), out_dir)
            s = result.summary
            print(f"{s.variant}: mean error {s.mean_error:.5f} ± {s.std_error:.5f} "
                  f"over {s.replicates} replicates -> {result.out_dir}")
        else:
            configs = [load_config(c, **_overrides(args)) for c in args.configs]
            rows, _ = compare(configs, out_dir)
            print(format_table(rows), end="")
    except UsageError as exc:
        print(f"tabudrop: usage error: {exc}", file=sys.stderr)
        return 2
    except (OSError, FormatError, ConsistencyError) as exc:
        print(f"tabudrop: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
