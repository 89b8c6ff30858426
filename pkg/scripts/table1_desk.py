"""Desk-scale version of the fixed-tenure comparison table.

Runs no dropout, standard dropout, tabu (TT=1) and tenure 2..6 on one
dataset config and prints the comparison table.  Example::

    python scripts/table1_desk.py configs/mnist5k_tabu.cfg --out-dir results/table1
"""
import argparse
import dataclasses

from tabudrop.config import load_config
from tabudrop.runner import compare, format_table

VARIANTS = ["none", "standard_dropout", "tabu"] + [f"tenure:{k}" for k in range(2, 7)]


def main():
    ap = argparse.ArgumentParser(description="fixed-tenure comparison")
    ap.add_argument("base_config", help="config supplying the dataset and training settings")
    ap.add_argument("--out-dir", default="results/table1")
    ap.add_argument("--epochs", type=int)
    ap.add_argument("--replicates", type=int)
    ap.add_argument("--tick-per-epoch", action="store_true")
    args = ap.parse_args()

    base = load_config(args.base_config)
    changes = {k: v for k, v in (("epochs", args.epochs), ("replicates", args.replicates)) if v}
    if args.tick_per_epoch:
        changes["tick_per_epoch"] = True
    configs = [dataclasses.replace(base, variant=v, name="", **changes).validate() for v in VARIANTS]
    rows, _ = compare(configs, args.out_dir)
    print(format_table(rows), end="")


if __name__ == "__main__":
    main()
