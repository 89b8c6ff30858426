"""Desk-scale adaptive-tenure sweep: every policy x adaption period.

Softmax is run with both reward models; the other policies use the inverse
reward, mirroring the published table layout.  Example::

    python scripts/table2_desk.py configs/mnist5k_tabu.cfg --periods 10 20 --replicates 2
"""
import argparse
import dataclasses

from tabudrop.bandit import DEFAULT_PERIODS
from tabudrop.config import load_config
from tabudrop.runner import compare, format_table

ARMS = [("random", "inverse"), ("greedy", "inverse"), ("epsilon_greedy", "inverse"),
        ("probabilistic", "inverse"), ("softmax", "inverse"), ("softmax", "neg_exp")]


def main():
    ap = argparse.ArgumentParser(description="adaptive tenure policy sweep")
    ap.add_argument("base_config")
    ap.add_argument("--out-dir", default="results/table2")
    ap.add_argument("--periods", type=int, nargs="+", default=list(DEFAULT_PERIODS))
    ap.add_argument("--epochs", type=int)
    ap.add_argument("--replicates", type=int)
    args = ap.parse_args()

    base = load_config(args.base_config)
    changes = {k: v for k, v in (("epochs", args.epochs), ("replicates", args.replicates)) if v}
    configs = [
        dataclasses.replace(base, variant="adaptive", name="", policy=policy, reward_model=reward,
                            adaption_period=period, **changes).validate()
        for policy, reward in ARMS for period in args.periods
    ]
    rows, _ = compare(configs, args.out_dir)
    print(format_table(rows), end="")


if __name__ == "__main__":
    main()
