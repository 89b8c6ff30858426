"""Multi-seed training runs, per-epoch CSVs and comparison tables."""
from __future__ import annotations

import csv
import io
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bandit import AdaptionSchedule, BanditState, TenureController, default_arms
from .data import BatchPlan, batches, load_idx, synth_blobs
from .errors import UsageError
from .mask import DropoutConfig
from .nn import AdamState, Network, adam_step, evaluate, nll_loss

EPOCH_HEADER = ("epoch", "mean_train_loss", "test_error", "selected_tt", "wall_ms")
SUMMARY_HEADER = ("variant", "mean_error", "std_error", "replicates")
COMPARE_HEADER = ("variant", "mean_error", "std_error", "replicates", "best")
OUT_DIR_ENV = "TABUDROP_OUT_DIR"


@dataclass
class EpochRecord:
    epoch: int
    mean_train_loss: float
    test_error: float
    selected_tt: int = 0
    wall_ms: int = 0

    def row(self):
        return (str(self.epoch), fmt(self.mean_train_loss), fmt(self.test_error),
                str(self.selected_tt), str(self.wall_ms))


@dataclass
class Summary:
    variant: str
    mean_error: float
    std_error: float
    replicates: int

    def row(self):
        return (self.variant, repr(self.mean_error), repr(self.std_error), str(self.replicates))


@dataclass
class RunResult:
    config: object
    replicates: list          # list[list[EpochRecord]]
    summary: Summary
    out_dir: Path | None = None


def fmt(x):
    return f"{x:.6g}"


def default_out_dir():
    return Path(os.environ.get(OUT_DIR_ENV, "results"))


def load_datasets(cfg):
    """(train, test) for a config; idx subsets take the first ``n_train``/``n_test`` rows."""
    if cfg.dataset == "synth":
        full = synth_blobs(cfg.n_train + cfg.n_test, cfg.synth_dim, cfg.synth_classes,
                           cfg.synth_spread, cfg.synth_seed)
        idx = np.arange(len(full))
        return full.subset(idx[:cfg.n_train]), full.subset(idx[cfg.n_train:])
    train = load_idx(cfg.train_images, cfg.train_labels)
    test = load_idx(cfg.test_images, cfg.test_labels)
    classes = max(train.classes, test.classes)
    train = type(train)(train.features, train.labels, classes)
    test = type(test)(test.features, test.labels, classes)
    if cfg.n_train:
        train = train.subset(slice(0, cfg.n_train))
    if cfg.n_test:
        test = test.subset(slice(0, cfg.n_test))
    return train, test


def train_replicate(cfg, train, test, seed):
    """One full training run; returns its per-epoch records."""
    init_ss, bandit_ss, split_ss = np.random.SeedSequence(seed).spawn(3)
    dtype = np.float32 if cfg.precision == "float32" else np.float64

    val = None
    if cfg.variant == "adaptive" and cfg.reward_source == "validation":
        perm = np.random.default_rng(split_ss).permutation(len(train))
        n_val = max(1, int(round(cfg.validation_fraction * len(train))))
        val, train = train.subset(perm[:n_val]), train.subset(np.sort(perm[n_val:]))

    dcfg = DropoutConfig(drop_rate=cfg.drop_rate, mode=cfg.dropout_mode,
                         tenure=cfg.tenure, tick_per_epoch=cfg.tick_per_epoch)
    net = Network(train.features.shape[1], cfg.hidden, train.classes, dropout=dcfg,
                  rng=np.random.default_rng(init_ss), dropout_sites=cfg.dropout_sites, dtype=dtype)
    opt = AdamState(lr=cfg.learning_rate)
    plan = BatchPlan(cfg.batch_size, seed)

    controller = None
    if cfg.variant == "adaptive":
        state = BanditState(arms=default_arms(cfg.tt_max), policy=cfg.policy,
                            reward_model=cfg.reward_model, epsilon=cfg.epsilon,
                            warmup_epochs=cfg.warmup_epochs)
        controller = TenureController(state, AdaptionSchedule(cfg.adaption_period),
                                      np.random.default_rng(bandit_ss))

    records = []
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        tt = 0
        if controller is not None:
            tt = controller.begin_epoch(epoch)
            net.set_tenure(tt)
        net.start_epoch()
        losses = []
        for idx in batches(train, plan, epoch):
            x, y = train.features[idx], train.labels[idx]
            lp = net.forward(x, training=True)
            losses.append(nll_loss(lp, y))
            adam_step(net, net.backward(lp, y), opt)
        mean_loss = float(np.mean(losses))
        if controller is not None:
            if val is not None:
                loss = nll_loss(net.forward(val.features, training=False), val.labels)
            else:
                loss = mean_loss
            controller.end_epoch(epoch, loss)
        err = evaluate(net, test)
        wall = int(round((time.perf_counter() - t0) * 1000)) if cfg.timing else 0
        records.append(EpochRecord(epoch, mean_loss, err, tt, wall))
    return records


def summarize(label, final_errors):
    errs = np.array([float(fmt(e)) for e in final_errors])
    return Summary(label, float(errs.mean()), float(errs.std()), len(errs))


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def write_atomic(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def epoch_csv(records):
    return _csv_text(EPOCH_HEADER, (r.row() for r in records))


def read_epoch_csv(path):
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    return [EpochRecord(int(r["epoch"]), float(r["mean_train_loss"]), float(r["test_error"]),
                        int(r["selected_tt"]), int(r["wall_ms"])) for r in rows]


def _dirname(label):
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in label)


def run(cfg, out_dir=None, datasets=None):
    """Train ``cfg.replicates`` seeds (``base_seed + i``) and write CSVs under ``out_dir``."""
    cfg.validate()
    train, test = datasets if datasets is not None else load_datasets(cfg)
    seeds = [cfg.base_seed + i for i in range(cfg.replicates)]
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            reps = list(pool.map(lambda s: train_replicate(cfg, train, test, s), seeds))
    else:
        reps = [train_replicate(cfg, train, test, s) for s in seeds]
    summary = summarize(cfg.label, [r[-1].test_error for r in reps])
    target = None
    if out_dir is not None:
        target = Path(out_dir) / _dirname(cfg.label)
        for i, recs in enumerate(reps):
            write_atomic(target / f"replicate_{i}.csv", epoch_csv(recs))
        write_atomic(target / "summary.csv", _csv_text(SUMMARY_HEADER, [summary.row()]))
    return RunResult(cfg, reps, summary, target)


def comparison_rows(summaries):
    best = min(range(len(summaries)), key=lambda i: summaries[i].mean_error)
    return [(s.variant, s.mean_error, s.std_error, s.replicates, i == best)
            for i, s in enumerate(summaries)]


def format_table(rows):
    cells = [("variant", "mean error", "", "std", "reps", "")]
    for variant, mean, std, reps, best in rows:
        cells.append((variant, f"{mean:.5f}", "±", f"{std:.5f}", str(reps), "*" if best else ""))
    widths = [max(len(r[i]) for r in cells) for i in range(len(cells[0]))]
    lines = []
    for r in cells:
        parts = [r[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(r[1:], widths[1:])]
        lines.append("  ".join(parts).rstrip())
    return "\n".join(lines) + "\n"


def compare(configs, out_dir=None):
    """Run every config on a shared dataset and tabulate mean ± std final error."""
    if len(configs) < 2:
        raise UsageError("compare needs at least two configs")
    key = configs[0].dataset_key()
    for c in configs[1:]:
        if c.dataset_key() != key:
            raise UsageError(f"config {c.label!r} uses a different dataset", key="dataset")
    labels = [c.label for c in configs]
    if len(set(labels)) != len(labels):
        raise UsageError("configs must have distinct variant labels (set `name`)", key="name")
    datasets = load_datasets(configs[0])
    results = [run(c, out_dir, datasets) for c in configs]
    rows = comparison_rows([r.summary for r in results])
    if out_dir is not None:
        csv_rows = [(v, repr(m), repr(s), str(n), str(int(b))) for v, m, s, n, b in rows]
        write_atomic(Path(out_dir) / "comparison.csv", _csv_text(COMPARE_HEADER, csv_rows))
        write_atomic(Path(out_dir) / "comparison.txt", format_table(rows))
    return rows, results

