import csv
import dataclasses

import numpy as np
import pytest

from tabudrop import bandit, checks
from tabudrop.cli import main
from tabudrop.config import ExperimentConfig, dump_config, load_config, parse_config
from tabudrop.errors import UsageError
from tabudrop.runner import (EPOCH_HEADER, SUMMARY_HEADER, compare, read_epoch_csv, run,
                             summarize)

FAST = """
n_train = 300
n_test = 100
synth_dim = 8
synth_classes = 4
hidden = 16
epochs = 6
batch_size = 64
replicates = 2
"""


def fast(**kw):
    return dataclasses.replace(parse_config(FAST), **kw).validate()


# config parsing

def test_defaults_match_protocol():
    cfg = ExperimentConfig()
    assert (cfg.batch_size, cfg.learning_rate, cfg.drop_rate) == (512, 0.01, 0.5)
    assert (cfg.replicates, cfg.tt_max, cfg.epsilon) == (5, 6, 0.5)
    assert (cfg.n_train, cfg.n_test, cfg.hidden, cfg.epochs) == (5000, 1000, 256, 40)


def test_parse_comments_and_types():
    cfg = parse_config("variant = tenure:4  # four\n# whole line\ntick_per_epoch = yes\nepsilon=0.25\n")
    assert cfg.tenure == 4 and cfg.tick_per_epoch and cfg.epsilon == 0.25
    assert cfg.dropout_mode == "tabu_tenure"


@pytest.mark.parametrize("text,key", [
    ("variant = tenure:9", "variant"),
    ("variant = alpha", "variant"),
    ("replicates = 0", "replicates"),
    ("drop_rate = 1.0", "drop_rate"),
    ("bogus = 1", "bogus"),
    ("epochs = ten", "epochs"),
    ("policy = ucb", "policy"),
])
def test_bad_config_names_key(text, key):
    with pytest.raises(UsageError) as exc:
        parse_config(text)
    assert exc.value.key == key


def test_dump_parse_round_trip():
    cfg = fast(variant="adaptive", policy="epsilon_greedy", warmup=3)
    assert parse_config(dump_config(cfg)) == cfg


def test_warmup_default_half_of_epochs():
    assert parse_config("epochs = 300").warmup_epochs == 150


# run

def test_single_replicate_summary():
    res = run(fast(replicates=1))
    assert res.summary.std_error == 0.0
    assert res.summary.mean_error == res.replicates[0][-1].test_error


def test_summary_is_arithmetic_mean():
    s = summarize("x", [0.1, 0.2, 0.3, 0.4, 0.5])
    assert s.mean_error == pytest.approx(0.3, abs=1e-15)
    assert s.std_error == pytest.approx(np.std([0.1, 0.2, 0.3, 0.4, 0.5]), abs=1e-15)


def test_csv_layout_and_recomputation(tmp_path):
    res = run(fast(variant="tenure:3", replicates=3), tmp_path)
    files = sorted(res.out_dir.glob("replicate_*.csv"))
    assert len(files) == 3
    with open(files[0], newline="") as f:
        assert tuple(next(csv.reader(f))) == EPOCH_HEADER
    with open(res.out_dir / "summary.csv", newline="") as f:
        rows = list(csv.reader(f))
    assert tuple(rows[0]) == SUMMARY_HEADER
    finals = [read_epoch_csv(p)[-1].test_error for p in files]
    assert abs(float(rows[1][1]) - sum(finals) / len(finals)) <= 1e-12
    assert rows[1][0] == "tenure:3" and rows[1][3] == "3"
    recs = read_epoch_csv(files[0])
    assert [r.epoch for r in recs] == list(range(6))
    assert all(0 <= r.test_error <= 1 and r.selected_tt == 0 for r in recs)


def test_run_is_byte_deterministic(tmp_path):
    cfg = fast(variant="adaptive", adaption_period=2)
    run(cfg, tmp_path / "a")
    run(cfg, tmp_path / "b")
    for p in (tmp_path / "a").rglob("*.csv"):
        assert p.read_bytes() == (tmp_path / "b" / p.relative_to(tmp_path / "a")).read_bytes()


def test_workers_do_not_change_results():
    serial = run(fast(replicates=3))
    threaded = run(fast(replicates=3, workers=3))
    assert serial.replicates == threaded.replicates


def test_adaptive_selected_tt_changes_only_on_schedule():
    cfg = fast(variant="adaptive", policy="random", adaption_period=2, epochs=10)
    for recs in run(cfg).replicates:
        for prev, cur in zip(recs, recs[1:]):
            if cur.selected_tt != prev.selected_tt:
                assert bandit.should_reselect(cur.epoch, bandit.AdaptionSchedule(2))
        assert all(r.selected_tt in range(1, 7) for r in recs)


def test_validation_reward_source():
    res = run(fast(variant="adaptive", reward_source="validation", replicates=1))
    assert len(res.replicates[0]) == 6


def test_tick_per_epoch_and_all_sites():
    res = run(fast(tick_per_epoch=True, dropout_sites="all", replicates=1, precision="float32"))
    assert all(np.isfinite(r.mean_train_loss) for r in res.replicates[0])


# compare

def test_compare_table(tmp_path):
    cfgs = [fast(variant=v, replicates=1) for v in ("standard_dropout", "tabu", "tenure:6")]
    rows, _ = compare(cfgs, tmp_path)
    assert [r[0] for r in rows] == ["standard_dropout", "tabu", "tenure:6"]
    best = [r for r in rows if r[4]]
    assert len(best) == 1 and best[0][1] == min(r[1] for r in rows)
    text = (tmp_path / "comparison.txt").read_text()
    assert "±" in text and "*" in text
    with open(tmp_path / "comparison.csv", newline="") as f:
        assert len(list(csv.reader(f))) == 4


def test_compare_needs_two():
    with pytest.raises(UsageError):
        compare([fast()])


def test_compare_rejects_mixed_datasets():
    with pytest.raises(UsageError):
        compare([fast(), fast(variant="tenure:2", synth_seed=9)])


# CLI

@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text(FAST + "variant = tenure:2\n")
    return path


def test_cli_run(cfg_file, tmp_path, capsys):
    assert main(["run", str(cfg_file), "--out-dir", str(tmp_path / "out"), "--replicates", "1",
                 "--seed", "4"]) == 0
    assert (tmp_path / "out" / "tenure_2" / "replicate_0.csv").exists()
    assert not (tmp_path / "out" / "tenure_2" / "replicate_1.csv").exists()
    assert "tenure:2" in capsys.readouterr().out


def test_cli_env_out_dir(cfg_file, tmp_path, monkeypatch):
    monkeypatch.setenv("TABUDROP_OUT_DIR", str(tmp_path / "env"))
    assert main(["run", str(cfg_file), "--replicates", "1"]) == 0
    assert (tmp_path / "env" / "tenure_2" / "summary.csv").exists()


def test_cli_compare(tmp_path, capsys):
    paths = []
    for v in ("tabu", "tenure:6"):
        p = tmp_path / f"{v.replace(':', '')}.cfg"
        p.write_text(FAST + f"variant = {v}\nreplicates = 1\n")
        paths.append(str(p))
    assert main(["compare", *paths, "--out-dir", str(tmp_path / "cmp")]) == 0
    assert "tenure:6" in capsys.readouterr().out


def test_cli_usage_errors(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("variant = tenure:0\n")
    assert main(["run", str(bad), "--out-dir", str(tmp_path)]) == 2
    assert "variant" in capsys.readouterr().err
    one = tmp_path / "one.cfg"
    one.write_text(FAST)
    assert main(["compare", str(one), "--out-dir", str(tmp_path)]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_cli_missing_data_file(tmp_path):
    cfg = tmp_path / "idx.cfg"
    cfg.write_text("dataset = idx\ntrain_images = a\ntrain_labels = b\ntest_images = c\ntest_labels = d\n")
    assert main(["run", str(cfg), "--out-dir", str(tmp_path)]) == 1


def test_load_config_resolves_relative_paths(tmp_path):
    (tmp_path / "sub").mkdir()
    cfg = tmp_path / "sub" / "x.cfg"
    cfg.write_text("dataset = idx\ntrain_images = d/ti\ntrain_labels = d/tl\ntest_images = d/ei\ntest_labels = d/el\n")
    assert load_config(cfg).train_images == str(tmp_path / "sub" / "d" / "ti")


# selftest

def test_selftest_passes(capsys):
    assert main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == len(checks.CHECKS)


def test_selftest_catches_off_by_one_tenure():
    def sloppy_apply(mask, ledger):
        forbidden = (ledger.last_drop != 0) & (ledger.tick - ledger.last_drop < ledger.tenure)
        return mask | forbidden

    lines = []
    ok = checks.selftest(out=lines.append,
                         tabu_safety=lambda: checks.check_tabu_safety(apply_fn=sloppy_apply))
    assert not ok
    assert any(line.startswith("FAIL  tabu_safety") for line in lines)


def test_selftest_catches_unnormalised_softmax():
    def raw_softmax(state):
        if state.policy == "softmax":
            return np.exp(bandit.q_values(state))
        return bandit.policy_distribution(state)

    lines = []
    ok = checks.selftest(out=lines.append,
                         policy_sums=lambda: checks.check_policy_sums(dist_fn=raw_softmax))
    assert not ok
    assert [line for line in lines if line.startswith("FAIL")][0].split()[1] == "policy_sums"
