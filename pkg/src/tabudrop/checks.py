"""Fast invariant checks behind ``tabudrop selftest``.

Each check takes the implementation under test as keyword arguments so a
deliberately broken variant can be passed in to confirm the check bites.
"""
from __future__ import annotations

import tempfile
from pathlib import Path

import numpy as np

from . import bandit
from .data import load_idx, write_idx
from .errors import FormatError
from .mask import DropoutConfig, TabuLedger, apply_tabu, commit, sample_keep_mask
from .nn import Network, nll_loss


def drop_ticks(width, p, tenure, ticks, seed, apply_fn=apply_tabu):
    """Simulate ``ticks`` ledger steps; returns the boolean drop log (ticks x width)."""
    rng = np.random.default_rng(seed)
    ledger = TabuLedger(width, tenure=tenure)
    log = np.zeros((ticks, width), dtype=bool)
    for t in range(ticks):
        mask = apply_fn(sample_keep_mask(width, p, rng), ledger)
        commit(mask, ledger)
        log[t] = ~mask
    return log


def tabu_violations(log, tenure):
    """Count pairs of drops of one unit separated by ``tenure`` ticks or fewer."""
    bad = 0
    for u in range(log.shape[1]):
        gaps = np.diff(np.flatnonzero(log[:, u]))
        bad += int(np.count_nonzero(gaps <= tenure))
    return bad


def check_tabu_safety(apply_fn=apply_tabu, width=128, p=0.5, ticks=2000):
    total = 0
    for tenure in range(1, 7):
        total += tabu_violations(drop_ticks(width, p, tenure, ticks, seed=tenure, apply_fn=apply_fn), tenure)
    return total == 0, f"{total} violations over TT=1..6"


def check_policy_sums(dist_fn=bandit.policy_distribution, trials=50):
    rng = np.random.default_rng(0)
    worst = 0.0
    for policy in bandit.POLICIES:
        for _ in range(trials):
            state = bandit.BanditState(policy=policy)
            for arm in state.arms:
                for _ in range(int(rng.integers(0, 3))):
                    bandit.record(state, arm, float(rng.uniform(0, 5)))
            pi = np.asarray(dist_fn(state))
            if (pi < 0).any():
                return False, f"{policy}: negative probability"
            worst = max(worst, abs(pi.sum() - 1.0))
    return worst <= 1e-12, f"max |sum - 1| = {worst:.2e}"


def gradient_check(net, x, y, step=1e-5):
    """Largest per-tensor relative error ||a - n|| / max(||a||, ||n||) between backprop and
    central differences.  Elementwise ratios are dominated by roundoff on near-zero entries."""
    lp = net.forward(x, training=True)
    grads = net.backward(lp, y)
    worst = 0.0
    for name, param in net.params.items():
        num = np.zeros_like(param)
        it = np.nditer(param, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            old = param[i]
            param[i] = old + step
            up = nll_loss(net.forward(x, training=True), y)
            param[i] = old - step
            down = nll_loss(net.forward(x, training=True), y)
            param[i] = old
            num[i] = (up - down) / (2 * step)
        a = grads[name]
        scale = max(np.linalg.norm(a), np.linalg.norm(num))
        if scale > 0:
            worst = max(worst, float(np.linalg.norm(a - num) / scale))
    return worst


def tiny_net(seed=0, masks=True):
    """4-8-8-3 net with a site after each hidden layer, masks frozen.

    Biases are randomised: with zero biases a row whose hidden units are all
    dropped puts the next pre-activation exactly on the ReLU kink.
    """
    rng = np.random.default_rng(seed)
    net = Network(4, (8, 8), 3, dropout=DropoutConfig(0.5, "tabu_tenure", 1),
                  rng=rng, dropout_sites="all")
    for k in ("b1", "b2", "b3"):
        net.params[k] = rng.uniform(-0.5, 0.5, size=net.params[k].shape)
    for site in net.active_sites:
        site.frozen_mask = rng.random(site.width) >= 0.5 if masks else np.ones(site.width, bool)
    x = rng.standard_normal((5, 4))
    y = rng.integers(0, 3, size=5)
    return net, x, y


def check_gradients():
    net, x, y = tiny_net()
    err = gradient_check(net, x, y)
    return err < 1e-6, f"max relative error {err:.2e}"


IDX_FIXTURE_PIXELS = np.array([[0, 255, 128, 1], [17, 0, 255, 64]], dtype=np.uint8)
IDX_FIXTURE_LABELS = np.array([3, 7], dtype=np.uint8)


def idx_fixture_bytes():
    """Two 2x2 images and their labels, assembled by hand."""
    images = (bytes([0, 0, 8, 3]) + (2).to_bytes(4, "big") + (2).to_bytes(4, "big")
              + (2).to_bytes(4, "big") + IDX_FIXTURE_PIXELS.tobytes())
    labels = bytes([0, 0, 8, 1]) + (2).to_bytes(4, "big") + IDX_FIXTURE_LABELS.tobytes()
    return images, labels


def check_idx_fixture():
    images, labels = idx_fixture_bytes()
    with tempfile.TemporaryDirectory() as tmp:
        ip, lp = Path(tmp, "img"), Path(tmp, "lbl")
        ip.write_bytes(images)
        lp.write_bytes(labels)
        ds = load_idx(ip, lp)
        ok = (np.array_equal(ds.features, IDX_FIXTURE_PIXELS / 255.0)
              and np.array_equal(ds.labels, IDX_FIXTURE_LABELS))
        ip.write_bytes(b"\x00\x00\x08\x04" + images[4:])
        try:
            load_idx(ip, lp)
            ok = False
        except FormatError:
            pass
        write_idx(ds, Path(tmp, "i2"), Path(tmp, "l2"), shape=(2, 2))
        back = load_idx(Path(tmp, "i2"), Path(tmp, "l2"), classes=ds.classes)
        ok = ok and np.array_equal(back.features, ds.features)
    return ok, "fixture, bad magic, round trip"


def check_rewards():
    vals = [0.0, 1e-6, 0.5, 1.0, 2.0, 50.0]
    ok = all(bandit.reward_inverse(v) >= 0 and 0 < bandit.reward_negexp(v) <= 1 for v in vals)
    ok = ok and bandit.reward_inverse(2.0) == 0.5 and bandit.reward_negexp(0.0) == 1.0
    return ok, "reward models bounded"


CHECKS = {
    "tabu_safety": check_tabu_safety,
    "policy_sums": check_policy_sums,
    "gradient": check_gradients,
    "idx_fixture": check_idx_fixture,
    "rewards": check_rewards,
}


def selftest(out=print, **overrides):
    """Run every check; ``overrides`` maps check name to a replacement callable."""
    failed = 0
    for name, fn in CHECKS.items():
        fn = overrides.get(name, fn)
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashing check is a failing check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        failed += not ok
        out(f"{'PASS' if ok else 'FAIL'}  {name:<12} {detail}")
    return failed == 0


