"""Dense ReLU classifier with log-softmax output, manual backprop and Adam.

Layout: Dense -> ReLU -> [dropout] -> Dense -> ReLU -> [dropout] -> Dense -> LogSoftmax.
By default only the first hidden activation gets a dropout site; with
``dropout_sites="all"`` both hidden activations do, each with its own ledger.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ParameterError, ShapeError, StateError
from .mask import DropoutConfig, DropoutSite, TabuLedger

PARAM_NAMES = ("W1", "b1", "W2", "b2", "W3", "b3")


def log_softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


class Network:
    def __init__(self, n_in, hidden, n_classes, dropout=None, rng=None,
                 dropout_sites="one", init="uniform", dtype=np.float64):
        if n_in < 1 or n_classes < 1:
            raise ParameterError("input width and class count must be positive")
        if isinstance(hidden, int):
            hidden = (hidden, hidden)
        if len(hidden) != 2 or min(hidden) < 1:
            raise ParameterError("hidden must be an int or a pair of positive ints")
        if dropout_sites not in ("one", "all"):
            raise ParameterError("dropout_sites must be 'one' or 'all'")
        rng = np.random.default_rng() if rng is None else rng
        self.dtype = np.dtype(dtype)
        self.n_in, self.hidden, self.n_classes = n_in, tuple(hidden), n_classes
        sizes = [n_in, hidden[0], hidden[1], n_classes]
        self.params = {}
        for i in range(3):
            fan_in, fan_out = sizes[i], sizes[i + 1]
            if init == "zeros":
                w = np.zeros((fan_out, fan_in))
            elif init == "uniform":
                bound = np.sqrt(6.0 / fan_in)
                w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
            else:
                raise ParameterError(f"unknown init {init!r}")
            self.params[f"W{i + 1}"] = w.astype(self.dtype)
            self.params[f"b{i + 1}"] = np.zeros(fan_out, dtype=self.dtype)

        cfg = dropout if dropout is not None else DropoutConfig(mode="none")
        # Each site gets its own stream so sites never share rng state.
        site_rngs = rng.spawn(2)
        self.sites = [DropoutSite(hidden[0], cfg, site_rngs[0]), None]
        if dropout_sites == "all":
            self.sites[1] = DropoutSite(hidden[1], cfg, site_rngs[1])
        self._cache = None

    @property
    def active_sites(self):
        return [s for s in self.sites if s is not None]

    def set_tenure(self, tenure):
        for s in self.active_sites:
            s.set_tenure(tenure)

    def start_epoch(self):
        for s in self.active_sites:
            s.start_epoch()

    def forward(self, x, training=False):
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise ShapeError(f"expected (batch, {self.n_in}) input, got {x.shape}")
        p = self.params
        h = x
        acts = [x]
        pre = []
        for i in range(2):
            z = h @ p[f"W{i + 1}"].T + p[f"b{i + 1}"]
            pre.append(z)
            h = np.maximum(z, 0.0)
            site = self.sites[i]
            if site is not None:
                h = site.forward(h, training)
            acts.append(h)
        logits = h @ p["W3"].T + p["b3"]
        out = log_softmax(logits)
        self._cache = (acts, pre, out) if training else None
        return out

    def backward(self, log_probs, labels):
        """Gradients of :func:`nll_loss` w.r.t. every parameter for the cached batch."""
        if self._cache is None:
            raise StateError("backward needs a preceding forward(training=True)")
        acts, pre, out = self._cache
        if log_probs is not out and not np.array_equal(log_probs, out):
            raise StateError("log_probs do not belong to the cached forward pass")
        labels = _check_labels(labels, out)
        n = out.shape[0]
        p = self.params
        g = np.exp(out)
        g[np.arange(n), labels] -= 1.0
        g /= n
        grads = {}
        for i in (3, 2, 1):
            a_in = acts[i - 1]
            grads[f"W{i}"] = g.T @ a_in
            grads[f"b{i}"] = g.sum(axis=0)
            if i == 1:
                break
            g = g @ p[f"W{i}"]
            site = self.sites[i - 2]
            if site is not None:
                g = site.backward(g)
            g = g * (pre[i - 2] > 0)
        return grads

    def state_dict(self):
        return {
            "params": {k: v.copy() for k, v in self.params.items()},
            "ledgers": [None if s is None else s.ledger.state_dict() for s in self.sites],
        }


def _check_labels(labels, log_probs):
    labels = np.asarray(labels)
    if labels.shape != (log_probs.shape[0],):
        raise ShapeError("one label per row required")
    if labels.size and (labels.min() < 0 or labels.max() >= log_probs.shape[1]):
        raise DomainError("label outside [0, classes)")
    return labels.astype(np.int64)


def nll_loss(log_probs, labels):
    labels = _check_labels(labels, log_probs)
    return float(-log_probs[np.arange(len(labels)), labels].mean())


@dataclass
class AdamState:
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(net, grads, opt):
    for k, g in grads.items():
        if g.shape != net.params[k].shape:
            raise ShapeError(f"gradient {k} has shape {g.shape}, parameter {net.params[k].shape}")
    opt.step += 1
    bc1 = 1.0 - opt.beta1 ** opt.step
    bc2 = 1.0 - opt.beta2 ** opt.step
    for k, g in grads.items():
        if k not in opt.m:
            opt.m[k] = np.zeros_like(net.params[k])
            opt.v[k] = np.zeros_like(net.params[k])
        m, v = opt.m[k], opt.v[k]
        m *= opt.beta1
        m += (1.0 - opt.beta1) * g
        v *= opt.beta2
        v += (1.0 - opt.beta2) * (g * g)
        net.params[k] -= opt.lr * (m / bc1) / (np.sqrt(v / bc2) + opt.eps)


def predict(net, features, chunk=4096):
    out = np.empty(len(features), dtype=np.int64)
    for start in range(0, len(features), chunk):
        lp = net.forward(features[start:start + chunk], training=False)
        out[start:start + chunk] = lp.argmax(axis=1)
    return out


def evaluate(net, dataset):
    """Fraction of misclassified examples, computed in eval mode."""
    n = len(dataset.labels)
    if n == 0:
        raise DomainError("cannot evaluate on an empty dataset")
    return float(np.count_nonzero(predict(net, dataset.features) != dataset.labels) / n)


def save_checkpoint(path, net, opt):
    arrays = {f"param_{k}": v for k, v in net.params.items()}
    for i, s in enumerate(net.sites):
        if s is not None:
            arrays[f"ledger{i}_last_drop"] = s.ledger.last_drop
            arrays[f"ledger{i}_meta"] = np.array([s.ledger.tick, s.ledger.tenure], dtype=np.int64)
    for k in opt.m:
        arrays[f"adam_m_{k}"] = opt.m[k]
        arrays[f"adam_v_{k}"] = opt.v[k]
    arrays["adam_hyper"] = np.array([opt.lr, opt.beta1, opt.beta2, opt.eps])
    arrays["adam_step"] = np.array(opt.step, dtype=np.int64)
    with open(path, "wb") as f:
        np.savez(f, **arrays)


def load_checkpoint(path, net):
    """Restore parameters and ledgers into ``net``; returns the saved :class:`AdamState`."""
    with np.load(path) as z:
        for k in PARAM_NAMES:
            net.params[k] = z[f"param_{k}"].copy()
        for i, s in enumerate(net.sites):
            if s is not None:
                tick, tenure = z[f"ledger{i}_meta"]
                s.ledger = TabuLedger.from_state(
                    {"tick": tick, "tenure": tenure, "last_drop": z[f"ledger{i}_last_drop"]})
        lr, b1, b2, eps = z["adam_hyper"]
        opt = AdamState(lr=float(lr), beta1=float(b1), beta2=float(b2), eps=float(eps),
                        step=int(z["adam_step"]))
        for k in PARAM_NAMES:
            if f"adam_m_{k}" in z:
                opt.m[k] = z[f"adam_m_{k}"].copy()
                opt.v[k] = z[f"adam_v_{k}"].copy()
    return opt
