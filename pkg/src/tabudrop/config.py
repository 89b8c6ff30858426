"""Flat ``key = value`` experiment configs."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, fields
from pathlib import Path

from .bandit import POLICIES, REWARD_MODELS
from .errors import UsageError

VARIANTS = ("none", "standard_dropout", "tabu", "tenure:k", "adaptive")
DATASET_KEYS = ("dataset", "train_images", "train_labels", "test_images", "test_labels",
                "n_train", "n_test", "synth_dim", "synth_classes", "synth_spread", "synth_seed")


@dataclass
class ExperimentConfig:
    name: str = ""
    # data
    dataset: str = "synth"            # synth | idx
    train_images: str = ""
    train_labels: str = ""
    test_images: str = ""
    test_labels: str = ""
    n_train: int = 5000               # 0 = use every example in the file
    n_test: int = 1000
    synth_dim: int = 64
    synth_classes: int = 10
    synth_spread: float = 0.35
    synth_seed: int = 0
    # model / optimisation
    hidden: int = 256
    epochs: int = 40
    batch_size: int = 512
    learning_rate: float = 0.01
    drop_rate: float = 0.5
    dropout_sites: str = "one"        # one | all
    precision: str = "float64"        # float64 | float32
    # dropout variant
    variant: str = "tabu"
    tick_per_epoch: bool = False
    # adaptive tenure
    policy: str = "softmax"
    reward_model: str = "inverse"
    adaption_period: int = 10
    epsilon: float = 0.5
    warmup: int = -1                  # -1 = epochs // 2 (greedy only)
    tt_max: int = 6
    reward_source: str = "train"      # train | validation
    validation_fraction: float = 0.1
    # protocol
    replicates: int = 5
    base_seed: int = 0
    workers: int = 1
    timing: bool = False              # wall_ms column stays 0 unless enabled

    @property
    def tenure(self):
        """Fixed tenure implied by the variant (1 for adaptive's initial ledger)."""
        if self.variant.startswith("tenure:"):
            return int(self.variant.split(":", 1)[1])
        return 1

    @property
    def dropout_mode(self):
        return {"none": "none", "standard_dropout": "standard_inverted"}.get(
            self.variant, "tabu_tenure")

    @property
    def warmup_epochs(self):
        return self.epochs // 2 if self.warmup < 0 else self.warmup

    @property
    def label(self):
        if self.name:
            return self.name
        if self.variant == "adaptive":
            return f"adaptive:{self.policy}:{self.reward_model}:P{self.adaption_period}"
        return self.variant

    def dataset_key(self):
        return tuple(getattr(self, k) for k in DATASET_KEYS)

    def validate(self):
        def bad(key, why):
            raise UsageError(f"{key}: {why}", key=key)

        if self.dataset not in ("synth", "idx"):
            bad("dataset", "must be 'synth' or 'idx'")
        if self.dataset == "idx":
            for k in ("train_images", "train_labels", "test_images", "test_labels"):
                if not getattr(self, k):
                    bad(k, "required when dataset = idx")
        for k in ("hidden", "epochs", "batch_size", "replicates", "synth_dim", "synth_classes",
                  "adaption_period", "tt_max", "workers"):
            if getattr(self, k) < 1:
                bad(k, "must be >= 1")
        for k in ("n_train", "n_test", "synth_seed", "base_seed"):
            if getattr(self, k) < 0:
                bad(k, "must be >= 0")
        if self.dataset == "synth" and (self.n_train < 1 or self.n_test < 1):
            bad("n_train", "synthetic data needs explicit positive n_train and n_test")
        if not 0.0 <= self.drop_rate < 1.0:
            bad("drop_rate", "must lie in [0, 1)")
        if not self.learning_rate > 0:
            bad("learning_rate", "must be positive")
        if self.synth_spread < 0:
            bad("synth_spread", "must be >= 0")
        if not 0.0 <= self.epsilon <= 1.0:
            bad("epsilon", "must lie in [0, 1]")
        if self.dropout_sites not in ("one", "all"):
            bad("dropout_sites", "must be 'one' or 'all'")
        if self.precision not in ("float64", "float32"):
            bad("precision", "must be 'float64' or 'float32'")
        if self.policy not in POLICIES:
            bad("policy", f"must be one of {', '.join(POLICIES)}")
        if self.reward_model not in REWARD_MODELS:
            bad("reward_model", f"must be one of {', '.join(REWARD_MODELS)}")
        if self.reward_source not in ("train", "validation"):
            bad("reward_source", "must be 'train' or 'validation'")
        if not 0.0 < self.validation_fraction < 1.0:
            bad("validation_fraction", "must lie in (0, 1)")
        if self.variant.startswith("tenure:"):
            try:
                k = int(self.variant.split(":", 1)[1])
            except ValueError:
                bad("variant", "tenure:k needs an integer k")
            if not 1 <= k <= self.tt_max:
                bad("variant", f"tenure must lie in [1, tt_max={self.tt_max}]")
        elif self.variant not in VARIANTS:
            bad("variant", f"must be one of {', '.join(VARIANTS)}")
        return self


def _coerce(key, raw, typ):
    try:
        if typ is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if typ is int:
            return int(raw)
        if typ is float:
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError(raw)
            return value
        return raw
    except ValueError:
        raise UsageError(f"{key}: cannot parse {raw!r} as {typ.__name__}", key=key) from None


_TYPES = {f.name: {"int": int, "float": float, "bool": bool, "str": str}[f.type] for f in fields(ExperimentConfig)}


def parse_config(text, **overrides):
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _TYPES:
            raise UsageError(f"{key}: unknown config key", key=key)
        values[key] = _coerce(key, raw, _TYPES[key])
    for key, value in overrides.items():
        if value is not None:
            values[key] = value
    return ExperimentConfig(**values).validate()


def load_config(path, **overrides):
    text = Path(path).read_text(encoding="utf-8")
    cfg = parse_config(text, **overrides)
    if cfg.dataset == "idx":
        # relative data paths resolve against the config file's directory
        base = Path(path).resolve().parent
        paths = {k: str(base / getattr(cfg, k)) for k in DATASET_KEYS[1:5]}
        cfg = dataclasses.replace(cfg, **paths)
    return cfg


def dump_config(cfg):
    return "".join(f"{f.name} = {getattr(cfg, f.name)}\n" for f in fields(cfg))
