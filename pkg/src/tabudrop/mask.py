"""Keep-mask sampling and the tabu-tenure ledger.

A keep-mask is a boolean numpy vector with ``True`` meaning the unit passes
through.  The ledger remembers, per unit, the most recent tick at which the
unit was dropped; a unit dropped within the last ``tenure`` ticks may not be
dropped again.  ``tenure = 1`` is plain tabu dropout (no unit drops twice in
a row).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, ShapeError, StateError

MODES = ("none", "standard_inverted", "tabu_tenure")


def _check_rate(p):
    if not 0.0 <= p < 1.0:
        raise ParameterError(f"drop rate must lie in [0, 1), got {p!r}")


@dataclass(frozen=True)
class DropoutConfig:
    drop_rate: float = 0.5
    mode: str = "tabu_tenure"
    tenure: int = 1
    # Resample (and tick) once per epoch instead of once per forward pass.
    tick_per_epoch: bool = False

    def __post_init__(self):
        _check_rate(self.drop_rate)
        if self.mode not in MODES:
            raise ParameterError(f"unknown dropout mode {self.mode!r}")
        if int(self.tenure) != self.tenure or self.tenure < 1:
            raise ParameterError(f"tenure must be a positive integer, got {self.tenure!r}")


@dataclass
class TabuLedger:
    """Per-unit last-drop ticks.  ``0`` marks a unit that was never dropped."""

    width: int
    tenure: int = 1
    tick: int = 1
    last_drop: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.width < 0:
            raise ParameterError("ledger width must be non-negative")
        if self.tenure < 1:
            raise ParameterError("tenure must be >= 1")
        if self.tick < 1:
            raise ParameterError("tick starts at 1")
        if self.last_drop is None:
            self.last_drop = np.zeros(self.width, dtype=np.int64)
        else:
            self.last_drop = np.asarray(self.last_drop, dtype=np.int64).copy()
            if self.last_drop.shape != (self.width,):
                raise ShapeError("last_drop length must equal width")

    def forbidden(self):
        """Units that may not be dropped at the current tick."""
        return (self.last_drop != 0) & (self.tick - self.last_drop <= self.tenure)

    def state_dict(self):
        return {"tick": self.tick, "tenure": self.tenure, "last_drop": self.last_drop.copy()}

    @classmethod
    def from_state(cls, state):
        last_drop = np.asarray(state["last_drop"], dtype=np.int64)
        return cls(width=last_drop.shape[0], tenure=int(state["tenure"]),
                   tick=int(state["tick"]), last_drop=last_drop)


def sample_keep_mask(width, p, rng):
    """Draw ``width`` uniforms; each unit is kept with probability ``1 - p``."""
    _check_rate(p)
    if width < 0:
        raise ParameterError("width must be non-negative")
    return rng.random(width) >= p


def _check_len(mask, ledger):
    if mask.shape != (ledger.width,):
        raise ShapeError(f"mask has shape {mask.shape}, ledger width is {ledger.width}")


def apply_tabu(mask, ledger):
    """Force-keep every unit the ledger currently forbids from dropping."""
    mask = np.asarray(mask, dtype=bool)
    _check_len(mask, ledger)
    return mask | ledger.forbidden()


def commit(mask, ledger):
    """Record this tick's drops and advance the tick counter."""
    mask = np.asarray(mask, dtype=bool)
    _check_len(mask, ledger)
    ledger.last_drop[~mask] = ledger.tick
    ledger.tick += 1


def scale(x, mask, p):
    """Inverted-dropout scaling: kept entries divided by ``1 - p``, dropped entries zeroed."""
    _check_rate(p)
    x = np.asarray(x)
    mask = np.asarray(mask, dtype=bool)
    if x.shape[-1] != mask.shape[-1]:
        raise ShapeError(f"input width {x.shape[-1]} != mask width {mask.shape[-1]}")
    return np.where(mask, x / (1.0 - p), 0.0).astype(x.dtype, copy=False)


class DropoutSite:
    """One dropout location in a network: config, ledger, rng and the cached mask.

    A site is single-owner state; never share one between threads.
    """

    def __init__(self, width, cfg, rng):
        self.cfg = cfg
        self.rng = rng
        self.ledger = TabuLedger(width, tenure=cfg.tenure)
        self.mask = None          # mask used by the most recent training forward
        self.frozen_mask = None   # when set, used verbatim and the ledger is left alone
        self._epoch_mask = None

    @property
    def width(self):
        return self.ledger.width

    def set_tenure(self, tenure):
        if tenure < 1:
            raise ParameterError("tenure must be >= 1")
        self.ledger.tenure = int(tenure)

    def start_epoch(self):
        self._epoch_mask = None

    def forward(self, x, training):
        return dropout_forward(x, self, self.cfg, training, self.rng)

    def backward(self, grad):
        if self.cfg.mode == "none":
            return grad
        if self.mask is None:
            raise StateError("backward called before a training forward pass")
        return scale(grad, self.mask, self.cfg.drop_rate)


def _tick(ledger, cfg, rng):
    """Sample, constrain and commit the mask for one tick."""
    mask = sample_keep_mask(ledger.width, cfg.drop_rate, rng)
    if cfg.mode == "tabu_tenure":
        mask = apply_tabu(mask, ledger)
    commit(mask, ledger)
    return mask


def dropout_forward(x, site, cfg, training, rng):
    """Apply dropout at ``site``.  Eval mode and mode ``none`` return ``x`` itself."""
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[1] != site.width:
        raise ShapeError(f"expected (batch, {site.width}) input, got {x.shape}")
    if not training or cfg.mode == "none":
        return x
    if site.frozen_mask is not None:
        mask = site.frozen_mask
    elif cfg.tick_per_epoch and site._epoch_mask is not None:
        mask = site._epoch_mask
    else:
        mask = _tick(site.ledger, cfg, rng)
        if cfg.tick_per_epoch:
            site._epoch_mask = mask
    site.mask = mask
    return scale(x, mask, cfg.drop_rate)
