"""Bandit over tabu tenures: sample-average values, reward models, selection policies.

Arms are tenure values.  Each epoch the active arm earns a reward derived
from that epoch's loss; every ``period`` epochs a new arm is drawn from the
configured policy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ParameterError

POLICIES = ("random", "greedy", "epsilon_greedy", "probabilistic", "softmax")
REWARD_MODELS = ("inverse", "neg_exp")
DEFAULT_PERIODS = (10, 15, 20, 25)
LOSS_FLOOR = 1e-12


def default_arms(tt_max=6):
    if tt_max < 1:
        raise ParameterError("tt_max must be >= 1")
    return tuple(range(1, tt_max + 1))


def reward_inverse(loss):
    if not loss >= 0:
        raise DomainError(f"loss must be non-negative, got {loss!r}")
    return 1.0 / max(loss, LOSS_FLOOR)


def reward_negexp(loss):
    if not loss >= 0:
        raise DomainError(f"loss must be non-negative, got {loss!r}")
    return math.exp(-loss)


REWARD_FNS = {"inverse": reward_inverse, "neg_exp": reward_negexp}


@dataclass
class BanditState:
    arms: tuple = field(default_factory=default_arms)
    policy: str = "softmax"
    reward_model: str = "inverse"
    epsilon: float = 0.5
    warmup_epochs: int = 0
    reward_sum: np.ndarray = field(default=None, repr=False)
    pull_count: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.arms = tuple(int(a) for a in self.arms)
        if not self.arms:
            raise ParameterError("arm set must be non-empty")
        if any(a < 1 for a in self.arms) or any(b <= a for a, b in zip(self.arms, self.arms[1:])):
            raise ParameterError("arms must be strictly increasing positive integers")
        if self.policy not in POLICIES:
            raise ParameterError(f"unknown policy {self.policy!r}")
        if self.reward_model not in REWARD_MODELS:
            raise ParameterError(f"unknown reward model {self.reward_model!r}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ParameterError("epsilon must lie in [0, 1]")
        if self.warmup_epochs < 0:
            raise ParameterError("warmup_epochs must be non-negative")
        k = len(self.arms)
        if self.reward_sum is None:
            self.reward_sum = np.zeros(k)
        if self.pull_count is None:
            self.pull_count = np.zeros(k, dtype=np.int64)

    def index(self, arm):
        try:
            return self.arms.index(arm)
        except ValueError:
            raise DomainError(f"{arm!r} is not an arm ({self.arms})") from None


def record(state, arm, reward):
    if not reward >= 0:
        raise DomainError(f"reward must be non-negative, got {reward!r}")
    i = state.index(arm)
    state.reward_sum[i] += reward
    state.pull_count[i] += 1


def q_value(state, arm):
    i = state.index(arm)
    n = state.pull_count[i]
    return 0.0 if n == 0 else float(state.reward_sum[i] / n)


def q_values(state):
    n = state.pull_count
    return np.divide(state.reward_sum, n, out=np.zeros(len(n)), where=n > 0)


def _greedy_index(q):
    # np.argmax returns the first maximum, i.e. the smallest tenure on ties.
    return int(np.argmax(q))


def policy_distribution(state):
    """Selection probabilities over ``state.arms`` for the configured policy."""
    q = q_values(state)
    k = len(q)
    policy = state.policy
    if policy == "random":
        return np.full(k, 1.0 / k)
    if policy == "greedy":
        pi = np.zeros(k)
        pi[_greedy_index(q)] = 1.0
        return pi
    if policy == "epsilon_greedy":
        eps = state.epsilon
        pi = np.full(k, eps / k)
        pi[_greedy_index(q)] = 1.0 - eps + eps / k
        return pi
    if policy == "probabilistic":
        total = q.sum()
        if total <= 0:
            return np.full(k, 1.0 / k)
        return q / total
    # softmax
    z = np.exp(q - q.max())
    return z / z.sum()


def select_arm(state, epoch, rng, size=None):
    """Draw the next tenure.  Greedy explores uniformly before ``warmup_epochs``.

    With ``size`` given, returns an array of independent draws from the same
    distribution (identical to ``size`` scalar calls on the same stream).
    """
    if state.policy == "greedy" and epoch < state.warmup_epochs:
        pi = np.full(len(state.arms), 1.0 / len(state.arms))
    else:
        pi = policy_distribution(state)
    # inverse-CDF draw, one uniform per selection; side="right" never lands on a zero-mass arm
    cdf = np.cumsum(pi)
    idx = np.searchsorted(cdf, rng.random(size) * cdf[-1], side="right")
    idx = np.minimum(idx, len(pi) - 1)
    if size is None:
        return state.arms[int(idx)]
    return np.asarray(state.arms)[idx]


@dataclass(frozen=True)
class AdaptionSchedule:
    period: int = 10

    def __post_init__(self):
        if self.period < 1:
            raise ParameterError("adaption period must be >= 1")


def should_reselect(epoch, schedule):
    if epoch < 0:
        raise DomainError("epoch must be non-negative")
    return epoch % schedule.period == 0


def epoch_reward(state, arm, epoch_mean_train_loss):
    reward = REWARD_FNS[state.reward_model](epoch_mean_train_loss)
    record(state, arm, reward)
    return reward


class TenureController:
    """Drives a :class:`BanditState` on an adaption schedule, one call pair per epoch."""

    def __init__(self, state, schedule, rng):
        self.state = state
        self.schedule = schedule
        self.rng = rng
        self.current = None
        self.selections = []   # (epoch, tenure) for every draw
        self.log = []          # (epoch, tenure, reward)

    def begin_epoch(self, epoch):
        if self.current is None or should_reselect(epoch, self.schedule):
            self.current = select_arm(self.state, epoch, self.rng)
            self.selections.append((epoch, self.current))
        return self.current

    def end_epoch(self, epoch, loss):
        reward = epoch_reward(self.state, self.current, loss)
        self.log.append((epoch, self.current, reward))
        return reward
