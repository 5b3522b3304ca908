"""EXP3 meta-learner that picks one base strategy per round and reweights
it by the observed influence spread."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .strategies import Strategy

# Weights are jointly rescaled once the largest exceeds this; the sampling
# distribution is invariant to the rescaling.
WEIGHT_RESCALE_LIMIT = 1e100


@dataclass
class Exp3State:
    """Exponential weights and the mixed sampling distribution over strategies.

    Invariants: all weights positive; probs sums to one with an exploration
    floor of gamma / N on every entry.
    """

    weights: np.ndarray
    probs: np.ndarray
    gamma: float

    @property
    def n_strategies(self) -> int:
        return int(self.weights.shape[0])


def exp3_init(n_strategies: int, gamma: float) -> Exp3State:
    """Uniform start: every weight 1, every probability 1/N."""
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    if n_strategies < 1:
        raise ValueError("need at least one strategy")
    n = int(n_strategies)
    return Exp3State(weights=np.ones(n), probs=np.full(n, 1.0 / n), gamma=float(gamma))


def exp3_sample(state: Exp3State, rng: np.random.Generator) -> int:
    """Draw a strategy index from the current distribution."""
    return int(rng.choice(state.n_strategies, p=state.probs))


def exp3_update(state: Exp3State, spread: float, node_count: int,
                chosen: int) -> Exp3State:
    """Importance-weighted exponential update for the chosen strategy.

    The reward is the normalized spread g = spread / node_count; only the
    chosen strategy's weight changes, by exp(gamma * g / probs[chosen]),
    then the distribution is rebuilt as (1 - gamma) * w / sum(w) + gamma / N.
    """
    n = state.n_strategies
    if not 0 <= chosen < n:
        raise ValueError(f"chosen strategy index {chosen} out of range 0..{n - 1}")
    if node_count < 1:
        raise ValueError("node_count must be >= 1")
    if not 0 <= spread <= node_count:
        raise ValueError(f"spread {spread} outside [0, {node_count}]")
    g = spread / node_count
    state.weights[chosen] *= np.exp(state.gamma * g / state.probs[chosen])
    top = state.weights.max()
    if top > WEIGHT_RESCALE_LIMIT:
        state.weights /= top
    state.probs = ((1.0 - state.gamma) * state.weights / state.weights.sum()
                   + state.gamma / n)
    return state


def run_ensemble_round(members: list[Strategy], state: Exp3State, t: int,
                       rng: np.random.Generator) -> tuple[np.ndarray, int]:
    """Sample a member, return its estimate along with the chosen index."""
    if not members:
        raise ValueError("members must be nonempty")
    if len(members) != state.n_strategies:
        raise ValueError("one weight per member required")
    chosen = exp3_sample(state, rng)
    return members[chosen].estimate(t, rng), chosen


class EnsembleStrategy(Strategy):
    """Strategy whose per-round estimate comes from an EXP3-sampled member.

    By default every member's sufficient statistics digest the feedback each
    round, whichever member was chosen; ``shared_updates=False`` restricts
    the update to the chosen member.
    """

    name = "ensemble"

    def __init__(self, members: list[Strategy], gamma: float = 0.1,
                 shared_updates: bool = True):
        if not members:
            raise ValueError("ensemble needs at least one member")
        self.members = list(members)
        self.state = exp3_init(len(members), gamma)
        self.shared_updates = bool(shared_updates)
        self.chosen: int | None = None

    @property
    def member_names(self) -> list[str]:
        return [m.name for m in self.members]

    @property
    def member_probs(self) -> np.ndarray:
        return self.state.probs.copy()

    def estimate(self, t, rng):
        est, self.chosen = run_ensemble_round(self.members, self.state, t, rng)
        return est

    def observe(self, edge_ids, bits, rng):
        if self.chosen is None:
            raise RuntimeError("observe called before estimate")
        targets = self.members if self.shared_updates else [self.members[self.chosen]]
        for member in targets:
            member.observe(edge_ids, bits, rng)

    def reward_update(self, spread: float, node_count: int) -> None:
        if self.chosen is None:
            raise RuntimeError("reward_update called before estimate")
        exp3_update(self.state, spread, node_count, self.chosen)
