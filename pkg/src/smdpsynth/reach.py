"""Q-learning of the transient policy that drives the system into the
winning region with maximal probability.

Rewards and discounts are state-dependent: entering the losing absorbing
set pays (1-gamma_acc)*r_n and discounts by gamma_acc, so its value is
exactly r_n; everything else pays 0 and discounts by gamma. Entering the
winning region ends the episode with value 0. Maximizing the resulting Q
is then equivalent, for gamma close to one, to maximizing the probability
of reaching the winning region.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .product import ProductSmdp, sample_product_step


@dataclass
class RewardDiscountSpec:
    """State-dependent reward and discount levels."""

    gamma: float = 0.9999        # discount outside the losing sink
    gamma_acc: float = 0.9       # discount inside the losing sink
    r_n: float = -1.0            # penalty level; sink value equals r_n

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ValueError(f"gamma must be in (0,1), got {self.gamma}")
        if not 0 < self.gamma_acc < 1:
            raise ValueError(
                f"gamma_acc must be in (0,1), got {self.gamma_acc}")
        if self.r_n >= 0:
            raise ValueError(f"r_n must be negative, got {self.r_n}")


@dataclass
class QLearnSchedule:
    """Episode counts and the visit-decayed learning rate alpha."""

    episodes: int = 20_000
    step_cap: int = 4000
    visit_offset: float = 10.0   # alpha = offset / (offset + visits)
    epsilon: float = 0.3         # behavior-policy exploration
    seed: int = 0

    def __post_init__(self):
        if self.episodes < 1 or self.step_cap < 1:
            raise ValueError("episodes and step_cap must be >= 1")
        if self.visit_offset <= 0:
            raise ValueError("visit_offset must be positive")
        if not 0 <= self.epsilon <= 1:
            raise ValueError("epsilon must be in [0,1]")


def reward(p: ProductSmdp, i, spec: RewardDiscountSpec) -> float:
    """(1-gamma_acc)*r_n on the losing sink, 0 elsewhere."""
    return (1 - spec.gamma_acc) * spec.r_n if i in p.accepting else 0.0


def discount(p: ProductSmdp, i, spec: RewardDiscountSpec) -> float:
    """gamma_acc on the losing sink, gamma elsewhere."""
    return spec.gamma_acc if i in p.accepting else spec.gamma


@dataclass
class TransientQ:
    """Learned action values on the states outside the winning region."""

    q: dict
    visits: dict
    episodes: int
    updates: int
    cauchy_tail: float           # max |delta Q| over the last 10% of updates
    deltas: list = field(repr=False, default_factory=list)

    def value(self, i):
        row = [v for (j, _a), v in self.q.items() if j == i]
        return max(row) if row else 0.0


def _greedy(q, p, i):
    best, best_v = None, None
    for a in p.enabled(i):
        v = q[(i, a)]
        if best_v is None or v > best_v:
            best, best_v = a, v
    return best


def qlearn_transient(p: ProductSmdp, w, spec: RewardDiscountSpec,
                     schedule: QLearnSchedule) -> TransientQ:
    """Tabular Q-learning on S minus the winning region.

    Episodes start round-robin over the non-sink transient states, cycling
    through each state's actions as the forced first move so every pair is
    visited; afterwards the behavior policy is epsilon-greedy. An episode
    ends on entering the winning region (value 0), on entering the losing
    sink (value pinned to r_n), or at the step cap (truncated with plain
    bootstrap). The sink rows are never updated.
    """
    w = frozenset(w)
    rng = np.random.default_rng(schedule.seed)
    transient = [i for i in range(p.n_states) if i not in w]
    q = {}
    for i in transient:
        pinned = i in p.accepting
        for a in p.enabled(i):
            q[(i, a)] = spec.r_n if pinned else 0.0
    starts = [i for i in transient if i not in p.accepting]
    visits = {}
    deltas = []
    c = schedule.visit_offset
    episodes = 0
    if starts:
        action_cursor = {i: 0 for i in starts}
        for k in range(schedule.episodes):
            episodes += 1
            i = starts[k % len(starts)]
            cur = action_cursor[i]
            acts = p.enabled(i)
            forced = acts[cur % len(acts)]
            action_cursor[i] = cur + 1
            for _ in range(schedule.step_cap):
                if forced is not None:
                    a = forced
                    forced = None
                elif rng.random() < schedule.epsilon:
                    acts = p.enabled(i)
                    a = acts[int(rng.integers(len(acts)))]
                else:
                    a = _greedy(q, p, i)
                j, _tau, _s2 = sample_product_step(p, i, a, rng)
                if j in w:
                    target = 0.0
                else:
                    target = reward(p, j, spec) + discount(p, j, spec) \
                        * max(q[(j, b)] for b in p.enabled(j))
                n = visits.get((i, a), 0)
                visits[(i, a)] = n + 1
                alpha = c / (c + n)
                old = q[(i, a)]
                new = (1 - alpha) * old + alpha * target
                q[(i, a)] = new
                deltas.append(abs(new - old))
                if j in w or j in p.accepting:
                    break
                i = j

    tail = deltas[-max(1, len(deltas) // 10):] if deltas else [0.0]
    return TransientQ(q=q, visits=visits, episodes=episodes,
                      updates=len(deltas), cauchy_tail=max(tail),
                      deltas=deltas)


def extract_pi_tr(p: ProductSmdp, w, tq: TransientQ) -> dict:
    """Greedy positional policy on the transient states.

    Ties break to the action listed first in the state's enabled tuple,
    which follows the model's action order.
    """
    w = frozenset(w)
    return {i: _greedy(tq.q, p, i)
            for i in range(p.n_states) if i not in w}


def transient_to_json(p: ProductSmdp, w, tq: TransientQ) -> dict:
    """Policy and greedy-value tables keyed by product state id."""
    pi = extract_pi_tr(p, w, tq)
    return {
        "policy": {str(i): a for i, a in sorted(pi.items())},
        "values": {str(i): max(tq.q[(i, a)] for a in p.enabled(i))
                   for i in sorted(pi)},
    }
