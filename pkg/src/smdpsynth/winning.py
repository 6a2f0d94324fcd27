"""Learning the winning region and the dynamics inside it.

A tabular Q-table over product state-action pairs starts at 0 outside the
accepting set and is driven down only by observed exits, so the induced
estimates W^k = {s | max_a Q(s,a) = 0} and W_p^k = {(s,a) | Q(s,a) = 0}
shrink monotonically onto the exact winning region. Exploration mixes an
entropy-seeking policy inside the region with a boundary-probing policy on
its rim, and conjugate posteriors over the observed dynamics are refreshed
periodically from the retained data.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .bayes import (
    ObservationStore, dwell_entropy, predictive_successors,
    predictive_transition, transition_entropy, update_posteriors,
)
from .errors import EmptyWinningCandidate, NoAllowedAction, UntrackedPair
from .product import ProductSmdp, sample_product_step

# softmax score handed to pairs with no data yet; dwarfs any real entropy
# so unexplored actions are preferred, and the stable softmax keeps it finite
UNSEEN_SCORE = 1e3


class _IndexedSet:
    """Set with O(1) add/discard and O(1) uniform sampling."""

    def __init__(self, items=()):
        self._items = list(items)
        self._pos = {x: i for i, x in enumerate(self._items)}

    def add(self, x):
        if x not in self._pos:
            self._pos[x] = len(self._items)
            self._items.append(x)

    def discard(self, x):
        i = self._pos.pop(x, None)
        if i is not None:
            last = self._items.pop()
            if last != x:
                self._items[i] = last
                self._pos[last] = i

    def choice(self, rng):
        return self._items[int(rng.integers(len(self._items)))]

    def __contains__(self, x):
        return x in self._pos

    def __len__(self):
        return len(self._items)

    def __iter__(self):
        return iter(self._items)


@dataclass
class LearnerConfig:
    """Knobs for the winning-region learner."""

    alpha: float = 0.2                # constant learning rate
    posterior_period: int = 10        # episodes between posterior refreshes
    episode_budget: int = 50_000
    step_cap: int = 4000              # per-episode exploration bound
    temperature: float = 1.0          # softmax temperature of both policies
    epsilon: float = 0.05             # uniform mixing weight
    patience: int = 500               # stable episodes required to stop
    min_tries: int = 10               # tries required of every surviving pair
    cover_start_prob: float = 0.25    # episode starts forced onto a pair
    gamma_acc: float = 0.99           # sets the exit penalty (1 - gamma_acc)
    seed: int = 0
    debug_checks: bool = False

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must be in (0,1], got {self.alpha}")
        if self.posterior_period < 1 or self.episode_budget < 1 \
                or self.step_cap < 1 or self.patience < 1:
            raise ValueError("periods, budgets, and caps must be >= 1")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if not 0 <= self.epsilon <= 1 or not 0 <= self.cover_start_prob <= 1:
            raise ValueError("mixing weights must be in [0,1]")
        if not 0 < self.gamma_acc < 1:
            raise ValueError("gamma_acc must be in (0,1)")
        if self.min_tries < 0:
            raise ValueError("min_tries must be nonnegative")


def softmax_policy(actions, scores, temperature, epsilon):
    """(1-eps) * softmax(score/T) + eps * uniform, numerically stable."""
    if not actions:
        raise NoAllowedAction("no allowed action to choose from")
    z = np.asarray(scores, dtype=float) / temperature
    z -= z.max()
    w = np.exp(z)
    w /= w.sum()
    u = 1.0 / len(actions)
    return {a: float((1 - epsilon) * wi + epsilon * u)
            for a, wi in zip(actions, w)}


def boundary(w, w_p, support):
    """States of w having a winning pair with known mass leaving w.

    `support` maps each pair to the successors it is known to reach: the
    observed ones plus any predictive support above threshold. The true
    transition function is unknown while learning, so this estimate stands
    in for it.
    """
    out = set()
    for (s, a) in w_p:
        if s in w and any(s2 not in w for s2 in support.get((s, a), ())):
            out.add(s)
    return frozenset(out)


def q_update(q, transition, r, alpha, support=None):
    """One tabular update on an exit transition; returns (q', w, w_p, dw).

    q' applies (1-alpha)*Q(s,a) + alpha*(r + max_a' Q(s',a')) clipped to
    [-1, 0]; the region estimates are then re-read off the new table, and
    the boundary uses `support` (observed successors per pair) when given.
    """
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must be in (0,1], got {alpha}")
    s, a, s2 = transition
    best_next = max(v for (i, _b), v in q.items() if i == s2)
    v = (1 - alpha) * q[(s, a)] + alpha * (r + best_next)
    q2 = dict(q)
    q2[(s, a)] = min(0.0, max(-1.0, v))
    w_p = frozenset(pair for pair, val in q2.items() if val == 0.0)
    w = frozenset(pair[0] for pair in w_p)
    return q2, w, w_p, boundary(w, w_p, support or {})


@dataclass
class LearnerResult:
    w: frozenset
    w_p: frozenset
    transition_posterior: object
    dwell_posterior: object
    store: ObservationStore
    episodes: int
    converged: bool
    monotone_violations: int
    progress: list = field(repr=False)
    q: dict = field(repr=False)


def ind_k(oracle_w_p, learned_w_p) -> float:
    """Agreement ratio |W_p| / |W_p^k| of the exact and estimated pair sets."""
    if len(learned_w_p) == 0:
        raise ZeroDivisionError("estimated winning-pair set is empty")
    return len(oracle_w_p) / len(learned_w_p)


class WinningLearner:
    """Incremental state of the winning-region learning loop.

    The learner touches the product only through sampling; the exact rows
    are never read. Observations are stored per product pair (and dropped
    with the pair when it leaves W_p^k) but pooled per model pair for the
    posterior, since product copies of a model state share its dynamics.
    """

    def __init__(self, p: ProductSmdp, cfg: LearnerConfig, oracle_w_p=None):
        self.p = p
        self.cfg = cfg
        self.oracle_w_p = frozenset(oracle_w_p) if oracle_w_p else None
        self.rng = np.random.default_rng(cfg.seed)

        self.q = {}
        self.w = _IndexedSet()
        self.w_p = _IndexedSet()
        for i in range(p.n_states):
            acc = i in p.accepting
            for a in p.enabled(i):
                self.q[(i, a)] = -1.0 if acc else 0.0
                if not acc:
                    self.w_p.add((i, a))
            if not acc:
                self.w.add(i)
        if len(self.w) == 0:
            raise EmptyWinningCandidate("no candidate winning state at start")

        # zero-valued actions per state, to detect states leaving W in O(1)
        self._zero_actions = {i: len(p.enabled(i))
                              for i in range(p.n_states)
                              if i not in p.accepting}
        # boundary bookkeeping: per-pair observed successors, reverse index,
        # and the per-state count of winning pairs with an observed way out
        self._obs_succ = {}
        self._preds_of = {}
        self._out_pairs = set()
        self._out_count = {}
        self._dw = _IndexedSet()

        self.store = ObservationStore(keep_tuples=False)
        self.tries = {}
        # winning-candidate pairs still short of min_tries; forced episode
        # starts draw from here so coverage is targeted, not accidental
        self._under = _IndexedSet(self.w_p) if cfg.min_tries > 0 \
            else _IndexedSet()
        self.tpost = None
        self.dpost = None
        # exploration scores are cached until the posterior or the region
        # estimate changes; _gen stamps every cache entry
        self._gen = 0
        self._ent_cache = {}
        self._out_cache = {}
        self._refresh_posteriors()

        self.episodes = 0
        self.monotone_violations = 0
        self.progress = []
        self._stable = 0
        self.converged = False

    # --- set maintenance ---------------------------------------------------

    def _note_observation(self, i, a, j):
        succs = self._obs_succ.setdefault((i, a), set())
        if j not in succs:
            succs.add(j)
            self._preds_of.setdefault(j, set()).add((i, a))
            if (i, a) in self.w_p and j not in self.w:
                self._add_out_pair((i, a))

    def _add_out_pair(self, pair):
        if pair not in self._out_pairs:
            self._out_pairs.add(pair)
            s = pair[0]
            self._out_count[s] = self._out_count.get(s, 0) + 1
            if s in self.w:
                self._dw.add(s)

    def _drop_out_pair(self, pair):
        if pair in self._out_pairs:
            self._out_pairs.discard(pair)
            s = pair[0]
            self._out_count[s] -= 1
            if self._out_count[s] == 0:
                self._dw.discard(s)

    def _remove_pair(self, pair):
        """Pair's Q fell below zero: leaves W_p, maybe drags its state out."""
        self._gen += 1
        self.w_p.discard(pair)
        self._under.discard(pair)
        self._drop_out_pair(pair)
        self.store.drop_pair(*pair)
        i = pair[0]
        self._zero_actions[i] -= 1
        if self._zero_actions[i] == 0:
            self._remove_state(i)

    def _remove_state(self, i):
        self.w.discard(i)
        self._dw.discard(i)
        # pairs known to reach i now have an observed way out of W; sorted
        # so the boundary set fills in one order regardless of hash seed
        for pair in sorted(self._preds_of.get(i, ())):
            if pair in self.w_p:
                self._add_out_pair(pair)

    def _refresh_posteriors(self):
        self.tpost, self.dpost = update_posteriors(
            self.store, list(self.w_p),
            pool=lambda pair: (self.p.states[pair[0]][0], pair[1]))
        self._gen += 1

    # --- exploration policies ------------------------------------------------

    def _allowed(self, i):
        acts = [a for a in self.p.enabled(i) if (i, a) in self.w_p]
        if not acts:
            raise NoAllowedAction(f"state {i} has no winning-candidate action")
        return acts

    def _ent_score(self, s, a):
        """Posterior entropy of a model pair; huge bonus when unexplored."""
        hit = self._ent_cache.get((s, a))
        if hit is not None and hit[0] == self._gen:
            return hit[1]
        try:
            h = transition_entropy(self.tpost, s, a)
            cands = predictive_successors(self.tpost, s, a)
            h += sum(dwell_entropy(self.dpost, s, a, c)
                     for c in cands) / len(cands)
        except UntrackedPair:
            h = UNSEEN_SCORE
        self._ent_cache[(s, a)] = (self._gen, h)
        return h

    def _out_score(self, i, a):
        """Predictive probability that the pair leaves the current W^k."""
        hit = self._out_cache.get((i, a))
        if hit is not None and hit[0] == self._gen:
            return hit[1]
        s, f = self.p.states[i]
        try:
            cands = predictive_successors(self.tpost, s, a)
            row = predictive_transition(self.tpost, s, a)
        except UntrackedPair:
            cands, row = (), ()
        out = 0.0
        for c, pr in zip(cands, row):
            f2 = self.p.d.step(f, self.p.m.letter_of(c))
            j = self.p.index.get((c, f2))
            if j is None or j not in self.w:
                out += pr
        self._out_cache[(i, a)] = (self._gen, out)
        return out

    def pi_ent(self, i):
        """Prefer pairs whose posterior is still uncertain."""
        acts = self._allowed(i)
        s = self.p.states[i][0]
        scores = [self._ent_score(s, a) for a in acts]
        return softmax_policy(acts, scores, self.cfg.temperature,
                              self.cfg.epsilon)

    def pi_wperp(self, i):
        """Prefer pairs with high predictive mass leaving W^k."""
        acts = self._allowed(i)
        scores = [self._out_score(i, a) for a in acts]
        return softmax_policy(acts, scores, self.cfg.temperature,
                              self.cfg.epsilon)

    def pi_ex(self, i):
        """Boundary states probe outward; interior states chase entropy."""
        if i not in self.w:
            raise NoAllowedAction(f"state {i} is outside the candidate region")
        return self.pi_wperp(i) if i in self._dw else self.pi_ent(i)

    def _sample_action(self, i):
        dist = self.pi_ex(i)
        acts = list(dist)
        probs = np.array([dist[a] for a in acts])
        return acts[int(self.rng.choice(len(acts), p=probs / probs.sum()))]

    # --- episode loop --------------------------------------------------------

    def _sample_start(self):
        if len(self.w_p) and self.rng.random() < self.cfg.cover_start_prob:
            pool = self._under if len(self._under) else self.w_p
            return pool.choice(self.rng)
        if len(self._dw):
            return self._dw.choice(self.rng), None
        return self.w.choice(self.rng), None

    def run_episode(self):
        """One exploration episode; applies at most one Q update."""
        cfg = self.cfg
        t0 = time.perf_counter()
        i, forced = self._sample_start()
        exit_pair = None
        steps = 0
        for _ in range(cfg.step_cap):
            a = forced if forced is not None else self._sample_action(i)
            forced = None
            j, tau, model_s2 = sample_product_step(self.p, i, a, self.rng)
            steps += 1
            self.store.append(i, a, model_s2, tau)
            n = self.tries.get((i, a), 0) + 1
            self.tries[(i, a)] = n
            if n >= cfg.min_tries:
                self._under.discard((i, a))
            self._note_observation(i, a, j)
            if j not in self.w:
                exit_pair = (i, a, j)
                break
            i = j

        before_wp = len(self.w_p)
        before_w = len(self.w)
        if exit_pair is not None:
            s, a, s2 = exit_pair
            r = -(1.0 - cfg.gamma_acc)
            best_next = max(self.q[(s2, b)] for b in self.p.enabled(s2))
            v = (1 - cfg.alpha) * self.q[(s, a)] + cfg.alpha * (r + best_next)
            self.q[(s, a)] = min(0.0, max(-1.0, v))
            if self.q[(s, a)] < 0.0 and (s, a) in self.w_p:
                self._remove_pair((s, a))
            self._stable = 0
        else:
            self._stable += 1

        if len(self.w_p) > before_wp or len(self.w) > before_w:
            self.monotone_violations += 1
        if cfg.debug_checks:
            self._check_consistency()

        self.episodes += 1
        if self.episodes % cfg.posterior_period == 0:
            self._refresh_posteriors()

        row = {"episode": self.episodes, "w": len(self.w),
               "w_p": len(self.w_p), "boundary": len(self._dw),
               "steps": steps, "wall": time.perf_counter() - t0}
        if self.oracle_w_p is not None:
            row["ind"] = ind_k(self.oracle_w_p, self.w_p) if len(self.w_p) \
                else float("nan")
        self.progress.append(row)

    def _coverage_reached(self):
        return len(self._under) == 0

    def _check_consistency(self):
        w = {i for i in range(self.p.n_states)
             if any(self.q[(i, a)] == 0.0 for a in self.p.enabled(i))}
        w_p = {pair for pair, v in self.q.items() if v == 0.0}
        assert w == set(self.w), "W estimate out of sync with Q"
        assert w_p == set(self.w_p), "W_p estimate out of sync with Q"
        for pair in self.store.pairs():
            assert pair in w_p, "retained data outside W_p"

    def run(self):
        while self.episodes < self.cfg.episode_budget:
            if len(self.w) == 0:
                self.converged = True
                break
            self.run_episode()
            if self._stable >= self.cfg.patience and self._coverage_reached():
                self.converged = True
                break
        self._refresh_posteriors()
        return LearnerResult(
            w=frozenset(self.w), w_p=frozenset(self.w_p),
            transition_posterior=self.tpost, dwell_posterior=self.dpost,
            store=self.store, episodes=self.episodes,
            converged=self.converged,
            monotone_violations=self.monotone_violations,
            progress=self.progress, q=dict(self.q))


def init_learner(p: ProductSmdp, cfg: LearnerConfig, oracle_w_p=None):
    """Fresh learner with Q = -1 on the accepting set and 0 elsewhere."""
    return WinningLearner(p, cfg, oracle_w_p=oracle_w_p)


def run_algorithm1(p: ProductSmdp, cfg: LearnerConfig,
                   oracle_w_p=None) -> LearnerResult:
    """Learn (W, W_p) and the dynamics inside them from sampled episodes.

    Runs episodes until the winning-pair estimate has been stable for
    `patience` episodes with every surviving pair tried at least
    `min_tries` times, or the episode budget runs out (the result is then
    flagged converged=False and carries the best estimate so far).
    """
    return init_learner(p, cfg, oracle_w_p=oracle_w_p).run()
