"""Product of an SMDP with a deterministic counting automaton, plus exact
oracles for the winning region and maximal reachability probabilities."""

from __future__ import annotations

from collections import deque

import numpy as np

from .automata import Dkcba
from .errors import ActionNotEnabled, AlphabetMismatch, UnknownState
from .smdp import Smdp


class ProductSmdp:
    """Synchronous product, materialized over the reachable states only.

    A product state pairs a model state with the automaton state reached
    after reading the labels of every model state seen so far, the label of
    the current one included. Dwell distributions carry over from the model
    unchanged. `accepting` collects the product states whose automaton
    component is accepting; staying outside it forever is the safety
    objective the learner works toward.
    """

    def __init__(self, m: Smdp, d: Dkcba):
        if m.ap != d.ap:
            raise AlphabetMismatch(
                f"model ap {m.ap} does not match automaton ap {d.ap}")
        self.m = m
        self.d = d

        f0 = d.step(d.initial, m.letter_of(m.initial))
        init = (m.initial, f0)
        index = {init: 0}
        states = [init]
        rows = {}
        queue = deque([init])
        while queue:
            s, f = queue.popleft()
            pid = index[(s, f)]
            for a in m._enabled[s]:
                succs, probs = m.trans_row(s, a)
                pids = []
                for s2 in succs:
                    f2 = d.step(f, m.letter_of(s2))
                    key = (s2, f2)
                    nid = index.get(key)
                    if nid is None:
                        nid = len(states)
                        index[key] = nid
                        states.append(key)
                        queue.append(key)
                    pids.append(nid)
                rows[(pid, a)] = (tuple(pids), probs)

        self.states = tuple(states)
        self.index = index
        self.n_states = len(states)
        self.initial = 0
        self._rows = rows
        acc_d = d.accepting
        self.accepting = frozenset(
            i for i, (_, f) in enumerate(states) if f in acc_d)

    def check_state(self, i):
        if not 0 <= i < self.n_states:
            raise UnknownState(f"product state {i} not in 0..{self.n_states - 1}")

    def enabled(self, i):
        self.check_state(i)
        return self.m._enabled[self.states[i][0]]

    def trans_row(self, i, a):
        self.check_state(i)
        row = self._rows.get((i, a))
        if row is None:
            raise ActionNotEnabled(f"action {a!r} not enabled in product state {i}")
        return row

    def dwell_of(self, i, a, j):
        s, _ = self.states[i]
        s2, _ = self.states[j]
        return self.m.dwell[(s, a, s2)]

    def to_json_dict(self, winning=None, winning_pairs=None):
        doc = {
            "states": [[self.m.names[s], f] for s, f in self.states],
            "actions": list(self.m.actions),
            "initial": self.initial,
            "accepting": sorted(self.accepting),
            "transitions": {
                f"{i}/{a}": {str(j): p for j, p in zip(*row)}
                for (i, a), row in sorted(self._rows.items(),
                                          key=lambda kv: (kv[0][0], kv[0][1]))
            },
        }
        if winning is not None:
            doc["winning_states"] = sorted(winning)
        if winning_pairs is not None:
            doc["winning_pairs"] = sorted([i, a] for i, a in winning_pairs)
        return doc


def build_product(m: Smdp, d: Dkcba) -> ProductSmdp:
    """BFS-indexed reachable product of a model and a counting automaton."""
    return ProductSmdp(m, d)


def sample_product_step(p: ProductSmdp, i, a, rng):
    """Draw one product transition; returns (j, tau, model_successor).

    Sampling-only access: this is the simulator interface the learner sees,
    which never reads the transition table directly.
    """
    succs, probs = p.trans_row(i, a)
    k = int(np.searchsorted(np.cumsum(probs), rng.random(), side="right"))
    j = succs[min(k, len(succs) - 1)]
    tau = p.dwell_of(i, a, j).sample(rng)
    return j, tau, p.states[j][0]


def exact_winning_region(p: ProductSmdp):
    """Greatest fixpoint of the stay-safe operator.

    Returns (W, W_p): the states from which the accepting set is avoidable
    with probability one, and the state-action pairs whose whole successor
    support stays inside W. Exact; used as the reference the learner is
    measured against.
    """
    alive = [True] * p.n_states
    for i in p.accepting:
        alive[i] = False

    preds = {}
    bad_count = {}
    good_actions = [0] * p.n_states
    for (i, a), (succs, _) in p._rows.items():
        bad = sum(1 for j in set(succs) if not alive[j])
        bad_count[(i, a)] = bad
        if bad == 0:
            good_actions[i] += 1
        for j in set(succs):
            preds.setdefault(j, []).append((i, a))

    # accepting states were dead before the counts were taken, so only
    # states flipping dead now need to cascade
    dead = deque()
    for i in range(p.n_states):
        if alive[i] and good_actions[i] == 0:
            alive[i] = False
            dead.append(i)

    while dead:
        j = dead.popleft()
        for (i, a) in preds.get(j, ()):
            bad_count[(i, a)] += 1
            if bad_count[(i, a)] == 1:
                good_actions[i] -= 1
                if good_actions[i] == 0 and alive[i]:
                    alive[i] = False
                    dead.append(i)

    w = frozenset(i for i in range(p.n_states) if alive[i])
    w_p = frozenset((i, a) for (i, a), (succs, _) in p._rows.items()
                    if alive[i] and all(alive[j] for j in succs))
    return w, w_p


def exact_max_reach_probability(p: ProductSmdp, target) -> np.ndarray:
    """max_pi Pr(reach target from each state), by value iteration.

    Target states are pinned at 1; iteration stops when the sup-norm
    residual drops below 1e-12.
    """
    target = set(target)
    for i in target:
        p.check_state(i)
    v = np.zeros(p.n_states)
    for i in target:
        v[i] = 1.0
    rows = [(i, a, succs, np.asarray(probs))
            for (i, a), (succs, probs) in p._rows.items() if i not in target]
    by_state = {}
    for i, a, succs, probs in rows:
        by_state.setdefault(i, []).append((list(succs), probs))

    while True:
        residual = 0.0
        for i, options in by_state.items():
            best = max(float(probs @ v[succs]) for succs, probs in options)
            residual = max(residual, abs(best - v[i]))
            v[i] = best
        if residual < 1e-12:
            return v


def policy_reach_probability(p: ProductSmdp, policy, target) -> np.ndarray:
    """Pr(reach target from each state) under a fixed positional policy.

    Solved exactly as a linear system on the states that can reach the
    target under the policy; everything else gets 0.
    """
    target = set(target)
    for i in target:
        p.check_state(i)
    succ_of = {}
    for i in range(p.n_states):
        if i in target:
            continue
        a = policy[i] if hasattr(policy, "__getitem__") else policy(i)
        succ_of[i] = p.trans_row(i, a)

    can = set(target)
    changed = True
    while changed:
        changed = False
        for i, (succs, probs) in succ_of.items():
            if i not in can and any(j in can for j in succs):
                can.add(i)
                changed = True

    unknown = sorted(can - target)
    pos = {i: k for k, i in enumerate(unknown)}
    n = len(unknown)
    mat = np.eye(n)
    rhs = np.zeros(n)
    for i in unknown:
        succs, probs = succ_of[i]
        for j, pr in zip(succs, probs):
            if j in target:
                rhs[pos[i]] += pr
            elif j in pos:
                mat[pos[i], pos[j]] -= pr
    sol = np.linalg.solve(mat, rhs) if n else np.zeros(0)

    v = np.zeros(p.n_states)
    for i in target:
        v[i] = 1.0
    for i, k in pos.items():
        v[i] = float(sol[k])
    return v
