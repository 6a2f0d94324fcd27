"""Dwell-time risk minimization inside the winning region.

The estimated transition law and a per-transition risk (a functional of
the predictive dwell distribution) define a discounted minimization
problem over the winning pairs only, so any greedy policy of its fixed
point keeps the region invariant while minimizing accumulated risk. Value
iteration solves it; the transient policy fills in the rest of the state
space.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .bayes import MeanPlusSigma, predictive_dwell, predictive_successors, \
    predictive_transition, risk_of
from .errors import DomainGap, NonfiniteRisk, PolicyLeavesW
from .product import ProductSmdp


@dataclass
class RiskModel:
    """Estimated dynamics and risks restricted to the winning pairs."""

    trans: dict                  # (i, a) -> (successor pids, probs)
    risks: dict                  # (i, a, j) -> nonnegative risk
    allowed: dict                # i -> tuple of actions with (i, a) winning
    gamma_r: float = 0.9
    escaped: dict = field(default_factory=dict)   # (i, a) -> renormalized mass

    def __post_init__(self):
        if not 0 <= self.gamma_r < 1:
            raise ValueError(f"gamma_r must be in [0,1), got {self.gamma_r}")
        for i, acts in self.allowed.items():
            if not acts:
                raise ValueError(f"state {i} has no allowed action")
        for (i, a), (succs, probs) in self.trans.items():
            if abs(sum(probs) - 1.0) > 1e-9:
                raise ValueError(f"row ({i},{a}) does not sum to one")
            for j in succs:
                if j not in self.allowed:
                    raise ValueError(
                        f"row ({i},{a}) leaves the winning region")


def build_risk_model(p: ProductSmdp, w, w_p, tpost, dpost,
                     functional=None, gamma_r=0.9) -> RiskModel:
    """Assemble the planner's model from the learned posteriors.

    Posterior rows are keyed by model pair; successors are lifted back to
    product states. Predictive mass on successors outside the winning
    region (possible under estimation noise) is renormalized away with a
    warning. Risks must come out finite and nonnegative.
    """
    functional = functional or MeanPlusSigma(1.0)
    w = frozenset(w)
    trans = {}
    risks = {}
    escaped = {}
    allowed = {}
    for (i, a) in sorted(w_p, key=lambda pair: (pair[0], str(pair[1]))):
        s, f = p.states[i]
        cands = predictive_successors(tpost, s, a)
        row = predictive_transition(tpost, s, a)
        succs, probs, kept_models = [], [], []
        lost = 0.0
        for s2, pr in zip(cands, row):
            f2 = p.d.step(f, p.m.letter_of(s2))
            j = p.index.get((s2, f2))
            if j is None or j not in w:
                lost += pr
            else:
                succs.append(j)
                probs.append(pr)
                kept_models.append(s2)
        if not succs:
            raise ValueError(
                f"pair ({i},{a}) has no predictive mass inside the region")
        if lost > 0.0:
            warnings.warn(
                f"pair ({i},{a}): renormalized {lost:.3g} predictive mass "
                "escaping the winning region", stacklevel=2)
            escaped[(i, a)] = lost
        total = sum(probs)
        trans[(i, a)] = (tuple(succs), tuple(pr / total for pr in probs))
        for j, s2 in zip(succs, kept_models):
            r = risk_of(predictive_dwell(dpost, s, a, s2), functional)
            if not math.isfinite(r) or r < 0:
                raise NonfiniteRisk(
                    f"risk of ({i},{a},{j}) is {r!r}")
            risks[(i, a, j)] = r
        allowed.setdefault(i, []).append(a)
    for i in w:
        if i not in allowed:
            raise ValueError(f"winning state {i} has no winning pair")
    # ties in the greedy policy break toward the earliest enabled action,
    # so keep each allowed tuple in the model's action order
    allowed = {i: tuple(a for a in p.enabled(i) if a in acts)
               for i, acts in allowed.items()}
    return RiskModel(trans=trans, risks=risks, allowed=allowed,
                     gamma_r=gamma_r, escaped=escaped)


def risk_model_from_product(p: ProductSmdp, w, w_p, risk_fn,
                            gamma_r=0.9) -> RiskModel:
    """Exact-model counterpart of build_risk_model, for oracles and tests.

    Uses the product's true rows restricted to the winning pairs; `risk_fn`
    is a callable (i, a, j) -> value on product ids. Winning pairs whose
    true support leaves the region are rejected.
    """
    w = frozenset(w)
    trans = {}
    risks = {}
    allowed = {}
    for (i, a) in sorted(w_p, key=lambda pair: (pair[0], str(pair[1]))):
        succs, probs = p.trans_row(i, a)
        if any(j not in w for j in succs):
            raise ValueError(f"pair ({i},{a}) leaves the winning region")
        trans[(i, a)] = (tuple(succs), tuple(probs))
        for j in succs:
            r = risk_fn(i, a, j)
            if not math.isfinite(r) or r < 0:
                raise NonfiniteRisk(f"risk of ({i},{a},{j}) is {r!r}")
            risks[(i, a, j)] = r
        allowed.setdefault(i, []).append(a)
    allowed = {i: tuple(a for a in p.enabled(i) if a in acts)
               for i, acts in allowed.items()}
    return RiskModel(trans=trans, risks=risks, allowed=allowed,
                     gamma_r=gamma_r)


@dataclass
class RiskQ:
    """Fixed point of the discounted risk recursion on winning pairs."""

    q: dict
    residual: float
    iterations: int
    residuals: list = field(repr=False, default_factory=list)


def risk_value_iteration(rm: RiskModel, tol=1e-9) -> RiskQ:
    """Iterate Q(s,a) = sum_j T(j|s,a) (risk(s,a,j) + g_r min_a' Q(j,a'))
    to a sup-norm residual below tol."""
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    for key, r in rm.risks.items():
        if not math.isfinite(r):
            raise NonfiniteRisk(f"risk of {key} is {r!r}")
    q = {pair: 0.0 for pair in rm.trans}
    best = {i: 0.0 for i in rm.allowed}
    residuals = []
    while True:
        residual = 0.0
        for (i, a), (succs, probs) in rm.trans.items():
            v = 0.0
            for j, pr in zip(succs, probs):
                v += pr * (rm.risks[(i, a, j)] + rm.gamma_r * best[j])
            residual = max(residual, abs(v - q[(i, a)]))
            q[(i, a)] = v
        for i, acts in rm.allowed.items():
            best[i] = min(q[(i, a)] for a in acts)
        residuals.append(residual)
        if residual < tol:
            return RiskQ(q=q, residual=residual, iterations=len(residuals),
                         residuals=residuals)


def extract_pi_win(rm: RiskModel, rq: RiskQ) -> dict:
    """Positional risk-greedy policy: argmin of Q over the allowed actions,
    ties broken toward the action listed first."""
    pi = {}
    for i, acts in rm.allowed.items():
        best, best_v = None, None
        for a in acts:
            v = rq.q[(i, a)]
            if best_v is None or v < best_v:
                best, best_v = a, v
        pi[i] = best
    return pi


def combine_policy(p: ProductSmdp, w, pi_win, pi_tr) -> dict:
    """Case split: the risk policy inside the winning region, the
    reachability policy outside it."""
    w = frozenset(w)
    combined = {}
    for i in range(p.n_states):
        src = pi_win if i in w else pi_tr
        if i not in src:
            raise DomainGap(f"state {i} has no policy entry")
        combined[i] = src[i]
    return combined


def evaluate_policy_risk(p: ProductSmdp, pi, risk, gamma_r) -> dict:
    """Exact discounted risk of a region-preserving policy, per state.

    `risk` is a callable (i, a, j) -> value on product ids. Solves the
    linear policy-evaluation system directly; raises PolicyLeavesW if any
    chosen action has successor mass outside the policy's domain.
    """
    if not 0 <= gamma_r < 1:
        raise ValueError(f"gamma_r must be in [0,1), got {gamma_r}")
    states = sorted(pi)
    idx = {i: k for k, i in enumerate(states)}
    n = len(states)
    a_mat = np.eye(n)
    b = np.zeros(n)
    for i in states:
        succs, probs = p.trans_row(i, pi[i])
        for j, pr in zip(succs, probs):
            if j not in idx:
                raise PolicyLeavesW(
                    f"action {pi[i]} at state {i} reaches {j} outside W")
            b[idx[i]] += pr * risk(i, pi[i], j)
            a_mat[idx[i], idx[j]] -= gamma_r * pr
    v = np.linalg.solve(a_mat, b)
    return {i: float(v[idx[i]]) for i in states}
