"""Conjugate posteriors over transition rows and dwell rates, with
predictive, entropy, and risk queries.

Transition rows get Dirichlet-categorical updates; exponential dwell rates
get Gamma updates, whose posterior predictive is a Lomax distribution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, psi

from .errors import MomentUndefined, UntrackedPair, UntrackedTriple

DIRICHLET_PRIOR = 1.0
GAMMA_PRIOR = (2.0, 1.0)


class ObservationStore:
    """Log of (s, a, s', tau) tuples, grouped by the (s, a) pair.

    Aggregates (successor counts, dwell sums) are maintained incrementally;
    a whole pair's data can be dropped in O(1), which is how the learner
    keeps observations restricted to its current winning-pair estimate.
    Raw tuples are retained unless keep_tuples=False (aggregate queries
    work either way).
    """

    def __init__(self, keep_tuples=True):
        self._by_pair = {}            # (s, a) -> {"tuples", "succ", "dwell"}
        self._keep = bool(keep_tuples)
        self._n = 0

    def _bucket(self, s, a):
        b = self._by_pair.get((s, a))
        if b is None:
            b = {"tuples": [], "succ": {}, "dwell": {}}
            self._by_pair[(s, a)] = b
        return b

    def append(self, s, a, s2, tau):
        tau = float(tau)
        if tau < 0:
            raise ValueError(f"negative dwell time {tau}")
        b = self._bucket(s, a)
        if self._keep:
            b["tuples"].append((s2, tau))
        b["succ"][s2] = b["succ"].get(s2, 0) + 1
        agg = b["dwell"].setdefault(s2, [0, 0.0])
        agg[0] += 1
        agg[1] += tau
        self._n += 1

    def drop_pair(self, s, a):
        """Forget every observation of the pair."""
        b = self._by_pair.pop((s, a), None)
        if b is not None:
            self._n -= sum(b["succ"].values())

    def __len__(self):
        return self._n

    def __iter__(self):
        """Tuples grouped by pair, insertion-ordered within each pair."""
        if not self._keep:
            raise RuntimeError("store was created with keep_tuples=False")
        for (s, a), b in self._by_pair.items():
            for s2, tau in b["tuples"]:
                yield (s, a, s2, tau)

    def pairs(self):
        return set(self._by_pair)

    def successor_counts(self, s, a):
        b = self._by_pair.get((s, a))
        return dict(b["succ"]) if b else {}

    def distinct_successors(self, s, a):
        """Observed support size, floored at 1 for use as a count estimate."""
        b = self._by_pair.get((s, a))
        return max(1, len(b["succ"])) if b else 1

    def dwell_stats(self, s, a, s2):
        b = self._by_pair.get((s, a))
        if b is None or s2 not in b["dwell"]:
            return 0, 0.0
        n, total = b["dwell"][s2]
        return n, total


class DirichletPosterior:
    """Per-pair Dirichlet concentrations over candidate successors."""

    def __init__(self, table):
        # table: (s, a) -> (candidates tuple, concentration array)
        self._table = table

    def pairs(self):
        return set(self._table)

    def row(self, s, a):
        row = self._table.get((s, a))
        if row is None or len(row[0]) == 0:
            raise UntrackedPair(f"pair ({s},{a}) has no posterior")
        return row

    def to_json_dict(self):
        return {
            f"{s}/{a}": {"candidates": list(cands),
                         "concentration": [float(c) for c in conc]}
            for (s, a), (cands, conc) in sorted(self._table.items(),
                                                key=lambda kv: str(kv[0]))
        }


class GammaPosterior:
    """Per-triple (shape, rate) parameters for the exponential dwell rate."""

    def __init__(self, table):
        # table: (s, a, s') -> (shape, rate)
        self._table = table

    def triples(self):
        return set(self._table)

    def params(self, s, a, s2):
        p = self._table.get((s, a, s2))
        if p is None:
            raise UntrackedTriple(f"triple ({s},{a},{s2}) has no posterior")
        return p

    def to_json_dict(self):
        return {
            f"{s}/{a}/{s2}": {"shape": sh, "rate": ra}
            for (s, a, s2), (sh, ra) in sorted(self._table.items(),
                                               key=lambda kv: str(kv[0]))
        }


def update_posteriors(store: ObservationStore, pairs, support=None,
                      pool=None, dirichlet_prior=DIRICHLET_PRIOR,
                      gamma_prior=GAMMA_PRIOR):
    """Exact conjugate updates from the observations of the given pairs.

    `support` optionally declares candidate successors per posterior row;
    candidates never observed keep their prior mass. With no data the
    priors come back unchanged. `pool` optionally maps a stored pair key to
    the posterior row it contributes to, letting several stored pairs (say,
    product copies of one model pair) share an estimate.
    """
    support = support or {}
    a0, b0 = gamma_prior
    counts = {}
    dwell = {}
    keys = []
    for pair in pairs:
        key = pool(pair) if pool else pair
        if key not in counts:
            counts[key] = {}
            dwell[key] = {}
            keys.append(key)
        for s2, n in store.successor_counts(*pair).items():
            counts[key][s2] = counts[key].get(s2, 0) + n
            dn, dt = store.dwell_stats(pair[0], pair[1], s2)
            agg = dwell[key].setdefault(s2, [0, 0.0])
            agg[0] += dn
            agg[1] += dt

    dir_table = {}
    gamma_table = {}
    for key in keys:
        cands = sorted(set(counts[key]) | set(support.get(key, ())))
        conc = np.array([dirichlet_prior + counts[key].get(c, 0)
                         for c in cands], dtype=float)
        dir_table[key] = (tuple(cands), conc)
        for s2 in cands:
            n, total = dwell[key].get(s2, (0, 0.0))
            gamma_table[(key[0], key[1], s2)] = (a0 + n, b0 + total)
    return DirichletPosterior(dir_table), GammaPosterior(gamma_table)


def predictive_transition(post: DirichletPosterior, s, a) -> np.ndarray:
    """Posterior mean row (the Dirichlet predictive); sums to one."""
    _, conc = post.row(s, a)
    return conc / conc.sum()


def predictive_successors(post: DirichletPosterior, s, a) -> tuple:
    cands, _ = post.row(s, a)
    return cands


@dataclass(frozen=True)
class DwellPredictive:
    """Lomax predictive of an exponential dwell under a Gamma posterior."""

    shape: float
    scale: float
    kind = "lomax"

    def mean(self):
        if self.shape <= 1:
            raise MomentUndefined(f"Lomax mean needs shape > 1, got {self.shape}")
        return self.scale / (self.shape - 1)

    def variance(self):
        if self.shape <= 2:
            raise MomentUndefined(
                f"Lomax variance needs shape > 2, got {self.shape}")
        a, b = self.shape, self.scale
        return b * b * a / ((a - 1) ** 2 * (a - 2))

    def std(self):
        return float(np.sqrt(self.variance()))

    def survival(self, t):
        return float((1.0 + t / self.scale) ** (-self.shape))

    def survival_quantile(self, q):
        """inf { t : Pr(tau > t) < q } for q in (0, 1]."""
        return float(self.scale * (q ** (-1.0 / self.shape) - 1.0))

    def sample(self, rng):
        return float(self.scale * rng.pareto(self.shape))


def predictive_dwell(post: GammaPosterior, s, a, s2) -> DwellPredictive:
    shape, rate = post.params(s, a, s2)
    return DwellPredictive(shape=float(shape), scale=float(rate))


def transition_entropy(post: DirichletPosterior, s, a) -> float:
    """Differential entropy of the Dirichlet posterior density."""
    _, conc = post.row(s, a)
    k = len(conc)
    total = conc.sum()
    return float(gammaln(conc).sum() - gammaln(total)
                 + (total - k) * psi(total)
                 - ((conc - 1.0) * psi(conc)).sum())


def dwell_entropy(post: GammaPosterior, s, a, s2) -> float:
    """Differential entropy of the Gamma posterior density."""
    shape, rate = post.params(s, a, s2)
    return float(shape - np.log(rate) + gammaln(shape)
                 + (1.0 - shape) * psi(shape))


@dataclass(frozen=True)
class Quantile:
    """Survival quantile risk: inf { t : Pr(tau > t) < alpha }."""

    alpha: float

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError(f"quantile level must be in (0,1], got {self.alpha}")


@dataclass(frozen=True)
class MeanPlusSigma:
    """Dispersion-penalized mean risk: mu + lam * sigma."""

    lam: float

    def __post_init__(self):
        if not 0 <= self.lam <= 1:
            raise ValueError(f"deviation weight must be in [0,1], got {self.lam}")


def _mean_std(dist):
    if dist.kind == "exponential":
        return 1.0 / dist.rate, 1.0 / dist.rate
    if dist.kind == "empirical":
        xs = np.asarray(dist.samples)
        return float(xs.mean()), float(xs.std())
    if dist.kind == "lomax":
        return dist.mean(), dist.std()
    raise TypeError(f"unsupported dwell distribution {dist!r}")


def _survival_quantile(dist, q):
    if dist.kind == "exponential":
        return -np.log(q) / dist.rate
    if dist.kind == "empirical":
        xs = np.asarray(dist.samples)
        for t in [0.0] + sorted(set(xs.tolist())):
            if np.mean(xs > t) < q:
                return t
        return float(xs.max())
    if dist.kind == "lomax":
        return dist.survival_quantile(q)
    raise TypeError(f"unsupported dwell distribution {dist!r}")


def risk_of(dist, f) -> float:
    """Evaluate a risk functional on a dwell distribution or predictive."""
    if isinstance(f, Quantile):
        return float(_survival_quantile(dist, f.alpha))
    if isinstance(f, MeanPlusSigma):
        mu, sigma = _mean_std(dist)
        return float(mu + f.lam * sigma)
    raise TypeError(f"unsupported risk functional {f!r}")
