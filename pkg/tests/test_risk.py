import itertools

import numpy as np
import pytest

from smdpsynth import (
    DomainGap, Exponential, LearnerConfig, MeanPlusSigma, MomentUndefined,
    NonfiniteRisk, ObservationStore, PolicyLeavesW, Quantile, Smdp,
    exact_winning_region, run_algorithm1, update_posteriors,
)
from smdpsynth.product import build_product
from smdpsynth.risk import (
    RiskModel, RiskQ, build_risk_model, combine_policy, evaluate_policy_risk,
    extract_pi_win, risk_model_from_product, risk_value_iteration,
)

from conftest import (
    cycle4_product, grid4_product, m1_product, risky3_product,
    trivial_monitor,
)


def loop1(gamma_r=0.9, risk=1.0):
    return RiskModel(trans={(0, "a"): ((0,), (1.0,))},
                     risks={(0, "a", 0): risk},
                     allowed={0: ("a",)}, gamma_r=gamma_r)


def two_arms():
    return RiskModel(
        trans={(0, "x"): ((1,), (1.0,)), (0, "y"): ((1,), (1.0,)),
               (1, "z"): ((1,), (1.0,))},
        risks={(0, "x", 1): 1.0, (0, "y", 1): 2.0, (1, "z", 1): 0.0},
        allowed={0: ("x", "y"), 1: ("z",)}, gamma_r=0.9)


def true_risk(p):
    # mean plus one sigma; sigma equals the mean for exponential dwells
    def f(i, a, j):
        return 2.0 * p.dwell_of(i, a, j).mean()
    return f


# --- model validation -----------------------------------------------------

def test_risk_model_validation():
    with pytest.raises(ValueError):
        loop1(gamma_r=1.0)
    with pytest.raises(ValueError):
        RiskModel(trans={}, risks={}, allowed={0: ()}, gamma_r=0.9)
    with pytest.raises(ValueError):
        RiskModel(trans={(0, "a"): ((0,), (0.5,))}, risks={},
                  allowed={0: ("a",)}, gamma_r=0.9)
    with pytest.raises(ValueError):
        RiskModel(trans={(0, "a"): ((7,), (1.0,))}, risks={},
                  allowed={0: ("a",)}, gamma_r=0.9)


# --- value iteration --------------------------------------------------------

def test_vi_self_loop_geometric():
    rq = risk_value_iteration(loop1(), tol=1e-9)
    assert rq.q[(0, "a")] == pytest.approx(10.0, abs=2e-8)
    assert rq.residual < 1e-9
    assert rq.iterations == len(rq.residuals) >= 1


def test_vi_two_arms_and_greedy():
    rq = risk_value_iteration(two_arms())
    assert rq.q[(0, "x")] == pytest.approx(1.0)
    assert rq.q[(0, "y")] == pytest.approx(2.0)
    assert extract_pi_win(two_arms(), rq)[0] == "x"


def test_greedy_tiebreak_first_allowed():
    rm = two_arms()
    rq = RiskQ(q={(0, "x"): 1.0, (0, "y"): 1.0, (1, "z"): 0.0},
               residual=0.0, iterations=0)
    assert extract_pi_win(rm, rq)[0] == "x"
    assert extract_pi_win(rm, rq)[1] == "z"


def test_vi_residuals_contract():
    rq = risk_value_iteration(loop1(), tol=1e-9)
    rs = rq.residuals
    assert all(x <= y + 1e-15 for x, y in zip(rs[1:], rs))


def random_risk_model(rng, n=20, gamma_r=0.9):
    trans = {}
    risks = {}
    allowed = {}
    for i in range(n):
        for a in ("x", "y"):
            k = int(rng.integers(1, 4))
            succs = tuple(int(s) for s in rng.choice(n, size=k,
                                                     replace=False))
            probs = rng.dirichlet(np.ones(k))
            trans[(i, a)] = (succs, tuple(float(p) for p in probs))
            for j in succs:
                risks[(i, a, j)] = float(rng.uniform(0, 1))
        allowed[i] = ("x", "y")
    return RiskModel(trans=trans, risks=risks, allowed=allowed,
                     gamma_r=gamma_r)


def horizon_reference(rm, horizon):
    q = {pair: 0.0 for pair in rm.trans}
    for _ in range(horizon):
        best = {i: min(q[(i, a)] for a in acts)
                for i, acts in rm.allowed.items()}
        q = {(i, a): sum(pr * (rm.risks[(i, a, j)] + rm.gamma_r * best[j])
                         for j, pr in zip(*row))
             for (i, a), row in rm.trans.items()}
    return q


def test_vi_matches_truncated_horizon_oracle():
    rng = np.random.default_rng(17)
    rm = random_risk_model(rng)
    tol = 1e-9
    rq = risk_value_iteration(rm, tol=tol)
    maxrisk = max(rm.risks.values())
    horizon = 1
    while rm.gamma_r ** horizon * maxrisk / (1 - rm.gamma_r) >= tol:
        horizon += 1
    ref = horizon_reference(rm, horizon)
    # VI stops within tol*gamma/(1-gamma) of the fixed point, the reference
    # within tol of it
    slack = tol * (1 + rm.gamma_r / (1 - rm.gamma_r))
    for pair, v in rq.q.items():
        assert v == pytest.approx(ref[pair], abs=slack)
        assert 0.0 <= v <= maxrisk / (1 - rm.gamma_r)


def test_vi_rejects_nonfinite_risk():
    rm = loop1()
    rm.risks[(0, "a", 0)] = float("inf")
    with pytest.raises(NonfiniteRisk):
        risk_value_iteration(rm)
    with pytest.raises(ValueError):
        risk_value_iteration(loop1(), tol=0.0)


# --- building the model from posteriors -----------------------------------------

def test_build_from_learned_m1():
    p = m1_product()
    res = run_algorithm1(p, LearnerConfig(alpha=0.2, episode_budget=150,
                                          step_cap=25, seed=1))
    rm = build_risk_model(p, res.w, res.w_p, res.transition_posterior,
                          res.dwell_posterior)
    assert rm.allowed == {p.initial: ("a",)}
    assert rm.trans[(p.initial, "a")] == ((p.initial,), (1.0,))
    assert rm.escaped == {}
    r = rm.risks[(p.initial, "a", p.initial)]
    # ample data on the unit-rate loop: mu + sigma approaches 2
    assert r == pytest.approx(2.0, rel=0.2)


def split_store(p):
    """Observations for risky3's initial pair: most stay safe, some do not."""
    store = ObservationStore()
    i0 = p.initial
    safe_pid = next(i for i, (s, _f) in enumerate(p.states) if s == 1)
    for _ in range(9):
        store.append(i0, "x", 1, 0.5)
    store.append(i0, "x", 2, 0.5)
    for _ in range(5):
        store.append(safe_pid, "x", 1, 0.5)
    return store, i0, safe_pid


def test_build_renormalizes_escaping_mass():
    p = risky3_product()
    store, i0, safe_pid = split_store(p)
    w = {i0, safe_pid}
    w_p = [(i0, "x"), (safe_pid, "x")]
    tpost, dpost = update_posteriors(
        store, w_p, pool=lambda pair: (p.states[pair[0]][0], pair[1]))
    with pytest.warns(UserWarning, match="renormalized"):
        rm = build_risk_model(p, w, w_p, tpost, dpost)
    assert rm.escaped[(i0, "x")] == pytest.approx(2 / 12)
    assert rm.trans[(i0, "x")] == ((safe_pid,), (1.0,))


def test_build_rejects_fully_escaping_pair():
    p = risky3_product()
    store, i0, safe_pid = split_store(p)
    w_p = [(i0, "x"), (safe_pid, "x")]
    tpost, dpost = update_posteriors(
        store, w_p, pool=lambda pair: (p.states[pair[0]][0], pair[1]))
    with pytest.raises(ValueError, match="no predictive mass"):
        build_risk_model(p, {i0}, [(i0, "x")], tpost, dpost)


def test_build_surfaces_undefined_moments():
    p = cycle4_product()
    store = ObservationStore()
    w = set(range(p.n_states))
    w_p = [(i, "f") for i in range(p.n_states)]
    support = {(p.states[i][0], "f"): {(p.states[i][0] + 1) % 4} for i in w}
    tpost, dpost = update_posteriors(
        store, w_p, support=support,
        pool=lambda pair: (p.states[pair[0]][0], pair[1]))
    with pytest.raises(MomentUndefined):
        build_risk_model(p, w, w_p, tpost, dpost,
                         functional=MeanPlusSigma(1.0))
    rm = build_risk_model(p, w, w_p, tpost, dpost,
                          functional=Quantile(0.5))
    assert all(v > 0 for v in rm.risks.values())


# --- combining policies -----------------------------------------------------------

def test_combine_dispatch():
    p = risky3_product()
    w, _ = exact_winning_region(p)
    inside = next(iter(w))
    pi_win = {inside: "x"}
    pi_tr = {i: "x" for i in range(p.n_states) if i not in w}
    combined = combine_policy(p, w, pi_win, pi_tr)
    assert combined[inside] == "x"
    assert set(combined) == set(range(p.n_states))
    with pytest.raises(DomainGap):
        combine_policy(p, w, {}, pi_tr)


def test_combine_full_winning_region():
    p = cycle4_product()
    pi_win = {i: "f" for i in range(p.n_states)}
    combined = combine_policy(p, set(range(p.n_states)), pi_win, {})
    assert combined == pi_win


# --- exact policy evaluation ---------------------------------------------------------

def test_evaluate_self_loop():
    m = Smdp(1, ("a",), {(0, "a"): [(0, 1.0)]},
             {(0, "a", 0): Exponential(1.0)}, 0, ("c",), [0])
    p = build_product(m, trivial_monitor())
    v = evaluate_policy_risk(p, {0: "a"}, lambda i, a, j: 1.0, 0.9)
    assert v[0] == pytest.approx(10.0)


def test_evaluate_zero_discount_is_one_step_risk():
    p = cycle4_product()
    pi = {i: "s" for i in range(p.n_states)}
    risk = true_risk(p)
    v = evaluate_policy_risk(p, pi, risk, 0.0)
    for i in range(p.n_states):
        j = p.trans_row(i, "s")[0][0]
        assert v[i] == pytest.approx(risk(i, "s", j))


def test_evaluate_rejects_leaving_policy():
    p = m1_product()
    with pytest.raises(PolicyLeavesW):
        evaluate_policy_risk(p, {p.initial: "b"}, lambda i, a, j: 1.0, 0.9)


def test_pi_win_exhaustively_optimal():
    p = cycle4_product()
    w = frozenset(range(p.n_states))
    w_p = [(i, a) for i in w for a in p.enabled(i)]
    risk = true_risk(p)
    rm = risk_model_from_product(p, w, w_p, risk, gamma_r=0.9)
    rq = risk_value_iteration(rm, tol=1e-12)
    pi_win = extract_pi_win(rm, rq)
    assert all(pi_win[i] == "f" for i in w)
    v_win = evaluate_policy_risk(p, pi_win, risk, 0.9)
    states = sorted(w)
    for choice in itertools.product(*(rm.allowed[i] for i in states)):
        pol = dict(zip(states, choice))
        v = evaluate_policy_risk(p, pol, risk, 0.9)
        for i in states:
            assert v_win[i] <= v[i] + 1e-9
    for i in states:
        assert v_win[i] == pytest.approx(min(rq.q[(i, a)]
                                             for a in rm.allowed[i]),
                                         abs=1e-6)


def test_rollouts_under_pi_win_take_less_risk():
    from smdpsynth.product import sample_product_step

    p = grid4_product(5)
    w, w_p = exact_winning_region(p)
    risk = true_risk(p)
    rm = risk_model_from_product(p, w, w_p, risk, gamma_r=0.9)
    rq = risk_value_iteration(rm)
    pi_win = extract_pi_win(rm, rq)

    def rollout(policy, seed, steps=10_000):
        rng = np.random.default_rng(seed)
        i = next(iter(sorted(w)))
        total = 0.0
        for _ in range(steps):
            a = policy(i, rng)
            j, _tau, _s2 = sample_product_step(p, i, a, rng)
            total += risk(i, a, j)
            i = j
        return total / steps

    greedy = rollout(lambda i, rng: pi_win[i], seed=5)
    uniform = rollout(
        lambda i, rng: rm.allowed[i][int(rng.integers(len(rm.allowed[i])))],
        seed=5)
    assert greedy < uniform
