"""Bounded-visit acceptance on ultimately periodic words.

A lasso word stem.cycle^omega is accepted at bound K when no run of the
automaton visits accepting states more than K times. The deterministic
monitor must agree: it rejects exactly the words that drive it into its
failure sink.
"""

import numpy as np

from smdpsynth import OmegaAutomaton, determinize_kcba, lasso_accepted_kcba

# one atom; accepting state 1 is entered on every 1-letter
aut = OmegaAutomaton(("p",), [[(0,), (1,)], [(0,), (1,)]], 0, {1})

words = [
    ("p forever", (), (1,)),
    ("one p, then silence", (1,), (0,)),
    ("three ps, then silence", (1, 1, 1), (0,)),
    ("alternating", (), (1, 0)),
]

for k in (0, 2):
    d = determinize_kcba(aut, k)
    print(f"bound {k}:")
    for label, stem, cycle in words:
        verdict = lasso_accepted_kcba(aut, k, stem, cycle)
        state = d.initial
        for s in stem + cycle * (d.n_states + 1):
            state = d.step(state, s)
        det = state not in d.accepting
        assert det == verdict
        print(f"  {label:24} accepted={verdict}")

rng = np.random.default_rng(7)
agree = 0
for _ in range(500):
    stem = tuple(rng.integers(0, 2, size=rng.integers(0, 3)))
    cycle = tuple(rng.integers(0, 2, size=rng.integers(1, 3)))
    k = int(rng.integers(0, 3))
    d = determinize_kcba(aut, k)
    state = d.initial
    for s in stem + cycle * (d.n_states + 1):
        state = d.step(state, s)
    agree += (state not in d.accepting) == lasso_accepted_kcba(aut, k,
                                                               stem, cycle)
print(f"\nrandom spot check: {agree}/500 verdicts agree")
