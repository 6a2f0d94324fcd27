"""From a temporal formula to a deterministic safety monitor.

The recurrence objective "visit a and b forever, never touch c" becomes a
small nondeterministic automaton, and bounding the tolerated accepting
visits turns that into a deterministic, complete monitor whose single
absorbing sink marks failure.
"""

from smdpsynth import determinize_kcba, ltl_to_cba, parse_ltl

formula = "G F a & G F b & G !c"
phi = parse_ltl(formula)
aut = ltl_to_cba(phi, ap=("a", "b", "c"))
print(f"formula:        {formula}")
print(f"nondet monitor: {aut.n_states} states over {aut.n_letters} letters, "
      f"accepting {sorted(aut.accepting)}")

for k in (0, 1, 5):
    d = determinize_kcba(aut, k)
    print(f"bound {k}: deterministic monitor with {d.n_states} states, "
          f"sink {d.sink}")

d = determinize_kcba(aut, 1)
state = d.initial
print("\nreading letters along a/b alternation with one c:")
for names in (("a",), ("b",), ("a",), ("c",), ("b",), ("a",), ("b",)):
    letter = aut.letter_from_atoms(names)
    state = d.step(state, letter)
    tag = " <- failure sink" if state in d.accepting else ""
    print(f"  saw {names!r:10} -> state {state}{tag}")
