"""Shared hypothesis strategies for randomly generated machines."""

from hypothesis import strategies as st

from pulsehit.machine import MachineSpec, Rule

name_st = st.text(alphabet="abcdefghijklmnopqrstuvwxyz0123456789", min_size=1, max_size=3)


@st.composite
def machines(draw, total=False):
    """A random well-formed machine.

    With ``total=True`` every live (state, symbol) pair gets a rule, so
    classical runs and reversible orbits never fall off the rule table.
    """
    states = tuple(draw(st.lists(name_st, min_size=2, max_size=4, unique=True)))
    alphabet = tuple(draw(st.lists(name_st, min_size=1, max_size=3, unique=True)))
    start = draw(st.sampled_from(states))
    halt = draw(st.sampled_from(states))
    live = [q for q in states if q != halt]
    pairs = [(q, s) for q in live for s in alphabet]
    if total:
        chosen = pairs
    else:
        chosen = [p for p in pairs if draw(st.booleans())]
    rules = tuple(
        Rule(
            q,
            s,
            draw(st.sampled_from(states)),
            draw(st.sampled_from(alphabet)),
            draw(st.sampled_from(["L", "R", "S"])),
        )
        for q, s in chosen
    )
    nonblank = alphabet[1:]
    word = ()
    if nonblank:
        word = tuple(draw(st.lists(st.sampled_from(nonblank), max_size=4)))
    return MachineSpec(states, alphabet, start, halt, rules, word)
