"""Hypothesis strategies for random one-step SFT chains."""
from fractions import Fraction

import numpy as np
from hypothesis import strategies as st

from wpress.symbolic import Alphabet, BlockCode, ChainSystem, Potential, Subshift

WEIGHTS_A1 = [Fraction(1, 2), Fraction(1), Fraction(3, 2), Fraction(2)]
WEIGHTS_REST = [Fraction(0), Fraction(1, 3), Fraction(1, 2), Fraction(1)]


def _alphabet(tag, n):
    return Alphabet(tuple(f"{tag}{j}" for j in range(n)))


@st.composite
def shifts(draw, min_size=2, max_size=4):
    n = draw(st.integers(min_size, max_size))
    bits = draw(st.lists(st.booleans(), min_size=n * n, max_size=n * n))
    t = np.array(bits, dtype=bool).reshape(n, n)
    # a cycle through all symbols keeps every symbol in use
    perm = draw(st.permutations(range(n)))
    for j in range(n):
        t[perm[j], perm[(j + 1) % n]] = True
    return Subshift(_alphabet("x", n), t)


def factor_of(shift, mapping, tag):
    """Symbolwise image of ``shift`` under a surjective map."""
    m = max(mapping) + 1
    t = np.zeros((m, m), dtype=bool)
    for u, v in zip(*np.nonzero(shift.transitions)):
        t[mapping[u], mapping[v]] = True
    lev = Subshift(_alphabet(tag, m), t)
    return lev, BlockCode(shift.alphabet, lev.alphabet, tuple(mapping))


@st.composite
def surjections(draw, n, max_m=3):
    m = draw(st.integers(1, min(n, max_m)))
    rest = draw(st.lists(st.integers(0, m - 1), min_size=n - m, max_size=n - m))
    mapping = list(range(m)) + rest
    order = draw(st.permutations(range(n)))
    return [mapping[order[u]] for u in range(n)]


@st.composite
def chains(draw, max_k=3, max_size=4):
    base = draw(shifts(max_size=max_size))
    k = draw(st.integers(1, max_k))
    levels, codes = [base], []
    for i in range(1, k):
        mapping = draw(surjections(levels[-1].size))
        lev, code = factor_of(levels[-1], mapping, f"y{i}_")
        levels.append(lev)
        codes.append(code)
    weights = [draw(st.sampled_from(WEIGHTS_A1))] + [draw(st.sampled_from(WEIGHTS_REST)) for _ in range(k - 1)]
    return ChainSystem(tuple(levels), tuple(codes), tuple(weights))


@st.composite
def range1_potentials(draw, shift):
    vals = draw(st.lists(st.floats(-2, 2, allow_nan=False), min_size=shift.size, max_size=shift.size))
    return Potential(1, {(u,): v for u, v in enumerate(vals)})
