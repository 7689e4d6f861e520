import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from wpress.cylinders import (
    Cover,
    WeightedCylinder,
    count_join_elements,
    count_weighted_cylinders,
    cover_windows,
    cylinder_cover,
    cylinder_covers,
    cylinder_from_mixed,
    cylinder_of,
    enumerate_weighted_cylinders,
    explicit_cover,
    is_valid_cylinder,
    join_element_of,
    join_elements,
    mixed_labels,
    oscillation,
    power_join_identity_check,
    refines,
    render_join_key,
    trivial_covers,
    weight_of,
    window_profile,
)
from wpress.errors import ResourceLimitError, ValidationError
from wpress.symbolic import Alphabet, ChainSystem, Potential, Subshift, word_count, words, words_array

from strategies import chains

BIN = Alphabet(("0", "1"))
GM = Subshift.from_forbidden(BIN, ["11"])


def brute_cylinders(system, n):
    """Distinct per-level label tuples realized by admissible level-1 prefixes."""
    m = window_profile(system.weights, n).m
    seen = set()
    for w in words(system.base, max(m)):
        seen.add(tuple(tuple(int(system.tau(i)[s]) for s in w[: m[i]]) for i in range(system.k)))
    return seen


def test_window_profile_examples():
    assert window_profile((1, Fraction(1, 2)), 3).m == (3, 5)
    assert window_profile((1, 0.5), 2).m == (2, 3)
    assert window_profile((0.5, 0.5, 1), 3).m == (2, 3, 6)


def test_window_profile_is_exact():
    # 0.1 accumulated in floating point would overshoot the ceiling at n=10
    assert window_profile((0.1, 0.2), 10).m == (1, 3)


@pytest.mark.parametrize("n,expected", [(1, 8), (2, 32), (3, 4**3 * 2**2), (4, 4**4 * 2**2)])
def test_fs42_counts(fs42, n, expected):
    assert count_weighted_cylinders(fs42, n) == expected
    assert len(brute_cylinders(fs42, n)) == expected


def test_k1_count_is_word_count():
    k1 = ChainSystem((GM,), (), (Fraction(3, 2),))
    for n in range(1, 8):
        assert count_weighted_cylinders(k1, n) == word_count(GM, math.ceil(1.5 * n))


def test_fs42_n1_cylinders(fs42):
    cyls = enumerate_weighted_cylinders(fs42, 1)
    rendered = [c.render(fs42) for c in cyls]
    assert len(rendered) == 8
    for lw1, lw2 in rendered:
        assert len(lw1) == 1 and len(lw2) == 2
        assert lw2[0] == ("0" if lw1 in "ab" else "1")


def test_k1_full_binary_cylinders():
    k1 = ChainSystem((Subshift.full(BIN),), (), (1,))
    assert [c.render(k1)[0] for c in enumerate_weighted_cylinders(k1, 2)] == ["00", "01", "10", "11"]


def test_golden_to_full_counts_realizable(gm_to_fs):
    # level-2 words admissible on their own: 4; words realized by a golden-mean point: 3
    assert window_profile(gm_to_fs.weights, 1).m == (1, 2)
    assert word_count(gm_to_fs.levels[1], 2) == 4
    assert count_weighted_cylinders(gm_to_fs, 1) == 3
    assert len(brute_cylinders(gm_to_fs, 1)) == 3


def test_weight_of_examples(fs42, f1):
    zero = Potential.zero()
    for c in enumerate_weighted_cylinders(fs42, 2):
        assert weight_of(fs42, zero, c, 0.0) == 0.0
    ab = cylinder_of(fs42, 2, fs42.base.alphabet.encode("abc"))
    assert weight_of(fs42, f1, ab, 0.0) == pytest.approx(math.log(2), abs=1e-15)
    c3 = enumerate_weighted_cylinders(fs42, 3)[0]
    assert weight_of(fs42, zero, c3, 1.0) == -3.0


def test_cylinder_roundtrip(golden_chain):
    system, _ = golden_chain
    for c in enumerate_weighted_cylinders(system, 3):
        assert is_valid_cylinder(system, c)
        assert cylinder_from_mixed(system, 3, c.mixed()) == c


def test_invalid_cylinder_detected(fs42):
    bad = WeightedCylinder(1, ((0,), (1, 0)))
    assert not is_valid_cylinder(fs42, bad)


def test_join_element_examples(fs42):
    covers = cylinder_covers(fs42, 1)
    key = join_element_of(fs42, covers, 2, "abc")
    assert render_join_key(fs42, covers, key) == ("ab", "001")
    triv = trivial_covers(fs42)
    keys = {join_element_of(fs42, triv, 2, w) for w in words(fs42.base, 3)}
    assert keys == {((0, 0), (0, 0, 0))}


def test_join_overlapping_tie_break(fs42):
    lvl2 = explicit_cover(fs42.levels[1], 1, [["0", "1"], ["1"]])
    covers = (cylinder_cover(fs42.base, 1), lvl2)
    key = join_element_of(fs42, covers, 1, "cd")
    assert key[1] == (0, 0)


def test_join_prefix_too_short(fs42):
    with pytest.raises(ValueError):
        join_element_of(fs42, cylinder_covers(fs42, 1), 2, "ab")


def test_explicit_cover_must_cover(fs42):
    with pytest.raises(ValidationError):
        explicit_cover(fs42.base, 1, [["a", "b"]])


@pytest.mark.parametrize("M,n", [(2, 2), (1, 3), (3, 1)])
def test_power_identity_fs42(fs42, M, n):
    rep = power_join_identity_check(fs42, cylinder_covers(fs42, 1), M, n)
    assert rep.equal and rep.count_power == rep.count_original


def test_power_identity_golden_chain_exhaustive(golden_chain):
    system, _ = golden_chain
    rep = power_join_identity_check(system, cylinder_covers(system, 1), 3, 2)
    assert rep.equal and rep.method == "enumeration"


def test_power_identity_routes_agree(golden_chain):
    # same partition given without the cylinder flag takes the generic enumeration route
    system, _ = golden_chain
    covers = cylinder_covers(system, 1)
    plain = tuple(Cover(c.length, c.members, cylinder=False) for c in covers)
    for M, n in [(2, 1), (2, 2), (3, 1)]:
        fast = power_join_identity_check(system, covers, M, n)
        slow = power_join_identity_check(system, plain, M, n)
        assert fast.equal and slow.equal
        assert (fast.count_power, fast.count_original) == (slow.count_power, slow.count_original)


def test_power_identity_dp_route_matches_enumeration(fs42):
    covers = cylinder_covers(fs42, 1)
    big = power_join_identity_check(fs42, covers, 2, 2)
    small = power_join_identity_check(fs42, covers, 2, 2, cap=10)
    assert big.method == "enumeration" and small.method == "dp-count"
    assert big.count_power == small.count_power


def test_oscillation_examples(fs42, f1):
    assert oscillation(fs42, cylinder_covers(fs42, 1), f1) == 0.0
    assert oscillation(fs42, trivial_covers(fs42), f1) == pytest.approx(math.log(2))
    assert oscillation(fs42, trivial_covers(fs42), Potential.zero()) == 0.0


def test_oscillation_range2(golden_chain):
    system, pot = golden_chain
    assert oscillation(system, cylinder_covers(system, 2), pot) == 0.0
    assert oscillation(system, cylinder_covers(system, 1), pot) > 0.0


def test_enumeration_cap(fs42):
    with pytest.raises(ResourceLimitError):
        enumerate_weighted_cylinders(fs42, 6, cap=100)


# properties


@given(st.lists(st.fractions(0, 3, max_denominator=7), min_size=1, max_size=4), st.integers(1, 40))
def test_window_increments(weights, n):
    if weights[0] <= 0:
        weights[0] = Fraction(1, 2)
    a = window_profile(weights, n).m
    b = window_profile(weights, n + 1).m
    acc = Fraction(0)
    for w, x, y in zip(weights, a, b):
        acc += w
        assert y - x in {math.floor(acc), math.ceil(acc)}


@given(chains(max_k=3, max_size=3), st.integers(1, 4))
def test_count_matches_brute_force(system, n):
    assert count_weighted_cylinders(system, n) == len(brute_cylinders(system, n))


@pytest.mark.parametrize("n", range(1, 7))
def test_partition_property(all_systems, n):
    for name, (system, _) in all_systems.items():
        m = window_profile(system.weights, n).m
        if word_count(system.base, max(m)) > 300_000:
            continue
        cyls = enumerate_weighted_cylinders(system, n, cap=300_000)
        assert len(cyls) == count_weighted_cylinders(system, n), name
        index = {c.mixed(): j for j, c in enumerate(cyls)}
        assert len(index) == len(cyls)
        W = words_array(system.base, max(m), cap=2_000_000)
        lab = mixed_labels(system, W, m)
        hits = [index.get(tuple(row)) for row in lab.tolist()]
        # every prefix lies in exactly one cylinder and every cylinder is hit
        assert None not in hits, name
        assert len(set(hits)) == len(cyls), name


@given(chains(max_k=2, max_size=3), st.integers(1, 3))
def test_refinement_never_decreases_count(system, n):
    coarse = trivial_covers(system)
    mid = cylinder_covers(system, 1)
    fine = cylinder_covers(system, 2)
    a = count_join_elements(system, coarse, n)
    b = count_join_elements(system, mid, n)
    c = count_join_elements(system, fine, n)
    assert a <= b <= c
    assert all(refines(f, m) for f, m in zip(fine, mid))


@given(chains(max_k=2, max_size=3), st.integers(1, 3))
def test_cylinder_join_count_routes(system, n):
    covers = cylinder_covers(system, 2)
    m = window_profile(system.weights, n).m
    assert cover_windows(covers, m) is not None
    assert count_join_elements(system, covers, n) == len(join_elements(system, covers, n))


@given(chains(max_k=2, max_size=3), st.data())
def test_oscillation_monotone_under_refinement(system, data):
    vals = data.draw(st.lists(st.floats(-2, 2), min_size=system.base.size ** 2, max_size=system.base.size ** 2))
    pot = Potential(2, {w: vals[j] for j, w in enumerate(words(system.base, 2))})
    o0 = oscillation(system, trivial_covers(system), pot)
    o1 = oscillation(system, cylinder_covers(system, 1), pot)
    o2 = oscillation(system, cylinder_covers(system, 2), pot)
    assert o0 >= o1 - 1e-15 and o1 >= o2 - 1e-15
    assert o2 == 0.0


@given(chains(max_k=3, max_size=3), st.integers(1, 3), st.integers(1, 3))
def test_power_identity_random(system, M, n):
    rep = power_join_identity_check(system, cylinder_covers(system, 1), M, n)
    assert rep.equal
