import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from wpress.covering import (
    StageSpec,
    bisection_interval,
    build_stage,
    lambda_vs_w_check,
    power_rule_check,
    pressure_bisect,
    single_scale_log_sum,
    upper_pressure,
    w_lp_stage,
    w_lp_stage_log,
)
from wpress.cylinders import enumerate_weighted_cylinders, weight_of
from wpress.errors import ResourceLimitError, ValidationError
from wpress.symbolic import Alphabet, BlockCode, ChainSystem, Potential, Subshift, add_constant, words

from strategies import chains

LOG2 = math.log(2)
BIN = Alphabet(("0", "1"))
K1_FULL = ChainSystem((Subshift.full(BIN),), (), (1,))
K1_GM = ChainSystem((Subshift.from_forbidden(BIN, ["11"]),), (), (1,))


def brute_log_sum(system, pot, s, n):
    vals = [weight_of(system, pot, c, s) for c in enumerate_weighted_cylinders(system, n)]
    return float(np.log(np.sum(np.exp(vals))))


def test_single_scale_examples(fs42, f1):
    assert single_scale_log_sum(fs42, Potential.zero(), 0.0, 2) == pytest.approx(math.log(32), abs=1e-12)
    assert single_scale_log_sum(fs42, f1, 0.0, 2) == pytest.approx(math.log(50), abs=1e-12)
    assert brute_log_sum(fs42, f1, 0.0, 2) == pytest.approx(math.log(50), abs=1e-12)


def test_single_scale_decreases_to_minus_infinity(fs42, f1):
    vals = [single_scale_log_sum(fs42, f1, s, 3) for s in (0, 10, 100, 1e4)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[-1] < -1e4


@pytest.mark.parametrize("n", [2, 4, 10])
def test_upper_pressure_closed_forms(fs42, f1, n):
    # even n: 4^n 2^(n/2) cylinders, f1 factorizes to 5^n 2^(n/2)
    assert upper_pressure(fs42, Potential.zero(), n) == pytest.approx(2.5 * LOG2, abs=1e-12)
    assert upper_pressure(fs42, f1, n) == pytest.approx(math.log(5) + 0.5 * LOG2, abs=1e-12)


def test_upper_pressure_brute_force_n4(fs42, f1):
    assert brute_log_sum(fs42, f1, 0.0, 4) / 4 == pytest.approx(math.log(5) + 0.5 * LOG2, abs=1e-12)


def test_upper_pressure_k1_full():
    for n in (1, 3, 7):
        assert upper_pressure(K1_FULL, Potential.zero(), n) == pytest.approx(LOG2, abs=1e-14)


def test_w_lp_examples(fs42):
    zero = Potential.zero()
    st1 = StageSpec(1, 1, 2)
    assert w_lp_stage(fs42, zero, 0.0, st1) == pytest.approx(8.0, rel=1e-12)
    assert w_lp_stage(fs42, zero, math.log(8), st1) == pytest.approx(1.0, rel=1e-12)
    assert w_lp_stage(K1_FULL, zero, 0.0, StageSpec(2, 2, 2)) == pytest.approx(4.0, rel=1e-12)


def test_stage_validation(fs42):
    with pytest.raises(ValidationError):
        StageSpec(3, 2, 10).validate(fs42)
    with pytest.raises(ValidationError):
        StageSpec(1, 4, 5).validate(fs42)


def test_stage_cap(fs42):
    with pytest.raises(ResourceLimitError):
        build_stage(fs42, Potential.zero(), StageSpec(1, 6, 9), nonzero_cap=1000)


@pytest.mark.parametrize("pot_name,expected", [("zero", 2.5 * LOG2), ("f1", math.log(5) + 0.5 * LOG2)])
def test_bisect_single_scale(fs42, f1, pot_name, expected):
    pot = f1 if pot_name == "f1" else Potential.zero()
    br = pressure_bisect(fs42, pot, StageSpec(10, 10, 15), "single_scale")
    assert br.upper == pytest.approx(expected, abs=1e-9)
    assert br.upper_source == "single-scale"


def test_bisect_golden_mean():
    br = pressure_bisect(K1_GM, Potential.zero(), StageSpec(16, 16, 16))
    assert abs(br.upper - math.log((1 + math.sqrt(5)) / 2)) <= 0.05


def test_bisect_lp_mode(fs42):
    # single scale n=1: LP value 8 e^{-s}, crossing at log 8
    br = pressure_bisect(fs42, Potential.zero(), StageSpec(1, 1, 2), "lp")
    assert br.upper == pytest.approx(math.log(8), abs=1e-8)
    assert br.upper_source == "lp"


def test_bisect_widens_interval():
    pot = Potential(1, {(0,): 40.0, (1,): 40.0})
    br = pressure_bisect(K1_FULL, pot, StageSpec(3, 3, 3))
    assert br.upper == pytest.approx(40 + LOG2, abs=1e-9)


def test_bisection_interval_contains_estimates(all_systems):
    for system, pot in all_systems.values():
        lo, hi = bisection_interval(system, pot)
        est = upper_pressure(system, pot, 4)
        assert lo <= est <= hi


def test_lambda_vs_w_examples(fs42):
    rep = lambda_vs_w_check(fs42, Potential.zero(), 1.0, StageSpec(2, 2, 3))
    assert rep.ok and math.isfinite(rep.lp_log_value)
    # one scale of disjoint cylinders: the LP optimum is the set cover itself
    assert rep.lp_log_value == pytest.approx(rep.set_cover_log_value, abs=1e-12)
    big = lambda_vs_w_check(fs42, Potential.zero(), 50.0, StageSpec(1, 2, 3))
    assert big.ok and math.exp(big.lp_log_value) < 1e-20


def test_power_rule_examples(fs42, f1):
    for pot in (Potential.zero(), f1):
        rep = power_rule_check(fs42, pot, 2, [6], identity_n=(1, 2))
        assert rep.ok
    one = power_rule_check(fs42, f1, 1, [2, 5], identity_n=(1,))
    assert all(r.difference <= 1e-12 for r in one.rows)


def test_power_rule_rejects_long_covers(fs42, f1):
    from wpress.cylinders import cylinder_covers

    with pytest.raises(ValidationError):
        power_rule_check(fs42, f1, 2, [2], covers=cylinder_covers(fs42, 2))


# properties


@st.composite
def range2_potentials(draw, shift):
    ws = words(shift, 2)
    vals = draw(st.lists(st.floats(-1.5, 1.5), min_size=len(ws), max_size=len(ws)))
    return Potential(2, dict(zip(ws, vals)))


@given(chains(max_k=3, max_size=3), st.data())
def test_dp_matches_enumeration(system, data):
    pot = data.draw(range2_potentials(system.base))
    n = data.draw(st.integers(1, 3))
    s = data.draw(st.floats(-2, 2))
    dp = single_scale_log_sum(system, pot, s, n)
    en = single_scale_log_sum(system, pot, s, n, method="enumerate")
    assert dp == pytest.approx(en, abs=1e-10)


@given(chains(max_k=2, max_size=3), st.data())
def test_affine_in_s(system, data):
    pot = data.draw(range2_potentials(system.base))
    n = data.draw(st.integers(1, 5))
    s = data.draw(st.floats(-5, 5))
    v0 = single_scale_log_sum(system, pot, 0.0, n)
    assert single_scale_log_sum(system, pot, s, n) == pytest.approx(v0 - s * n, abs=1e-9)


@given(chains(max_k=2, max_size=3), st.data())
def test_bisect_agrees_with_direct_route(system, data):
    pot = data.draw(range2_potentials(system.base))
    n = data.draw(st.integers(1, 6))
    from wpress.cylinders import window_profile

    stage = StageSpec(n, n, window_profile(system.weights, n).m[-1])
    br = pressure_bisect(system, pot, stage)
    assert br.upper == pytest.approx(single_scale_log_sum(system, pot, 0.0, n) / n, abs=1e-9)


def relabel(system, pot, perms):
    """Isomorphic copy with level ``i`` symbols renamed by ``perms[i]``."""
    levels, codes = [], []
    for lev, p in zip(system.levels, perms):
        inv = np.argsort(p)
        t = lev.transitions[np.ix_(inv, inv)]
        levels.append(Subshift(Alphabet(tuple(lev.alphabet.symbols[j] for j in inv)), t))
    for i, code in enumerate(system.codes):
        mp = [perms[i + 1][code.mapping[j]] for j in np.argsort(perms[i])]
        codes.append(BlockCode(levels[i].alphabet, levels[i + 1].alphabet, tuple(mp)))
    p0 = perms[0]
    table = {tuple(int(p0[s]) for s in w): v for w, v in pot.table.items()}
    return ChainSystem(tuple(levels), tuple(codes), system.weights), Potential(pot.range, table)


@given(chains(max_k=3, max_size=3), st.data())
def test_upper_pressure_invariant_under_relabeling(system, data):
    pot = data.draw(range2_potentials(system.base))
    perms = [data.draw(st.permutations(range(lev.size))) for lev in system.levels]
    sys2, pot2 = relabel(system, pot, perms)
    n = data.draw(st.integers(1, 5))
    assert upper_pressure(sys2, pot2, n) == pytest.approx(upper_pressure(system, pot, n), abs=1e-12)


def test_upper_pressure_invariant_under_fs42_automorphism(fs42, f1):
    # swapping c and d commutes with the code and fixes f1
    sys2, pot2 = relabel(fs42, f1, [[0, 1, 3, 2], [0, 1]])
    assert sys2.codes[0].mapping == fs42.codes[0].mapping
    for n in (3, 5):
        assert upper_pressure(sys2, pot2, n) == pytest.approx(upper_pressure(fs42, f1, n), abs=1e-13)


@pytest.mark.parametrize("name", ["fs42", "golden_chain"])
@pytest.mark.parametrize("s", [0.0, 1.0, 1.9])
def test_lp_value_nonincreasing_as_N_decreases(all_systems, name, s):
    system, pot = all_systems[name]
    vals = [w_lp_stage_log(system, pot, s, StageSpec(N, 3, 5)) for N in (3, 2, 1)]
    assert vals[1] <= vals[0] + 1e-9 and vals[2] <= vals[1] + 1e-9


@pytest.mark.parametrize("name", ["fs42", "golden_chain", "golden"])
@pytest.mark.parametrize("s", [-0.5, 0.0, 1.0, 1.9, 4.0])
def test_lp_below_single_scale(all_systems, name, s):
    system, pot = all_systems[name]
    assert lambda_vs_w_check(system, pot, s, StageSpec(1, 3, 5)).ok


@given(st.floats(-3, 3), st.integers(1, 6))
def test_constant_shift(c, n):
    import wpress.io as io

    system = io.load_system("bundled:golden_chain")
    pot = io.load_potential("bundled:golden_chain", system)
    shifted = add_constant(system.base, pot, c)
    a1 = float(system.weights[0])
    ell = math.ceil(a1 * n)
    # f + c adds c * ell / (a1 n) to the single-scale estimate; ell = a1 n here
    assert ell == a1 * n
    assert upper_pressure(system, shifted, n) == pytest.approx(upper_pressure(system, pot, n) + c, abs=1e-9)
