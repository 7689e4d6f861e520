"""Finite-stage covering sums, the fractional covering LP and critical-exponent search."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cylinders import (
    cylinder_covers,
    iter_mixed,
    mixed_labels,
    power_join_identity_check,
    position_levels,
    suffix_counts,
    window_profile,
    birkhoff_horizon,
)
from .errors import ResourceLimitError, ValidationError
from .lp import solve_lp
from .symbolic import (
    DEFAULT_ENUMERATION_CAP,
    ChainSystem,
    Potential,
    _extensions,
    birkhoff_sup,
    power_potential,
    power_system,
    words,
    words_array,
)

LP_NONZERO_CAP = 200_000
LP_DENSE_CAP = 60_000_000


@dataclass(frozen=True)
class StageSpec:
    N: int
    n_max: int
    depth: int

    def validate(self, system: ChainSystem) -> None:
        if not 1 <= self.N <= self.n_max:
            raise ValidationError(f"stage needs 1 <= N <= n_max, got N={self.N}, n_max={self.n_max}")
        need = window_profile(system.weights, self.n_max).m[-1]
        if self.depth < need:
            raise ValidationError(f"depth {self.depth} is below m_k(n_max) = {need}")

    @property
    def scales(self) -> range:
        return range(self.N, self.n_max + 1)


@dataclass
class PressureBracket:
    lower: float
    upper: float
    lower_source: str
    upper_source: str
    estimate: float = math.nan
    evaluations: int = 0

    def __post_init__(self):
        if self.lower > self.upper + 1e-9:
            raise ValueError(f"bracket lower {self.lower} exceeds upper {self.upper}")


def _logsumexp(v) -> float:
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        return -math.inf
    mx = v.max()
    if not np.isfinite(mx):
        return float(mx)
    return float(mx + np.log(np.exp(v - mx).sum()))


# ---------------------------------------------------------------- single scale


def _windows(system: ChainSystem, n: int, cover_lengths: Sequence[int] | None) -> tuple[int, ...]:
    m = window_profile(system.weights, n).m
    if cover_lengths is None:
        return m
    if len(cover_lengths) != system.k or min(cover_lengths) < 1:
        raise ValidationError("one positive cover length per level is required")
    return tuple(mi + L - 1 for mi, L in zip(m, cover_lengths))


def _log_prefix_sums(system: ChainSystem, potential: Potential, length: int, horizon: int):
    """Log-sum over level-1 words of length ``length`` of ``exp(sup S_horizon f / a_1)``,
    grouped by last symbol.  The supremum runs over all points extending the word."""
    shift = system.base
    a1 = float(system.weights[0])
    r = potential.range
    q = max(r - 1, 1)
    need = horizon + r - 1 - length
    tail_starts = [j for j in range(horizon) if j + r > length]
    if length <= q:
        out = np.full(shift.size, -math.inf)
        for w in words(shift, length):
            out[w[-1]] = np.logaddexp(out[w[-1]], birkhoff_sup(system, potential, w, horizon) / a1)
        return out
    states = words(shift, q)
    index = {w: i for i, w in enumerate(states)}
    src, dst, win = [], [], []
    for i, w in enumerate(states):
        for v in shift.successors(w[-1]):
            src.append(i)
            dst.append(index[(w + (v,))[-q:]])
            win.append(potential((w + (v,))[-r:]) / a1)
    src, dst, win = np.array(src), np.array(dst), np.array(win)
    L = np.zeros(len(states))
    if r == 1:
        L = np.array([potential(w) / a1 if horizon > 0 else 0.0 for w in states])
    for t in range(q, length):
        j = t + 1 - r  # start of the window completed by the new symbol
        add = win if 0 <= j < horizon else np.zeros_like(win)
        nxt = np.full(len(states), -math.inf)
        np.logaddexp.at(nxt, dst, L[src] + add)
        L = nxt
    if need > 0:
        g = np.empty(len(states))
        for i, w in enumerate(states):
            best = -math.inf
            for ext in _extensions(shift, w[-1], need):
                full = w + ext
                off = length - q
                best = max(best, sum(potential(full[j - off : j - off + r]) for j in tail_starts))
            g[i] = best / a1
        L = L + g
    out = np.full(shift.size, -math.inf)
    last = np.array([w[-1] for w in states])
    np.logaddexp.at(out, last, L)
    return out


def single_scale_log_sum(
    system: ChainSystem,
    potential: Potential,
    s: float,
    n: int,
    method: str = "dp",
    cover_lengths: Sequence[int] | None = None,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> float:
    """Log of the single-scale covering sum over all weighted ``n``-cylinders.

    With ``cover_lengths`` the cylinders are those of the join of length-``L_i``
    cylinder covers.  ``method="dp"`` aggregates through a transfer recursion;
    ``method="enumerate"`` sums element by element.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    W = _windows(system, n, cover_lengths)
    ell = birkhoff_horizon(system, n)
    a1 = float(system.weights[0])
    if method == "enumerate":
        vals = []
        for mixed in iter_mixed(system, W, cap=cap):
            vals.append(birkhoff_sup(system, potential, mixed[: W[0]], ell) / a1)
        return _logsumexp(vals) - s * n
    if method != "dp":
        raise ValueError(f"unknown method {method!r}")
    by_last = _log_prefix_sums(system, potential, W[0], ell)
    tails = suffix_counts(system, position_levels(W)[W[0] :])
    logt = np.array([math.log(t) if t else -math.inf for t in tails])
    return _logsumexp(by_last + logt) - s * n


def upper_pressure(system: ChainSystem, potential: Potential, n: int, cover_lengths=None) -> float:
    return single_scale_log_sum(system, potential, 0.0, n, cover_lengths=cover_lengths) / n


# ---------------------------------------------------------------- stage LP


@dataclass
class StageLP:
    """Membership structure of a covering stage.

    Rows are classes of depth-``D`` base words that lie in exactly the same
    weighted cylinders; ``row_of_word`` maps each base word to its class.
    """

    stage: StageSpec
    base_words: np.ndarray
    row_of_word: np.ndarray
    row_sizes: np.ndarray
    members: np.ndarray  # (rows, scales) column index of the cylinder containing the row
    col_n: np.ndarray
    col_log_cost0: np.ndarray  # sup S f / a1, without the -s n term
    col_mixed: list

    @property
    def n_rows(self) -> int:
        return len(self.row_sizes)

    @property
    def n_cols(self) -> int:
        return len(self.col_n)

    @property
    def nonzeros(self) -> int:
        return self.members.size

    def matrix(self) -> np.ndarray:
        A = np.zeros((self.n_rows, self.n_cols))
        rows = np.repeat(np.arange(self.n_rows), self.members.shape[1])
        A[rows, self.members.ravel()] = 1.0
        return A

    def log_costs(self, s: float) -> np.ndarray:
        return self.col_log_cost0 - s * self.col_n


def build_stage(
    system: ChainSystem,
    potential: Potential,
    stage: StageSpec,
    nonzero_cap: int = LP_NONZERO_CAP,
    word_cap: int = DEFAULT_ENUMERATION_CAP,
) -> StageLP:
    stage.validate(system)
    base = words_array(system.base, stage.depth, cap=word_cap)
    a1 = float(system.weights[0])
    col_ids, col_n, col_cost, col_mixed = [], [], [], []
    offset = 0
    for n in stage.scales:
        m = window_profile(system.weights, n).m
        labels = mixed_labels(system, base, m)
        uniq, first, inv = np.unique(labels, axis=0, return_index=True, return_inverse=True)
        ell = birkhoff_horizon(system, n)
        for row in range(len(uniq)):
            w1 = tuple(int(x) for x in base[first[row], : m[0]])
            col_cost.append(birkhoff_sup(system, potential, w1, ell) / a1)
            col_mixed.append((n, tuple(int(x) for x in uniq[row])))
        col_ids.append(inv.ravel() + offset)
        col_n.extend([n] * len(uniq))
        offset += len(uniq)
    sig = np.column_stack(col_ids)
    members, row_of_word, sizes = np.unique(sig, axis=0, return_inverse=True, return_counts=True)
    if members.size > nonzero_cap:
        raise ResourceLimitError(f"stage LP has {members.size} nonzeros, above the cap {nonzero_cap}")
    if len(members) * (offset + 2 * len(members)) > LP_DENSE_CAP:
        raise ResourceLimitError("stage LP tableau is too large for the dense solver")
    return StageLP(
        stage,
        base,
        row_of_word.ravel(),
        sizes,
        members,
        np.array(col_n, dtype=float),
        np.array(col_cost),
        col_mixed,
    )


@dataclass
class CoverSolution:
    log_value: float
    x: np.ndarray
    status: str
    iterations: int

    @property
    def value(self) -> float:
        return math.exp(self.log_value)


def solve_cover_lp(lp: StageLP, s: float) -> CoverSolution:
    """Fractional covering LP: minimise sum c_j cost_j with every row covered at least once."""
    lc = lp.log_costs(s)
    shift = lc.max()
    cost = np.exp(lc - shift)
    res = solve_lp(cost, lp.matrix(), np.ones(lp.n_rows), [">="] * lp.n_rows)
    if not res.ok:
        raise RuntimeError(f"covering LP ended with status {res.status}")
    return CoverSolution(float(math.log(res.value) + shift), res.x, res.status, res.iterations)


def w_lp_stage(system: ChainSystem, potential: Potential, s: float, stage: StageSpec) -> float:
    return solve_cover_lp(build_stage(system, potential, stage), s).value


def w_lp_stage_log(system: ChainSystem, potential: Potential, s: float, stage: StageSpec, lp: StageLP | None = None) -> float:
    lp = lp or build_stage(system, potential, stage)
    return solve_cover_lp(lp, s).log_value


# ---------------------------------------------------------------- bisection


def bisection_interval(system: ChainSystem, potential: Potential) -> tuple[float, float]:
    a1 = float(system.weights[0])
    vals = list(potential.values_on(system.base).values())
    fmin, fmax = min(vals), max(vals)
    logA = math.log(max(lev.size for lev in system.levels))
    total = float(sum(system.weights))
    cum = float(sum(system.cumulative_weights))
    return fmin / a1 - logA * total / a1, fmax / a1 + cum * logA


def _bisect(fn, lo, hi, tol):
    seen: list[tuple[float, float]] = []

    def g(s):
        v = fn(s)
        seen.append((s, v))
        return v

    width = max(hi - lo, 1.0)
    while g(lo) < 0:
        lo -= width
        width *= 2
    while g(hi) > 0:
        hi += width
        width *= 2
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    pts = sorted(seen)
    for (s0, v0), (s1, v1) in zip(pts, pts[1:]):
        if v1 > v0 + 1e-9 * max(1.0, abs(v0)):
            raise AssertionError(f"stage value increased in s between {s0} and {s1}")
    return 0.5 * (lo + hi), len(seen)


def pressure_bisect(
    system: ChainSystem,
    potential: Potential,
    stage: StageSpec,
    mode: str = "single_scale",
    tol: float = 1e-9,
    cover_lengths=None,
) -> PressureBracket:
    """Critical exponent of a stage value.  Single-scale mode uses ``n = n_max``."""
    lo, hi = bisection_interval(system, potential)
    if mode in ("single_scale", "single"):
        n = stage.n_max
        base = single_scale_log_sum(system, potential, 0.0, n, cover_lengths=cover_lengths)
        est, evals = _bisect(lambda s: base - s * n, lo, hi, tol)
        return PressureBracket(-math.inf, est, "none", "single-scale", est, evals)
    if mode == "lp":
        lp = build_stage(system, potential, stage)
        est, evals = _bisect(lambda s: solve_cover_lp(lp, s).log_value, lo, hi, tol)
        return PressureBracket(-math.inf, est, "none", "lp", est, evals)
    raise ValueError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------- checks


@dataclass
class LambdaWReport:
    s: float
    lp_log_value: float
    set_cover_log_values: dict[int, float]
    ok: bool

    @property
    def set_cover_log_value(self) -> float:
        return min(self.set_cover_log_values.values())


def lambda_vs_w_check(system: ChainSystem, potential: Potential, s: float, stage: StageSpec, rtol: float = 1e-9) -> LambdaWReport:
    """Fractional covering value against every single-scale set cover in the stage."""
    lp_val = w_lp_stage_log(system, potential, s, stage)
    singles = {n: single_scale_log_sum(system, potential, s, n) for n in stage.scales}
    best = min(singles.values())
    ok = bool(lp_val <= best + math.log1p(rtol))
    return LambdaWReport(s, float(lp_val), singles, ok)


@dataclass
class PowerRuleRow:
    n: int
    estimate_T: float
    estimate_power: float
    difference: float
    slack_constant: float
    slack_window: float
    ok: bool

    @property
    def slack(self) -> float:
        return self.slack_constant + self.slack_window


@dataclass
class PowerRuleReport:
    M: int
    identity: list = field(default_factory=list)
    rows: list[PowerRuleRow] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(r.equal for r in self.identity) and all(r.ok for r in self.rows)


def power_rule_check(
    system: ChainSystem,
    potential: Potential,
    M: int,
    n_list: Sequence[int],
    identity_n: Sequence[int] = (1, 2, 3, 4),
    covers=None,
) -> PowerRuleReport:
    """Compare stage estimates for ``T`` at scale ``M n`` with those of ``T^M`` at scale ``n``.

    Slack per row: the constant ``[M s (1/a_1 + 1) + ceil(a_1 M + M) |f| / a_1] / n``
    evaluated at ``s`` equal to the estimate, plus a window term that absorbs the
    difference between ``M ceil(A_i n)`` and ``ceil(A_i M n)`` (zero when ``A_i n``
    is an integer for every level).
    """
    if M < 1:
        raise ValueError("M must be at least 1")
    covers = covers or cylinder_covers(system, 1)
    if any(not (c.cylinder and c.length == 1) for c in covers):
        raise ValidationError("power rule check uses length-1 cylinder covers")
    rep = PowerRuleReport(M)
    for n in identity_n:
        rep.identity.append(power_join_identity_check(system, covers, M, n))
    psys, _ = power_system(system, M)
    ppot = power_potential(system, potential, M)
    a1 = float(system.weights[0])
    fnorm = potential.sup_norm(system.base)
    logA = math.log(max(lev.size for lev in system.levels))
    for n in n_list:
        est_T = upper_pressure(system, potential, M * n)
        est_P = upper_pressure(psys, ppot, n)
        diff = abs(est_T - est_P / M)
        s = est_T
        const = (M * abs(s) * (1 / a1 + 1) + math.ceil(a1 * M + M) * fnorm / a1) / n
        m_T = window_profile(system.weights, M * n).m
        m_P = window_profile(system.weights, n).m
        excess = sum(M * cp - ct for cp, ct in zip(m_P, m_T))
        horizon_gap = M * birkhoff_horizon(system, n) - birkhoff_horizon(system, M * n)
        window = (excess * logA + horizon_gap * fnorm / a1) / (M * n)
        rep.rows.append(PowerRuleRow(n, est_T, est_P, diff, const, window, diff <= const + window + 1e-12))
    return rep
