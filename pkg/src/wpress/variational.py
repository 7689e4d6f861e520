"""Measure side of the weighted variational principle.

The objective ``a_1 h(mu) + sum_{i>=2} a_i h(tau_{i-1} mu) + int f dmu`` is
evaluated over stationary Markov measures on level 1, with hidden-Markov
entropies replaced by their brackets.  Gradients are exact: block entropies
are differentiated by a forward-backward pass over all label sequences and the
dependence of the stationary vector on ``P`` goes through the fundamental
matrix ``Z = (I - P + 1 pi)^{-1}``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .covering import StageSpec, pressure_bisect, single_scale_log_sum
from .cylinders import birkhoff_horizon, cylinder_covers, oscillation, window_profile
from .errors import ValidationError
from .frostman import frostman_lp
from .measures import MarkovMeasure, _entropy, cover_from_partition, entropy, hm_entropy_bracket, integral
from .symbolic import ChainSystem, Potential, words_array


@dataclass
class ObjectiveValue:
    lower: float
    upper: float
    entropy: float
    integral: float
    brackets: dict = field(default_factory=dict)  # level -> EntropyBracket

    @property
    def mid(self) -> float:
        return 0.5 * (self.lower + self.upper)

    def recombine(self, weights) -> tuple[float, float]:
        lo = hi = float(weights[0]) * self.entropy + self.integral
        for lev, br in self.brackets.items():
            lo += float(weights[lev - 1]) * br.lower
            hi += float(weights[lev - 1]) * br.upper
        return lo, hi


def objective(system: ChainSystem, potential: Potential, markov: MarkovMeasure, L: int) -> ObjectiveValue:
    h = entropy(markov)
    itg = integral(system, markov, potential)
    brackets = {}
    for lev in range(2, system.k + 1):
        if system.weights[lev - 1] != 0:
            brackets[lev] = hm_entropy_bracket(system, markov, lev, L)
    ov = ObjectiveValue(0.0, 0.0, h, itg, brackets)
    ov.lower, ov.upper = ov.recombine(system.weights)
    return ov


# ----------------------------------------------------------- gradients


def block_entropy_grad(P: np.ndarray, d: np.ndarray, masks: np.ndarray, n: int):
    """Entropy of ``n`` labels of the chain started at ``d``, with its partial
    derivatives in ``P`` and ``d`` (both treated as unconstrained)."""
    S = P.shape[0]
    if n == 0:
        return 0.0, np.zeros_like(P), np.zeros(S)
    B = masks.shape[0]
    alphas = [d[None, :] * masks]
    for _ in range(n - 1):
        alphas.append(((alphas[-1] @ P)[:, None, :] * masks[None]).reshape(-1, S))
    p = alphas[-1].sum(axis=1)
    pos = p > 0
    H = float(-(p[pos] * np.log(p[pos])).sum())
    w = np.zeros_like(p)
    w[pos] = -(np.log(p[pos]) + 1.0)
    betas = [None] * (n + 1)
    betas[n] = masks  # suffix of length 1, indexed by its label
    for t in range(n - 1, 0, -1):
        nxt = betas[t + 1] @ P.T
        betas[t] = (masks[:, None, :] * nxt[None, :, :]).reshape(-1, S)
    gP = np.zeros_like(P)
    for t in range(1, n):
        Wt = w.reshape(B**t, B ** (n - t))
        gP += alphas[t - 1].T @ (Wt @ betas[t + 1])
    gd = w @ betas[1]
    return H, gP, gd


def _masks(system: ChainSystem, level: int) -> np.ndarray:
    tau = system.tau(level - 1)
    nl = system.levels[level - 1].size
    return (tau[None, :] == np.arange(nl)[:, None]).astype(float)


def _stationary_of(P):
    n = P.shape[0]
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    return np.linalg.solve(A, b)


def objective_and_grad(system: ChainSystem, potential: Potential, P: np.ndarray, L: int, mode: str = "mid"):
    """Objective value (``mode`` in lower/mid/upper) and total derivative in ``P``."""
    c_up, c_lo = {"mid": (0.5, 0.5), "lower": (0.0, 1.0), "upper": (1.0, 0.0)}[mode]
    S = P.shape[0]
    pi = _stationary_of(P)
    a = [float(x) for x in system.weights]
    logP = np.log(np.where(P > 0, P, 1.0))
    rowH = -(P * logP).sum(axis=1)
    val = a[0] * float(pi @ rowH)
    gP = -a[0] * pi[:, None] * (logP + 1.0) * (P > 0)
    gpi = a[0] * rowH

    r = potential.range
    W = words_array(system.base, r)
    fv = np.array([potential(tuple(w)) for w in W])
    if np.any(fv):
        prod = np.ones(len(W))
        for j in range(r - 1):
            prod *= P[W[:, j], W[:, j + 1]]
        val += float((pi[W[:, 0]] * prod * fv).sum())
        np.add.at(gpi, W[:, 0], prod * fv)
        for j in range(r - 1):
            e = P[W[:, j], W[:, j + 1]]
            others = np.divide(prod, e, out=np.zeros_like(prod), where=e > 0)
            np.add.at(gP, (W[:, j], W[:, j + 1]), pi[W[:, 0]] * others * fv)

    for lev in range(2, system.k + 1):
        ai = a[lev - 1]
        if ai == 0:
            continue
        masks = _masks(system, lev)
        if c_up:
            H1, g1, d1 = block_entropy_grad(P, pi, masks, L + 1)
            H0, g0, d0 = block_entropy_grad(P, pi, masks, L)
            val += c_up * ai * (H1 - H0)
            gP += c_up * ai * (g1 - g0)
            gpi += c_up * ai * (d1 - d0)
        if c_lo:
            for u in range(S):
                H1, g1, d1 = block_entropy_grad(P, P[u], masks, L)
                H0, g0, d0 = block_entropy_grad(P, P[u], masks, L - 1)
                diff = H1 - H0
                val += c_lo * ai * pi[u] * diff
                gpi[u] += c_lo * ai * diff
                gP += c_lo * ai * pi[u] * (g1 - g0)
                gP[u] += c_lo * ai * pi[u] * (d1 - d0)

    Z = np.linalg.inv(np.eye(S) - P + np.outer(np.ones(S), pi))
    total = gP + np.outer(pi, Z @ gpi)
    return val, total


def softmax_rows(theta: np.ndarray, mask: np.ndarray) -> np.ndarray:
    z = np.where(mask, theta, -np.inf)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z) * mask
    return e / e.sum(axis=1, keepdims=True)


def logit_grad(P: np.ndarray, G: np.ndarray, mask: np.ndarray) -> np.ndarray:
    inner = (P * G).sum(axis=1, keepdims=True)
    return np.where(mask, P * (G - inner), 0.0)


# ----------------------------------------------------------- closed form


def _check_fullshift(system: ChainSystem, potential: Potential):
    if potential.range != 1:
        raise ValidationError("closed form needs a range-1 potential")
    if not all(lev.transitions.all() for lev in system.levels):
        raise ValidationError("closed form needs every level to be a full shift")


def fullshift_closed_form(system: ChainSystem, potential: Potential) -> float:
    """Nested log-sum-exp: ``S_1 = f``, ``S_{i+1}(b) = A_i log sum_{x -> b} exp(S_i(x)/A_i)``,
    result ``A_k log sum exp(S_k / A_k)`` with ``A_i = a_1 + ... + a_i``."""
    _check_fullshift(system, potential)
    A = [float(x) for x in system.cumulative_weights]
    S = potential.symbol_values(system.base)
    for i in range(system.k - 1):
        code = system.codes[i].as_array()
        nxt = np.full(system.levels[i + 1].size, -np.inf)
        np.logaddexp.at(nxt, code, S / A[i])
        S = A[i] * nxt
    return float(A[-1] * np.logaddexp.reduce(S / A[-1]))


def fullshift_optimal_bernoulli(system: ChainSystem, potential: Potential) -> np.ndarray:
    """Level-1 symbol distribution attaining the closed form."""
    _check_fullshift(system, potential)
    A = [float(x) for x in system.cumulative_weights]
    S_levels = [potential.symbol_values(system.base)]
    for i in range(system.k - 1):
        code = system.codes[i].as_array()
        nxt = np.full(system.levels[i + 1].size, -np.inf)
        np.logaddexp.at(nxt, code, S_levels[-1] / A[i])
        S_levels.append(A[i] * nxt)
    top = S_levels[-1] / A[-1]
    q = np.exp(top - np.logaddexp.reduce(top))
    for i in range(system.k - 2, -1, -1):
        code = system.codes[i].as_array()
        z = S_levels[i] / A[i]
        norm = np.full(len(q), -np.inf)
        np.logaddexp.at(norm, code, z)
        q = q[code] * np.exp(z - norm[code])
    return q


# ----------------------------------------------------------- optimizer


@dataclass(frozen=True)
class OptimizerOptions:
    restarts: int = 8
    iters: int = 500
    seed: int = 0
    step: float = 0.1
    objective: str = "mid"
    grad_tol: float = 1e-9
    max_step: float = 1e3
    init_scale: float = 1.0


@dataclass
class OptimizeResult:
    markov: MarkovMeasure
    value: ObjectiveValue
    theta: np.ndarray
    score: float
    grad_norm: float
    iterations: int
    restart_scores: list


def _ascend(system, potential, L, theta, mask, opts):
    def f(th):
        P = softmax_rows(th, mask)
        v, G = objective_and_grad(system, potential, P, L, opts.objective)
        return v, logit_grad(P, G, mask)

    val, g = f(theta)
    step = opts.step
    it = 0
    for it in range(1, opts.iters + 1):
        gn = float(np.linalg.norm(g))
        if gn < opts.grad_tol:
            break
        t = step
        while t > 1e-14:
            cand = theta + t * g
            v2, g2 = f(cand)
            if v2 > val:
                break
            t *= 0.5
        else:
            break
        theta, val, g = cand, v2, g2
        # an accepted full step doubles the next trial step; a halved one is kept
        step = min(2 * t, opts.max_step) if t == step else t
    return theta, val, float(np.linalg.norm(g)), it


def optimize_markov(system: ChainSystem, potential: Potential, L: int = 2, opts: OptimizerOptions = OptimizerOptions()):
    mask = system.base.transitions.copy()
    S = mask.shape[0]
    rng = np.random.default_rng(opts.seed)
    inits = [np.zeros((S, S))] + [rng.normal(scale=opts.init_scale, size=(S, S)) for _ in range(opts.restarts - 1)]
    best = None
    scores = []
    for k, th0 in enumerate(inits):
        th0 = np.where(mask, th0, 0.0)
        theta, val, gn, it = _ascend(system, potential, L, th0, mask, opts)
        scores.append(val)
        if best is None or val > best[1]:
            best = (theta, val, gn, it)
    theta, val, gn, it = best
    P = softmax_rows(theta, mask)
    markov = MarkovMeasure(system.base, P)
    return OptimizeResult(markov, objective(system, potential, markov, L), theta, val, gn, it, scores)


# ----------------------------------------------------------- reports


@dataclass
class LowerBoundReport:
    n: int
    stage_upper: float
    objective_lower: float
    eps_items: dict
    ok: bool

    @property
    def eps(self) -> float:
        return sum(v for k, v in self.eps_items.items() if k != "bracket_width")


def lower_bound_check(
    system: ChainSystem,
    potential: Potential,
    markov: MarkovMeasure,
    partition_lengths,
    n: int,
    L: int = 2,
    delta: float = 0.1,
) -> LowerBoundReport:
    """Stage pressure of the covers built from cylinder partitions against the objective.

    The inequality ``n * stage >= H_mu(join) + (ceil(a_1 n)/a_1) int f`` (Gibbs) and
    the chain-rule bound ``H_mu(join) >= sum_i d_i lower_i - (#hidden blocks) H(pi)``
    give ``stage >= objective.lower - eps`` with itemised ``eps``.
    """
    covers = [cover_from_partition(system, i + 1, Li, delta).cover for i, Li in enumerate(partition_lengths)]
    lengths = [c.length for c in covers]
    stage = single_scale_log_sum(system, potential, 0.0, n, cover_lengths=lengths) / n
    ov = objective(system, potential, markov, L)
    m = window_profile(system.weights, n).m
    W = [mi + Li - 1 for mi, Li in zip(m, lengths)]
    lowers = [ov.entropy] + [ov.brackets[i].lower if i in ov.brackets else 0.0 for i in range(2, system.k + 1)]
    d, seen = [], 0
    for w in W:
        d.append(max(0, w - seen))
        seen = max(seen, w)
    a = [float(x) for x in system.weights]
    ceiling = sum(max(0.0, ai * n - di) * lo for ai, di, lo in zip(a, d, lowers)) / n
    hidden = sum(1 for i in range(1, system.k) if d[i] > 0 and a[i] > 0) * _entropy(markov.stationary) / n
    ell = birkhoff_horizon(system, n)
    horizon = max(0.0, -ov.integral) * (ell / a[0] - n) / n
    items = {
        "ceiling": ceiling,
        "hidden_state": hidden,
        "birkhoff_horizon": horizon,
        "truncation": 0.0,
        "bracket_width": ov.upper - ov.lower,
    }
    eps = ceiling + hidden + horizon
    return LowerBoundReport(n, stage, ov.lower, items, bool(stage >= ov.lower - eps - 1e-12))


@dataclass
class VPReport:
    optimizer_value: ObjectiveValue
    stage_upper: float
    frostman_lower: float | None
    closed_form: float | None
    oscillation_slack: float
    flags: dict
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.flags.values())


def vp_report(
    system: ChainSystem,
    potential: Potential,
    stage: StageSpec,
    L: int = 2,
    opts: OptimizerOptions = OptimizerOptions(),
    frostman_stage: StageSpec | None = None,
    closed_tol: float = 2e-3,
) -> VPReport:
    opt = optimize_markov(system, potential, L, opts)
    upper = pressure_bisect(system, potential, stage, "single_scale").upper
    try:
        closed = fullshift_closed_form(system, potential)
    except ValidationError:
        closed = None
    frost = None
    details = {"optimizer_measure": opt.markov.transition.tolist(), "grad_norm": opt.grad_norm}
    if frostman_stage is not None:
        br = pressure_bisect(system, potential, frostman_stage, "lp", tol=1e-6)
        frost = br.upper
        cert = frostman_lp(system, potential, frost, frostman_stage)
        details["frostman_c"] = cert.c
        details["frostman_violation"] = cert.max_violation
    osc = 3 * oscillation(system, cylinder_covers(system, 1), potential)
    v = opt.value
    flags = {"sandwich": v.lower <= upper + 1e-9}
    if closed is not None:
        flags["closed_form_match"] = abs(v.mid - closed) <= closed_tol
        flags["upper_above_closed_form"] = upper - closed >= -1e-9
        details["finite_stage_gap"] = upper - closed
    if frostman_stage is not None:
        flags["frostman_certificate"] = details["frostman_violation"] <= 1e-10
    details["optimizer_gap"] = upper - v.mid
    return VPReport(v, upper, frost, closed, osc, flags, details)
