"""Markov measures, pushforward block distributions and entropy brackets.

Hidden-Markov entropy of a pushforward ``Y = tau(X)`` is bracketed by the usual
conditional block entropies, indexed by the number ``L`` of conditioning symbols:

    upper(L) = H(Y_{L+1} | Y_1 .. Y_L)
    lower(L) = H(Y_{L+1} | Y_2 .. Y_L, X_1)

so ``upper`` is nonincreasing, ``lower`` nondecreasing, and both are exact at
``L = 1`` for injective codes and for Bernoulli sources on full shifts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cylinders import (
    WeightedCylinder,
    explicit_cover,
    cylinder_cover,
    mixed_labels,
    position_levels,
    window_profile,
)
from .errors import ValidationError
from .symbolic import ChainSystem, Potential, Subshift, is_irreducible, words_array

ROW_TOL = 1e-12


def _entropy(p) -> float:
    p = np.asarray(p, dtype=float)
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


class MarkovMeasure:
    """Stationary order-1 Markov measure on a level-1 subshift."""

    def __init__(self, shift: Subshift, transition):
        P = np.array(transition, dtype=float)
        if P.shape != (shift.size, shift.size):
            raise ValidationError("transition matrix shape does not match the alphabet")
        if np.any(P < 0):
            raise ValidationError("transition matrix has negative entries")
        if np.any(np.abs(P.sum(axis=1) - 1.0) > ROW_TOL):
            raise ValidationError("transition rows must sum to 1")
        if np.any((P > 0) & ~shift.transitions):
            raise ValidationError("transition support leaves the subshift")
        if not is_irreducible(P > 0):
            raise ValidationError("transition support is reducible")
        P.setflags(write=False)
        self.shift = shift
        self.transition = P
        self.stationary = _stationary(P)

    @classmethod
    def bernoulli(cls, shift: Subshift, p) -> "MarkovMeasure":
        p = np.asarray(p, dtype=float)
        return cls(shift, np.tile(p / p.sum(), (shift.size, 1)))

    @classmethod
    def uniform(cls, shift: Subshift) -> "MarkovMeasure":
        t = shift.transitions.astype(float)
        return cls(shift, t / t.sum(axis=1, keepdims=True))

    @classmethod
    def parry(cls, shift: Subshift) -> "MarkovMeasure":
        t = shift.transitions.astype(float)
        vals, vecs = np.linalg.eig(t)
        i = int(np.argmax(vals.real))
        lam, r = vals[i].real, np.abs(vecs[:, i].real)
        return cls(shift, t * r[None, :] / (lam * r[:, None]))

    @classmethod
    def random(cls, shift: Subshift, rng: np.random.Generator, concentration: float = 1.0) -> "MarkovMeasure":
        P = np.zeros((shift.size, shift.size))
        for u in range(shift.size):
            succ = list(shift.successors(u))
            P[u, succ] = rng.dirichlet(np.full(len(succ), concentration))
        P = np.maximum(P, 0)
        P /= P.sum(axis=1, keepdims=True)
        return cls(shift, P)

    def is_bernoulli(self, tol: float = 1e-12) -> bool:
        return bool(np.all(np.abs(self.transition - self.transition[0]) <= tol))

    def word_probability(self, word: Sequence[int]) -> float:
        p = self.stationary[word[0]]
        for a, b in zip(word, word[1:]):
            p *= self.transition[a, b]
        return float(p)

    def block_probs(self, n: int, cap: int = 10**6) -> tuple[np.ndarray, np.ndarray]:
        """All admissible length-``n`` words and their probabilities."""
        W = words_array(self.shift, n, cap=cap)
        p = self.stationary[W[:, 0]].copy()
        for j in range(n - 1):
            p *= self.transition[W[:, j], W[:, j + 1]]
        return W, p


def _stationary(P: np.ndarray) -> np.ndarray:
    n = P.shape[0]
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    pi = np.linalg.solve(A, b)
    pi = np.clip(pi, 0, None)
    pi /= pi.sum()
    if np.abs(pi @ P - pi).max() > 1e-12:
        pi = pi @ np.linalg.matrix_power(P, 8)
        pi /= pi.sum()
    return pi


def stationary(markov: MarkovMeasure) -> np.ndarray:
    return markov.stationary


def entropy(markov: MarkovMeasure) -> float:
    P, pi = markov.transition, markov.stationary
    logs = np.where(P > 0, np.log(np.where(P > 0, P, 1.0)), 0.0)
    return float(-(pi[:, None] * P * logs).sum())


def integral(system: ChainSystem, markov: MarkovMeasure, potential: Potential) -> float:
    W, p = markov.block_probs(potential.range)
    vals = np.array([potential(tuple(w)) for w in W])
    return float(p @ vals)


# ----------------------------------------------------------- pushforwards


def label_block_probs(P: np.ndarray, d: np.ndarray, tau: np.ndarray, n_labels: int, n: int) -> np.ndarray:
    """Probabilities of every label sequence of length ``n`` (row-major over labels)
    for the chain started from distribution ``d``."""
    masks = (tau[None, :] == np.arange(n_labels)[:, None]).astype(float)
    if n == 0:
        return np.array([d.sum()])
    alpha = d[None, :] * masks
    for _ in range(n - 1):
        alpha = ((alpha @ P)[:, None, :] * masks[None]).reshape(-1, P.shape[0])
    return alpha.sum(axis=1)


def pushforward_block_dist(system: ChainSystem, markov: MarkovMeasure, level: int, L: int) -> dict:
    """Distribution of length-``L`` words of the level-``level`` image (levels 1-based)."""
    if L < 1:
        raise ValueError("L must be at least 1")
    i = level - 1
    tau = system.tau(i)
    nl = system.levels[i].size
    probs = label_block_probs(markov.transition, markov.stationary, tau, nl, L)
    out = {}
    for idx in np.flatnonzero(probs > 0):
        word = tuple(int(x) for x in np.unravel_index(idx, (nl,) * L))
        out[word] = float(probs[idx])
    return out


@dataclass
class EntropyBracket:
    lower: float
    upper: float
    L: int

    def __post_init__(self):
        if self.lower > self.upper + 1e-9:
            raise ValueError(f"entropy bracket inverted: {self.lower} > {self.upper}")

    @property
    def mid(self) -> float:
        return 0.5 * (self.lower + self.upper)

    @property
    def width(self) -> float:
        return self.upper - self.lower


def hm_entropy_bracket(system: ChainSystem, markov: MarkovMeasure, level: int, L: int) -> EntropyBracket:
    if L < 1:
        raise ValueError("L must be at least 1")
    i = level - 1
    P, pi = markov.transition, markov.stationary
    tau = system.tau(i)
    nl = system.levels[i].size
    upper = _entropy(label_block_probs(P, pi, tau, nl, L + 1)) - _entropy(label_block_probs(P, pi, tau, nl, L))
    lower = 0.0
    for u in range(P.shape[0]):
        if pi[u] > 0:
            d = P[u]
            hi = _entropy(label_block_probs(P, d, tau, nl, L))
            lo = _entropy(label_block_probs(P, d, tau, nl, L - 1)) if L > 1 else 0.0
            lower += pi[u] * (hi - lo)
    if 0 < lower - upper < 1e-12:  # rounding when the bracket is collapsed
        lower = upper
    return EntropyBracket(float(lower), float(upper), L)


# ----------------------------------------------------------- cylinder masses


def mixed_mass(system: ChainSystem, markov: MarkovMeasure, mixed: Sequence[int], windows: Sequence[int]) -> float:
    levels = position_levels(windows)
    P = markov.transition
    alpha = markov.stationary * (system.tau(levels[0]) == mixed[0])
    for p in range(1, len(levels)):
        alpha = (alpha @ P) * (system.tau(levels[p]) == mixed[p])
    return float(alpha.sum())


def wcyl_mass(system: ChainSystem, markov: MarkovMeasure, wcyl: WeightedCylinder) -> float:
    m = window_profile(system.weights, wcyl.n).m
    return mixed_mass(system, markov, wcyl.mixed(), m)


def smb_expected_rate(system: ChainSystem, markov: MarkovMeasure, N: int) -> float:
    """``(1/N) E[-log mu(wcyl_N(x))]``, exactly.

    The level-1 block contributes ``H(pi) + (m_1 - 1) h``; the higher-level
    suffix depends on the level-1 word only through its last symbol.
    """
    m = window_profile(system.weights, N).m
    P, pi = markov.transition, markov.stationary
    levels = position_levels(m)[m[0] :]
    total = _entropy(pi) + (m[0] - 1) * entropy(markov)
    if levels:
        for u in range(P.shape[0]):
            if pi[u] > 0:
                total += pi[u] * _entropy(_suffix_label_probs(system, P, P[u], levels))
    return total / N


def _suffix_label_probs(system, P, d, levels):
    S = P.shape[0]
    alpha = None
    for t, lev in enumerate(levels):
        tau = system.tau(lev)
        nl = system.levels[lev].size
        masks = (tau[None, :] == np.arange(nl)[:, None]).astype(float)
        if alpha is None:
            alpha = d[None, :] * masks
        else:
            alpha = ((alpha @ P)[:, None, :] * masks[None]).reshape(-1, S)
    return alpha.sum(axis=1)


def smb_limit(system: ChainSystem, markov: MarkovMeasure, L: int = 4) -> EntropyBracket:
    """Bracket on ``sum_i a_i h(tau_{i-1} mu)``."""
    h = entropy(markov)
    lo = hi = float(system.weights[0]) * h
    for i in range(2, system.k + 1):
        a = float(system.weights[i - 1])
        if a:
            br = hm_entropy_bracket(system, markov, i, L)
            lo += a * br.lower
            hi += a * br.upper
    return EntropyBracket(lo, hi, L)


def smb_ceiling_bound(system: ChainSystem, markov: MarkovMeasure, N: int) -> float:
    """Exact deviation bound ``sum_i |e_i - e_{i-1}| H(q_i) / N`` for Bernoulli
    sources on full shifts, where ``e_i = m_i - (a_1 + .. + a_i) N`` and ``q_i`` is
    the level-i marginal."""
    if not markov.is_bernoulli() or not all(lev.transitions.all() for lev in system.levels):
        raise ValueError("the ceiling bound is stated for Bernoulli sources on full shifts")
    m = window_profile(system.weights, N).m
    e_prev, total = 0.0, 0.0
    for i, (mi, Ai) in enumerate(zip(m, system.cumulative_weights)):
        e = float(mi - Ai * N)
        q = np.bincount(system.tau(i), weights=markov.stationary, minlength=system.levels[i].size)
        total += abs(e - e_prev) * _entropy(q)
        e_prev = e
    return total / N


@dataclass
class SMBSample:
    rates: np.ndarray
    mean: float
    std: float
    expected: float

    @property
    def sigma(self) -> float:
        return self.std / math.sqrt(len(self.rates))

    @property
    def within_3sigma(self) -> bool:
        return abs(self.mean - self.expected) <= 3 * self.sigma + 1e-15


def sample_paths(markov: MarkovMeasure, length: int, count: int, rng: np.random.Generator) -> np.ndarray:
    cum = np.cumsum(markov.transition, axis=1)
    x = np.empty((count, length), dtype=np.int64)
    x[:, 0] = rng.choice(len(markov.stationary), size=count, p=markov.stationary)
    for t in range(1, length):
        u = rng.random(count)
        x[:, t] = np.minimum((u[:, None] > cum[x[:, t - 1]]).sum(axis=1), cum.shape[1] - 1)
    return x


def smb_sample(system: ChainSystem, markov: MarkovMeasure, N: int, count: int = 1000, seed: int = 0) -> SMBSample:
    """Single-orbit information rates ``-(1/N) log mu(wcyl_N(x))`` for sampled ``x``."""
    rng = np.random.default_rng(seed)
    m = window_profile(system.weights, N).m
    x = sample_paths(markov, max(m), count, rng)
    lab = mixed_labels(system, x, m)
    levels = position_levels(m)
    P = markov.transition
    alpha = markov.stationary[None, :] * (system.tau(levels[0])[None, :] == lab[:, :1])
    for p in range(1, len(levels)):
        alpha = (alpha @ P) * (system.tau(levels[p])[None, :] == lab[:, p : p + 1])
    rates = -np.log(alpha.sum(axis=1)) / N
    return SMBSample(rates, float(rates.mean()), float(rates.std(ddof=1)), smb_expected_rate(system, markov, N))


# ----------------------------------------------------------- word measures


@dataclass
class WordMeasure:
    """Arbitrary probability on words of a fixed length over ``size`` symbols."""

    size: int
    probs: np.ndarray  # shape (size,) * length

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)
        if self.probs.shape != (self.size,) * self.probs.ndim:
            raise ValueError("word measure array has inconsistent shape")
        if np.any(self.probs < 0) or abs(self.probs.sum() - 1) > 1e-10:
            raise ValueError("word measure must be a probability")

    @property
    def length(self) -> int:
        return self.probs.ndim

    @classmethod
    def from_markov(cls, markov: MarkovMeasure, length: int) -> "WordMeasure":
        S = markov.shift.size
        arr = markov.stationary.copy()
        for _ in range(length - 1):
            arr = _extend(arr, markov.transition)
        return cls(S, arr)

    @classmethod
    def point_mass(cls, size: int, word: Sequence[int]) -> "WordMeasure":
        arr = np.zeros((size,) * len(word))
        arr[tuple(word)] = 1.0
        return cls(size, arr)

    @classmethod
    def uniform_on(cls, shift: Subshift, length: int) -> "WordMeasure":
        arr = np.zeros((shift.size,) * length)
        W = words_array(shift, length)
        arr[tuple(W.T)] = 1.0 / len(W)
        return cls(shift.size, arr)

    @classmethod
    def random(cls, size: int, length: int, rng: np.random.Generator, concentration: float = 0.5) -> "WordMeasure":
        arr = rng.dirichlet(np.full(size**length, concentration)).reshape((size,) * length)
        return cls(size, arr)

    def window_marginal(self, start: int, width: int) -> np.ndarray:
        axes = tuple(a for a in range(self.length) if not start <= a < start + width)
        return self.probs.sum(axis=axes).ravel()

    def cesaro_marginal(self, n: int, width: int) -> np.ndarray:
        """Marginal on ``width`` coordinates of ``(1/n) sum_{i<n} T^i nu``."""
        if n - 1 + width > self.length:
            raise ValueError("word measure too short for the requested average")
        return sum(self.window_marginal(i, width) for i in range(n)) / n


def _extend(arr: np.ndarray, P: np.ndarray) -> np.ndarray:
    last_axis = arr.ndim - 1
    out = np.einsum(arr, list(range(arr.ndim)), P, [last_axis, arr.ndim], list(range(arr.ndim + 1)))
    return out


@dataclass
class LemmaReport:
    lhs: float
    rhs: float
    ok: bool
    details: dict = field(default_factory=dict)

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs


def avg_entropy_inequality_check(nu: WordMeasure, n: int, l: int, partition_length: int = 1, tol: float = 1e-12) -> LemmaReport:
    """``(1/n) H_nu(alpha^n) <= (1/l) H_{nu_n}(alpha^l) + (2l/n) log M`` with ``alpha`` the
    length-``p`` cylinder partition, ``M = size^p`` and ``nu_n`` the Cesaro average."""
    if n < 2 * l or l < 1:
        raise ValueError("need n >= 2 l >= 2")
    p = partition_length
    M = nu.size**p
    lhs = _entropy(nu.window_marginal(0, n + p - 1)) / n
    hn = _entropy(nu.cesaro_marginal(n, l + p - 1)) / l
    rhs = hn + 2 * l / n * math.log(M)
    return LemmaReport(lhs, rhs, lhs <= rhs + tol, {"n": n, "l": l, "M": M, "cesaro_term": hn})


def block_entropy_continuity_check(nu: WordMeasure, n: int, partition_length: int = 1, tol: float = 1e-12) -> LemmaReport:
    """``|h(n+1) - h(n)| <= log(3 M^2 (n+1)) / (n+1)`` with ``h(n) = H_{nu_n}(alpha)``."""
    p = partition_length
    M = nu.size**p
    h_n = _entropy(nu.cesaro_marginal(n, p))
    h_n1 = _entropy(nu.cesaro_marginal(n + 1, p))
    lhs = abs(h_n1 - h_n)
    rhs = math.log(3 * M**2 * (n + 1)) / (n + 1)
    return LemmaReport(lhs, rhs, lhs <= rhs + tol, {"n": n, "h_n": h_n, "h_n1": h_n1, "M": M})


# ----------------------------------------------------------- covers from partitions


@dataclass
class PartitionCover:
    cover: object
    dropped_empty_piece: bool
    delta: float
    delta_independent: bool = True


def cover_from_partition(system: ChainSystem, level: int, length: int, delta: float, classes=None) -> PartitionCover:
    """Cover of a level built from a clopen partition of length-``length`` cylinder classes.

    On subshifts every partition element is clopen, so the approximating compact
    sets can be taken equal to the elements and the leftover piece is empty: the
    cover equals the partition whatever ``delta`` is.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    shift = system.levels[level - 1]
    if classes is None:
        cov = cylinder_cover(shift, length)
    else:
        cov = explicit_cover(shift, length, classes)
        if not cov.is_partition:
            raise ValidationError("classes overlap; a partition is required")
    return PartitionCover(cov, True, delta, True)
