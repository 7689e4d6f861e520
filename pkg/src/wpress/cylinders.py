"""Weighted cylinders, clopen cylinder covers and their joins on subshift chains.

A weighted ``n``-cylinder fixes the level-1 word on ``[0, m_1)`` and the level-i
image on ``[0, m_i)``, with ``m_i = ceil((a_1 + ... + a_i) n)``.  Only the symbols
not already determined by lower levels are free, so a cylinder is equivalent to a
*mixed word*: position ``p`` carries the level-``l(p)`` symbol, where ``l(p)`` is
the lowest level whose window covers ``p``.  Counting distinct mixed words that
are realised by points of ``X_1`` is a subset construction over level-1 symbols.
"""
from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import ResourceLimitError, ValidationError
from .symbolic import (
    DEFAULT_ENUMERATION_CAP,
    ChainSystem,
    Potential,
    Subshift,
    Word,
    birkhoff_sup,
    power_system,
    to_fraction,
    word_count,
    words,
    words_array,
    words_by_last,
)


@dataclass(frozen=True)
class WindowProfile:
    n: int
    m: tuple[int, ...]


def _ceil(q: Fraction) -> int:
    return -((-q.numerator) // q.denominator)


def window_profile(weights: Sequence, n: int) -> WindowProfile:
    if n < 1:
        raise ValueError("n must be at least 1")
    acc = Fraction(0)
    m = []
    for w in weights:
        acc += to_fraction(w)
        m.append(_ceil(acc * n))
    return WindowProfile(n, tuple(m))


def birkhoff_horizon(system: ChainSystem, n: int) -> int:
    return _ceil(system.weights[0] * n)


def position_levels(windows: Sequence[int]) -> list[int]:
    """Lowest level (0-based) whose window covers each position."""
    out = []
    for p in range(max(windows)):
        out.append(next(i for i, w in enumerate(windows) if w > p))
    return out


@dataclass(frozen=True)
class WeightedCylinder:
    n: int
    level_words: tuple[Word, ...]

    def mixed(self) -> Word:
        out = self.level_words[0]
        for w in self.level_words[1:]:
            out = out + w[len(out):] if len(w) > len(out) else out
        return out

    def render(self, system: ChainSystem) -> tuple[str, ...]:
        return tuple(lev.alphabet.decode(w) for lev, w in zip(system.levels, self.level_words))


def cylinder_from_mixed(system: ChainSystem, n: int, mixed: Sequence[int]) -> WeightedCylinder:
    m = window_profile(system.weights, n).m
    mixed = tuple(mixed)
    lw = [mixed[: m[0]]]
    for i in range(1, system.k):
        img = system.codes[i - 1].apply(lw[-1])
        lw.append(img + mixed[m[i - 1] : m[i]])
    return WeightedCylinder(n, tuple(lw))


def is_valid_cylinder(system: ChainSystem, wcyl: WeightedCylinder) -> bool:
    m = window_profile(system.weights, wcyl.n).m
    if len(wcyl.level_words) != system.k:
        return False
    for i, (lev, w) in enumerate(zip(system.levels, wcyl.level_words)):
        if len(w) != m[i] or not lev.is_admissible(w):
            return False
        if i and w[: m[i - 1]] != system.codes[i - 1].apply(wcyl.level_words[i - 1]):
            return False
    return True


class _Successors:
    """Cached successor sets of level-1 symbol subsets."""

    def __init__(self, shift: Subshift):
        self.shift = shift
        self._cache: dict[frozenset, tuple[int, ...]] = {}

    def __call__(self, states: frozenset) -> tuple[int, ...]:
        hit = self._cache.get(states)
        if hit is None:
            hit = tuple(sorted(set().union(*(self.shift.successors(u) for u in states))))
            self._cache[states] = hit
        return hit


def _step(system, succ, states, level):
    tau = system.tau(level)
    groups = defaultdict(set)
    for v in succ(states):
        groups[int(tau[v])].add(v)
    return sorted((b, frozenset(vs)) for b, vs in groups.items())


def suffix_counts(system: ChainSystem, tail_levels: Sequence[int]) -> list[int]:
    """For each level-1 symbol ``u``, the number of distinct label sequences that can
    follow a level-1 word ending in ``u`` (labels of the given levels, one per step)."""
    succ = _Successors(system.base)
    tail_levels = tuple(tail_levels)
    memo: dict[tuple[frozenset, int], int] = {}
    steps: dict[tuple[frozenset, int], list] = {}

    # backward over depth so subset states are shared between starting symbols
    def count(S: frozenset, d: int) -> int:
        if d == len(tail_levels):
            return 1
        key = (S, d)
        hit = memo.get(key)
        if hit is None:
            sk = (S, tail_levels[d])
            nxt = steps.get(sk)
            if nxt is None:
                nxt = steps[sk] = _step(system, succ, S, tail_levels[d])
            hit = memo[key] = sum(count(S2, d + 1) for _, S2 in nxt)
        return hit

    return [count(frozenset([u]), 0) for u in range(system.base.size)]


def suffix_sequences(system: ChainSystem, u: int, tail_levels: Sequence[int]) -> list[Word]:
    """Lexicographically ordered label sequences that can follow level-1 symbol ``u``."""
    succ = _Successors(system.base)
    out: list[Word] = []

    def rec(states, depth, acc):
        if depth == len(tail_levels):
            out.append(tuple(acc))
            return
        for b, S2 in _step(system, succ, states, tail_levels[depth]):
            acc.append(b)
            rec(S2, depth + 1, acc)
            acc.pop()

    rec(frozenset([u]), 0, [])
    return out


def count_mixed(system: ChainSystem, windows: Sequence[int]) -> int:
    """Number of nonempty elements of the join with the given per-level windows."""
    w1 = windows[0]
    levels = position_levels(windows)[w1:]
    by_last = words_by_last(system.base, w1)
    tails = suffix_counts(system, levels)
    return sum(a * b for a, b in zip(by_last, tails))


def iter_mixed(system: ChainSystem, windows: Sequence[int], cap: int = DEFAULT_ENUMERATION_CAP):
    total = count_mixed(system, windows)
    if total > cap:
        raise ResourceLimitError(f"{total} join elements exceed the enumeration cap {cap}")
    w1 = windows[0]
    levels = position_levels(windows)[w1:]
    tails: dict[int, list[Word]] = {}
    for w in words(system.base, w1, cap=cap):
        u = w[-1]
        if u not in tails:
            tails[u] = suffix_sequences(system, u, levels)
        for t in tails[u]:
            yield w + t


def count_weighted_cylinders(system: ChainSystem, n: int) -> int:
    return count_mixed(system, window_profile(system.weights, n).m)


def enumerate_weighted_cylinders(
    system: ChainSystem, n: int, cap: int = DEFAULT_ENUMERATION_CAP
) -> list[WeightedCylinder]:
    m = window_profile(system.weights, n).m
    return [cylinder_from_mixed(system, n, mw) for mw in iter_mixed(system, m, cap=cap)]


def mixed_labels(system: ChainSystem, word_arr: np.ndarray, windows: Sequence[int]) -> np.ndarray:
    """Mixed labels of level-1 words (rows of ``word_arr``) for the given windows."""
    levels = position_levels(windows)
    if word_arr.shape[1] < len(levels):
        raise ValueError("words are shorter than the largest window")
    cols = [system.tau(lev)[word_arr[:, p]] for p, lev in enumerate(levels)]
    return np.column_stack(cols) if cols else np.zeros((len(word_arr), 0), np.int64)


def cylinder_of(system: ChainSystem, n: int, prefix: Sequence[int]) -> WeightedCylinder:
    m = window_profile(system.weights, n).m
    prefix = tuple(prefix)
    if len(prefix) < max(m):
        raise ValueError(f"prefix of length {len(prefix)} is shorter than m_k = {max(m)}")
    lab = mixed_labels(system, np.array([prefix], dtype=np.int64), m)[0]
    return cylinder_from_mixed(system, n, tuple(int(x) for x in lab))


def weight_of(system: ChainSystem, potential: Potential, wcyl: WeightedCylinder, s: float) -> float:
    """Log of the covering cost ``exp(-s n + sup S_{ceil(a_1 n)} f / a_1)`` of a cylinder."""
    a1 = system.weights[0]
    ell = birkhoff_horizon(system, wcyl.n)
    return -s * wcyl.n + birkhoff_sup(system, potential, wcyl.level_words[0], ell) / float(a1)


# ---------------------------------------------------------------- covers


@dataclass(frozen=True)
class Cover:
    """Clopen cover of one level: members are unions of length-``length`` cylinders."""

    length: int
    members: tuple[frozenset, ...]
    cylinder: bool = False

    def containing(self, word: Sequence[int]) -> tuple[int, ...]:
        idx = self.__dict__.get("_index")
        if idx is None:
            idx = defaultdict(list)
            for j, mem in enumerate(self.members):
                for w in mem:
                    idx[w].append(j)
            idx = {w: tuple(v) for w, v in idx.items()}
            object.__setattr__(self, "_index", idx)
        return idx.get(tuple(word), ())

    @property
    def is_partition(self) -> bool:
        seen = set()
        for mem in self.members:
            if seen & mem:
                return False
            seen |= mem
        return True


def cylinder_cover(shift: Subshift, length: int) -> Cover:
    return Cover(length, tuple(frozenset([w]) for w in words(shift, length)), cylinder=True)


def trivial_cover(shift: Subshift) -> Cover:
    return Cover(1, (frozenset(words(shift, 1)),), cylinder=shift.size == 1)


def explicit_cover(shift: Subshift, length: int, members) -> Cover:
    ws = set(words(shift, length))
    mems = []
    for j, mem in enumerate(members):
        mem = frozenset(shift.alphabet.encode(w) if isinstance(w, str) else tuple(w) for w in mem)
        if not mem:
            raise ValidationError(f"cover member {j} is empty")
        bad = [w for w in mem if w not in ws]
        if bad:
            raise ValidationError(f"cover member {j} contains inadmissible or wrong-length words {bad}")
        mems.append(mem)
    covered = set().union(*mems) if mems else set()
    if covered != ws:
        raise ValidationError(f"cover misses {len(ws - covered)} cylinders of length {length}")
    is_cyl = all(len(m) == 1 for m in mems) and len(mems) == len(ws)
    if is_cyl:
        mems.sort(key=lambda m: next(iter(m)))
    return Cover(length, tuple(mems), cylinder=is_cyl)


def cylinder_covers(system: ChainSystem, length: int = 1) -> tuple[Cover, ...]:
    return tuple(cylinder_cover(lev, length) for lev in system.levels)


def trivial_covers(system: ChainSystem) -> tuple[Cover, ...]:
    return tuple(trivial_cover(lev) for lev in system.levels)


def cover_windows(covers: Sequence[Cover], m: Sequence[int]) -> tuple[int, ...] | None:
    """Mixed-word windows equivalent to joining cylinder covers over windows ``m``."""
    if not all(c.cylinder for c in covers):
        return None
    return tuple(mi + c.length - 1 for mi, c in zip(m, covers))


def _level_images(system: ChainSystem, word: Sequence[int]) -> list[Word]:
    return [tuple(int(x) for x in system.tau(i)[list(word)]) for i in range(system.k)]


def join_keys(system: ChainSystem, covers: Sequence[Cover], windows: Sequence[int], word):
    """All join elements (as member-index keys) containing the point with prefix ``word``."""
    imgs = _level_images(system, word)
    choices = []
    for i, (cov, w) in enumerate(zip(covers, windows)):
        for j in range(w):
            seg = imgs[i][j : j + cov.length]
            if len(seg) < cov.length:
                raise ValueError("prefix too short to determine join membership")
            choices.append(cov.containing(seg))
    layout = [w for w in windows]
    for combo in itertools.product(*choices):
        out, pos = [], 0
        for w in layout:
            out.append(tuple(combo[pos : pos + w]))
            pos += w
        yield tuple(out)


def join_prefix_length(covers: Sequence[Cover], windows: Sequence[int]) -> int:
    return max(w + c.length - 1 for w, c in zip(windows, covers))


def join_element_of(system: ChainSystem, covers: Sequence[Cover], n: int, prefix) -> tuple:
    """Key of the join element containing the point with the given prefix.

    For overlapping covers the lexicographically first containing element is
    returned: at every position the lowest-index member containing the point.
    """
    if isinstance(prefix, str):
        prefix = system.base.alphabet.encode(prefix)
    prefix = tuple(prefix)
    m = window_profile(system.weights, n).m
    need = join_prefix_length(covers, m)
    if len(prefix) < need:
        raise ValueError(f"prefix of length {len(prefix)} too short; need {need}")
    if not system.base.is_admissible(prefix):
        raise ValidationError("prefix is not admissible")
    return next(join_keys(system, covers, m, prefix))


def render_join_key(system: ChainSystem, covers: Sequence[Cover], key) -> tuple[str, ...]:
    """Per-level words for keys of length-1 cylinder covers (e.g. ``("ab", "001")``)."""
    out = []
    for lev, cov, part in zip(system.levels, covers, key):
        if not (cov.cylinder and cov.length == 1):
            raise ValueError("rendering needs length-1 cylinder covers")
        out.append(lev.alphabet.decode([next(iter(cov.members[j]))[0] for j in part]))
    return tuple(out)


def join_elements_windows(
    system: ChainSystem, covers: Sequence[Cover], windows: Sequence[int], cap: int = DEFAULT_ENUMERATION_CAP
) -> set:
    length = join_prefix_length(covers, windows)
    keys = set()
    for w in words(system.base, length, cap=cap):
        keys.update(join_keys(system, covers, windows, w))
        if len(keys) > cap:
            raise ResourceLimitError("join element enumeration exceeded cap")
    return keys


def join_elements(system: ChainSystem, covers: Sequence[Cover], n: int, cap: int = DEFAULT_ENUMERATION_CAP) -> set:
    return join_elements_windows(system, covers, window_profile(system.weights, n).m, cap=cap)


def count_join_elements(system: ChainSystem, covers: Sequence[Cover], n: int, cap: int = DEFAULT_ENUMERATION_CAP) -> int:
    m = window_profile(system.weights, n).m
    win = cover_windows(covers, m)
    if win is not None:
        return count_mixed(system, win)
    return len(join_elements_windows(system, covers, m, cap=cap))


def oscillation(system: ChainSystem, covers: Sequence[Cover], potential: Potential) -> float:
    """Largest variation of ``f`` inside one element of the time-zero join of the covers."""
    depth = max([potential.range] + [c.length for c in covers])
    lo: dict[tuple, float] = {}
    hi: dict[tuple, float] = {}
    ones = [1] * system.k
    for w in words(system.base, depth):
        val = potential(w[: potential.range])
        for key in join_keys(system, covers, ones, w):
            if key in lo:
                lo[key] = min(lo[key], val)
                hi[key] = max(hi[key], val)
            else:
                lo[key] = hi[key] = val
    return max(hi[key] - lo[key] for key in lo)


def refines(finer: Cover, coarser: Cover) -> bool:
    """Every member of ``finer`` lies inside some member of ``coarser`` (same length)."""
    if finer.length < coarser.length:
        return False
    L = coarser.length
    for mem in finer.members:
        heads = [w[:L] for w in mem]
        if not any(all(h in cm for h in heads) for cm in coarser.members):
            return False
    return True


# ------------------------------------------------------- power-rule identity


@dataclass
class PowerJoinReport:
    equal: bool
    count_power: int
    count_original: int
    method: str
    M: int
    n: int
    windows_power: tuple[int, ...]
    windows_original: tuple[int, ...]


def power_cover(system: ChainSystem, level: int, cover: Cover, M: int, blocks: list[Word]) -> Cover:
    """The cover ``(U)_0^{M-1}`` expressed on ``M``-blocks of the given level."""
    psys_shift_blocks = blocks
    L = cover.length
    span = L + M - 1
    nblocks = -(-span // M)
    lev = system.levels[level]
    from .symbolic import power_shift  # local: avoids re-deriving blocks twice

    pshift, _ = power_shift(lev, M)
    groups: dict[tuple, set] = defaultdict(set)
    for bw in words(pshift, nblocks):
        flat = tuple(s for j in bw for s in psys_shift_blocks[j])
        members = tuple(cover.containing(flat[j : j + L]) for j in range(M))
        if any(len(ms) != 1 for ms in members):
            raise ValueError("power covers are only built from partition covers")
        groups[tuple(ms[0] for ms in members)].add(bw)
    mems = tuple(frozenset(groups[key]) for key in sorted(groups))
    is_cyl = nblocks == 1 and all(len(mm) == 1 for mm in mems)
    return Cover(nblocks, mems, cylinder=is_cyl)


def power_join_identity_check(
    system: ChainSystem,
    covers: Sequence[Cover],
    M: int,
    n: int,
    cap: int = 200_000,
) -> PowerJoinReport:
    """Check that joining ``(U_i)_0^{M-1}`` over ``c_i`` steps of ``T^M`` gives the
    same partition as joining ``U_i`` over ``c_i M`` steps of ``T``.

    Exhaustive on prefixes when the enumeration fits in ``cap``; otherwise both
    sides are counted exactly by the subset DP on their own systems (the power
    side always refines the original side, so equal counts mean equal partitions).
    """
    if M < 1:
        raise ValueError("M must be at least 1")
    c = window_profile(system.weights, n).m
    psys, blocks = power_system(system, M)
    pcovers = tuple(power_cover(system, i, cov, M, blocks[i]) for i, cov in enumerate(covers))
    orig_windows = tuple(ci * M for ci in c)
    length_blocks = max(ci + pc.length - 1 for ci, pc in zip(c, pcovers))
    total = word_count(system.base, length_blocks * M)
    simple = all(cov.cylinder and cov.length == 1 for cov in covers)
    if total <= cap and simple:
        W = words_array(system.base, length_blocks * M, cap=cap)
        size = system.base.size
        code = np.zeros(size**M, dtype=np.int64)
        for j, b in enumerate(blocks[0]):
            code[sum(x * size ** (M - 1 - t) for t, x in enumerate(b))] = j
        place = size ** np.arange(M - 1, -1, -1)
        BW = code[W.reshape(len(W), length_blocks, M) @ place]
        ka = mixed_labels(psys, BW, c)
        kb = mixed_labels(system, W, orig_windows)
        na = len(np.unique(ka, axis=0))
        nb = len(np.unique(kb, axis=0))
        npair = len(np.unique(np.hstack([ka, kb]), axis=0))
        return PowerJoinReport(na == nb == npair, na, nb, "enumeration", M, n, c, orig_windows)
    if total <= cap and all(cov.is_partition for cov in covers):
        a_to_b: dict = {}
        b_to_a: dict = {}
        equal = True
        block_index = {b: j for j, b in enumerate(blocks[0])}
        for w in words(system.base, length_blocks * M, cap=cap):
            bw = tuple(block_index[w[j : j + M]] for j in range(0, len(w), M))
            ka = next(join_keys(psys, pcovers, c, bw))
            kb = next(join_keys(system, covers, orig_windows, w))
            if a_to_b.setdefault(ka, kb) != kb or b_to_a.setdefault(kb, ka) != ka:
                equal = False
        return PowerJoinReport(equal, len(a_to_b), len(b_to_a), "enumeration", M, n, c, orig_windows)
    win_p = cover_windows(pcovers, c)
    win_o = cover_windows(covers, orig_windows)
    if win_p is None or win_o is None:
        raise ResourceLimitError("identity check too large to enumerate and covers are not cylinder covers")
    cp = count_mixed(psys, win_p)
    co = count_mixed(system, win_o)
    return PowerJoinReport(cp == co, cp, co, "dp-count", M, n, c, orig_windows)


def log_int(x: int) -> float:
    return math.log(x) if x > 0 else -math.inf
