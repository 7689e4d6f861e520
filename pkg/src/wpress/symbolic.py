"""Alphabets, subshifts of finite type, 1-block codes and finite-range potentials.

Words are tuples of symbol indices throughout; ``Alphabet.encode`` and
``Alphabet.decode`` convert to and from the textual form.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ResourceLimitError, ValidationError

Word = tuple[int, ...]

DEFAULT_ENUMERATION_CAP = 10**7


@dataclass(frozen=True)
class Alphabet:
    symbols: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(str(s) for s in self.symbols))
        if not self.symbols:
            raise ValidationError("alphabet must be nonempty")
        if len(set(self.symbols)) != len(self.symbols):
            raise ValidationError(f"duplicate symbols in alphabet {self.symbols}")

    def __len__(self) -> int:
        return len(self.symbols)

    @property
    def single_char(self) -> bool:
        return all(len(s) == 1 for s in self.symbols)

    def index(self, symbol: str) -> int:
        try:
            return self.symbols.index(symbol)
        except ValueError:
            raise ValidationError(f"unknown symbol {symbol!r}") from None

    def encode(self, word: str | Sequence[str]) -> Word:
        if isinstance(word, str):
            parts = list(word) if self.single_char else word.split()
        else:
            parts = list(word)
        return tuple(self.index(p) for p in parts)

    def decode(self, word: Sequence[int]) -> str:
        sep = "" if self.single_char else " "
        return sep.join(self.symbols[i] for i in word)


class Subshift:
    """One-step subshift of finite type given by its transition matrix."""

    def __init__(self, alphabet: Alphabet, transitions, require_irreducible: bool = False):
        t = np.array(transitions, dtype=bool)
        if t.shape != (len(alphabet), len(alphabet)):
            raise ValidationError(
                f"transition matrix shape {t.shape} does not match alphabet size {len(alphabet)}"
            )
        t.setflags(write=False)
        self.alphabet = alphabet
        self.transitions = t
        self.require_irreducible = require_irreducible
        self._succ = tuple(tuple(int(v) for v in np.flatnonzero(t[u])) for u in range(len(alphabet)))

    @classmethod
    def full(cls, alphabet: Alphabet) -> "Subshift":
        n = len(alphabet)
        return cls(alphabet, np.ones((n, n), dtype=bool))

    @classmethod
    def from_forbidden(cls, alphabet: Alphabet, forbidden: Iterable[str | Sequence[str]], **kw) -> "Subshift":
        t = np.ones((len(alphabet), len(alphabet)), dtype=bool)
        for w in forbidden:
            enc = alphabet.encode(w)
            if len(enc) != 2:
                raise ValidationError(
                    f"forbidden word {w!r} must have length 2 (one-step SFTs only)"
                )
            t[enc] = False
        return cls(alphabet, t, **kw)

    @property
    def size(self) -> int:
        return len(self.alphabet)

    def successors(self, u: int) -> tuple[int, ...]:
        return self._succ[u]

    def is_admissible(self, word: Sequence[int]) -> bool:
        if any(not 0 <= s < self.size for s in word):
            return False
        return all(self.transitions[a, b] for a, b in zip(word, word[1:]))

    def stranded_symbols(self) -> list[int]:
        out_ok = self.transitions.any(axis=1)
        in_ok = self.transitions.any(axis=0)
        return [u for u in range(self.size) if not (out_ok[u] and in_ok[u])]

    def is_irreducible(self) -> bool:
        return is_irreducible(self.transitions)

    def __eq__(self, other):
        return (
            isinstance(other, Subshift)
            and self.alphabet == other.alphabet
            and np.array_equal(self.transitions, other.transitions)
        )

    def __hash__(self):
        return hash((self.alphabet, self.transitions.tobytes()))

    def __repr__(self):
        return f"Subshift({self.alphabet.symbols}, allowed={int(self.transitions.sum())})"


def is_irreducible(adjacency) -> bool:
    a = np.asarray(adjacency, dtype=bool)
    n = a.shape[0]
    reach = a | np.eye(n, dtype=bool)
    # transitive closure by repeated squaring
    for _ in range(max(1, int(np.ceil(np.log2(max(n, 2))))) + 1):
        reach = reach | ((reach.astype(np.int64) @ reach.astype(np.int64)) > 0)
    return bool(reach.all())


@dataclass(frozen=True)
class BlockCode:
    source: Alphabet
    target: Alphabet
    mapping: tuple[int, ...]

    def __post_init__(self):
        m = tuple(int(x) for x in self.mapping)
        object.__setattr__(self, "mapping", m)
        if len(m) != len(self.source):
            raise ValidationError("block code must be total on the source alphabet")
        if any(not 0 <= x < len(self.target) for x in m):
            raise ValidationError("block code maps outside the target alphabet")

    @classmethod
    def from_dict(cls, source: Alphabet, target: Alphabet, mapping: Mapping[str, str]) -> "BlockCode":
        missing = [s for s in source.symbols if s not in mapping]
        if missing:
            raise ValidationError(f"block code undefined on {missing}")
        extra = [s for s in mapping if s not in source.symbols]
        if extra:
            raise ValidationError(f"block code defined on unknown symbols {extra}")
        return cls(source, target, tuple(target.index(mapping[s]) for s in source.symbols))

    @classmethod
    def identity(cls, alphabet: Alphabet) -> "BlockCode":
        return cls(alphabet, alphabet, tuple(range(len(alphabet))))

    def apply(self, word: Sequence[int]) -> Word:
        return tuple(self.mapping[s] for s in word)

    def as_array(self) -> np.ndarray:
        return np.array(self.mapping, dtype=np.int64)


def apply_code(code: BlockCode, word):
    """Symbolwise image of ``word``; strings in, strings out."""
    if isinstance(word, str):
        return code.target.decode(code.apply(code.source.encode(word)))
    word = tuple(word)
    if any(not 0 <= s < len(code.source) for s in word):
        raise ValidationError(f"word {word} contains symbols outside the source alphabet")
    return code.apply(word)


def to_fraction(x) -> Fraction:
    """Exact rational from an int, a decimal/rational string, or a float's shortest repr."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise ValidationError("weights must be numeric")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(str(x).strip())


@dataclass(frozen=True)
class ChainSystem:
    levels: tuple[Subshift, ...]
    codes: tuple[BlockCode, ...]
    weights: tuple[Fraction, ...]
    name: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))
        object.__setattr__(self, "codes", tuple(self.codes))
        object.__setattr__(self, "weights", tuple(to_fraction(w) for w in self.weights))
        # level-1 symbol -> level-i symbol, i = 1..k
        maps = [np.arange(self.levels[0].size)] if self.levels else []
        for code in self.codes[: max(0, len(self.levels) - 1)]:
            maps.append(code.as_array()[maps[-1]])
        for m in maps:
            m.setflags(write=False)
        object.__setattr__(self, "_tau", tuple(maps))

    @property
    def k(self) -> int:
        return len(self.levels)

    @property
    def base(self) -> Subshift:
        return self.levels[0]

    @property
    def cumulative_weights(self) -> tuple[Fraction, ...]:
        return tuple(itertools.accumulate(self.weights))

    def tau(self, i: int) -> np.ndarray:
        """Map from level-1 symbols to level-(i+1) symbols (``tau(0)`` is the identity)."""
        return self._tau[i]


@dataclass
class ValidationReport:
    violations: list[tuple[str, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, location: str, message: str):
        self.violations.append((location, message))

    def __str__(self):
        if self.ok:
            return "ok"
        return "; ".join(f"{loc}: {msg}" for loc, msg in self.violations)


def validate_chain(system: ChainSystem) -> ValidationReport:
    """Collect every violated structural invariant of ``system``."""
    rep = ValidationReport()
    k = system.k
    if k < 1:
        rep.add("levels", "at least one level is required")
        return rep
    if len(system.weights) != k:
        rep.add("weights", f"expected {k} weights, got {len(system.weights)}")
    if system.weights and system.weights[0] <= 0:
        rep.add("weights[0]", "a1 must be positive")
    for i, w in enumerate(system.weights[1:], start=1):
        if w < 0:
            rep.add(f"weights[{i}]", f"a{i + 1} must be nonnegative")
    if len(system.codes) != k - 1:
        rep.add("codes", f"expected {k - 1} codes, got {len(system.codes)}")
    for i, lev in enumerate(system.levels):
        stranded = lev.stranded_symbols()
        if stranded:
            names = [lev.alphabet.symbols[u] for u in stranded]
            rep.add(f"levels[{i}]", f"stranded symbols {names}")
        if lev.require_irreducible and not lev.is_irreducible():
            rep.add(f"levels[{i}]", "transition matrix is not irreducible")
    for i, code in enumerate(system.codes[: k - 1]):
        src, tgt = system.levels[i], system.levels[i + 1]
        if code.source != src.alphabet:
            rep.add(f"codes[{i}]", "source alphabet does not match level alphabet")
            continue
        if code.target != tgt.alphabet:
            rep.add(f"codes[{i}]", "target alphabet does not match next level alphabet")
            continue
        for u, v in zip(*np.nonzero(src.transitions)):
            a, b = code.mapping[u], code.mapping[v]
            if not tgt.transitions[a, b]:
                rep.add(
                    f"codes[{i}]",
                    f"image of {src.alphabet.symbols[u]}{src.alphabet.symbols[v]} "
                    f"is not admissible in level {i + 2}",
                )
    return rep


def _int_matmul(a, b):
    n, m, p = len(a), len(b), len(b[0])
    return [[sum(a[i][t] * b[t][j] for t in range(m)) for j in range(p)] for i in range(n)]


def word_count(shift: Subshift, n: int) -> int:
    """Exact number of admissible words of length ``n``."""
    if n < 1:
        raise ValueError("word length must be at least 1")
    adj = [[int(x) for x in row] for row in shift.transitions]
    size = shift.size
    result = [[1 if i == j else 0 for j in range(size)] for i in range(size)]
    base, e = adj, n - 1
    while e:
        if e & 1:
            result = _int_matmul(result, base)
        e >>= 1
        if e:
            base = _int_matmul(base, base)
    return sum(sum(row) for row in result)


def words_by_last(shift: Subshift, n: int) -> list[int]:
    """Exact counts of admissible length-``n`` words ending in each symbol."""
    counts = [1] * shift.size
    for _ in range(n - 1):
        nxt = [0] * shift.size
        for u, c in enumerate(counts):
            if c:
                for v in shift.successors(u):
                    nxt[v] += c
        counts = nxt
    return counts


def words(shift: Subshift, n: int, cap: int = DEFAULT_ENUMERATION_CAP) -> list[Word]:
    """All admissible length-``n`` words in lexicographic order."""
    if n < 1:
        raise ValueError("word length must be at least 1")
    total = word_count(shift, n)
    if total > cap:
        raise ResourceLimitError(f"{total} words of length {n} exceed the enumeration cap {cap}")
    out: list[Word] = [(u,) for u in range(shift.size)]
    for _ in range(n - 1):
        out = [w + (v,) for w in out for v in shift.successors(w[-1])]
    return out


def words_array(shift: Subshift, n: int, cap: int = DEFAULT_ENUMERATION_CAP) -> np.ndarray:
    """Same as :func:`words` but as an ``(count, n)`` integer array."""
    total = word_count(shift, n)
    if total > cap:
        raise ResourceLimitError(f"{total} words of length {n} exceed the enumeration cap {cap}")
    arr = np.arange(shift.size, dtype=np.int64)[:, None]
    succ_lists = [np.array(shift.successors(u), dtype=np.int64) for u in range(shift.size)]
    for _ in range(n - 1):
        last = arr[:, -1]
        reps = np.array([len(succ_lists[u]) for u in range(shift.size)])[last]
        prefix = np.repeat(arr, reps, axis=0)
        nxt = np.concatenate([succ_lists[u] for u in last]) if len(last) else np.zeros(0, np.int64)
        arr = np.column_stack([prefix, nxt])
    return arr


class Potential:
    """Locally constant potential of range ``r`` on the level-1 shift.

    ``table`` maps length-``r`` words to values; absent words have value 0.
    """

    def __init__(self, range_: int, table: Mapping[Sequence[int], float] | None = None):
        if range_ < 1:
            raise ValidationError("potential range must be a positive integer")
        self.range = int(range_)
        tab = {}
        for w, v in (table or {}).items():
            w = tuple(int(s) for s in w)
            if len(w) != self.range:
                raise ValidationError(f"potential key {w} must have length {self.range}")
            v = float(v)
            if not np.isfinite(v):
                raise ValidationError(f"potential value for {w} is not finite")
            tab[w] = v
        self.table = tab

    @classmethod
    def zero(cls) -> "Potential":
        return cls(1, {})

    @classmethod
    def from_symbols(cls, alphabet: Alphabet, range_: int, entries: Mapping[str, float]) -> "Potential":
        return cls(range_, {alphabet.encode(w): v for w, v in entries.items()})

    def __call__(self, word: Sequence[int]) -> float:
        return self.table.get(tuple(word), 0.0)

    def values_on(self, shift: Subshift) -> dict[Word, float]:
        return {w: self(w) for w in words(shift, self.range)}

    def sup_norm(self, shift: Subshift) -> float:
        vals = self.values_on(shift).values()
        return max((abs(v) for v in vals), default=0.0)

    def symbol_values(self, shift: Subshift) -> np.ndarray:
        if self.range != 1:
            raise ValueError("symbol_values requires a range-1 potential")
        return np.array([self((u,)) for u in range(shift.size)], dtype=float)

    def __repr__(self):
        return f"Potential(range={self.range}, entries={len(self.table)})"


def add_constant(shift: Subshift, potential: Potential, c: float) -> Potential:
    return Potential(potential.range, {w: v + c for w, v in potential.values_on(shift).items()})


def check_potential(system: ChainSystem, potential: Potential) -> None:
    for w in potential.table:
        if not system.base.is_admissible(w):
            raise ValidationError(f"potential key {system.base.alphabet.decode(w)!r} is not admissible")


def _extensions(shift: Subshift, last: int, length: int):
    """Admissible continuations of ``length`` symbols after symbol ``last``."""
    if length == 0:
        yield ()
        return
    for v in shift.successors(last):
        for tail in _extensions(shift, v, length - 1):
            yield (v,) + tail


def birkhoff_sup(system: ChainSystem, potential: Potential, prefix, horizon: int) -> float:
    """Maximum of the Birkhoff sum ``S_horizon f`` over points starting with ``prefix``."""
    shift = system.base
    if isinstance(prefix, str):
        prefix = shift.alphabet.encode(prefix)
    prefix = tuple(prefix)
    if not prefix or not shift.is_admissible(prefix):
        raise ValidationError(f"prefix {prefix} is not admissible")
    m, r = len(prefix), potential.range
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    if horizon > m:
        raise ValueError("horizon may not exceed the prefix length")
    inner = sum(potential(prefix[j : j + r]) for j in range(horizon) if j + r <= m)
    need = horizon + r - 1 - m
    if need <= 0:
        return inner
    tail_starts = [j for j in range(horizon) if j + r > m]
    best = -np.inf
    for ext in _extensions(shift, prefix[-1], need):
        full = prefix + ext
        best = max(best, sum(potential(full[j : j + r]) for j in tail_starts))
    return inner + best


def power_shift(shift: Subshift, M: int) -> tuple[Subshift, list[Word]]:
    """The ``M``-th power shift: alphabet of admissible ``M``-blocks."""
    blocks = words(shift, M)
    sep = "" if shift.alphabet.single_char else "."
    alpha = Alphabet(tuple(sep.join(shift.alphabet.symbols[s] for s in b) for b in blocks))
    first = np.array([b[0] for b in blocks])
    last = np.array([b[-1] for b in blocks])
    trans = shift.transitions[last[:, None], first[None, :]]
    return Subshift(alpha, trans, require_irreducible=shift.require_irreducible), blocks


def power_system(system: ChainSystem, M: int) -> tuple[ChainSystem, list[list[Word]]]:
    """Chain system for ``T^M``: each level recoded to ``M``-blocks, codes applied blockwise."""
    if M < 1:
        raise ValueError("M must be at least 1")
    levels, block_lists = [], []
    for lev in system.levels:
        s, b = power_shift(lev, M)
        levels.append(s)
        block_lists.append(b)
    codes = []
    for i, code in enumerate(system.codes):
        index = {b: j for j, b in enumerate(block_lists[i + 1])}
        mapping = tuple(index[code.apply(b)] for b in block_lists[i])
        codes.append(BlockCode(levels[i].alphabet, levels[i + 1].alphabet, mapping))
    name = f"{system.name}^{M}" if system.name else ""
    return ChainSystem(tuple(levels), tuple(codes), system.weights, name=name), block_lists


def power_potential(system: ChainSystem, potential: Potential, M: int) -> Potential:
    """``S_M f`` viewed as a potential on the ``M``-block recoding of level 1."""
    r = potential.range
    rr = 1 + -(-(r - 1) // M)
    psys, blocks = power_system(system, M)
    table = {}
    for bw in words(psys.base, rr):
        flat = tuple(s for j in bw for s in blocks[0][j])
        val = sum(potential(flat[j : j + r]) for j in range(M))
        if val:
            table[bw] = val
    return Potential(rr, table)
