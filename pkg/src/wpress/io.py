"""JSON readers for system, potential and measure files.

System file::

    {"name": "fs42",
     "levels": [{"symbols": ["a", "b", "c", "d"]},
                {"symbols": ["0", "1"], "forbidden_words": ["11"]}],
     "codes": [{"a": "0", "b": "0", "c": "1", "d": "1"}],
     "weights": [1, "1/2"]}

A level gives either ``forbidden_words`` (length-2 words) or a 0/1
``transitions`` matrix, plus an optional ``require_irreducible`` flag.
``weights`` may also be one string such as ``"1, 0.5"``; entries are read as
exact rationals.

Potential file: ``{"range": 1, "entries": {"a": "log(2)"}}``.  Measure file:
``{"transition": [[...], ...], "labels": ["a", "b", ...]}`` or
``{"bernoulli": [...], "labels": [...]}``.  Numeric entries may be numbers or
arithmetic expressions over ``log``, ``exp``, ``sqrt``, ``pi`` and ``e``.

Paths of the form ``bundled:NAME`` resolve to the fixtures shipped with the
package (``NAME.system.json``, ``NAME.potential.json``, ``NAME.measure.json``).
"""
from __future__ import annotations

import ast
import json
import math
import operator
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .measures import MarkovMeasure
from .symbolic import Alphabet, BlockCode, ChainSystem, Potential, Subshift, to_fraction, validate_chain


class ConfigError(ValueError):
    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        where = ""
        if field:
            where += f"field {field!r}"
        if line:
            where += f"{', ' if where else ''}line {line}"
        super().__init__(f"{where}: {message}" if where else message)


_FUNCS = {"log": math.log, "exp": math.exp, "sqrt": math.sqrt}
_CONSTS = {"pi": math.pi, "e": math.e}
_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv, ast.Pow: operator.pow}


def eval_number(x) -> float:
    """Number or arithmetic expression string to float."""
    if isinstance(x, bool):
        raise ValueError("booleans are not numbers")
    if isinstance(x, (int, float)):
        return float(x)
    if not isinstance(x, str):
        raise ValueError(f"cannot read {x!r} as a number")

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id in _CONSTS:
            return _CONSTS[node.id]
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS and len(node.args) == 1:
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise ValueError(f"unsupported expression {x!r}")

    return ev(ast.parse(x.strip(), mode="eval"))


def resolve_path(path: str, kind: str) -> tuple[str, str]:
    """Return ``(label, text)`` for a file path or ``bundled:NAME``."""
    if path.startswith("bundled:"):
        name = path.split(":", 1)[1]
        res = resources.files("wpress") / "data" / f"{name}.{kind}.json"
        if not res.is_file():
            raise ConfigError(f"no bundled {kind} named {name!r}", field=kind)
        return path, res.read_text()
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"file not found: {path}", field=kind)
    return str(p), p.read_text()


def bundled_names(kind: str = "system") -> list[str]:
    folder = resources.files("wpress") / "data"
    suffix = f".{kind}.json"
    return sorted(f.name[: -len(suffix)] for f in folder.iterdir() if f.name.endswith(suffix))


def _line_of(text: str, key: str) -> int | None:
    needle = f'"{key}"'
    idx = text.find(needle)
    return text.count("\n", 0, idx) + 1 if idx >= 0 else None


def _load_json(text: str, kind: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, field=kind, line=exc.lineno) from None


def _check_fields(obj, allowed, required, where, text):
    if not isinstance(obj, dict):
        raise ConfigError("expected an object", field=where)
    for k in obj:
        if k not in allowed:
            raise ConfigError("unknown field", field=f"{where}.{k}" if where else k, line=_line_of(text, k))
    for k in required:
        if k not in obj:
            raise ConfigError("missing field", field=f"{where}.{k}" if where else k)


def parse_weights(raw) -> tuple:
    if isinstance(raw, str):
        raw = [p for p in raw.replace(";", ",").split(",") if p.strip()]
    if not isinstance(raw, list) or not raw:
        raise ConfigError("weights must be a nonempty list or comma-separated string", field="weights")
    try:
        return tuple(to_fraction(w) for w in raw)
    except (ValueError, ZeroDivisionError, ValidationError) as exc:
        raise ConfigError(f"cannot read weight: {exc}", field="weights") from None


def system_from_dict(d: dict, text: str = "") -> ChainSystem:
    _check_fields(d, {"name", "levels", "codes", "weights"}, ["levels", "weights"], "", text)
    levels = []
    for i, lev in enumerate(d["levels"]):
        where = f"levels[{i}]"
        _check_fields(lev, {"symbols", "forbidden_words", "transitions", "require_irreducible"}, ["symbols"], where, text)
        try:
            alpha = Alphabet(tuple(lev["symbols"]))
            irr = bool(lev.get("require_irreducible", False))
            if "transitions" in lev and "forbidden_words" in lev:
                raise ConfigError("give either transitions or forbidden_words", field=where)
            if "transitions" in lev:
                levels.append(Subshift(alpha, np.array(lev["transitions"], dtype=int) != 0, require_irreducible=irr))
            else:
                levels.append(Subshift.from_forbidden(alpha, lev.get("forbidden_words", []), require_irreducible=irr))
        except ValidationError as exc:
            raise ConfigError(str(exc), field=where) from None
    codes = []
    raw_codes = d.get("codes", [])
    if len(raw_codes) != len(levels) - 1:
        raise ConfigError(f"expected {len(levels) - 1} codes, got {len(raw_codes)}", field="codes")
    for i, c in enumerate(raw_codes):
        try:
            codes.append(BlockCode.from_dict(levels[i].alphabet, levels[i + 1].alphabet, c))
        except ValidationError as exc:
            raise ConfigError(str(exc), field=f"codes[{i}]") from None
    system = ChainSystem(tuple(levels), tuple(codes), parse_weights(d["weights"]), name=d.get("name", ""))
    rep = validate_chain(system)
    if not rep.ok:
        loc, msg = rep.violations[0]
        raise ConfigError(msg if len(rep.violations) == 1 else str(rep), field=loc)
    return system


def load_system(path: str) -> ChainSystem:
    label, text = resolve_path(path, "system")
    return system_from_dict(_load_json(text, "system"), text)


def potential_from_dict(d: dict, system: ChainSystem, text: str = "") -> Potential:
    _check_fields(d, {"range", "entries"}, ["range"], "", text)
    r = d["range"]
    if not isinstance(r, int) or r < 1:
        raise ConfigError("range must be a positive integer", field="range")
    alpha = system.base.alphabet
    table = {}
    for w, v in d.get("entries", {}).items():
        try:
            key = alpha.encode(w)
            val = eval_number(v)
        except (ValidationError, ValueError, SyntaxError) as exc:
            raise ConfigError(str(exc), field=f"entries.{w}", line=_line_of(text, w)) from None
        if len(key) != r:
            raise ConfigError(f"word length {len(key)} differs from range {r}", field=f"entries.{w}")
        if not system.base.is_admissible(key):
            raise ConfigError("word is not admissible", field=f"entries.{w}")
        table[key] = val
    try:
        return Potential(r, table)
    except ValidationError as exc:
        raise ConfigError(str(exc), field="entries") from None


def load_potential(path: str | None, system: ChainSystem) -> Potential:
    if path is None:
        return Potential.zero()
    label, text = resolve_path(path, "potential")
    return potential_from_dict(_load_json(text, "potential"), system, text)


def measure_from_dict(d: dict, system: ChainSystem, text: str = "") -> MarkovMeasure:
    _check_fields(d, {"transition", "bernoulli", "labels"}, [], "", text)
    alpha = system.base.alphabet
    labels = d.get("labels", list(alpha.symbols))
    try:
        perm = [alpha.index(s) for s in labels]
    except ValidationError as exc:
        raise ConfigError(str(exc), field="labels") from None
    if sorted(perm) != list(range(alpha.__len__())):
        raise ConfigError("labels must list every level-1 symbol once", field="labels")
    try:
        if "bernoulli" in d:
            p = np.zeros(len(alpha))
            p[perm] = [eval_number(x) for x in d["bernoulli"]]
            return MarkovMeasure.bernoulli(system.base, p)
        if "transition" not in d:
            raise ConfigError("give transition or bernoulli", field="transition")
        rows = [[eval_number(x) for x in row] for row in d["transition"]]
        P = np.zeros((len(alpha), len(alpha)))
        P[np.ix_(perm, perm)] = rows
        return MarkovMeasure(system.base, P)
    except (ValidationError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), field="transition") from None


def load_measure(path: str, system: ChainSystem) -> MarkovMeasure:
    label, text = resolve_path(path, "measure")
    return measure_from_dict(_load_json(text, "measure"), system, text)


def file_digest_text(path: str | None, kind: str) -> str:
    if path is None:
        return ""
    return resolve_path(path, kind)[1]
