"""``wpress`` command line: one subcommand per computation plus the ``verify`` suites.

Exit codes: 0 pass, 1 failed assertion, 2 usage or config error, 3 resource cap.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import covering, cylinders, frostman, measures, variational
from .covering import StageSpec
from .errors import ResourceLimitError, ValidationError
from .io import ConfigError, file_digest_text, load_measure, load_potential, load_system
from .symbolic import ChainSystem

PROVENANCE = ("closed-form", "lp", "single-scale", "optimizer", "sampled", "exact")
COMMANDS = ("upper", "bisect", "lp", "frostman", "optimize", "smb", "power-check", "verify")
SUITES = ("vp", "smb", "duality", "power", "all")


@dataclass
class RunConfig:
    command: str
    system: str
    potential: str | None = None
    measure: str | None = None
    n: int = 10
    N: int = 1
    n_max: int = 2
    depth: int | None = None
    s: float = 0.0
    mode: str = "single"
    L: int = 2
    restarts: int = 8
    iters: int = 500
    seed: int = 0
    step: float = 0.1
    sample: int = 0
    M: int = 2
    n_list: tuple[int, ...] = (6,)
    suite: str = "all"
    tolerance: float = 1e-9
    out: str | None = None
    dump_measure: str | None = None

    def stage(self, system: ChainSystem) -> StageSpec:
        depth = self.depth
        if depth is None:
            depth = cylinders.window_profile(system.weights, self.n_max).m[-1]
        return StageSpec(self.N, self.n_max, depth)


@dataclass
class ResultRecord:
    command: list
    inputs_digest: str
    values: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    suites: list = field(default_factory=list)
    seed: int | None = None
    timing: float = 0.0
    error: dict | None = None

    def add(self, name: str, value, provenance: str):
        if provenance not in PROVENANCE:
            raise ValueError(f"unknown provenance {provenance!r}")
        self.values[name] = {"value": _plain(value), "provenance": provenance}

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ResultRecord":
        return cls(**json.loads(text))

    def without_timing(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("timing")
        return d


def _plain(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    return x


# ----------------------------------------------------------------- parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="wpress", description="Weighted topological pressure for chains of SFTs")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, potential=True):
        sp.add_argument("--system", required=True, help="system file or bundled:NAME")
        if potential:
            sp.add_argument("--potential", help="potential file or bundled:NAME (default zero)")
        sp.add_argument("--out", help="write the result record here instead of stdout")

    def stage(sp):
        sp.add_argument("--N", type=int, default=1)
        sp.add_argument("--n-max", dest="n_max", type=int, default=2)
        sp.add_argument("--depth", type=int)

    sp = sub.add_parser("upper", help="single-scale upper estimate at one n")
    common(sp)
    sp.add_argument("-n", type=int, default=10)

    sp = sub.add_parser("bisect", help="critical exponent of a stage value")
    common(sp)
    stage(sp)
    sp.add_argument("--mode", choices=["single", "lp"], default="single")

    sp = sub.add_parser("lp", help="fractional covering LP value")
    common(sp)
    stage(sp)
    sp.add_argument("--s", type=float, default=0.0)

    sp = sub.add_parser("frostman", help="packing LP certificate")
    common(sp)
    stage(sp)
    sp.add_argument("--s", type=float, default=0.0)
    sp.add_argument("--dump-measure", dest="dump_measure")

    sp = sub.add_parser("optimize", help="maximize the objective over Markov measures")
    common(sp)
    sp.add_argument("-L", type=int, default=2)
    sp.add_argument("--restarts", type=int, default=8)
    sp.add_argument("--iters", type=int, default=500)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--step", type=float, default=0.1)

    sp = sub.add_parser("smb", help="weighted information rates")
    common(sp, potential=False)
    sp.add_argument("--measure", required=True)
    sp.add_argument("-N", dest="N", type=int, default=10)
    sp.add_argument("--sample", type=int, default=0)
    sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("power-check", help="power-rule identity and stage comparison")
    common(sp)
    sp.add_argument("-M", type=int, default=2)
    sp.add_argument("--n-list", dest="n_list", default="6")

    sp = sub.add_parser("verify", help="run invariant suites")
    common(sp)
    sp.add_argument("--measure")
    sp.add_argument("--suite", choices=SUITES, default="all")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--restarts", type=int, default=8)
    return p


def parse_config(argv) -> RunConfig:
    ns = build_parser().parse_args(argv)
    kw = {k: v for k, v in vars(ns).items() if v is not None}
    if "n_list" in kw:
        try:
            kw["n_list"] = tuple(int(x) for x in str(kw["n_list"]).split(","))
        except ValueError:
            raise ConfigError("comma-separated integers expected", field="n-list") from None
    cfg = RunConfig(**kw)
    _check_ranges(cfg)
    system = load_system(cfg.system)  # surfaces file and parse errors early
    load_potential(cfg.potential, system)
    if cfg.measure:
        load_measure(cfg.measure, system)
    if cfg.command in ("bisect", "lp", "frostman"):
        try:
            cfg.stage(system).validate(system)
        except ValidationError as exc:
            raise ConfigError(str(exc), field="stage") from None
    return cfg


def _check_ranges(cfg: RunConfig):
    positive = {"n": cfg.n, "L": cfg.L, "restarts": cfg.restarts, "iters": cfg.iters, "M": cfg.M}
    for name, v in positive.items():
        if v < 1:
            raise ConfigError("must be at least 1", field=name)
    if cfg.N < 1:
        raise ConfigError("must be at least 1", field="N")
    if cfg.command in ("bisect", "lp", "frostman") and cfg.n_max < cfg.N:
        raise ConfigError(f"n_max ({cfg.n_max}) is below N ({cfg.N})", field="n-max")
    if cfg.sample < 0:
        raise ConfigError("must be nonnegative", field="sample")
    if any(n < 1 for n in cfg.n_list):
        raise ConfigError("entries must be at least 1", field="n-list")
    if not cfg.step > 0:
        raise ConfigError("must be positive", field="step")


def inputs_digest(cfg: RunConfig) -> str:
    h = hashlib.sha256()
    conf = dataclasses.asdict(cfg)
    conf.pop("out")
    conf.pop("dump_measure")
    h.update(json.dumps(conf, sort_keys=True).encode())
    h.update(file_digest_text(cfg.system, "system").encode())
    h.update(file_digest_text(cfg.potential, "potential").encode())
    h.update(file_digest_text(cfg.measure, "measure").encode())
    return h.hexdigest()


# ----------------------------------------------------------------- running


def run(cfg: RunConfig, argv=None) -> tuple[ResultRecord, int]:
    rec = ResultRecord(list(argv) if argv is not None else [cfg.command], inputs_digest(cfg))
    t0 = time.perf_counter()
    system = load_system(cfg.system)
    pot = load_potential(cfg.potential, system)
    code = 0
    c = cfg.command
    if c == "upper":
        rec.add("upper_pressure", covering.upper_pressure(system, pot, cfg.n), "single-scale")
        rec.add("log_sum", covering.single_scale_log_sum(system, pot, 0.0, cfg.n), "single-scale")
        rec.add("n", cfg.n, "single-scale")
    elif c == "bisect":
        stage = cfg.stage(system)
        mode = "single_scale" if cfg.mode == "single" else "lp"
        br = covering.pressure_bisect(system, pot, stage, mode)
        tag = "single-scale" if mode == "single_scale" else "lp"
        rec.add("estimate", br.estimate, tag)
        rec.add("upper", br.upper, tag)
        rec.add("stage", [stage.N, stage.n_max, stage.depth], tag)
    elif c == "lp":
        stage = cfg.stage(system)
        lp = covering.build_stage(system, pot, stage)
        sol = covering.solve_cover_lp(lp, cfg.s)
        rec.add("value", sol.value, "lp")
        rec.add("log_value", sol.log_value, "lp")
        rec.add("s", cfg.s, "lp")
        rec.add("stage", [stage.N, stage.n_max, stage.depth], "lp")
        rec.add("nonzeros", lp.nonzeros, "lp")
    elif c == "frostman":
        stage = cfg.stage(system)
        lp = covering.build_stage(system, pot, stage)
        cert = frostman.frostman_lp(system, pot, cfg.s, stage, lp=lp)
        primal = covering.solve_cover_lp(lp, cfg.s).value
        rec.add("c", cert.c, "lp")
        rec.add("gap", abs(primal - cert.c), "lp")
        rec.add("max_violation", cert.max_violation if math.isfinite(cert.max_violation) else None, "lp")
        m = cert.measure.masses
        rec.add("measure_summary", {"support": int((m > 0).sum()), "max": float(m.max()), "min": float(m.min())}, "lp")
        rec.flags["no_mass_certifiable"] = cert.no_mass
        if cfg.dump_measure:
            with open(cfg.dump_measure, "w") as fh:
                json.dump(cert.measure.as_dict(system.base.alphabet), fh, indent=1, sort_keys=True)
    elif c == "optimize":
        opts = variational.OptimizerOptions(cfg.restarts, cfg.iters, cfg.seed, cfg.step)
        res = variational.optimize_markov(system, pot, cfg.L, opts)
        rec.seed = cfg.seed
        rec.add("lower", res.value.lower, "optimizer")
        rec.add("upper", res.value.upper, "optimizer")
        rec.add("mid", res.value.mid, "optimizer")
        rec.add("grad_norm", res.grad_norm, "optimizer")
        rec.add("transition", res.markov.transition, "optimizer")
        try:
            rec.add("closed_form", variational.fullshift_closed_form(system, pot), "closed-form")
        except ValidationError:
            pass
    elif c == "smb":
        mu = load_measure(cfg.measure, system)
        rec.add("expected_rate", measures.smb_expected_rate(system, mu, cfg.N), "exact")
        lim = measures.smb_limit(system, mu)
        rec.add("limit_lower", lim.lower, "exact")
        rec.add("limit_upper", lim.upper, "exact")
        if cfg.sample:
            rec.seed = cfg.seed
            smp = measures.smb_sample(system, mu, cfg.N, cfg.sample, cfg.seed)
            rec.add("sample_mean", smp.mean, "sampled")
            rec.add("sample_sigma", smp.sigma, "sampled")
            rec.flags["within_3sigma"] = smp.within_3sigma
            if not smp.within_3sigma:
                code = 1
    elif c == "power-check":
        rep = covering.power_rule_check(system, pot, cfg.M, cfg.n_list)
        rec.add("identity", [dataclasses.asdict(r) for r in rep.identity], "exact")
        rec.add("rows", [dataclasses.asdict(r) for r in rep.rows], "single-scale")
        rec.flags["ok"] = rep.ok
        code = 0 if rep.ok else 1
    elif c == "verify":
        code = _verify(cfg, system, pot, rec)
    rec.timing = time.perf_counter() - t0
    rec.values = _plain(rec.values)
    rec.flags = _plain(rec.flags)
    return rec, code


def _suite(rec, name, ok, details):
    rec.suites.append({"name": name, "ok": bool(ok), "details": _plain(details)})
    return bool(ok)


def _verify(cfg, system, pot, rec) -> int:
    want = SUITES[:-1] if cfg.suite == "all" else (cfg.suite,)
    ok = True
    rec.seed = cfg.seed
    small = StageSpec(1, 2, cylinders.window_profile(system.weights, 2).m[-1])
    if "vp" in want:
        opts = variational.OptimizerOptions(restarts=cfg.restarts, seed=cfg.seed)
        n = 10
        stage = StageSpec(n, n, cylinders.window_profile(system.weights, n).m[-1])
        rep = variational.vp_report(system, pot, stage, 2, opts, frostman_stage=small)
        rec.add("vp.optimizer_mid", rep.optimizer_value.mid, "optimizer")
        rec.add("vp.stage_upper", rep.stage_upper, "single-scale")
        if rep.closed_form is not None:
            rec.add("vp.closed_form", rep.closed_form, "closed-form")
        ok &= _suite(rec, "vp", rep.ok, {**rep.flags, **{k: v for k, v in rep.details.items() if k != "optimizer_measure"}})
    if "smb" in want:
        mu = load_measure(cfg.measure, system) if cfg.measure else measures.MarkovMeasure.uniform(system.base)
        smp = measures.smb_sample(system, mu, 10, 1000, cfg.seed)
        rec.add("smb.expected_rate", smp.expected, "exact")
        rec.add("smb.sample_mean", smp.mean, "sampled")
        ok &= _suite(rec, "smb", smp.within_3sigma, {"mean": smp.mean, "expected": smp.expected, "sigma": smp.sigma})
    if "duality" in want:
        rows = []
        good = True
        for s in (0.0, 1.0, 1.9):
            dr = frostman.duality_gap(system, pot, s, small)
            cert = frostman.frostman_lp(system, pot, s, small)
            rows.append({"s": s, "primal": dr.primal, "dual": dr.dual, "gap": dr.gap, "violation": cert.max_violation})
            good &= dr.ok and cert.max_violation <= 1e-10
        ok &= _suite(rec, "duality", good, rows)
    if "power" in want:
        good = True
        rows = []
        for M in (2, 3):
            rep = covering.power_rule_check(system, pot, M, [6])
            good &= rep.ok
            rows.append({"M": M, "identity": [r.equal for r in rep.identity], "diff": rep.rows[0].difference, "slack": rep.rows[0].slack})
        ok &= _suite(rec, "power", good, rows)
    return 0 if ok else 1


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    out = None
    try:
        cfg = parse_config(argv)
        out = cfg.out
        rec, code = run(cfg, argv)
    except ConfigError as exc:
        rec, code = ResultRecord(argv, "", error={"kind": "config", "message": str(exc), "field": exc.field, "line": exc.line}), 2
    except ValidationError as exc:
        rec, code = ResultRecord(argv, "", error={"kind": "config", "message": str(exc)}), 2
    except ResourceLimitError as exc:
        rec, code = ResultRecord(argv, "", error={"kind": "resource", "message": str(exc)}), 3
    except AssertionError as exc:
        rec, code = ResultRecord(argv, "", error={"kind": "assertion", "message": str(exc)}), 1
    text = rec.to_json()
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
