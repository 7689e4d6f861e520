"""Stage measures certifying covering lower bounds through the packing LP.

The packing program ``max sum y`` subject to ``sum_{rows in A} y <= cost_A`` for
every weighted cylinder ``A`` is solved directly; normalising ``y`` gives a
probability measure on depth-``D`` base cylinders with
``mu(A) <= cost_A / c`` and ``c = sum y``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .covering import StageLP, StageSpec, build_stage, solve_cover_lp
from .cylinders import cylinder_from_mixed, mixed_labels, weight_of, window_profile
from .lp import solve_lp
from .symbolic import ChainSystem, Potential

NO_MASS_THRESHOLD = 1e-12


@dataclass
class StageMeasure:
    depth: int
    base_words: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        if np.any(self.masses < 0):
            raise ValueError("stage measure has negative mass")
        if abs(self.masses.sum() - 1.0) > 1e-12:
            raise ValueError("stage measure is not normalised")

    def as_dict(self, alphabet) -> dict[str, float]:
        return {alphabet.decode(w): float(p) for w, p in zip(self.base_words, self.masses) if p > 0}


@dataclass
class FrostmanCertificate:
    c: float
    log_c: float
    measure: StageMeasure
    max_violation: float = math.nan
    no_mass: bool = False
    extras: dict = field(default_factory=dict)


def _packing(lp: StageLP, s: float):
    lc = lp.log_costs(s)
    shift = lc.max()
    cost = np.exp(lc - shift)
    res = solve_lp(np.ones(lp.n_rows), lp.matrix().T, cost, ["<="] * lp.n_cols, maximize=True)
    if not res.ok:
        raise RuntimeError(f"packing LP ended with status {res.status}")
    return res, shift


def frostman_lp(system: ChainSystem, potential: Potential, s: float, stage: StageSpec, lp: StageLP | None = None) -> FrostmanCertificate:
    lp = lp or build_stage(system, potential, stage)
    res, shift = _packing(lp, s)
    y = np.clip(res.x, 0.0, None)
    # scale into exact feasibility; near-ties in s leave solver-tolerance overshoot
    load = lp.matrix().T @ y
    cost = np.exp(lp.log_costs(s) - shift)
    over = load > cost
    scale = float(np.min(cost[over] / load[over])) if over.any() else 1.0
    y = y * scale
    total = y.sum()
    log_c = math.log(total) + shift if total > 0 else -math.inf
    c = math.exp(log_c) if log_c > -745 else 0.0
    no_mass = c < NO_MASS_THRESHOLD
    # spread each row class uniformly over its base words
    per_word = (y / total)[lp.row_of_word] / lp.row_sizes[lp.row_of_word] if total > 0 else None
    if per_word is None:
        per_word = np.full(len(lp.base_words), 1.0 / len(lp.base_words))
    per_word = per_word / per_word.sum()
    cert = FrostmanCertificate(
        c, log_c, StageMeasure(stage.depth, lp.base_words, per_word), no_mass=no_mass, extras={"feasibility_scale": scale}
    )
    cert.max_violation = verify_frostman(system, potential, cert, s, stage)
    return cert


def verify_frostman(system: ChainSystem, potential: Potential, certificate: FrostmanCertificate, s: float, stage: StageSpec) -> float:
    """``max_A (mu(A) - exp(weight_of(A, s)) / c)`` over every weighted cylinder of the stage."""
    meas = certificate.measure
    if meas.depth != stage.depth:
        raise ValueError("certificate depth does not match the stage")
    if certificate.c <= 0:
        return -math.inf
    worst = -math.inf
    for n in stage.scales:
        m = window_profile(system.weights, n).m
        labels = mixed_labels(system, meas.base_words, m)
        uniq, inv = np.unique(labels, axis=0, return_inverse=True)
        mass = np.bincount(inv.ravel(), weights=meas.masses, minlength=len(uniq))
        for row, mu in zip(uniq, mass):
            wcyl = cylinder_from_mixed(system, n, tuple(int(x) for x in row))
            bound = math.exp(weight_of(system, potential, wcyl, s) - certificate.log_c)
            worst = max(worst, float(mu) - bound)
    return worst


@dataclass
class DualityReport:
    primal: float
    dual: float
    gap: float
    ok: bool


def duality_gap(system: ChainSystem, potential: Potential, s: float, stage: StageSpec, rtol: float = 1e-8) -> DualityReport:
    lp = build_stage(system, potential, stage)
    primal = solve_cover_lp(lp, s).value
    dual = frostman_lp(system, potential, s, stage, lp=lp).c
    gap = abs(primal - dual)
    return DualityReport(primal, dual, gap, gap <= rtol * max(1.0, primal))
