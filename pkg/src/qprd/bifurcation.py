"""Parameter sweep through gamma = 0: pullback boundary data for the
discontinuous pitchfork diagram, the monotonicity-in-gamma consistency check,
and the scalar oracle for homogeneous Neumann configurations.

The sweep reuses pullback_upper fiber by fiber; all the bifurcation structure
lives in how b_norm responds to gamma, so this module is mostly bookkeeping
around a sorted list of records.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

from .attractor import AttractorConfig, pullback_upper
from .baseflow import BasePoint
from .errors import SchemeViolationError, ValidationError
from .solver import ProblemSpec


@dataclass(frozen=True)
class SweepRecord:
    gamma: float
    b_norm: float
    min_b: float
    converged: bool


DEFAULT_GAMMAS = (-1.0, -0.5, -0.1, -0.01, 0.0, 0.01, 0.05, 0.1, 0.5, 1.0)


def sweep(gammas, prob_base: ProblemSpec, p_ref: BasePoint,
          cfg: AttractorConfig) -> list[SweepRecord]:
    """Pullback boundary at p_ref for each gamma, sorted ascending.

    The comparison principle makes b nondecreasing in gamma at any common
    horizon; records are produced at per-gamma adaptive horizons, so the
    check allows slack of a few Cauchy gaps before calling a violation.
    The caller's dt must satisfy the step bound of the stiffest (largest
    gamma) problem in the list; the propagator enforces that per record.
    """
    gammas = sorted(float(g) for g in gammas)
    if len(gammas) < 3 or gammas[0] >= 0.0 or gammas[-1] <= 0.0 or 0.0 not in gammas:
        raise ValidationError(
            "sweep needs negative, zero, and positive gamma values")
    records = []
    gaps = []
    for g in gammas:
        prob = dataclasses.replace(prob_base, gamma=g)
        s = pullback_upper(p_ref, prob, cfg)
        records.append(SweepRecord(gamma=g, b_norm=s.b_norm, min_b=s.min_b,
                                   converged=s.converged))
        gaps.append(s.cauchy_gap if math.isfinite(s.cauchy_gap) else cfg.gap_tol)
    for (r1, g1), (r2, g2) in zip(zip(records, gaps), zip(records[1:], gaps[1:])):
        slack = 4.0 * (cfg.gap_tol + max(g1, g2))
        if r1.b_norm > r2.b_norm + slack:
            raise SchemeViolationError(
                f"b_norm decreased from {r1.b_norm:.6g} (gamma={r1.gamma:g}) to "
                f"{r2.b_norm:.6g} (gamma={r2.gamma:g}); comparison in gamma "
                f"forbids drops beyond {slack:.3g}")
    return records


def pitchfork_report(records: list[SweepRecord]) -> dict:
    """Right-limit estimate at gamma = 0 from the sweep data.

    Linear (first-order Richardson) extrapolation from the two smallest
    positive gammas; the gap against the gamma = 0 record is the
    discontinuity datum the diagram is about: near zero for B-class
    configurations, order b_right for pinched ones.
    """
    pos = [r for r in records if r.gamma > 0.0]
    zero = [r for r in records if r.gamma == 0.0]
    if len(pos) < 2 or not zero:
        raise ValidationError(
            "report needs the gamma = 0 record and at least two positive gammas")
    r1, r2 = pos[0], pos[1]
    slope = (r2.b_norm - r1.b_norm) / (r2.gamma - r1.gamma)
    right = r1.b_norm - slope * r1.gamma
    return {
        "right_limit": right,
        "b_zero": zero[0].b_norm,
        "gap": right - zero[0].b_norm,
        "gammas_used": (r1.gamma, r2.gamma),
    }


def homogeneous_oracle(gamma: float, k: float, r0: float) -> float:
    """Positive equilibrium of the homogeneous Neumann problem: unique root
    b > r0 of gamma*b = k*(b - r0)^3, by bisection to 1e-12 relative width.

    (b - r0)^3 / b is strictly increasing on (r0, inf), from 0 to infinity,
    so the root exists and is unique for every positive gamma/k.
    """
    if not (gamma > 0 and k > 0 and r0 > 0):
        raise ValidationError("homogeneous oracle needs gamma, k, r0 all positive")
    lo = r0
    hi = r0 + max(1.0, (gamma * 2.0 * r0 / k) ** (1.0 / 3.0))
    while k * (hi - r0) ** 3 < gamma * hi:
        hi *= 2.0
        if hi > 1e30:
            raise ValidationError("oracle bracket diverged; check parameters")
    while hi - lo > 1e-12 * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if k * (mid - r0) ** 3 < gamma * mid:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def write_sweep_csv(records: list[SweepRecord], path, *,
                    version: str = "0.1.0", config_hash: str = "unset",
                    seed: int | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# version={version} config_hash={config_hash} seed={seed}\n")
        fh.write("gamma,b_norm,min_b,converged\n")
        for r in records:
            fh.write(f"{r.gamma:.12g},{r.b_norm:.12g},{r.min_b:.12g},"
                     f"{int(r.converged)}\n")
