"""Li-Yorke pair diagnostics: joint evolution of trajectory pairs inside an
attractor fiber, tail liminf/limsup estimates of their separation, and the
fiber-chaos scan that flags which fine fibers carry proximal-but-not-asymptotic
pairs.

The separation records are sup-norm distances sampled every dt_rec; the
asymptotic estimates use sliding windows over the last half of the horizon.
Taking the min over window minima (and max over window maxima) collapses to a
plain extremum over the tail [T/2 - window, T]; the windows are kept in the
implementation anyway because they make the "last half" bookkeeping explicit
and cheap to change.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .attractor import AttractorSample
from .baseflow import BasePoint
from .errors import PreconditionError, ValidationError
from .solver import Grid, ProblemSpec, _cached_propagator, invariant_box


@dataclass(frozen=True)
class ChaosConfig:
    """Pair-evolution settings plus the two scan thresholds.

    threshold_hi = None resolves, per scan, to 0.1 times the median boundary
    norm of the fibers actually tested; a fixed float pins it instead.
    degenerate_tol is the boundary norm below which a fiber is treated as
    pinched to zero and carrying no pairs at all.
    """

    grid: Grid = Grid(64)
    dt: float = 1e-3
    T: float = 2000.0
    window: float = 50.0
    dt_rec: float = 0.25
    threshold_lo: float = 0.05
    threshold_hi: float | None = None
    degenerate_tol: float = 1e-9

    def __post_init__(self):
        if self.window <= 0 or self.T <= 0:
            raise ValidationError("window and T must be positive")
        if self.threshold_lo <= 0:
            raise ValidationError("threshold_lo must be positive")

    def records_per_window(self) -> int:
        w = round(self.window / self.dt_rec)
        if w < 2 or abs(w * self.dt_rec - self.window) > 1e-9 * self.window:
            raise ValidationError(
                f"window = {self.window} must be a multiple of dt_rec = "
                f"{self.dt_rec} spanning at least 2 records")
        return w

    def steps_per_record(self) -> int:
        n = round(self.dt_rec / self.dt)
        if n < 1 or abs(n * self.dt - self.dt_rec) > 1e-9 * self.dt_rec:
            raise ValidationError(
                f"dt_rec = {self.dt_rec} must be a positive multiple of dt = {self.dt}")
        return n


@dataclass(frozen=True)
class PairStats:
    """Tail separation statistics of one trajectory pair."""

    liminf_est: float
    limsup_est: float
    horizon: float
    window: float

    def __post_init__(self):
        if not 0.0 <= self.liminf_est <= self.limsup_est:
            raise ValidationError(
                f"need 0 <= liminf <= limsup, got ({self.liminf_est}, "
                f"{self.limsup_est})")


def liyorke_stats(p: BasePoint, z1: np.ndarray, z2: np.ndarray,
                  prob: ProblemSpec, cfg: ChaosConfig) -> PairStats:
    """Evolve z1 and z2 jointly from p over [0, T] and estimate the liminf and
    limsup of their sup-norm separation from the last half of the run.

    The two trajectories see identical coefficient evaluations (same
    propagator, same chunk boundaries), so swapping z1 and z2 reproduces the
    same floats exactly, and identical inputs give identically zero
    separation.
    """
    if cfg.T < 10.0 * cfg.window:
        raise PreconditionError(
            f"horizon T = {cfg.T:g} must cover at least 10 windows "
            f"({10.0 * cfg.window:g})")
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    if z1.shape != (cfg.grid.n_nodes,) or z2.shape != (cfg.grid.n_nodes,):
        raise ValidationError(
            f"initial fields must have shape ({cfg.grid.n_nodes},)")
    if prob.g is not None:
        box = invariant_box(prob)
        worst = max(float(np.max(np.abs(z1))), float(np.max(np.abs(z2))))
        if worst > box:
            raise PreconditionError(
                f"initial fields reach {worst:g}, outside the attracting box "
                f"{box:g}")

    prop = _cached_propagator(prob, cfg.grid, cfg.dt, p.omega)
    spr = cfg.steps_per_record()
    n_rec = round(cfg.T / cfg.dt_rec)
    if abs(n_rec * cfg.dt_rec - cfg.T) > 1e-6 * cfg.T:
        raise ValidationError(
            f"T = {cfg.T} must be a multiple of dt_rec = {cfg.dt_rec}")
    y1, y2 = z1.copy(), z2.copy()
    d = np.empty(n_rec + 1)
    d[0] = float(np.max(np.abs(y2 - y1)))
    q = p
    for k in range(n_rec):
        q_next = prop.run(y1, q, spr)
        prop.run(y2, q, spr)
        q = q_next
        d[k + 1] = float(np.max(np.abs(y2 - y1)))

    w = cfg.records_per_window()
    windows = np.lib.stride_tricks.sliding_window_view(d, w + 1)
    # window i covers records [i, i+w]; keep windows ending in the last half
    end_times = (np.arange(windows.shape[0]) + w) * cfg.dt_rec
    tail = windows[end_times >= 0.5 * cfg.T]
    return PairStats(
        liminf_est=float(tail.min(axis=1).min()),
        limsup_est=float(tail.max(axis=1).max()),
        horizon=cfg.T,
        window=cfg.window,
    )


@dataclass(frozen=True)
class FiberPairRecord:
    base: BasePoint
    stats: PairStats
    flagged: bool


@dataclass(frozen=True)
class ChaosScanResult:
    """Flagged fraction among the tested (fine, converged) fibers.

    fraction is NaN when no fiber qualified for testing but the attractor is
    not trivially pinched: the scan then has nothing to say. When every
    sampled boundary is below degenerate_tol the attractor carries no
    distinct pairs anywhere, so the flagged fraction is zero by inspection
    and is reported as such with n_tested = 0.
    """

    fraction: float
    n_tested: int
    n_flagged: int
    threshold_lo: float
    threshold_hi: float
    records: tuple[FiberPairRecord, ...]


def fiber_chaos_scan(samples: list[AttractorSample], prob: ProblemSpec,
                     cfg: ChaosConfig) -> ChaosScanResult:
    """Test the pair (b(p)/3, 2b(p)/3) on every converged fine fiber and flag
    the Li-Yorke ones: separation liminf below threshold_lo times its limsup,
    with the limsup itself above threshold_hi.

    The two pair members are distinct multiples of the fiber boundary, so
    their separation starts at b_norm/3 and thereafter shadows the boundary
    along the orbit while the pair stays in the linear zone.
    """
    if prob.gamma != 0.0:
        raise PreconditionError("fiber chaos scan requires gamma = 0")
    eligible = [s for s in samples
                if s.fiber_class == "Fine" and s.converged]
    if not eligible:
        if samples and all(s.b_norm < cfg.degenerate_tol for s in samples):
            return ChaosScanResult(0.0, 0, 0, cfg.threshold_lo,
                                   cfg.threshold_hi if cfg.threshold_hi
                                   is not None else math.nan, ())
        return ChaosScanResult(math.nan, 0, 0, cfg.threshold_lo,
                               cfg.threshold_hi if cfg.threshold_hi
                               is not None else math.nan, ())
    for s in eligible:
        if s.b_field.shape != (cfg.grid.n_nodes,):
            raise ValidationError(
                "sample boundary fields do not match the scan grid")

    hi = cfg.threshold_hi
    if hi is None:
        hi = 0.1 * float(np.median([s.b_norm for s in eligible]))
    records = []
    n_flagged = 0
    for s in eligible:
        stats = liyorke_stats(s.base, s.b_field / 3.0, 2.0 * s.b_field / 3.0,
                              prob, cfg)
        flagged = (stats.liminf_est < cfg.threshold_lo * stats.limsup_est
                   and stats.limsup_est > hi)
        n_flagged += flagged
        records.append(FiberPairRecord(s.base, stats, bool(flagged)))
    return ChaosScanResult(
        fraction=n_flagged / len(eligible),
        n_tested=len(eligible),
        n_flagged=n_flagged,
        threshold_lo=cfg.threshold_lo,
        threshold_hi=hi,
        records=tuple(records),
    )


def write_chaos_csv(result: ChaosScanResult, path, *,
                    version: str = "0.1.0", config_hash: str = "unset",
                    seed: int | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# version={version} config_hash={config_hash} seed={seed}\n")
        fh.write("theta1,theta2,liminf_est,limsup_est,flagged\n")
        for r in result.records:
            fh.write(f"{r.base.theta[0]:.12g},{r.base.theta[1]:.12g},"
                     f"{r.stats.liminf_est:.12g},{r.stats.limsup_est:.12g},"
                     f"{int(r.flagged)}\n")
