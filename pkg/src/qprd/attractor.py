"""Pullback attractor boundary b(p), fine/singular fiber classification, and
the section-structure diagnostics (alignment with the principal direction,
linear-zone occupancy, pinch statistics).

The boundary is computed the way it is defined: push a dominating positive
field forward from ever-earlier starting times and watch the values at time
zero settle. The scheme's monotonicity makes the horizon sequence nodewise
nonincreasing, which is asserted, not assumed.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .baseflow import BasePoint, advance
from .cocycle import (DEFAULT_CONFIG, CocycleConfig, _require_near_zero_exponent,
                      _refined_max, cocycle_trace, estimate_principal_direction)
from .coeffs import LinearCoefficientSpec
from .errors import (EvaluationError, PreconditionError, SchemeViolationError,
                     ValidationError)
from .solver import BoundaryCondition, Grid, ProblemSpec, evolve, invariant_box


@dataclass(frozen=True)
class AttractorConfig:
    grid: Grid = Grid(64)
    dt: float = 1e-3
    r_start: float | None = None          # None: 4 * dissipativity bound
    T_list: tuple[float, ...] | None = None  # None: double 50 ... T_cap
    T_cap: float = 800.0
    gap_tol: float = 1e-4
    zero_tol: float = 1e-3
    positive_tol: float = 1e-2
    bs_growth_tol: float = 0.5
    cocycle: CocycleConfig = DEFAULT_CONFIG

    def __post_init__(self):
        if self.zero_tol > self.positive_tol:
            raise ValidationError("zero_tol must not exceed positive_tol")

    def horizons(self) -> tuple[float, ...]:
        if self.T_list is not None:
            if list(self.T_list) != sorted(self.T_list) or len(self.T_list) < 2:
                raise ValidationError("T_list must be increasing with >= 2 entries")
            return tuple(float(t) for t in self.T_list)
        out, t = [], 50.0
        while t <= self.T_cap:
            out.append(t)
            t *= 2.0
        return tuple(out)

    def fiber_cocycle(self, grid: Grid) -> CocycleConfig:
        """The cocycle config used for fiber classification, on this grid."""
        return dataclasses.replace(self.cocycle, grid=grid)


@dataclass(frozen=True)
class AttractorSample:
    """One fiber's worth of attractor data. b_field is the upper boundary at
    the sample's base point; fiber_class is 'Unclassified' until a scan (or
    classify_fiber) fills it in, keeping the boundary computation and the
    cocycle-criterion classification independent of each other."""

    base: BasePoint
    b_field: np.ndarray
    b_norm: float
    min_b: float
    fiber_class: str
    backward_sup: float
    pullback_horizon: float
    cauchy_gap: float
    converged: bool


def _start_amplitude(prob: ProblemSpec, cfg: AttractorConfig) -> float:
    if cfg.r_start is not None:
        if cfg.r_start <= 0:
            raise ValidationError("r_start must be positive")
        return cfg.r_start
    return 4.0 * invariant_box(prob)


def pullback_upper(p: BasePoint, prob: ProblemSpec,
                   cfg: AttractorConfig) -> AttractorSample:
    """Upper boundary of the attractor section at p by pullback iteration.

    Horizons double until the sup-norm Cauchy gap drops below gap_tol or the
    cap is hit; a non-converged sample is flagged and returned, never dropped
    (near singular fibers the decay to 0 can be arbitrarily slow, and those
    samples carry exactly the information a pinch scan needs).
    """
    if prob.g is None:
        raise ValidationError("pullback boundary needs the dissipative nonlinearity")
    r = _start_amplitude(prob, cfg)
    z_top = np.full(cfg.grid.n_nodes, r)
    slack = 1e-8 * (1.0 + r)
    prev: np.ndarray | None = None
    gap = math.inf
    horizon = 0.0
    for T in cfg.horizons():
        b_t = evolve(advance(p, -T), z_top, T, prob, cfg.dt)
        if prev is not None:
            if np.any(b_t > prev + slack):
                worst = float(np.max(b_t - prev))
                raise SchemeViolationError(
                    f"pullback iterates increased by {worst:.3g} between horizons "
                    f"{horizon:g} and {T:g}; the monotone scheme forbids this")
            gap = float(np.max(np.abs(b_t - prev)))
        prev = b_t
        horizon = T
        if gap < cfg.gap_tol:
            break
    assert prev is not None
    if np.any(prev < -1e-12):
        raise SchemeViolationError("pullback boundary lost nonnegativity")
    b = np.maximum(prev, 0.0)
    return AttractorSample(
        base=p,
        b_field=b,
        b_norm=float(np.max(b)),
        min_b=float(np.min(b)),
        fiber_class="Unclassified",
        backward_sup=math.nan,
        pullback_horizon=horizon,
        cauchy_gap=gap,
        converged=bool(gap < cfg.gap_tol),
    )


def _classify_with_sup(p: BasePoint, h: LinearCoefficientSpec,
                       bc: BoundaryCondition, cocfg: CocycleConfig,
                       growth_tol: float) -> tuple[str, float]:
    """Fiber criterion: the backward sup of ln c decides the class. Returns
    (class, backward_sup over T_max). 'Fine' additionally requires the sup to
    have stopped growing between the half and full horizons — a sup that is
    still climbing toward M_bound is reported Inconclusive."""
    if math.isinf(cocfg.M_bound):
        # Threshold disabled: every fiber is vacuously Fine and there is
        # nothing to measure, so skip the backward run entirely.
        return "Fine", math.nan
    T = cocfg.T_max
    tr = cocycle_trace(advance(p, -T), h, bc, T, cocfg)
    end = float(tr.log_c[-1])
    _require_near_zero_exponent(end, T, cocfg, "fiber classification")
    bs = _refined_max(tr.times, tr.log_c) - end
    if bs >= cocfg.M_bound:
        return "Singular", bs
    i_half = (tr.times.size - 1) // 2
    bs_half = float(np.max(tr.log_c[i_half:])) - end
    if bs - bs_half <= growth_tol:
        return "Fine", bs
    return "Inconclusive", bs


def classify_fiber(p: BasePoint, h: LinearCoefficientSpec,
                   bc: BoundaryCondition, cfg: AttractorConfig) -> str:
    cls, _ = _classify_with_sup(p, h, bc, cfg.fiber_cocycle(cfg.grid),
                                cfg.bs_growth_tol)
    return cls


_BANDS = ("zero", "uncertain", "positive")


def _band(b_norm: float, cfg: AttractorConfig) -> str:
    if b_norm < cfg.zero_tol:
        return "zero"
    if b_norm < cfg.positive_tol:
        return "uncertain"
    return "positive"


def section_sample(p: BasePoint, prob: ProblemSpec,
                   cfg: AttractorConfig) -> AttractorSample:
    """Pullback boundary plus fiber classification at one base point; the
    unit of work a scan distributes."""
    sample = pullback_upper(p, prob, cfg)
    cls, bs = _classify_with_sup(p, prob.h, prob.bc, cfg.fiber_cocycle(cfg.grid),
                                 cfg.bs_growth_tol)
    return dataclasses.replace(sample, fiber_class=cls, backward_sup=bs)


def summarize_sections(out: list[AttractorSample],
                       cfg: AttractorConfig) -> dict:
    """Aggregate statistics the pinched-attractor picture is judged by.

    agreement_fraction compares the two independent routes to the same
    dichotomy — cocycle criterion (Fine/Singular) versus direct boundary
    size (b_norm above/below zero_tol) — over converged, definitely
    classified samples. Violations count Fine fibers without a solidly
    positive boundary and Singular fibers without a vanishing one.
    """
    n = len(out)
    conv = [s for s in out if s.converged]
    crosstab = {(c, b): 0 for c in ("Fine", "Singular", "Inconclusive")
                for b in _BANDS}
    for s in out:
        crosstab[(s.fiber_class, _band(s.b_norm, cfg))] += 1
    violations = sum(1 for s in conv
                     if (s.fiber_class == "Fine" and s.b_norm < cfg.positive_tol)
                     or (s.fiber_class == "Singular" and s.b_norm >= cfg.zero_tol))
    definite = [s for s in conv if s.fiber_class in ("Fine", "Singular")]
    agree = sum(1 for s in definite
                if (s.fiber_class == "Fine") == (s.b_norm >= cfg.zero_tol))
    summary = {
        "n": n,
        "n_converged": len(conv),
        "pinch_fraction": sum(1 for s in out if s.b_norm < cfg.zero_tol) / n,
        "fine_fraction": sum(1 for s in out if s.fiber_class == "Fine") / n,
        "singular_fraction": sum(1 for s in out if s.fiber_class == "Singular") / n,
        "crosstab": crosstab,
        "violations": violations,
        "violation_fraction": violations / len(conv) if conv else math.nan,
        "agreement_fraction": agree / len(definite) if definite else math.nan,
    }
    return summary


def scan_sections(samples: list[BasePoint], prob: ProblemSpec,
                  cfg: AttractorConfig) -> tuple[list[AttractorSample], dict]:
    """Pullback + fiber classification across sampled base points; returns the
    per-fiber samples together with the summarize_sections statistics."""
    out = [section_sample(p, prob, cfg) for p in samples]
    return out, summarize_sections(out, cfg)


@dataclass(frozen=True)
class AlignmentReport:
    residual: float
    r_star: float
    b_norm: float
    norm_gap: float


def section_alignment(p: BasePoint, prob: ProblemSpec,
                      cfg: AttractorConfig) -> AlignmentReport:
    """Bounded-cocycle section structure check: the boundary must be a
    multiple of the principal direction, with sup-norm r_star * e^(K(p)); the
    invariant scaled direction is e^K times the unit one, so r_star is r0
    over the largest sampled e^K.

    Only meaningful for specs carrying a potential (built as coboundaries) at
    gamma = 0; refuses otherwise.
    """
    if not prob.h.is_coboundary:
        raise PreconditionError(
            "section alignment applies to coboundary-built coefficients only")
    if prob.gamma != 0.0:
        raise PreconditionError("section alignment requires gamma = 0")
    if prob.g is None:
        raise ValidationError("section alignment needs the nonlinear problem")
    sample = pullback_upper(p, prob, cfg)
    if sample.b_norm < cfg.zero_tol:
        raise EvaluationError(
            f"section at theta={p.theta} is degenerate (b_norm = "
            f"{sample.b_norm:.3g} < {cfg.zero_tol:g}); nothing to normalize")
    cocfg = cfg.fiber_cocycle(cfg.grid)
    e_hat = estimate_principal_direction(p, prob.h, prob.bc, cocfg.T_spin, cocfg)
    residual = float(np.max(np.abs(sample.b_field / sample.b_norm - e_hat)))

    K = prob.h.potential
    grid_1d = np.linspace(0.0, 1.0, 512, endpoint=False)
    t1, t2 = np.meshgrid(grid_1d, grid_1d, indexing="ij")
    k_max = float(np.max(K.value(t1, t2)))
    r_star = prob.g.r0 * math.exp(-k_max)
    predicted = r_star * math.exp(float(K(p)))
    return AlignmentReport(
        residual=residual,
        r_star=r_star,
        b_norm=sample.b_norm,
        norm_gap=abs(sample.b_norm - predicted),
    )


def linear_zone_fraction(samples: list[AttractorSample], prob: ProblemSpec,
                         cfg: AttractorConfig) -> tuple[float, int]:
    """Fraction of converged Fine fibers whose boundary sits inside the
    nonlinearity's dead zone (b <= r0 + zero_tol nodewise); the count of such
    fibers comes second so an empty denominator is visible (fraction NaN).

    The statistic is about the critical regime (at gamma = 0 a boundary inside
    the dead zone means the fiber dynamics never leave the linear cocycle),
    but the count itself is well-defined for any classified samples, e.g. to
    show a supercritical boundary sitting strictly outside the zone.
    """
    if prob.g is None:
        raise ValidationError("linear-zone statistics need the nonlinearity")
    fine = [s for s in samples if s.fiber_class == "Fine" and s.converged]
    if not fine:
        return math.nan, 0
    r0 = prob.g.r0
    inside = sum(1 for s in fine if np.all(s.b_field <= r0 + cfg.zero_tol))
    return inside / len(fine), len(fine)


def write_scan_csv(samples: list[AttractorSample], path, *,
                   version: str = "0.1.0", config_hash: str = "unset",
                   seed: int | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# version={version} config_hash={config_hash} seed={seed}\n")
        fh.write("theta1,theta2,b_norm,min_b,fiber_class,backward_sup,"
                 "cauchy_gap,converged\n")
        for s in samples:
            fh.write(f"{s.base.theta[0]:.12g},{s.base.theta[1]:.12g},"
                     f"{s.b_norm:.12g},{s.min_b:.12g},{s.fiber_class},"
                     f"{s.backward_sup:.12g},{s.cauchy_gap:.12g},"
                     f"{int(s.converged)}\n")
