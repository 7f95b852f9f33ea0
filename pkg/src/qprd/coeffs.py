"""Coefficient constructions: the linear term h(p,x), its deliberately bounded
(coboundary) and unbounded-primitive (surrogate) base parts, and the odd
dissipative cubic nonlinearity g(p,x,y).

Trigonometric data is the common currency: base-only parts are finite sums
a_k * sin(2*pi*(m.theta) + phase), spatial parts multiply such a factor by a
named profile of x. Specs are immutable; evaluation is pure.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .baseflow import BasePoint, advance, preset_frequencies
from .errors import ConfigurationError, ValidationError

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


# --------------------------------------------------------------------------
# torus trigonometric polynomials


@dataclass(frozen=True)
class TrigPoly:
    """sum_k amps[k] * sin(2*pi*(modes[k,0]*th1 + modes[k,1]*th2) + phases[k]).

    Zero modes are rejected: constants belong in LinearCoefficientSpec's
    constant_shift, which keeps every TrigPoly exactly mean-free on the torus.
    """

    modes: tuple[tuple[int, int], ...]
    amps: tuple[float, ...]
    phases: tuple[float, ...]

    def __post_init__(self):
        if not (len(self.modes) == len(self.amps) == len(self.phases)):
            raise ValidationError("modes/amps/phases length mismatch")
        for m in self.modes:
            if m == (0, 0):
                raise ValidationError(
                    "zero mode in TrigPoly; put constants in constant_shift")

    @property
    def n_terms(self) -> int:
        return len(self.amps)

    def value(self, theta1, theta2):
        """Evaluate at torus coordinates (scalars or numpy arrays)."""
        out = 0.0
        for (m1, m2), a, ph in zip(self.modes, self.amps, self.phases):
            out = out + a * np.sin(TWO_PI * (m1 * theta1 + m2 * theta2) + ph)
        return out

    def __call__(self, p: BasePoint):
        return self.value(p.theta[0], p.theta[1])

    def flow_derivative(self, omega: tuple[float, float]) -> "TrigPoly":
        """d/dt of value along theta + omega*t, again a TrigPoly.

        sin(u + phase) differentiates to (2*pi*m.omega) * sin(u + phase + pi/2).
        """
        amps = tuple(a * TWO_PI * (m[0] * omega[0] + m[1] * omega[1])
                     for m, a in zip(self.modes, self.amps))
        phases = tuple(ph + 0.5 * math.pi for ph in self.phases)
        return TrigPoly(self.modes, amps, phases)

    def sup_bound(self) -> float:
        """Crude but safe: sum of |amplitudes|."""
        return float(sum(abs(a) for a in self.amps))


EMPTY_TRIG = TrigPoly((), (), ())


# --------------------------------------------------------------------------
# spatial profiles

PROFILES: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "one": lambda x: np.ones_like(x),
    "sin_pi": lambda x: np.sin(math.pi * x),
    "cos_pi": lambda x: np.cos(math.pi * x),
    "parabola": lambda x: 4.0 * x * (1.0 - x),
}


def profile_values(name: str, x: np.ndarray) -> np.ndarray:
    try:
        fn = PROFILES[name]
    except KeyError:
        raise ValidationError(
            f"unknown spatial profile {name!r}; known: {sorted(PROFILES)}") from None
    return np.asarray(fn(np.asarray(x, dtype=float)), dtype=float)


@dataclass(frozen=True)
class SpaceTerm:
    """One x-dependent contribution: amp * sin(2*pi*m.theta + phase) * profile(x)."""

    mode: tuple[int, int]
    amp: float
    profile: str
    phase: float = 0.0

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ValidationError(f"unknown spatial profile {self.profile!r}")


# --------------------------------------------------------------------------
# the linear coefficient


@dataclass(frozen=True)
class LinearCoefficientSpec:
    """h(p, x) = constant_shift + base_part(theta) + sum of space terms.

    A spec built by build_coboundary_h stores the potential K; its base_part
    is then exactly the derivative of K along the flow, so the associated
    log-cocycle is K(p.t) - K(p) and the upper Lyapunov exponent vanishes.
    """

    base_part: TrigPoly = EMPTY_TRIG
    space_part: tuple[SpaceTerm, ...] = ()
    constant_shift: float = 0.0
    potential: TrigPoly | None = None

    @property
    def is_coboundary(self) -> bool:
        return self.potential is not None

    @property
    def x_independent(self) -> bool:
        return len(self.space_part) == 0

    def sup_bound(self) -> float:
        b = abs(self.constant_shift) + self.base_part.sup_bound()
        for term in self.space_part:
            # all registered profiles have sup norm 1 on [0,1]
            b += abs(term.amp)
        return b


def eval_h(spec: LinearCoefficientSpec, p: BasePoint, x) -> float | np.ndarray:
    """Evaluate the linear coefficient at (p, x); x may be an array in [0,1]."""
    th1, th2 = p.theta
    out = spec.constant_shift + spec.base_part.value(th1, th2)
    if spec.space_part:
        x = np.asarray(x, dtype=float)
        sout = np.zeros_like(x)
        for term in spec.space_part:
            m1, m2 = term.mode
            factor = term.amp * math.sin(TWO_PI * (m1 * th1 + m2 * th2) + term.phase)
            sout = sout + factor * profile_values(term.profile, x)
        out = out + sout
        if np.ndim(x) == 0:
            return float(out)
        return out
    if np.ndim(x) == 0:
        return float(out)
    return np.full(np.shape(x), float(out))


def mix(h1: LinearCoefficientSpec, h2: LinearCoefficientSpec,
        weight: float) -> LinearCoefficientSpec:
    """Pointwise convex combination (1 - weight)*h1 + weight*h2.

    Sine terms are concatenated with scaled amplitudes rather than merged;
    that is exact for evaluation and keeps the helper trivial. When both
    inputs carry potentials the combination does too (differentiation along
    the flow is linear), otherwise the coboundary tag is dropped.
    """
    if not 0.0 <= weight <= 1.0:
        raise ValidationError(f"mixing weight must lie in [0,1], got {weight}")
    if weight == 0.0:
        return h1
    if weight == 1.0:
        return h2
    a, b = 1.0 - weight, weight

    def combine(t1: TrigPoly, t2: TrigPoly) -> TrigPoly:
        return TrigPoly(t1.modes + t2.modes,
                        tuple(a * c for c in t1.amps)
                        + tuple(b * c for c in t2.amps),
                        t1.phases + t2.phases)

    space = tuple(replace(term, amp=a * term.amp) for term in h1.space_part)
    space += tuple(replace(term, amp=b * term.amp) for term in h2.space_part)
    potential = None
    if h1.potential is not None and h2.potential is not None:
        potential = combine(h1.potential, h2.potential)
    return LinearCoefficientSpec(
        base_part=combine(h1.base_part, h2.base_part),
        space_part=space,
        constant_shift=a * h1.constant_shift + b * h2.constant_shift,
        potential=potential,
    )


def check_coboundary_consistency(spec: LinearCoefficientSpec,
                                 omega: tuple[float, float],
                                 n_samples: int = 64,
                                 tol: float = 1e-6,
                                 seed: int = 11) -> None:
    """Verify base_part == d/dt K(p.t) by central finite differences.

    The derivative is constructed analytically, so this guards against a
    mistyped potential rather than floating error; tolerance 1e-6 with step
    1e-4 leaves plenty of room for the O(step^2) difference error.
    """
    if spec.potential is None:
        raise ValidationError("spec carries no potential to check")
    rng = np.random.Generator(np.random.PCG64(seed))
    step = 1e-4
    for th1, th2 in rng.random((n_samples, 2)):
        p = BasePoint((float(th1), float(th2)), omega)
        kp = spec.potential(advance(p, step))
        km = spec.potential(advance(p, -step))
        fd = (kp - km) / (2.0 * step)
        an = spec.base_part(p)
        if abs(fd - an) > tol * max(1.0, abs(an)):
            raise ValidationError(
                f"stored potential inconsistent with base_part at theta="
                f"({th1:.6f},{th2:.6f}): finite-diff {fd:.8f} vs analytic {an:.8f}")


# --------------------------------------------------------------------------
# nonlinearity: odd piecewise cubic with a dead zone


@dataclass(frozen=True)
class NonlinearitySpec:
    """g(p,x,y) = 0 for |y| <= r0, and -stiffness(p,x)*(y - sign(y)*r0)^3 beyond.

    stiffness(p,x) = stiff_const + stiff_torus(theta) + stiff_space contribution;
    it must stay strictly positive (checked by the condition sampler). The
    shape gives: g odd, y*g <= 0, g concave on y>=0, g(y)/y -> -inf, and the
    dead zone [-r0, r0] on which the dynamics are exactly linear.
    """

    r0: float
    stiff_const: float = 1.0
    stiff_torus: TrigPoly | None = None
    stiff_space: SpaceTerm | None = None

    def __post_init__(self):
        if not (self.r0 > 0):
            raise ValidationError(f"dead-zone radius must be positive, got {self.r0}")
        if self.stiff_const <= 0:
            raise ValidationError("stiff_const must be positive")

    def stiffness_bounds(self) -> tuple[float, float]:
        lo = hi = self.stiff_const
        if self.stiff_torus is not None:
            b = self.stiff_torus.sup_bound()
            lo, hi = lo - b, hi + b
        if self.stiff_space is not None:
            a = abs(self.stiff_space.amp)
            lo, hi = lo - a, hi + a
        return lo, hi


def eval_stiffness(spec: NonlinearitySpec, p: BasePoint, x) -> float | np.ndarray:
    th1, th2 = p.theta
    out = spec.stiff_const
    if spec.stiff_torus is not None:
        out = out + spec.stiff_torus.value(th1, th2)
    if spec.stiff_space is not None:
        t = spec.stiff_space
        m1, m2 = t.mode
        factor = t.amp * math.sin(TWO_PI * (m1 * th1 + m2 * th2) + t.phase)
        out = out + factor * profile_values(t.profile, np.asarray(x, dtype=float))
    if np.ndim(x) == 0 and np.ndim(out) > 0:
        return float(out)
    if np.ndim(x) > 0 and np.ndim(out) == 0:
        return np.full(np.shape(x), float(out))
    return out


def eval_g(spec: NonlinearitySpec, p: BasePoint, x, y) -> float | np.ndarray:
    """The odd piecewise-cubic reaction term."""
    y_arr = np.asarray(y, dtype=float)
    k = eval_stiffness(spec, p, x)
    excess = np.maximum(np.abs(y_arr) - spec.r0, 0.0)
    out = -np.sign(y_arr) * np.asarray(k) * excess ** 3
    if np.ndim(y) == 0 and np.ndim(out) == 0:
        return float(out)
    if np.ndim(out) == 0:
        return np.full(np.shape(y_arr), float(out))
    return out


def check_dissipation_conditions(spec: NonlinearitySpec,
                                 omega: tuple[float, float] | None = None,
                                 n_samples: int = 10_000,
                                 seed: int = 5,
                                 y_range: float = 10.0) -> None:
    """Sampler for the structural conditions on g; raises on the first failure.

    Checked on n_samples random (p, x, y): value and slope zero at the origin,
    y*g <= 0, odd symmetry (exact), vanishing exactly on the dead zone,
    superlinear decay of g(y)/y at |y| in {1e2, 1e3}, and one-sided concavity
    via second differences. Positivity of the stiffness is checked both by
    interval bounds and on the sample.
    """
    if omega is None:
        omega = preset_frequencies("golden")
    lo, _ = spec.stiffness_bounds()
    if lo <= 0:
        raise ValidationError(
            f"stiffness can reach {lo:.3g} <= 0 by its interval bounds")
    rng = np.random.Generator(np.random.PCG64(seed))
    ths = rng.random((n_samples, 2))
    xs = rng.random(n_samples)
    ys = rng.uniform(-y_range, y_range, n_samples)
    for i in range(n_samples):
        p = BasePoint((float(ths[i, 0]), float(ths[i, 1])), omega)
        x = float(xs[i])
        y = float(ys[i])
        k = eval_stiffness(spec, p, x)
        if not k > 0:
            raise ValidationError(f"stiffness {k:.3g} <= 0 at sample {i}")
        g = eval_g(spec, p, x, y)
        if eval_g(spec, p, x, 0.0) != 0.0:
            raise ValidationError("g(.,.,0) != 0")
        if y * g > 0.0:
            raise ValidationError(f"y*g = {y * g:.3g} > 0 at y={y:.3g}")
        if eval_g(spec, p, x, -y) != -g:
            raise ValidationError(f"odd symmetry broken at y={y:.3g}")
        if abs(y) <= spec.r0 and g != 0.0:
            raise ValidationError(f"g nonzero inside dead zone at y={y:.3g}")
        if abs(y) > spec.r0 and g == 0.0:
            raise ValidationError(f"g zero outside dead zone at y={y:.3g}")
    # slope at 0 and superlinear decay, on a few deterministic points
    p0 = BasePoint((0.3, 0.7), omega)
    eps = 1e-6
    slope = (eval_g(spec, p0, 0.5, eps) - eval_g(spec, p0, 0.5, -eps)) / (2 * eps)
    if abs(slope) > 1e-12:
        raise ValidationError(f"dg/dy(0) = {slope:.3g} != 0")
    q2 = eval_g(spec, p0, 0.5, 1e2) / 1e2
    q3 = eval_g(spec, p0, 0.5, 1e3) / 1e3
    if not (q3 < 100.0 * q2 < 0.0):
        raise ValidationError(
            f"g(y)/y not decaying superlinearly: {q2:.3g} at 1e2, {q3:.3g} at 1e3")
    # concavity for y >= 0 via second differences on a grid
    yy = np.linspace(0.0, y_range, 201)
    gg = np.array([eval_g(spec, p0, 0.25, float(v)) for v in yy])
    d2 = gg[2:] - 2 * gg[1:-1] + gg[:-2]
    if np.any(d2 > 1e-9):
        raise ValidationError("second differences positive: g not concave on y>=0")


# --------------------------------------------------------------------------
# constructors


def build_coboundary_h(K: TrigPoly,
                       bc,
                       grid,
                       omega: tuple[float, float] | str = "golden") -> LinearCoefficientSpec:
    """Linear coefficient with exactly bounded log-cocycle K(p.t) - K(p).

    h(p, x) = gamma0(bc) + dK/dt along the flow. Adding the first eigenvalue
    cancels the principal decay of the diffusion, so the exponent is zero and
    the principal direction is the autonomous eigenfield at every p.
    """
    from .solver import first_eigenpair  # deferred: solver imports this module

    if isinstance(omega, str):
        omega = preset_frequencies(omega)
    gamma0, _ = first_eigenpair(grid, bc)
    spec = LinearCoefficientSpec(
        base_part=K.flow_derivative(omega) if K.n_terms else EMPTY_TRIG,
        space_part=(),
        constant_shift=float(gamma0),
        potential=K,
    )
    if K.n_terms:
        check_coboundary_consistency(spec, omega)
    return spec


def golden_convergents(level: int) -> list[tuple[int, int]]:
    """(p_j, q_j) continued-fraction convergents of the golden frequency:
    ratios of consecutive Fibonacci numbers, p_j/q_j = F_j/F_{j+1}."""
    if level < 0:
        raise ValidationError("level must be >= 0")
    pairs = []
    fa, fb = 1, 1  # F_1, F_2
    for _ in range(level):
        pairs.append((fa, fb))
        fa, fb = fb, fa + fb
    return pairs


#: Tuned defaults for the unbounded-primitive surrogate (see the design notes
#: in the test suite): global amplitude and per-term phases chosen so the
#: primitive's range comfortably spans the classification thresholds.
SURROGATE_SCALE_DEFAULT = 2.5
SURROGATE_PHASES_DEFAULT = (0.0, 2.399963229728653, 4.799926459457306,
                            0.916702677668238, 3.316665907396891, 5.716629137125544)


def build_unbounded_surrogate_h(bc,
                                level: int,
                                grid,
                                preset: str = "golden",
                                scale: float = SURROGATE_SCALE_DEFAULT,
                                phases: tuple[float, ...] | None = None) -> LinearCoefficientSpec:
    """Zero-mean base coefficient whose primitive's partial sups grow linearly
    in the truncation level.

    Term j rotates along the flow at the small divisor d_j = q_j*w2 - p_j*w1
    of the golden frequency's j-th convergent and carries amplitude
    scale * j * |d_j|, so its primitive contributes amplitude scale*j/(2*pi):
    the deeper the truncation, the larger the excursions of the log-cocycle.
    Any finite level is still (technically) a coboundary; the growth of the
    partial amplitude sums is logged to document how the truncation approaches
    the genuinely unbounded regime.
    """
    from .solver import first_eigenpair

    if preset != "golden":
        raise ConfigurationError(
            "the unbounded-primitive surrogate needs the golden preset "
            f"(continued-fraction data), got {preset!r}")
    if level < 0:
        raise ValidationError("truncation level must be >= 0")
    omega = preset_frequencies(preset)
    gamma0, _ = first_eigenpair(grid, bc)
    if phases is None:
        phases = SURROGATE_PHASES_DEFAULT
    if len(phases) < level:
        raise ValidationError(f"need at least {level} phases, got {len(phases)}")

    modes, amps, phs = [], [], []
    partial = 0.0
    for j, (pj, qj) in enumerate(golden_convergents(level), start=1):
        divisor = qj * omega[1] - pj * omega[0]
        modes.append((-pj, qj))  # argument q_j*th2 - p_j*th1: flow rate = divisor
        amps.append(scale * j * abs(divisor))
        phs.append(float(phases[j - 1]))
        partial += scale * j / TWO_PI
        log.info("surrogate term %d: convergent %d/%d, divisor %+.6f, "
                 "primitive amplitude %.4f, partial amplitude sum %.4f",
                 j, pj, qj, divisor, scale * j / TWO_PI, partial)
    base = TrigPoly(tuple(modes), tuple(amps), tuple(phs)) if modes else EMPTY_TRIG
    return LinearCoefficientSpec(base_part=base, space_part=(),
                                 constant_shift=float(gamma0), potential=None)


def surrogate_primitive(level: int,
                        scale: float = SURROGATE_SCALE_DEFAULT,
                        phases: tuple[float, ...] | None = None,
                        preset: str = "golden") -> TrigPoly:
    """Analytic primitive along the flow of the surrogate's base part.

    Integrating a_j sin(u_j(t) + phase) with argument rate du_j/dt = 2*pi*d_j
    gives -(a_j / (2*pi*d_j)) cos(u_j + phase), i.e. amplitude
    a_j/(2*pi*d_j) = scale*j*sign(d_j)/(2*pi) with the phase retarded by
    pi/2 (since -cos x = sin(x - pi/2)). Used for growth logging and as an
    oracle in tests (it is the exact log-cocycle potential of the truncated
    sum).
    """
    if preset != "golden":
        raise ConfigurationError("surrogate primitive defined for golden preset only")
    omega = preset_frequencies(preset)
    if phases is None:
        phases = SURROGATE_PHASES_DEFAULT
    modes, amps, phs = [], [], []
    for j, (pj, qj) in enumerate(golden_convergents(level), start=1):
        divisor = qj * omega[1] - pj * omega[0]
        modes.append((-pj, qj))
        amps.append(scale * j * abs(divisor) / (TWO_PI * divisor))
        phs.append(float(phases[j - 1]) - 0.5 * math.pi)
    return TrigPoly(tuple(modes), tuple(amps), tuple(phs)) if modes else EMPTY_TRIG


def calibrate_zero_exponent(spec: LinearCoefficientSpec, cfg) -> LinearCoefficientSpec:
    """Shift the constant part so the measured upper Lyapunov exponent is ~0.

    Uses the additivity of the exponent in constant shifts: measure lambda,
    subtract it. cfg is a CocycleConfig (grid, bc, horizons, tolerances).
    Raises CalibrationError when the exponent estimate has not converged
    (relative change beyond tolerance when the horizon doubles).
    """
    from .cocycle import lyapunov_exponent
    from .errors import CalibrationError

    p0 = BasePoint((0.37, 0.81), cfg.omega)
    est = lyapunov_exponent(p0, spec, cfg.bc, cfg.T_exponent, cfg)
    if est.convergence_gap > cfg.calibration_gap_tol:
        raise CalibrationError(
            "exponent estimate not converged while calibrating",
            diagnostics={"value": est.value, "horizon": est.horizon,
                         "convergence_gap": est.convergence_gap,
                         "gap_tol": cfg.calibration_gap_tol})
    return replace(spec, constant_shift=spec.constant_shift - est.value)
