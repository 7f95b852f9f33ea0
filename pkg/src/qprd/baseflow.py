"""Irrational rotation on the 2-torus: the driving flow and its averages.

Every experiment is driven by p.t = (theta + omega*t) mod 1 for a fixed
frequency pair omega with rationally independent components. The flow is
minimal and uniquely ergodic with Lebesgue measure as the invariant measure,
so time averages of continuous observables converge from every starting point
and sampling "almost every p" means sampling uniformly on [0,1)^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import EvaluationError, ValidationError

#: Named frequency pairs. "golden" is (1, golden mean - 1): the fractional
#: part has the slowest-converging continued fraction of all irrationals,
#: which is what the unbounded-primitive surrogate construction relies on.
FREQUENCY_PRESETS: dict[str, tuple[float, float]] = {
    "golden": (1.0, 0.6180339887498949),
    "sqrt2": (1.0, 0.41421356237309515),
}


@dataclass(frozen=True, slots=True)
class BasePoint:
    """A point of the driving torus together with its rotation frequencies.

    theta: coordinates in [0,1)^2.
    omega: frequency pair (per unit time); carried along so that advancing a
        point never needs extra context.
    """

    theta: tuple[float, float]
    omega: tuple[float, float]

    def __post_init__(self):
        t1, t2 = self.theta
        if not (0.0 <= t1 < 1.0 and 0.0 <= t2 < 1.0):
            raise ValidationError(f"theta must lie in [0,1)^2, got {self.theta}")
        if not all(math.isfinite(w) for w in self.omega):
            raise ValidationError(f"omega must be finite, got {self.omega}")


def make_point(theta: tuple[float, float],
               omega: tuple[float, float] | str = "golden") -> BasePoint:
    """Build a BasePoint, accepting a preset name in place of frequencies."""
    if isinstance(omega, str):
        omega = preset_frequencies(omega)
    return BasePoint((float(theta[0]) % 1.0, float(theta[1]) % 1.0),
                     (float(omega[0]), float(omega[1])))


def preset_frequencies(name: str) -> tuple[float, float]:
    try:
        return FREQUENCY_PRESETS[name]
    except KeyError:
        raise ValidationError(
            f"unknown frequency preset {name!r}; known: {sorted(FREQUENCY_PRESETS)}"
        ) from None


def advance(p: BasePoint, t: float) -> BasePoint:
    """Flow the base point for time t (either sign): (theta + omega*t) mod 1."""
    if t == 0.0:
        return p
    th1 = (p.theta[0] + p.omega[0] * t) % 1.0
    th2 = (p.theta[1] + p.omega[1] * t) % 1.0
    # % can return 1.0 when the argument is a hair below an integer
    if th1 >= 1.0:
        th1 = 0.0
    if th2 >= 1.0:
        th2 = 0.0
    return BasePoint((th1, th2), p.omega)


def _circle_distance(a: float, b: float) -> float:
    d = abs(a - b) % 1.0
    return min(d, 1.0 - d)


def torus_distance(p: BasePoint | tuple[float, float],
                   q: BasePoint | tuple[float, float]) -> float:
    """Max of the per-coordinate circular distances."""
    ta = p.theta if isinstance(p, BasePoint) else p
    tb = q.theta if isinstance(q, BasePoint) else q
    return max(_circle_distance(ta[0], tb[0]), _circle_distance(ta[1], tb[1]))


Observable = Callable[[BasePoint], float]


def ergodic_average(f: Observable, p: BasePoint, T: float, dt: float) -> float:
    """Left-endpoint Birkhoff average (1/N) sum f(p.(k dt)), N = floor(T/dt).

    For fixed continuous f this converges, as T grows, to the torus average of
    f, independently of p (unique ergodicity). Raises EvaluationError naming
    the offending time if f returns a non-finite value.
    """
    if T <= 0 or dt <= 0 or dt > T:
        raise ValidationError(f"need 0 < dt <= T, got T={T}, dt={dt}")
    n = int(T / dt)
    total = 0.0
    for k in range(n):
        t = k * dt
        v = f(advance(p, t))
        if not math.isfinite(v):
            raise EvaluationError(f"observable returned {v} at t={t}", time=t)
        total += v
    return total / n


def sample_base(n: int, seed: int,
                omega: tuple[float, float] | str = "golden") -> list[BasePoint]:
    """n base points drawn uniformly on the torus; deterministic per seed."""
    if n < 0:
        raise ValidationError(f"sample count must be >= 0, got {n}")
    if isinstance(omega, str):
        omega = preset_frequencies(omega)
    rng = np.random.Generator(np.random.PCG64(seed))
    pts = rng.random((n, 2))
    return [BasePoint((float(a), float(b)), omega) for a, b in pts]
