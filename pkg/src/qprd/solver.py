"""Finite-difference spatial operator on [0,1], first eigenpair, and the
order-preserving time stepper.

Discretization: n_cells+1 nodes, second differences, Neumann/Robin boundary
rows by ghost-point elimination. Time stepping splits each step into
(i) an exponential factor for the pointwise linear term, with the
time-dependent coefficient averaged over the step by 2-point Gauss-Legendre
quadrature, (ii) an implicit solve of the odd cubic reaction (bracketed
Newton, exact on the dead zone), and (iii) backward-Euler diffusion via a
precomputed tridiagonal factorization, rescaled so the principal mode decays
by exactly exp(-dt*gamma0) per step. Every substep maps ordered states to
ordered states, so the discrete comparison principle holds by construction.

The inner loops live in qprd.kernels (compiled when available, numpy
fallback otherwise); this module owns the coefficient tables, stability
bound, and chunked drivers.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .baseflow import BasePoint, advance
from .coeffs import (LinearCoefficientSpec, NonlinearitySpec, eval_stiffness,
                     profile_values)
from .errors import (BlowupError, NumericalError, PreconditionError,
                     ValidationError)

#: Hard ceiling on sup|y| before a trajectory is declared blown up.
BLOWUP_SUP = 1e12

#: Steps per kernel call when no finer record boundary is requested.
CHUNK_CAP = 4096


# --------------------------------------------------------------------------
# grid and boundary conditions


@dataclass(frozen=True)
class Grid:
    """Uniform grid on [0,1] with n_cells intervals (n_cells+1 nodes)."""

    n_cells: int

    def __post_init__(self):
        if not isinstance(self.n_cells, int) or self.n_cells < 8:
            raise ValidationError(f"n_cells must be an integer >= 8, got {self.n_cells}")

    @property
    def spacing(self) -> float:
        return 1.0 / self.n_cells

    @property
    def n_nodes(self) -> int:
        return self.n_cells + 1

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_cells + 1)


@dataclass(frozen=True)
class BoundaryCondition:
    """Neumann or Robin data for both endpoints.

    Robin means dy/dn + alpha*y = 0 with alpha >= 0; alpha_right defaults to
    alpha, allowing distinct endpoint coefficients.
    """

    kind: str
    alpha: float = 0.0
    alpha_right: float | None = None

    def __post_init__(self):
        if self.kind not in ("neumann", "robin"):
            raise ValidationError(f"bc kind must be 'neumann' or 'robin', got {self.kind!r}")
        if self.kind == "neumann" and (self.alpha != 0.0 or self.alpha_right not in (None, 0.0)):
            raise ValidationError("neumann bc requires alpha = 0")
        ar = self.alpha if self.alpha_right is None else self.alpha_right
        if self.alpha < 0 or ar < 0:
            raise ValidationError("robin coefficients must be >= 0")

    @property
    def a_left(self) -> float:
        return self.alpha

    @property
    def a_right(self) -> float:
        return self.alpha if self.alpha_right is None else self.alpha_right


NEUMANN = BoundaryCondition("neumann")


@dataclass(frozen=True)
class ProblemSpec:
    """One reaction-diffusion problem: y_t = y_xx + (gamma + h)y + g."""

    h: LinearCoefficientSpec
    g: NonlinearitySpec | None
    gamma: float
    bc: BoundaryCondition

    def __post_init__(self):
        if not math.isfinite(self.gamma):
            raise ValidationError("gamma must be finite")


# --------------------------------------------------------------------------
# spatial operator


class TridiagonalOperator:
    """Second-difference operator with ghost-point boundary rows."""

    __slots__ = ("low", "diag", "up", "n_nodes")

    def __init__(self, low: np.ndarray, diag: np.ndarray, up: np.ndarray):
        self.low = low
        self.diag = diag
        self.up = up
        self.n_nodes = diag.shape[0]

    def apply(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        out = self.diag * z
        out[:-1] += self.up[:-1] * z[1:]
        out[1:] += self.low[1:] * z[:-1]
        return out

    def dense(self) -> np.ndarray:
        n = self.n_nodes
        m = np.zeros((n, n))
        idx = np.arange(n)
        m[idx, idx] = self.diag
        m[idx[:-1], idx[:-1] + 1] = self.up[:-1]
        m[idx[1:], idx[1:] - 1] = self.low[1:]
        return m


def build_operator(grid: Grid, bc: BoundaryCondition) -> TridiagonalOperator:
    """Discrete Laplacian rows; boundary rows eliminate the ghost values
    y_{-1} = y_1 - 2*spacing*alpha*y_0 (and mirrored on the right)."""
    n = grid.n_nodes
    h = grid.spacing
    inv_h2 = 1.0 / (h * h)
    low = np.full(n, inv_h2)
    diag = np.full(n, -2.0 * inv_h2)
    up = np.full(n, inv_h2)
    low[0] = 0.0
    up[-1] = 0.0
    up[0] = 2.0 * inv_h2
    low[-1] = 2.0 * inv_h2
    diag[0] = -2.0 * (1.0 + h * bc.a_left) * inv_h2
    diag[-1] = -2.0 * (1.0 + h * bc.a_right) * inv_h2
    return TridiagonalOperator(low, diag, up)


def _thomas(low, diag, up, b):
    """Plain tridiagonal solve (setup-time use only; kernels have their own)."""
    n = diag.shape[0]
    cp = np.empty(n)
    zp = np.empty(n)
    cp[0] = up[0] / diag[0]
    zp[0] = b[0] / diag[0]
    for i in range(1, n):
        den = diag[i] - low[i] * cp[i - 1]
        cp[i] = up[i] / den
        zp[i] = (b[i] - low[i] * zp[i - 1]) / den
    x = np.empty(n)
    x[-1] = zp[-1]
    for i in range(n - 2, -1, -1):
        x[i] = zp[i] - cp[i] * x[i + 1]
    return x


@functools.lru_cache(maxsize=64)
def first_eigenpair(grid: Grid, bc: BoundaryCondition) -> tuple[float, np.ndarray]:
    """Principal eigenvalue gamma0 >= 0 of minus the discrete operator and its
    positive eigenfield, sup-norm one.

    Neumann short-circuits to (0, constants). Robin uses inverse power
    iteration (shift 0: the operator is negative definite, and the eigenvalue
    nearest zero is the principal one), with the Rayleigh quotient taken in
    the trapezoid inner product that symmetrizes the ghost-point rows.
    """
    if bc.kind == "neumann":
        return 0.0, np.ones(grid.n_nodes)
    op = build_operator(grid, bc)
    w = np.full(grid.n_nodes, grid.spacing)
    w[0] *= 0.5
    w[-1] *= 0.5
    z = np.ones(grid.n_nodes)
    mu_old = math.inf
    for _ in range(500):
        z = _thomas(op.low, op.diag, op.up, z)
        z /= np.max(np.abs(z))
        az = op.apply(z)
        mu = float(np.dot(w, z * az) / np.dot(w, z * z))
        if abs(mu - mu_old) <= 1e-13 * max(1.0, abs(mu)):
            resid = float(np.max(np.abs(az - mu * z)))
            if resid <= 1e-9 * max(1.0, abs(mu)):
                break
        mu_old = mu
    else:
        raise NumericalError("inverse power iteration did not converge in 500 sweeps")
    gamma0 = -mu
    i = int(np.argmax(np.abs(z)))
    e0 = z / z[i]
    if not np.all(e0 > 0):
        raise NumericalError("principal eigenfield failed strict positivity")
    e0.setflags(write=False)
    return float(gamma0), e0


# --------------------------------------------------------------------------
# stability bound


def _largest_equilibrium(c_plus: float, k_lo: float, r0: float) -> float:
    """Largest root of k_lo*(Y-r0)^3 = c_plus*Y (bisection; Y >= r0)."""
    if c_plus <= 0.0:
        return r0
    hi = r0 + 1.0
    while k_lo * (hi - r0) ** 3 < c_plus * hi:
        hi *= 2.0
        if hi > 1e12:
            raise NumericalError("dissipativity box unbounded; stiffness too small")
    lo = r0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if k_lo * (mid - r0) ** 3 < c_plus * mid:
            lo = mid
        else:
            hi = mid
    return hi


def invariant_box(prob: ProblemSpec) -> float:
    """Y_box: twice the largest equilibrium amplitude of the scalar envelope
    gamma + sup h + g(y)/y = 0, computed with the worst-case coefficient
    bounds. Trajectories starting inside |y| <= Y_box stay there."""
    if prob.g is None:
        raise ValidationError("invariant box defined for nonlinear problems only")
    h_sup = prob.gamma + prob.h.sup_bound()
    k_lo, _ = prob.g.stiffness_bounds()
    if k_lo <= 0:
        raise ValidationError("stiffness lower bound must be positive")
    y_eq = _largest_equilibrium(max(h_sup, 0.0), k_lo, prob.g.r0)
    return 2.0 * y_eq


def dt_max(prob: ProblemSpec) -> float:
    """Largest admissible step: 0.5 / (sup|gamma+h| + Lip(g) over the box)."""
    lin = abs(prob.gamma) + prob.h.sup_bound()
    lip = 0.0
    if prob.g is not None:
        _, k_hi = prob.g.stiffness_bounds()
        y_box = invariant_box(prob)
        lip = 3.0 * k_hi * (y_box - prob.g.r0) ** 2
    total = lin + lip
    if total == 0.0:
        return math.inf
    return 0.5 / total


# --------------------------------------------------------------------------
# propagator: tables + kernel dispatch


def _h_tables(h: LinearCoefficientSpec, x: np.ndarray):
    """Flatten base and space terms of h into parallel arrays; a term's
    profile row is ones when it has no x dependence."""
    m1, m2, amp, ph, prof = [], [], [], [], []
    bp = h.base_part
    for (a1, a2), a, f in zip(bp.modes, bp.amps, bp.phases):
        m1.append(a1)
        m2.append(a2)
        amp.append(a)
        ph.append(f)
        prof.append(None)
    for term in h.space_part:
        m1.append(term.mode[0])
        m2.append(term.mode[1])
        amp.append(term.amp)
        ph.append(term.phase)
        prof.append(profile_values(term.profile, x))
    x_dep = any(p is not None for p in prof)
    if x_dep:
        rows = [np.ones_like(x) if p is None else p for p in prof]
        prof_arr = np.array(rows, dtype=float) if rows else np.zeros((0, x.size))
    else:
        prof_arr = None
    return (np.array(m1, dtype=np.int32), np.array(m2, dtype=np.int32),
            np.array(amp, dtype=float), np.array(ph, dtype=float), prof_arr)


def _stiff_tables(g: NonlinearitySpec, x: np.ndarray):
    m1, m2, amp, ph, prof = [], [], [], [], []
    if g.stiff_torus is not None:
        for (a1, a2), a, f in zip(g.stiff_torus.modes, g.stiff_torus.amps,
                                  g.stiff_torus.phases):
            m1.append(a1)
            m2.append(a2)
            amp.append(a)
            ph.append(f)
            prof.append(None)
    if g.stiff_space is not None:
        t = g.stiff_space
        m1.append(t.mode[0])
        m2.append(t.mode[1])
        amp.append(t.amp)
        ph.append(t.phase)
        prof.append(profile_values(t.profile, x))
    x_dep = any(p is not None for p in prof)
    if x_dep:
        rows = [np.ones_like(x) if p is None else p for p in prof]
        prof_arr = np.array(rows, dtype=float) if rows else np.zeros((0, x.size))
    else:
        prof_arr = None
    return (np.array(m1, dtype=np.int32), np.array(m2, dtype=np.int32),
            np.array(amp, dtype=float), np.array(ph, dtype=float), prof_arr)


class Propagator:
    """Precomputed stepping data for one (problem, grid, dt, omega) tuple.

    Builds the coefficient tables and the backward-Euler factorization once;
    `run` advances a state in place through an integer number of steps with a
    single kernel call per chunk.
    """

    def __init__(self, prob: ProblemSpec, grid: Grid, dt: float,
                 omega: tuple[float, float]):
        if not (dt > 0 and math.isfinite(dt)):
            raise ValidationError(f"dt must be positive and finite, got {dt}")
        bound = dt_max(prob)
        if dt > bound * (1.0 + 1e-12):
            raise PreconditionError(
                f"dt = {dt:g} exceeds the order-preservation bound dt_max = {bound:g}")
        if prob.g is not None and prob.g.stiffness_bounds()[0] <= 0:
            raise ValidationError(
                "nonlinearity stiffness may reach zero; raise stiff_const")
        self.prob = prob
        self.grid = grid
        self.dt = float(dt)
        self.omega = (float(omega[0]), float(omega[1]))
        x = grid.nodes
        gamma0, _ = first_eigenpair(grid, prob.bc)
        self.gamma0 = gamma0

        hm1, hm2, hamp, hph, hprof = _h_tables(prob.h, x)
        lin0 = prob.gamma + prob.h.constant_shift
        if prob.g is not None:
            sm1, sm2, samp, sph, sprof = _stiff_tables(prob.g, x)
            has_g, r0, st0 = True, prob.g.r0, prob.g.stiff_const
        else:
            sm1 = np.zeros(0, dtype=np.int32)
            sm2 = np.zeros(0, dtype=np.int32)
            samp = np.zeros(0)
            sph = np.zeros(0)
            sprof = None
            has_g, r0, st0 = False, 1.0, 0.0

        op = build_operator(grid, prob.bc)
        low = -dt * op.low
        diag = 1.0 - dt * op.diag
        up = -dt * op.up
        kappa = (1.0 + dt * gamma0) * math.exp(-dt * gamma0)

        self.tables = {
            "n_nodes": grid.n_nodes,
            "dt": self.dt,
            "om1": self.omega[0],
            "om2": self.omega[1],
            "lin0": float(lin0),
            "h_m1": hm1, "h_m2": hm2, "h_amp": hamp, "h_ph": hph, "h_prof": hprof,
            "has_g": has_g, "r0": float(r0), "st0": float(st0),
            "s_m1": sm1, "s_m2": sm2, "s_amp": samp, "s_ph": sph, "s_prof": sprof,
            "low": low, "diag": diag, "up": up,
            "kappa": float(kappa),
        }
        self._state = kernels.impl.prepare(self.tables)

    def run(self, y: np.ndarray, p: BasePoint, nsteps: int) -> BasePoint:
        """Advance y in place by nsteps steps from base point p; returns the
        advanced base point. Chunked so resolution of the torus position is
        refreshed between kernel calls."""
        done = 0
        while done < nsteps:
            take = min(CHUNK_CAP, nsteps - done)
            kernels.impl.step_chunk(self._state, y, p.theta[0], p.theta[1], take)
            if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > BLOWUP_SUP:
                raise BlowupError(
                    f"state blew up after {done + take} steps (dt = {self.dt:g})")
            p = advance(p, take * self.dt)
            done += take
        return p


@functools.lru_cache(maxsize=32)
def _cached_propagator(prob: ProblemSpec, grid: Grid, dt: float,
                       omega: tuple[float, float]) -> Propagator:
    return Propagator(prob, grid, dt, omega)


def _grid_for(state: np.ndarray) -> Grid:
    return Grid(state.shape[0] - 1)


# --------------------------------------------------------------------------
# public stepping API


def step(state: np.ndarray, p: BasePoint, t_now: float, dt: float,
         prob: ProblemSpec) -> np.ndarray:
    """One time step. t_now is accepted for interface symmetry; the driving
    coefficients depend on time only through p, which the caller advances."""
    state = np.asarray(state, dtype=float)
    if not np.all(np.isfinite(state)):
        raise BlowupError("non-finite state passed to step")
    prop = _cached_propagator(prob, _grid_for(state), dt, p.omega)
    y = state.copy()
    prop.run(y, p, 1)
    return y


def _n_steps(T: float, dt: float) -> int:
    n = int(math.ceil(T / dt - 1e-9))
    return max(n, 0)


def evolve(p: BasePoint, z0: np.ndarray, T: float, prob: ProblemSpec,
           dt: float) -> np.ndarray:
    """Forward orbit of the full problem: ceil(T/dt) steps, base point advanced
    alongside. The final step is shortened when T is not a step multiple, so
    the return is the state at time T (and exactly z0 when T = 0)."""
    if T < 0:
        raise ValidationError(f"T must be >= 0, got {T}")
    z0 = np.asarray(z0, dtype=float)
    y = z0.copy()
    if T == 0:
        return y
    grid = _grid_for(z0)
    n = _n_steps(T, dt)
    n_full = int(math.floor(T / dt + 1e-9))
    rem = T - n_full * dt
    prop = _cached_propagator(prob, grid, dt, p.omega)
    p = prop.run(y, p, n_full)
    if n > n_full and rem > 1e-12:
        prop_rem = _cached_propagator(prob, grid, rem, p.omega)
        prop_rem.run(y, p, 1)
    return y


def evolve_linear(p: BasePoint, z0: np.ndarray, T: float,
                  h: LinearCoefficientSpec, bc: BoundaryCondition,
                  dt: float) -> np.ndarray:
    """Forward orbit of the linear problem (g = None, gamma = 0); linear in z0.

    No renormalization: callers tracking long horizons should use the cocycle
    module, which accumulates log norms chunk by chunk.
    """
    prob = ProblemSpec(h=h, g=None, gamma=0.0, bc=bc)
    return evolve(p, z0, T, prob, dt)


# --------------------------------------------------------------------------
# trajectory export


def dump_trajectory(path, times, states, *, grid: Grid, dt: float,
                    bc: BoundaryCondition, config_hash: str = "unset") -> None:
    """CSV dump: one row per record time, columns t, node_0 ... node_n.

    The header comment pins the discretization so a reader can reproduce it.
    """
    states = np.asarray(states, dtype=float)
    n = states.shape[1]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# n_cells={grid.n_cells} dt={dt:g} bc={bc.kind}"
                 f" alpha={bc.a_left:g} alpha_right={bc.a_right:g}"
                 f" config_hash={config_hash}\n")
        fh.write("t," + ",".join(f"node_{i}" for i in range(n)) + "\n")
        for t, row in zip(times, states):
            fh.write(f"{t:.6f}," + ",".join(f"{v:.12g}" for v in row) + "\n")
