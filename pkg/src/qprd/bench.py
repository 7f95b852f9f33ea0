"""Stepping-kernel benchmark: the compiled core against the pure-numpy
fallback on one representative mixed problem (quasi-periodic base terms, a
spatial term, the cubic nonlinearity), with an agreement check.

Run as `python -m qprd.bench [--n-cells N] [--steps K]`.
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from . import kernels
from .baseflow import make_point, preset_frequencies
from .coeffs import (LinearCoefficientSpec, NonlinearitySpec, SpaceTerm,
                     TrigPoly)
from .solver import NEUMANN, Grid, ProblemSpec, Propagator, dt_max


def _implementations():
    impls = {}
    from .kernels import pyref
    impls["fallback"] = pyref
    try:
        from .kernels import _core
        impls["compiled"] = _core
    except ImportError:
        pass
    return impls


def run(n_cells: int, steps: int) -> int:
    grid = Grid(n_cells)
    h = LinearCoefficientSpec(
        base_part=TrigPoly(((1, 0), (0, 1)), (0.4, 0.3), (0.0, 1.0)),
        space_part=(SpaceTerm((1, 1), 0.2, "sin_pi"),),
    )
    g = NonlinearitySpec(r0=1.0, stiff_const=50.0)
    prob = ProblemSpec(h=h, g=g, gamma=0.0, bc=NEUMANN)
    dt = min(1e-3, 0.45 * dt_max(prob))
    omega = preset_frequencies("golden")
    prop = Propagator(prob, grid, dt, omega)
    p = make_point((0.2, 0.7), omega)
    x = grid.nodes
    y0 = 0.5 + 0.4 * np.sin(np.pi * x)

    impls = _implementations()
    print(f"problem: n_cells={n_cells} dt={dt:g} steps={steps} "
          f"(active impl: {kernels.IMPL_NAME})")
    print(f"{'impl':<10} {'total s':>10} {'us/step':>10}")
    finals = {}
    for name, mod in impls.items():
        state = mod.prepare(prop.tables)
        y = y0.copy()
        mod.step_chunk(state, y, p.theta[0], p.theta[1], 100)  # warm up
        y = y0.copy()
        t0 = time.perf_counter()
        mod.step_chunk(state, y, p.theta[0], p.theta[1], steps)
        wall = time.perf_counter() - t0
        finals[name] = y
        print(f"{name:<10} {wall:>10.3f} {1e6 * wall / steps:>10.3f}")
    if len(finals) == 2:
        diff = float(np.max(np.abs(finals["compiled"] - finals["fallback"])))
        print(f"max |compiled - fallback| after {steps} steps: {diff:.3e}")
    else:
        print("compiled kernel not available; fallback only "
              "(build with `pip install -e .`)")
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="python -m qprd.bench",
                                 description=__doc__.splitlines()[0])
    ap.add_argument("--n-cells", type=int, default=64)
    ap.add_argument("--steps", type=int, default=50000)
    args = ap.parse_args(argv)
    return run(args.n_cells, args.steps)


if __name__ == "__main__":
    sys.exit(main())
