import numpy as np
import pytest

from qprd.baseflow import make_point
from qprd.coeffs import LinearCoefficientSpec, NonlinearitySpec, TrigPoly, SpaceTerm
from qprd.solver import Grid, NEUMANN, ProblemSpec


@pytest.fixture
def p0():
    """A fixed, nothing-special base point on the golden-ratio flow."""
    return make_point((0.2, 0.3), "golden")


@pytest.fixture
def quasi_h():
    """A small quasi-periodic coefficient exercising both torus angles and x."""
    base = TrigPoly(((1, 0), (0, 1)), (0.4, 0.3), (0.0, 1.0))
    space = (SpaceTerm((1, 1), 0.2, "sin_pi"),)
    return LinearCoefficientSpec(base_part=base, space_part=space)


@pytest.fixture
def cubic_g():
    return NonlinearitySpec(r0=1.0, stiff_const=100.0)


@pytest.fixture
def small_prob(quasi_h, cubic_g):
    """Full nonlinear problem on a coarse grid; dt safety checked by Propagator."""
    return ProblemSpec(gamma=0.0, h=quasi_h, g=cubic_g, bc=NEUMANN)


def random_field(rng, n_nodes, scale=1.0):
    return scale * (2.0 * rng.random(n_nodes) - 1.0)
