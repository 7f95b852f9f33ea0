import math
from dataclasses import replace

import numpy as np
import pytest

from qprd.baseflow import advance, make_point
from qprd.cocycle import (CocycleConfig, CocycleTrace, backward_sup,
                          classify_boundedness, cocycle_trace,
                          estimate_principal_direction, format_exponent_report,
                          lyapunov_exponent, recurrence_times, write_trace_csv)
from qprd.coeffs import (LinearCoefficientSpec, SpaceTerm, TrigPoly,
                         build_coboundary_h, build_unbounded_surrogate_h)
from qprd.errors import PreconditionError, ValidationError
from qprd.solver import (NEUMANN, BoundaryCondition, Grid, first_eigenpair)

H0 = LinearCoefficientSpec()
ROBIN1 = BoundaryCondition("robin", 1.0)

CFG8 = CocycleConfig(grid=Grid(8), dt=5e-3, dt_rec=0.1, T_spin=10.0)


def coboundary_spec(amp=1.0, grid=Grid(8)):
    return build_coboundary_h(TrigPoly(((0, 1),), (amp,), (0.0,)), NEUMANN, grid)


# --------------------------------------------------------------------------
# config and trace plumbing


def test_config_record_arithmetic():
    assert CFG8.steps_per_record() == 20
    bad = CocycleConfig(grid=Grid(8), dt=3e-3, dt_rec=0.1)
    with pytest.raises(ValidationError):
        bad.steps_per_record()


def test_trace_invariants():
    t = np.array([0.0, 0.1])
    with pytest.raises(ValidationError):
        CocycleTrace(make_point((0, 0)), t, np.array([0.5, 0.6]), 10.0)
    with pytest.raises(ValidationError):
        CocycleTrace(make_point((0, 0)), t, np.zeros(3), 10.0)


def test_trace_requires_valid_horizon(p0):
    with pytest.raises(ValidationError):
        cocycle_trace(p0, H0, NEUMANN, -1.0, CFG8)
    with pytest.raises(ValidationError):
        cocycle_trace(p0, H0, NEUMANN, 0.05, CFG8)  # below one record


# --------------------------------------------------------------------------
# principal direction


def test_principal_direction_autonomous_robin(p0):
    cfg = CocycleConfig(grid=Grid(32), dt=2e-3, dt_rec=0.1, T_spin=10.0)
    e_hat = estimate_principal_direction(p0, H0, ROBIN1, 20.0, cfg)
    _, e0 = first_eigenpair(Grid(32), ROBIN1)
    np.testing.assert_allclose(e_hat, e0, atol=1e-6)
    assert np.all(e_hat > 0)


def test_principal_direction_flat_for_x_independent_neumann(p0):
    # x-independent coefficient + Neumann: the direction is the constant field
    h = coboundary_spec()
    e_hat = estimate_principal_direction(p0, h, NEUMANN, 10.0, CFG8)
    np.testing.assert_allclose(e_hat, 1.0, atol=1e-12)


# --------------------------------------------------------------------------
# exponents


def test_autonomous_exponent_is_minus_gamma0(p0):
    # kappa-rescaled backward Euler contracts the principal mode by exactly
    # exp(-dt*gamma0) per step, so the measured exponent equals -gamma0 of
    # the discrete operator to rounding, not merely to O(dt)
    cfg = CocycleConfig(grid=Grid(32), dt=2e-3, dt_rec=0.1, T_spin=10.0)
    est = lyapunov_exponent(p0, H0, ROBIN1, 200.0, cfg)
    g0, _ = first_eigenpair(Grid(32), ROBIN1)
    assert est.value == pytest.approx(-g0, abs=1e-9)
    assert est.convergence_gap < 1e-9
    assert est.horizon == 200.0


def test_exponent_additive_in_constant_shifts(p0, quasi_h):
    cfg = CocycleConfig(grid=Grid(16), dt=1e-3, dt_rec=0.1, T_spin=10.0)
    base = lyapunov_exponent(p0, quasi_h, NEUMANN, 100.0, cfg)
    for c in (-1.0, 0.5, 2.0):
        shifted = replace(quasi_h, constant_shift=quasi_h.constant_shift + c)
        est = lyapunov_exponent(p0, shifted, NEUMANN, 100.0, cfg)
        assert est.value - base.value == pytest.approx(c, abs=1e-10)


def test_exponent_convergence_gap_is_honest(p0):
    # coboundary + 0.5: exponent 0.5 with oscillation/T error; the gap must
    # bound the distance between the half- and full-horizon estimates
    h = replace(coboundary_spec(), constant_shift=0.5)
    est = lyapunov_exponent(p0, h, NEUMANN, 400.0, CFG8)
    assert est.value == pytest.approx(0.5, abs=2e-2)
    assert est.convergence_gap <= 4.0 / 400.0


# --------------------------------------------------------------------------
# coboundary oracle: the log-cocycle is K(p.t) - K(p)


def test_coboundary_trace_matches_potential_difference():
    h = coboundary_spec()
    K = h.potential
    rng = np.random.default_rng(11)
    for _ in range(2):
        p = make_point((float(rng.random()), float(rng.random())))
        tr = cocycle_trace(p, h, NEUMANN, 200.0, CFG8)
        want = np.array([K(advance(p, float(t))) - K(p) for t in tr.times])
        assert float(np.max(np.abs(tr.log_c - want))) < 1e-3


def test_backward_sup_matches_potential_max(p0):
    h = coboundary_spec()
    K = h.potential
    T = 200.0
    bs = backward_sup(p0, h, NEUMANN, T, CFG8)
    times = np.arange(0, int(T / 0.1) + 1) * 0.1
    want = max(float(K(advance(p0, -float(t)))) for t in times) - float(K(p0))
    assert bs == pytest.approx(want, abs=0.05)
    assert bs >= -1e-12


def test_backward_sup_guard_rejects_off_critical(p0):
    h = replace(coboundary_spec(), constant_shift=0.5)
    with pytest.raises(PreconditionError):
        backward_sup(p0, h, NEUMANN, 400.0, CFG8)


# --------------------------------------------------------------------------
# boundedness classification


def test_classify_bounded_coboundary(p0):
    cfg = replace(CFG8, T_max=250.0, M_bound=3.0)
    assert classify_boundedness(p0, coboundary_spec(), NEUMANN, cfg) == "Bounded"


def test_classify_unbounded_surrogate():
    h = build_unbounded_surrogate_h(NEUMANN, 6, Grid(8))
    cfg = CocycleConfig(grid=Grid(8), dt=0.025, dt_rec=0.5, T_spin=10.0,
                        T_max=2000.0, M_bound=3.0)
    p = make_point((0.2, 0.3))
    assert classify_boundedness(p, h, NEUMANN, cfg) == "Unbounded"


def test_classify_one_sided_crossing_is_inconclusive():
    # start at the potential's minimum: excursions go up but never down,
    # so a threshold between the one-sided ranges stays one-sided forever
    h = coboundary_spec()
    p = make_point((0.13, 0.75))  # K(p) = sin(2*pi*0.75) = -1
    cfg = replace(CFG8, T_max=250.0, M_bound=1.5)
    assert classify_boundedness(p, h, NEUMANN, cfg) == "Inconclusive"


def test_classify_guard_rejects_off_critical(p0):
    h = replace(coboundary_spec(), constant_shift=0.5)
    cfg = replace(CFG8, T_max=100.0)
    with pytest.raises(PreconditionError):
        classify_boundedness(p0, h, NEUMANN, cfg)


# --------------------------------------------------------------------------
# recurrence and export


def test_recurrence_times_monotone_in_eps(p0):
    tr = cocycle_trace(p0, coboundary_spec(), NEUMANN, 100.0, CFG8)
    few = recurrence_times(tr, 0.01)
    many = recurrence_times(tr, 0.2)
    assert 0.0 in few
    assert set(few) <= set(many)
    assert len(many) > len(few)
    with pytest.raises(ValidationError):
        recurrence_times(tr, 0.0)


def test_trace_csv_and_report(tmp_path, p0):
    tr = cocycle_trace(p0, coboundary_spec(), NEUMANN, 5.0, CFG8)
    path = tmp_path / "trace.csv"
    write_trace_csv(tr, path, version="9.9.9", config_hash="beef", seed=7)
    lines = path.read_text().splitlines()
    assert lines[0] == "# version=9.9.9 config_hash=beef seed=7"
    assert lines[1] == "t,log_c"
    assert len(lines) == 2 + tr.times.size
    first = lines[2].split(",")
    assert float(first[0]) == 0.0 and float(first[1]) == 0.0

    est = lyapunov_exponent(p0, H0, NEUMANN, 10.0, CFG8)
    report = format_exponent_report(est)
    assert '"value"' in report and '"convergence_gap"' in report


# --------------------------------------------------------------------------
# the cocycle identity across a split point


def test_cocycle_identity_at_intermediate_time(p0, quasi_h):
    cfg = CocycleConfig(grid=Grid(16), dt=1e-3, dt_rec=0.1, T_spin=15.0)
    tr_full = cocycle_trace(p0, quasi_h, NEUMANN, 20.0, cfg)
    tr_tail = cocycle_trace(advance(p0, 10.0), quasi_h, NEUMANN, 10.0, cfg)
    i_mid = np.searchsorted(tr_full.times, 10.0)
    shifted = tr_full.log_c[i_mid:] - tr_full.log_c[i_mid]
    np.testing.assert_allclose(tr_tail.log_c, shifted, atol=1e-6)
