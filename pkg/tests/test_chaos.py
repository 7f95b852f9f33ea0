import math

import numpy as np
import pytest

from qprd.attractor import AttractorConfig, AttractorSample, scan_sections, section_sample
from qprd.baseflow import make_point, sample_base
from qprd.chaos import (ChaosConfig, ChaosScanResult, FiberPairRecord,
                        PairStats, fiber_chaos_scan, liyorke_stats,
                        write_chaos_csv)
from qprd.cocycle import CocycleConfig
from qprd.coeffs import NonlinearitySpec, TrigPoly, build_coboundary_h, build_unbounded_surrogate_h
from qprd.errors import PreconditionError, ValidationError
from qprd.solver import NEUMANN, Grid, ProblemSpec

GRID8 = Grid(8)
H_COB = build_coboundary_h(TrigPoly(((0, 1),), (0.3,), (0.0,)), NEUMANN, GRID8)
PROB_COB = ProblemSpec(h=H_COB, g=NonlinearitySpec(1.0, 20.0), gamma=0.0, bc=NEUMANN)

COC8 = CocycleConfig(grid=GRID8, dt=0.025, dt_rec=0.5, T_spin=10.0,
                     T_max=2000.0, M_bound=3.0)
ACFG = AttractorConfig(grid=GRID8, dt=2e-3, r_start=10.0, T_cap=800.0,
                       gap_tol=8e-3, cocycle=COC8)
CCFG = ChaosConfig(grid=GRID8, dt=2e-3, T=200.0, window=10.0, dt_rec=0.25)


def pinned_sample(cls, b_norm, converged=True, theta=(0.1, 0.2), n_nodes=9):
    field = np.full(n_nodes, b_norm)
    return AttractorSample(base=make_point(theta), b_field=field, b_norm=b_norm,
                           min_b=b_norm, fiber_class=cls, backward_sup=0.0,
                           pullback_horizon=100.0, cauchy_gap=1e-5,
                           converged=converged)


# --------------------------------------------------------------------------
# configuration


def test_config_validation():
    with pytest.raises(ValidationError):
        ChaosConfig(grid=GRID8, T=-1.0)
    with pytest.raises(ValidationError):
        ChaosConfig(grid=GRID8, window=0.0)
    with pytest.raises(ValidationError):
        ChaosConfig(grid=GRID8, threshold_lo=0.0)
    assert CCFG.records_per_window() == 40
    assert CCFG.steps_per_record() == 125
    with pytest.raises(ValidationError):
        ChaosConfig(grid=GRID8, window=0.3, dt_rec=0.25).records_per_window()
    with pytest.raises(ValidationError):
        ChaosConfig(grid=GRID8, window=0.25, dt_rec=0.25).records_per_window()
    with pytest.raises(ValidationError):
        ChaosConfig(grid=GRID8, dt=0.1, dt_rec=0.25).steps_per_record()


def test_pair_stats_ordering():
    with pytest.raises(ValidationError):
        PairStats(liminf_est=0.5, limsup_est=0.2, horizon=10.0, window=1.0)
    with pytest.raises(ValidationError):
        PairStats(liminf_est=-0.1, limsup_est=0.2, horizon=10.0, window=1.0)


# --------------------------------------------------------------------------
# pair statistics


def test_identical_pair_separation_is_exactly_zero(p0, small_prob):
    cfg = ChaosConfig(grid=GRID8, dt=5e-4, T=10.0, window=1.0, dt_rec=0.05)
    z = 0.4 * np.cos(np.pi * np.linspace(0.0, 1.0, GRID8.n_nodes))
    st = liyorke_stats(p0, z, z.copy(), small_prob, cfg)
    assert st.liminf_est == 0.0 and st.limsup_est == 0.0


def test_pair_order_does_not_matter(p0, small_prob):
    cfg = ChaosConfig(grid=GRID8, dt=5e-4, T=10.0, window=1.0, dt_rec=0.05)
    rng = np.random.default_rng(3)
    z1 = 0.3 * rng.random(GRID8.n_nodes)
    z2 = 0.3 * rng.random(GRID8.n_nodes)
    a = liyorke_stats(p0, z1, z2, small_prob, cfg)
    b = liyorke_stats(p0, z2, z1, small_prob, cfg)
    assert a.liminf_est == b.liminf_est and a.limsup_est == b.limsup_est


def test_separation_scales_linearly_in_the_initial_gap(p0, quasi_h):
    # linear problem: the separation of (r1*1, r2*1) is |r2-r1| times the
    # evolved constant field, so doubling or tripling the gap scales both
    # tail statistics exactly
    prob = ProblemSpec(h=quasi_h, g=None, gamma=0.0, bc=NEUMANN)
    cfg = ChaosConfig(grid=GRID8, dt=1e-3, T=50.0, window=5.0, dt_rec=0.25)
    ones = np.ones(GRID8.n_nodes)
    narrow = liyorke_stats(p0, 0.2 * ones, 0.5 * ones, prob, cfg)
    wide = liyorke_stats(p0, 0.2 * ones, 1.1 * ones, prob, cfg)
    assert wide.limsup_est == pytest.approx(3.0 * narrow.limsup_est, rel=1e-8)
    assert wide.liminf_est == pytest.approx(3.0 * narrow.liminf_est, rel=1e-8)


def test_stats_guards(p0, small_prob):
    short = ChaosConfig(grid=GRID8, dt=5e-4, T=5.0, window=1.0, dt_rec=0.05)
    z = np.zeros(GRID8.n_nodes)
    with pytest.raises(PreconditionError):
        liyorke_stats(p0, z, z, small_prob, short)
    with pytest.raises(ValidationError):
        liyorke_stats(p0, np.zeros(4), z, small_prob, short)
    ok = ChaosConfig(grid=GRID8, dt=5e-4, T=10.0, window=1.0, dt_rec=0.05)
    with pytest.raises(PreconditionError):
        liyorke_stats(p0, 100.0 * np.ones(GRID8.n_nodes), z, small_prob, ok)
    ragged = ChaosConfig(grid=GRID8, dt=5e-4, T=10.02, window=1.0, dt_rec=0.05)
    with pytest.raises(ValidationError):
        liyorke_stats(p0, z, z, small_prob, ragged)


# --------------------------------------------------------------------------
# fiber scan: bounded coboundary dynamics carries no Li-Yorke pairs


def test_coboundary_pair_separation_never_collapses(p0):
    sample = section_sample(p0, PROB_COB, ACFG)
    st = liyorke_stats(sample.base, sample.b_field / 3.0,
                       2.0 * sample.b_field / 3.0, PROB_COB, CCFG)
    # inside the dead zone the separation is (b/3) e^(K(p.t)-K(p)): the
    # liminf/limsup ratio is pinned near e^(-(max K - min K)) = e^(-0.6)
    ratio = st.liminf_est / st.limsup_est
    assert 0.5 < ratio <= 1.0
    assert st.limsup_est > 0.1


def test_coboundary_scan_flags_nothing():
    pts = [make_point((0.7, 0.55)), make_point((0.15, 0.95))]
    samples, _ = scan_sections(pts, PROB_COB, ACFG)
    result = fiber_chaos_scan(samples, PROB_COB, CCFG)
    assert result.n_tested == 2
    assert result.fraction == 0.0
    assert result.n_flagged == 0
    assert result.threshold_hi == pytest.approx(
        0.1 * float(np.median([s.b_norm for s in samples])))


# --------------------------------------------------------------------------
# fiber scan: a fine fiber of the unbounded surrogate carries flagged pairs


def test_surrogate_fine_fiber_is_flagged():
    h = build_unbounded_surrogate_h(NEUMANN, 6, GRID8)
    prob = ProblemSpec(h=h, g=NonlinearitySpec(1.0, 5.0), gamma=0.0, bc=NEUMANN)
    p = sample_base(12, seed=2026)[8]
    sample = section_sample(p, prob, ACFG)
    assert sample.fiber_class == "Fine" and sample.converged

    result = fiber_chaos_scan([sample], prob, CCFG)
    assert result.n_tested == 1 and result.n_flagged == 1
    assert result.fraction == 1.0
    st = result.records[0].stats
    assert st.limsup_est > 0.1
    assert st.liminf_est < 1e-4 * st.limsup_est


# --------------------------------------------------------------------------
# scan edge cases


def test_scan_requires_critical_gamma(p0):
    prob = ProblemSpec(h=H_COB, g=NonlinearitySpec(1.0, 20.0), gamma=1.0, bc=NEUMANN)
    with pytest.raises(PreconditionError):
        fiber_chaos_scan([], prob, CCFG)


def test_scan_degenerate_attractor_reports_zero():
    pinched = [pinned_sample("Singular", 1e-12),
               pinned_sample("Singular", 0.0, theta=(0.4, 0.9))]
    result = fiber_chaos_scan(pinched, PROB_COB, CCFG)
    assert result.fraction == 0.0 and result.n_tested == 0
    assert math.isnan(result.threshold_hi)


def test_scan_without_eligible_fibers_is_nan():
    undecided = [pinned_sample("Inconclusive", 0.5),
                 pinned_sample("Fine", 0.5, converged=False)]
    result = fiber_chaos_scan(undecided, PROB_COB, CCFG)
    assert math.isnan(result.fraction) and result.n_tested == 0
    assert fiber_chaos_scan([], PROB_COB, CCFG).n_tested == 0


def test_scan_grid_mismatch_raises():
    sample = pinned_sample("Fine", 0.5, n_nodes=17)
    with pytest.raises(ValidationError):
        fiber_chaos_scan([sample], PROB_COB, CCFG)


# --------------------------------------------------------------------------
# export


def test_chaos_csv_format(tmp_path):
    records = (
        FiberPairRecord(make_point((0.25, 0.5)),
                        PairStats(0.001, 0.4, 200.0, 10.0), True),
        FiberPairRecord(make_point((0.75, 0.1)),
                        PairStats(0.3, 0.4, 200.0, 10.0), False),
    )
    result = ChaosScanResult(0.5, 2, 1, 0.05, 0.04, records)
    path = tmp_path / "chaos.csv"
    write_chaos_csv(result, path, version="2.0.0", config_hash="feed", seed=9)
    lines = path.read_text().splitlines()
    assert lines[0] == "# version=2.0.0 config_hash=feed seed=9"
    assert lines[1] == "theta1,theta2,liminf_est,limsup_est,flagged"
    assert lines[2] == "0.25,0.5,0.001,0.4,1"
    assert lines[3] == "0.75,0.1,0.3,0.4,0"
