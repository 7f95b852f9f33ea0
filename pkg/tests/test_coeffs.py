import math

import numpy as np
import pytest

import oracles
from qprd.baseflow import advance, make_point, preset_frequencies
from qprd.coeffs import (EMPTY_TRIG, PROFILES, LinearCoefficientSpec,
                         NonlinearitySpec, SpaceTerm, TrigPoly,
                         build_coboundary_h, build_unbounded_surrogate_h,
                         check_coboundary_consistency,
                         check_dissipation_conditions, eval_g, eval_h,
                         eval_stiffness, golden_convergents, mix,
                         surrogate_primitive)
from qprd.errors import CalibrationError, ConfigurationError, ValidationError
from qprd.solver import Grid, NEUMANN, BoundaryCondition

GOLDEN = preset_frequencies("golden")


# --------------------------------------------------------------------------
# trig polynomials and profiles


def test_trigpoly_value_matches_manual_sum():
    t = TrigPoly(((1, 0), (2, -1)), (0.5, -1.25), (0.3, 1.1))
    rng = np.random.default_rng(3)
    for th1, th2 in rng.random((20, 2)):
        want = (0.5 * math.sin(2 * math.pi * th1 + 0.3)
                - 1.25 * math.sin(2 * math.pi * (2 * th1 - th2) + 1.1))
        assert t.value(th1, th2) == pytest.approx(want, abs=1e-14)
    # vectorized evaluation agrees with scalar
    th = rng.random((2, 7))
    vals = t.value(th[0], th[1])
    for i in range(7):
        assert vals[i] == t.value(float(th[0, i]), float(th[1, i]))


def test_trigpoly_flow_derivative_is_the_time_derivative():
    t = TrigPoly(((1, 0), (0, 1), (3, -2)), (1.0, 0.7, 0.2), (0.0, 0.5, 2.0))
    dt_poly = t.flow_derivative(GOLDEN)
    p = make_point((0.14, 0.9), GOLDEN)
    step = 1e-5
    for s in (0.0, 1.7, 12.3):
        q = advance(p, s)
        fd = (t(advance(q, step)) - t(advance(q, -step))) / (2 * step)
        assert dt_poly(q) == pytest.approx(fd, abs=1e-5)


def test_trigpoly_guards():
    with pytest.raises(ValidationError):
        TrigPoly(((0, 0),), (1.0,), (0.0,))
    with pytest.raises(ValidationError):
        TrigPoly(((1, 0),), (1.0, 2.0), (0.0,))
    assert EMPTY_TRIG.n_terms == 0
    assert EMPTY_TRIG.value(0.3, 0.4) == 0.0
    assert EMPTY_TRIG.sup_bound() == 0.0


def test_trigpoly_sup_bound_dominates_samples():
    rng = np.random.default_rng(8)
    for _ in range(10):
        n = rng.integers(1, 5)
        modes = tuple((int(a), int(b)) for a, b in rng.integers(-3, 4, (n, 2)))
        modes = tuple(m if m != (0, 0) else (1, 0) for m in modes)
        t = TrigPoly(modes, tuple(rng.normal(size=n)), tuple(rng.random(n)))
        th = rng.random((256, 2))
        assert np.max(np.abs(t.value(th[:, 0], th[:, 1]))) <= t.sup_bound() + 1e-12


def test_profiles_bounded_by_one():
    x = np.linspace(0.0, 1.0, 513)
    for name, fn in PROFILES.items():
        v = fn(x)
        assert v.shape == x.shape
        assert np.max(np.abs(v)) <= 1.0 + 1e-12, name
    assert PROFILES["parabola"](np.array([0.5]))[0] == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        SpaceTerm((1, 0), 1.0, "cubic")


# --------------------------------------------------------------------------
# linear coefficient


def test_eval_h_scalar_array_consistency(quasi_h):
    p = make_point((0.33, 0.71))
    x = np.linspace(0.0, 1.0, 9)
    arr = eval_h(quasi_h, p, x)
    assert arr.shape == x.shape
    for i, xi in enumerate(x):
        assert eval_h(quasi_h, p, float(xi)) == pytest.approx(arr[i], abs=1e-15)
    # x-independent spec broadcasts a constant over x
    flat = LinearCoefficientSpec(base_part=quasi_h.base_part, constant_shift=0.25)
    arr2 = eval_h(flat, p, x)
    assert np.all(arr2 == arr2[0])
    assert flat.x_independent and not quasi_h.x_independent
    assert not flat.is_coboundary


def test_sup_bound_dominates_h_samples(quasi_h):
    rng = np.random.default_rng(12)
    worst = 0.0
    for th1, th2 in rng.random((100, 2)):
        p = make_point((float(th1), float(th2)))
        vals = eval_h(quasi_h, p, np.linspace(0, 1, 33))
        worst = max(worst, float(np.max(np.abs(vals))))
    assert worst <= quasi_h.sup_bound() + 1e-12


def test_mix_is_the_pointwise_convex_combination(quasi_h):
    other = LinearCoefficientSpec(
        base_part=TrigPoly(((0, 2),), (0.9,), (0.4,)),
        space_part=(SpaceTerm((1, -1), 0.5, "parabola", 0.2),),
        constant_shift=-0.3)
    x = np.linspace(0.0, 1.0, 17)
    rng = np.random.default_rng(21)
    for w in (0.25, 0.5, 0.9):
        hw = mix(quasi_h, other, w)
        for th1, th2 in rng.random((10, 2)):
            p = make_point((float(th1), float(th2)))
            want = (1 - w) * eval_h(quasi_h, p, x) + w * eval_h(other, p, x)
            np.testing.assert_allclose(eval_h(hw, p, x), want, atol=1e-14)
    assert mix(quasi_h, other, 0.0) is quasi_h
    assert mix(quasi_h, other, 1.0) is other
    with pytest.raises(ValidationError):
        mix(quasi_h, other, 1.5)


def test_mix_keeps_potentials_only_when_both_sides_have_one():
    k1 = TrigPoly(((0, 1),), (1.0,), (0.0,))
    k2 = TrigPoly(((1, 0),), (0.5,), (0.7,))
    h1 = build_coboundary_h(k1, NEUMANN, Grid(8))
    h2 = build_coboundary_h(k2, NEUMANN, Grid(8))
    both = mix(h1, h2, 0.5)
    assert both.is_coboundary
    p = make_point((0.2, 0.6))
    assert both.potential(p) == pytest.approx(0.5 * k1(p) + 0.5 * k2(p), abs=1e-14)
    check_coboundary_consistency(both, GOLDEN)
    plain = LinearCoefficientSpec(base_part=k2)
    assert mix(h1, plain, 0.5).potential is None


# --------------------------------------------------------------------------
# coboundary construction


def test_build_coboundary_h_carries_exact_potential():
    K = TrigPoly(((0, 1),), (1.0,), (0.0,))  # sin(2*pi*theta2)
    spec = build_coboundary_h(K, NEUMANN, Grid(8))
    assert spec.is_coboundary and spec.x_independent
    assert abs(spec.constant_shift) < 1e-10  # Neumann gamma0
    # base_part is dK/dt along the flow; cross-check by quadrature
    p = make_point((0.35, 0.62))
    T = 7.3
    integral = oracles.orbit_integral(
        lambda s: spec.base_part(advance(p, s)), T)
    assert integral == pytest.approx(K(advance(p, T)) - K(p), abs=1e-9)


def test_coboundary_consistency_catches_tampering():
    K = TrigPoly(((1, 1),), (0.8,), (0.2,))
    spec = build_coboundary_h(K, NEUMANN, Grid(8))
    check_coboundary_consistency(spec, GOLDEN)
    wrong = LinearCoefficientSpec(
        base_part=TrigPoly(spec.base_part.modes,
                           tuple(1.02 * a for a in spec.base_part.amps),
                           spec.base_part.phases),
        potential=K)
    with pytest.raises(ValidationError):
        check_coboundary_consistency(wrong, GOLDEN)
    with pytest.raises(ValidationError):
        check_coboundary_consistency(LinearCoefficientSpec(), GOLDEN)


def test_robin_coboundary_shift_is_gamma0():
    K = TrigPoly(((0, 1),), (0.5,), (0.0,))
    bc = BoundaryCondition("robin", 1.0)
    spec = build_coboundary_h(K, bc, Grid(128))
    assert spec.constant_shift == pytest.approx(
        oracles.FROZEN["robin_gamma0_alpha1"], abs=1e-3)


# --------------------------------------------------------------------------
# nonlinearity


def test_eval_g_dead_zone_and_oddness():
    g = NonlinearitySpec(r0=0.8, stiff_const=50.0)
    p = make_point((0.1, 0.2))
    rng = np.random.default_rng(17)
    for y in rng.uniform(-0.8, 0.8, 200):
        assert eval_g(g, p, 0.5, float(y)) == 0.0
    for y in rng.uniform(0.8, 5.0, 200):
        v = eval_g(g, p, 0.5, float(y))
        assert v == -50.0 * (y - 0.8) ** 3
        assert eval_g(g, p, 0.5, -float(y)) == -v
    # array evaluation matches scalar
    ys = rng.uniform(-3, 3, 32)
    arr = eval_g(g, p, 0.5, ys)
    for i, y in enumerate(ys):
        assert arr[i] == eval_g(g, p, 0.5, float(y))


def test_stiffness_modulation_and_bounds():
    g = NonlinearitySpec(
        r0=1.0, stiff_const=10.0,
        stiff_torus=TrigPoly(((0, 1),), (2.0,), (0.0,)),
        stiff_space=SpaceTerm((1, 0), 1.5, "sin_pi"))
    lo, hi = g.stiffness_bounds()
    assert lo == pytest.approx(6.5) and hi == pytest.approx(13.5)
    rng = np.random.default_rng(4)
    for th1, th2, x in rng.random((200, 3)):
        k = eval_stiffness(g, make_point((float(th1), float(th2))), float(x))
        assert lo - 1e-12 <= k <= hi + 1e-12


def test_dissipation_conditions_pass_and_fail():
    check_dissipation_conditions(NonlinearitySpec(r0=1.0, stiff_const=100.0),
                                 n_samples=2000)
    check_dissipation_conditions(
        NonlinearitySpec(r0=0.013, stiff_const=3e5), n_samples=500)
    # stiffness interval dips below zero -> rejected before any sampling
    bad = NonlinearitySpec(r0=1.0, stiff_const=1.0,
                           stiff_torus=TrigPoly(((0, 1),), (2.0,), (0.0,)))
    with pytest.raises(ValidationError):
        check_dissipation_conditions(bad, n_samples=10)
    with pytest.raises(ValidationError):
        NonlinearitySpec(r0=-1.0, stiff_const=1.0)
    with pytest.raises(ValidationError):
        NonlinearitySpec(r0=1.0, stiff_const=0.0)


# --------------------------------------------------------------------------
# unbounded-primitive surrogate


def test_golden_convergents_are_fibonacci_ratios():
    assert golden_convergents(6) == [(1, 1), (1, 2), (2, 3), (3, 5), (5, 8), (8, 13)]
    assert golden_convergents(0) == []
    with pytest.raises(ValidationError):
        golden_convergents(-1)
    # each convergent's divisor shrinks like the golden mean's CF tail
    w1, w2 = GOLDEN
    divisors = [abs(q * w2 - p * w1) for p, q in golden_convergents(8)]
    for a, b in zip(divisors, divisors[1:]):
        assert b < a


def test_surrogate_spec_shape_and_guards():
    h = build_unbounded_surrogate_h(NEUMANN, 6, Grid(8))
    assert h.base_part.n_terms == 6
    assert h.x_independent and not h.is_coboundary
    assert abs(h.constant_shift) < 1e-10
    assert build_unbounded_surrogate_h(NEUMANN, 0, Grid(8)).base_part.n_terms == 0
    with pytest.raises(ConfigurationError):
        build_unbounded_surrogate_h(NEUMANN, 3, Grid(8), preset="sqrt2")
    with pytest.raises(ValidationError):
        build_unbounded_surrogate_h(NEUMANN, 3, Grid(8), phases=(0.0,))


def test_surrogate_primitive_is_the_exact_antiderivative():
    level = 6
    h = build_unbounded_surrogate_h(NEUMANN, level, Grid(8))
    K = surrogate_primitive(level)
    # analytic derivative along the flow reproduces the base part
    dK = K.flow_derivative(GOLDEN)
    rng = np.random.default_rng(9)
    for th1, th2 in rng.random((50, 2)):
        p = make_point((float(th1), float(th2)))
        assert dK(p) == pytest.approx(h.base_part(p), abs=1e-9)
    # independent quadrature over a finite stretch of one orbit
    p = make_point((0.05, 0.44))
    T = 11.0
    integral = oracles.orbit_integral(lambda s: h.base_part(advance(p, s)), T)
    assert integral == pytest.approx(K(advance(p, T)) - K(p), abs=1e-8)


def test_surrogate_primitive_range_dwarfs_the_class_threshold():
    # the classification threshold M_bound = 3 must be reachable from both
    # sides, otherwise the finite truncation could never show both classes
    K = surrogate_primitive(6)
    grid = np.linspace(0.0, 1.0, 512, endpoint=False)
    t1, t2 = np.meshgrid(grid, grid, indexing="ij")
    vals = K.value(t1, t2)
    assert float(vals.max()) > 4.0
    assert float(vals.min()) < -4.0
    assert float(vals.max() - vals.min()) > 10.0


# --------------------------------------------------------------------------
# exponent calibration


def test_calibrate_zero_exponent_on_shifted_coboundary():
    from qprd.cocycle import CocycleConfig
    from qprd.coeffs import calibrate_zero_exponent
    from dataclasses import replace

    K = TrigPoly(((0, 1),), (1.0,), (0.0,))
    spec = build_coboundary_h(K, NEUMANN, Grid(8))
    # the estimate converges like K-oscillation / T, so the horizon sets both
    # the achievable gap and the calibration accuracy: 2/T here
    cfg = CocycleConfig(grid=Grid(8), dt=5e-3, dt_rec=0.1, T_spin=10.0,
                        T_exponent=2000.0, calibration_gap_tol=5e-3)
    # already critical: calibration must be a no-op up to the estimate error
    calibrated = calibrate_zero_exponent(spec, cfg)
    assert abs(calibrated.constant_shift - spec.constant_shift) < 1.5e-3
    # a deliberate off-critical shift is measured and removed
    shifted = replace(spec, constant_shift=spec.constant_shift + 0.05)
    fixed = calibrate_zero_exponent(shifted, cfg)
    assert fixed.constant_shift == pytest.approx(spec.constant_shift, abs=2e-3)
    # unreachable tolerance -> calibration refuses with diagnostics
    strict = replace(cfg, calibration_gap_tol=1e-16)
    with pytest.raises(CalibrationError):
        calibrate_zero_exponent(shifted, strict)
