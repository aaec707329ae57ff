import math
from types import SimpleNamespace

import mpmath
import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy import integrate

from bpc import initial_data
from bpc.control import (StrategyParams, build_reference, decay_horizon, hold_control_step,
                         hold_law, hold_phase, oleinik_check, replay_tracking, run_global_strategy,
                         smoothing_phase, tracking_control)
from bpc.core import CoupledState, SimConfig, discrete_norms
from bpc.coupled import Termination, derivative_jump, solve


# {{{ reference trajectory

def test_reference_at_rest_is_constant():
    ref = build_reference(0.5, 0.0, 0.5, 0.0, 1.0)
    ts = np.linspace(0, 1, 11)
    assert np.all(ref.phi(ts) == 0.0)
    assert np.all(ref.h(ts) == 0.5) and np.all(ref.d2h(ts) == 0.0)


def test_reference_example_against_high_precision_oracle():
    ref = build_reference(0.5, 0.5, 0.75, 0.0, 1.0)
    assert ref.phi(0.0) == 0.0
    assert ref.dphi(0.0) == pytest.approx(1.0, abs=1e-15)
    assert ref.phi(1.0) == pytest.approx(math.pi / 6, abs=1e-15)
    # Hermite basis at s = 1/2 is (1/2, 1/8, 1/2, -1/8)
    mpmath.mp.dps = 40
    phi_half = mpmath.mpf(1) / 2 * 0 + mpmath.mpf(1) / 8 * 1 + mpmath.mpf(1) / 2 * mpmath.pi / 6
    h_half = (1 + mpmath.sin(phi_half)) / 2
    assert float(h_half) == pytest.approx(0.68861, abs=1e-5)
    assert ref.h(0.5) == pytest.approx(float(h_half), abs=1e-15)


@settings(max_examples=200, deadline=None)
@given(h0=st.floats(0.05, 0.95), ell0=st.floats(-0.3, 0.3), h1=st.floats(0.05, 0.95),
       T0=st.floats(0.0, 2.0), dur=st.floats(0.2, 3.0))
def test_reference_endpoint_conditions(h0, ell0, h1, T0, dur):
    try:
        ref = build_reference(h0, ell0, h1, T0, T0 + dur)
    except ValueError:
        assume(False)
    assert abs(ref.h(T0) - h0) <= 1e-12
    assert abs(ref.dh(T0) - ell0) <= 1e-12
    assert abs(ref.h(T0 + dur) - h1) <= 1e-12
    assert abs(ref.dh(T0 + dur)) <= 1e-12
    hs = ref.h(np.linspace(T0, T0 + dur, 2001))
    assert np.all((hs > 0) & (hs < 1))


def test_reference_derivatives_match_finite_differences():
    ref = build_reference(0.3, 0.4, 0.6, 0.01, 1.01)
    t, e = 0.4, 1e-5
    assert ref.dh(t) == pytest.approx((ref.h(t + e) - ref.h(t - e)) / (2 * e), rel=1e-8)
    assert ref.d2h(t) == pytest.approx((ref.h(t + e) - 2 * ref.h(t) + ref.h(t - e)) / e ** 2, rel=1e-4)
    poly = np.poly1d(ref.coefficients)
    assert poly(t - 0.01) == pytest.approx(float(ref.phi(t)), abs=1e-14)


def test_large_start_velocity_makes_reference_touch_a_wall():
    # (1 + sin phi)/2 reaches a wall whenever phi crosses an odd multiple of pi/2
    with pytest.raises(ValueError, match="wall"):
        build_reference(0.3, 8.0, 0.6, 0.0, 1.0)
    ok = build_reference(0.3, 2.0, 0.6, 0.0, 1.0)
    lo, hi = ok.phi_range()
    dense = ok.phi(np.linspace(0, 1, 200_001))
    assert lo == pytest.approx(dense.min(), abs=1e-9) and hi == pytest.approx(dense.max(), abs=1e-9)
    assert not ok.touches_wall()


@pytest.mark.parametrize("args", [(0.0, 0.0, 0.5, 0.0, 1.0), (0.5, 0.0, 1.0, 0.0, 1.0),
                                  (0.5, 0.0, 0.5, 1.0, 1.0), (1e-12, 0.0, 0.5, 0.0, 1.0)])
def test_reference_rejects_bad_input(args):
    with pytest.raises(ValueError):
        build_reference(*args)

# }}}


# {{{ phases

def test_smoothing_of_rest_is_rest():
    cfg = SimConfig(n_left=20, n_right=20)
    out = smoothing_phase(initial_data.zero(), 0.4, 0.0, 0.01, cfg)
    assert np.all(out.state.left.values == 0) and out.state.h == 0.4 and out.duration == 0.01


def test_smoothing_reduces_h1_seminorm_of_rough_data():
    cfg = SimConfig(n_left=100, n_right=100)
    early = smoothing_phase(initial_data.step(10.0), 0.5, 0.0, 0.001, cfg)
    late = smoothing_phase(initial_data.step(10.0), 0.5, 0.0, 0.01, cfg)
    assert math.isfinite(late.h1_seminorm) and late.h1_seminorm < early.h1_seminorm
    s = late.state
    assert s.left.interface_value == s.ell == s.right.interface_value


def test_tracking_control_is_zero_for_rest():
    cfg = SimConfig(n_left=20, n_right=20)
    s = CoupledState.rest(0.5, 20)
    ref = build_reference(0.5, 0.0, 0.5, 0.0, 1.0)
    schedule, _ = tracking_control(s, ref, cfg)
    assert np.all(schedule.g == 0.0)


def test_tracking_force_formula_on_every_node():
    cfg = SimConfig(m=2.5, n_left=30, n_right=30)
    s = smoothing_phase(initial_data.sine(3.0), 0.4, 0.0, 0.01, cfg).state
    ref = build_reference(s.h, s.ell, 0.55, s.t, s.t + 0.5)
    schedule, traj = tracking_control(s, ref, cfg)
    expected = [2.5 * float(ref.d2h(x.t)) - derivative_jump(x) for x in traj.states]
    assert np.array_equal(schedule.g, np.array(expected))
    assert np.array_equal(schedule.t, traj.times)


def test_replay_error_shrinks_under_refinement():
    errs = []
    for n, dt in ((20, 2e-3), (40, 1e-3), (80, 5e-4)):
        cfg = SimConfig(m=5.0, n_left=n, n_right=n, dt=dt)
        s = smoothing_phase(initial_data.sine(2.0), 0.35, 0.0, 0.01, cfg).state
        ref = build_reference(s.h, s.ell, 0.6, s.t, s.t + 0.5)
        schedule, _ = tracking_control(s, ref, cfg)
        run = replay_tracking(s, schedule, cfg, ref)
        errs.append(abs(run.final.h - 0.6))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates >= 0.9)


def test_closed_loop_tracking_needs_reference():
    cfg = SimConfig(n_left=10, n_right=10)
    s = CoupledState.rest(0.5, 10)
    ref = build_reference(0.5, 0.0, 0.6, 0.0, 0.2)
    schedule, _ = tracking_control(s, ref, cfg)
    with pytest.raises(ValueError):
        replay_tracking(s, schedule, cfg, closed_loop=True)
    run = replay_tracking(s, schedule, cfg, ref, closed_loop=True)
    assert run.termination is Termination.REACHED_FINAL_TIME


def test_hold_control_values():
    s = CoupledState.rest(0.5, 10)
    assert hold_control_step(s) == 0.0
    tent = CoupledState.from_function(lambda x: np.minimum(x, 1 - x), 0.5, 0.5, 31)
    assert derivative_jump(tent) == pytest.approx(-2.0, abs=1e-10)
    assert hold_control_step(tent) == pytest.approx(2.0, abs=1e-10)
    assert hold_law(tent, -2.0) == 2.0


def test_closed_loop_hold_keeps_position_exactly():
    cfg = SimConfig(m=1.0, n_left=30, n_right=30, dt=1e-4, adaptive=False)
    s = CoupledState.from_function(initial_data.step(20.0, 0.3), 0.37, 0.0, 30)
    run = hold_phase(s, 0.2, cfg)
    assert np.all(run.diagnostics["h"] == 0.37) and np.all(run.diagnostics["ell"] == 0.0)


def test_hold_requires_rest_particle():
    cfg = SimConfig(n_left=10, n_right=10)
    with pytest.raises(ValueError):
        hold_phase(CoupledState.from_function(lambda x: x, 0.5, 0.5, 10), 0.1, cfg)

# }}}


# {{{ decay horizon and the decay bound

def test_decay_horizon_sup():
    xs = np.linspace(0, 1, 100_001)
    peak = np.max(np.maximum(xs, 1 - xs))  # dense-grid oracle
    assert decay_horizon(0.1, "sup") == pytest.approx(peak / 0.1, rel=1e-12)
    assert decay_horizon(0.1, "sup") == pytest.approx(10.0)


def test_decay_horizon_l2():
    integral, _ = integrate.quad(lambda x: max(x, 1 - x) ** 2, 0, 1, points=[0.5])
    assert decay_horizon(0.1, "l2") == pytest.approx(math.sqrt(integral) / 0.1, rel=1e-12)
    assert decay_horizon(0.1, "l2") == pytest.approx(7.638, abs=5e-4)


@settings(max_examples=100)
@given(delta=st.floats(1e-6, 1e3), kind=st.sampled_from(["sup", "l2"]))
def test_decay_horizon_homogeneity(delta, kind):
    assert decay_horizon(delta / 2, kind) == pytest.approx(2 * decay_horizon(delta, kind), rel=1e-14)


def test_decay_horizon_rejects_bad_input():
    with pytest.raises(ValueError):
        decay_horizon(0.0)
    with pytest.raises(ValueError):
        decay_horizon(0.1, "h1")


def test_oleinik_rest_run_has_no_violation():
    cfg = SimConfig(n_left=10, n_right=10)
    run = solve(CoupledState.rest(0.5, 10), 0.0, 0.5, cfg)
    assert oleinik_check(run, 0.0).max_violation == 0.0


def test_oleinik_detects_planted_violation():
    # u = 3x / tau on the left side exceeds the upper bound x / tau by 2x / tau
    tau, n, h = 0.5, 20, 0.5
    s = CoupledState.from_function(lambda x: np.where(x <= h, 3 * x / tau, 3 * h / tau * (1 - x) / (1 - h)),
                                   h, 3 * h / tau, n).with_time(1.0 + tau)
    rep = oleinik_check(SimpleNamespace(states=[s]), 1.0)
    assert rep.max_violation == pytest.approx(2 * h / tau)
    assert rep.x == pytest.approx(h)


def test_oleinik_endpoints_never_violate():
    s = CoupledState.from_function(initial_data.sine(100.0), 0.5, 100.0, 20).with_time(0.1)
    rep = oleinik_check(SimpleNamespace(states=[s]), 0.0)
    assert rep.x not in (0.0, 1.0)


def test_oleinik_on_decaying_hold_is_small():
    cfg = SimConfig(m=1.0, n_left=50, n_right=50)
    s = CoupledState.from_function(initial_data.sine(5.0, 2), 0.6, 0.0, 50)
    run = hold_phase(s, 1.0, cfg)
    rep = oleinik_check(run, 0.0, min_elapsed=0.1)
    assert rep.max_violation <= 0.05
    assert np.all(rep.per_time[:, 0] >= 0.1)

# }}}


# {{{ end-to-end strategy

def test_strategy_from_global_rest():
    cfg = SimConfig(m=1.0, n_left=20, n_right=20)
    rep = run_global_strategy(initial_data.zero(), 0.6, 0.0, 0.6, 0.05, cfg)
    assert rep.passed
    for name in ("smoothing", "tracking", "hold"):
        assert np.all(rep.phases[name].control.g == 0.0)
    assert rep.T2 - rep.T1 == decay_horizon(0.05)


def test_strategy_phase_times_and_exact_terminal_particle():
    cfg = SimConfig(m=10.0, n_left=40, n_right=40)
    rep = run_global_strategy(initial_data.step(5.0), 0.3, 0.0, 0.6, 0.1, cfg,
                              StrategyParams(tracking_duration=0.5))
    assert rep.passed, rep.message
    assert rep.T0 == 0.01 and rep.T1 == pytest.approx(0.51) and rep.T2 - rep.T1 == 10.0
    assert rep.terminal_state.h == 0.6 and rep.terminal_state.ell == 0.0
    assert discrete_norms(rep.terminal_state).linf <= 0.1


def test_strategy_reports_tracking_failure_for_wall_touching_reference():
    # unit mass and large data: the particle is fast at T0 and the reference hits a wall
    cfg = SimConfig(m=1.0, n_left=50, n_right=50)
    rep = run_global_strategy(initial_data.step(50.0), 0.3, 0.0, 0.6, 0.05, cfg)
    assert not rep.passed and rep.failed_phase == "tracking"
    assert "wall" in rep.message


def test_strategy_l2_norm_kind_uses_shorter_hold():
    cfg = SimConfig(m=10.0, n_left=20, n_right=20)
    rep = run_global_strategy(initial_data.sine(1.0), 0.4, 0.0, 0.6, 0.5, cfg,
                              StrategyParams(norm_kind="l2", tracking_duration=0.5))
    assert rep.passed
    assert rep.T2 - rep.T1 == pytest.approx(math.sqrt(7 / 12) / 0.5)


def test_strategy_rejects_bad_target():
    with pytest.raises(ValueError):
        run_global_strategy(initial_data.zero(), 0.5, 0.0, 1.2, 0.05, SimConfig())

# }}}
