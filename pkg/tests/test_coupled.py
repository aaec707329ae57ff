import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from bpc import initial_data
from bpc.core import CoupledState, ParticleState, Side, SideField, SimConfig
from bpc.coupled import (ControlSchedule, Termination, TestPair, coupled_step, coupled_step_detailed,
                         derivative_jump, dissipation, energy, particle_step, solve,
                         weak_form_residual)
from bpc.verification import observed_orders


# {{{ derivative jump

@pytest.mark.parametrize("h", [0.3, 0.5, 0.81])
def test_jump_of_globally_linear_field_vanishes(h):
    s = CoupledState.from_function(lambda x: x, h, h, 40)
    assert abs(derivative_jump(s)) < 1e-10


def test_jump_of_tent_is_minus_two():
    s = CoupledState.from_function(lambda x: np.minimum(x, 1 - x), 0.5, 0.5, 31)
    assert derivative_jump(s) == pytest.approx(-2.0, abs=1e-10)


def test_jump_of_smooth_field_converges_second_order():
    # symbolic oracle: one-sided derivatives of sin(pi x) at 0.3 coincide
    x = sp.symbols("x")
    slope = float(sp.diff(sp.sin(sp.pi * x), x).subs(x, sp.Rational(3, 10)))
    errs = []
    for n in (20, 40, 80):
        s = CoupledState.from_function(lambda x: np.sin(np.pi * x), 0.3, math.sin(0.3 * math.pi), n)
        errs.append(abs(derivative_jump(s)))
    assert slope == pytest.approx(math.pi * math.cos(0.3 * math.pi))
    assert np.all(observed_orders(errs) >= 1.8)

# }}}


# {{{ particle and control

def test_free_drift():
    p = particle_step(ParticleState(0.4, 0.3), 0.0, 0.0, 0.01, 2.0)
    assert p.ell == 0.3 and p.h == pytest.approx(0.403)


def test_particle_step_formula():
    p = particle_step(ParticleState(0.5, 0.0), 0.5, 1.5, 0.1, 1.0)
    assert p.ell == pytest.approx(0.2) and p.h == pytest.approx(0.52)


@settings(max_examples=100, deadline=None)
@given(h=st.floats(0.05, 0.95), jump=st.floats(-1e3, 1e3), dt=st.floats(1e-6, 1e-1),
       m=st.floats(0.01, 100))
def test_cancelling_force_holds_particle(h, jump, dt, m):
    p = particle_step(ParticleState(h, 0.0), jump, -jump, dt, m)
    assert p.h == h and p.ell == 0.0


def test_schedule_validation_and_rules():
    s = ControlSchedule(np.array([0.0, 1.0, 2.0]), np.array([1.0, 3.0, 5.0]))
    assert s(0.5) == 1.0 and s(1.0) == 3.0 and s(7.0) == 5.0
    lin = ControlSchedule(s.t, s.g, rule="linear")
    assert lin(0.5) == pytest.approx(2.0)
    assert ControlSchedule.constant(2.5)(100.0) == 2.5
    with pytest.raises(ValueError):
        ControlSchedule(np.array([0.0, 0.0]), np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        ControlSchedule(np.array([0.0, 1.0]), np.array([1.0, np.nan]))
    with pytest.raises(ValueError):
        ControlSchedule(np.array([0.0]), np.array([1.0]), rule="cubic")

# }}}


# {{{ energy

def test_energy_of_rest_is_zero():
    assert energy(CoupledState.rest(0.3, 10), 5.0) == 0.0


def test_energy_of_moving_particle_in_still_fluid():
    # the particle node carries ell, so the quadrature adds exactly dy * ell^2 / 2 on top of 6
    for n in (10, 100, 1000):
        s = CoupledState.from_function(lambda x: np.zeros_like(x), 0.4, 2.0, n)
        dy = 1.0 / (n + 1)
        assert energy(s, 3.0) == pytest.approx(6.0 + dy, rel=1e-13)


@pytest.mark.parametrize("h, m", [(0.3, 1.0), (0.5, 2.0), (0.77, 0.5)])
def test_energy_of_compatible_sine(h, m):
    s = CoupledState.from_function(lambda x: np.sin(np.pi * x), h, math.sin(math.pi * h), 200)
    expected = 0.25 + 0.5 * m * math.sin(math.pi * h) ** 2
    assert energy(s, m) == pytest.approx(expected, abs=1e-4)


def test_energy_identity_with_control_has_bounded_constant():
    constants = []
    for n, dt in ((50, 4e-4), (50, 2e-4), (100, 1e-4)):
        cfg = SimConfig(m=2.0, n_left=n, n_right=n, dt=dt, adaptive=False)
        s = solve(CoupledState.from_function(initial_data.sine(2.0), 0.4, 0.0, n), 0.0, 0.05, cfg).final
        g, worst = 3.0, 0.0
        for _ in range(50):
            new = coupled_step(s, g, dt, cfg)
            resid = energy(new, 2.0) - energy(s, 2.0) + dt * dissipation(new) - dt * g * new.ell
            worst = max(worst, abs(resid) / dt ** 2)
            s = new
        constants.append(worst)
    assert max(constants) < 100 and max(constants) / min(constants) < 3


@settings(max_examples=15, deadline=None)
@given(A=st.floats(0.1, 20), h0=st.floats(0.2, 0.8), m=st.floats(0.1, 10),
       kind=st.sampled_from(["sine", "step", "random_fourier"]))
def test_energy_nonincreasing_without_control(A, h0, m, kind):
    n = 30
    cfg = SimConfig(m=m, n_left=n, n_right=n, dt=2e-4, decimate=10 ** 6)
    s0 = CoupledState.from_function(initial_data.make(kind, amplitude=A), h0, 0.0, n)
    run = solve(s0, 0.0, 0.02, cfg)
    E = run.diagnostics["energy"]
    assert np.all(np.diff(E) <= 1e-10 * (1 + E[:-1]))

# }}}


# {{{ coupled steps and runs

@settings(max_examples=40, deadline=None)
@given(A=st.floats(-10, 10), h0=st.floats(0.2, 0.8), ell=st.floats(-2, 2), g=st.floats(-20, 20),
       n=st.integers(4, 40))
def test_interface_continuity_after_every_step(A, h0, ell, g, n):
    cfg = SimConfig(m=1.0, n_left=n, n_right=n + 1)
    s = CoupledState.from_function(initial_data.sine(A, 2), h0, ell, n, n + 1)
    for _ in range(5):
        s, jump, used = coupled_step_detailed(s, g, 1e-4, cfg)
        assert s.left.interface_value == s.ell == s.right.interface_value
        assert used == g


def test_rest_is_global_equilibrium():
    cfg = SimConfig(n_left=20, n_right=20)
    run = solve(CoupledState.rest(0.45, 20), 0.0, 0.2, cfg)
    assert run.termination is Termination.REACHED_FINAL_TIME
    assert all(np.all(s.left.values == 0) and s.h == 0.45 for s in run.states)


def test_odd_symmetry_is_exact():
    n = 40
    u0 = lambda x: 3 * np.sin(2 * np.pi * x) + np.sin(6 * np.pi * x)
    cfg = SimConfig(n_left=n, n_right=n, dt=1e-4, adaptive=False)
    left = CoupledState.from_function(u0, 0.5, 0.0, n).left
    # pointwise sampling is odd only up to rounding; mirror the left side for exact data
    s0 = CoupledState(0.0, left, SideField.from_canonical(Side.RIGHT, left.values), ParticleState(0.5, 0.0))
    run = solve(s0, 0.0, 0.1, cfg)
    assert np.all(run.diagnostics["h"] == 0.5) and np.all(run.diagnostics["ell"] == 0.0)
    # mirrored-run oracle: the right side is the negated mirror of the left
    for s in run.states[::100]:
        assert np.array_equal(s.right.values, -s.left.values[::-1])


def test_constant_push_ends_in_contact():
    cfg = SimConfig(m=1.0, n_left=30, n_right=30, dt=2e-4, adaptive=False)
    run = solve(CoupledState.rest(0.5, 30), 20.0, 5.0, cfg)
    assert run.termination is Termination.CONTACT
    assert 0 < run.t_event < 5.0
    last = run.final
    assert 1.0 - last.h <= cfg.contact_tol + 1e-12
    inside = [s.h for s in run.states[:-1]]
    assert all(cfg.contact_tol < h < 1 - cfg.contact_tol for h in inside)


def test_schedule_and_feedback_paths_agree():
    n = 20
    cfg = SimConfig(n_left=n, n_right=n, dt=5e-4, adaptive=False)
    s0 = CoupledState.from_function(initial_data.sine(3.0), 0.4, 0.0, n)
    a = solve(s0, ControlSchedule.constant(1.5), 0.05, cfg)
    b = solve(s0, None, 0.05, cfg, feedback=lambda state, jump, t: 1.5)
    assert np.array_equal(a.diagnostics["h"], b.diagnostics["h"])


def test_nonfinite_run_reports_numerical_failure():
    # huge fixed step with steep data blows up the explicit convection
    n = 20
    cfg = SimConfig(n_left=n, n_right=n, dt=0.5, adaptive=False, coupling_iters=1)
    s0 = CoupledState.from_function(initial_data.sine(1e150), 0.5, 0.0, n)
    run = solve(s0, 0.0, 5.0, cfg)
    assert run.termination in (Termination.NUMERICAL_FAILURE, Termination.CONTACT)
    assert run.t_event is not None

# }}}


# {{{ weak form

def _pair_x1mx():
    return TestPair(lambda t, x: x * (1 - x), lambda t, x: 0 * x, lambda t, x: 1 - 2 * x)


def test_weak_residual_of_rest_run():
    cfg = SimConfig(n_left=20, n_right=20, dt=1e-3, adaptive=False)
    run = solve(CoupledState.rest(0.5, 20), 0.0, 0.1, cfg)
    assert weak_form_residual(run, _pair_x1mx()) <= 1e-10


def test_weak_residual_of_zero_test_function_is_exactly_zero():
    cfg = SimConfig(n_left=20, n_right=20, dt=1e-3, adaptive=False)
    run = solve(CoupledState.from_function(initial_data.sine(4.0), 0.4, 0.0, 20), 1.0, 0.1, cfg)
    zero = TestPair(lambda t, x: 0 * x, lambda t, x: 0 * x, lambda t, x: 0 * x)
    assert weak_form_residual(run, zero) == 0.0


def test_weak_residual_converges_under_joint_refinement():
    res = []
    for n, dt in ((20, 2e-3), (40, 1e-3), (80, 5e-4)):
        cfg = SimConfig(m=1.5, n_left=n, n_right=n, dt=dt, adaptive=False)
        run = solve(CoupledState.from_function(initial_data.sine(2.0), 0.35, 0.0, n), -1.0, 0.1, cfg)
        res.append(weak_form_residual(run, _pair_x1mx()))
    assert np.all(np.diff(res) < 0)
    assert np.all(observed_orders(res) >= 0.9)


def test_weak_residual_rejects_inadmissible_pairs():
    cfg = SimConfig(n_left=10, n_right=10, dt=1e-3, adaptive=False)
    run = solve(CoupledState.rest(0.5, 10), 0.0, 0.01, cfg)
    bad = TestPair(lambda t, x: 1 + 0 * x, lambda t, x: 0 * x, lambda t, x: 0 * x)
    with pytest.raises(ValueError, match="vanish"):
        weak_form_residual(run, bad)
    wrong_xi = TestPair(lambda t, x: x * (1 - x), lambda t, x: 0 * x, lambda t, x: 1 - 2 * x,
                        xi=lambda t: 0.0)
    with pytest.raises(ValueError, match="xi"):
        weak_form_residual(run, wrong_xi)
    cfg10 = SimConfig(n_left=10, n_right=10, dt=1e-3, adaptive=False, decimate=10)
    with pytest.raises(ValueError, match="decimate"):
        weak_form_residual(solve(CoupledState.rest(0.5, 10), 0.0, 0.05, cfg10), _pair_x1mx())

# }}}
