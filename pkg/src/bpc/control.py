"""
Global steering strategy for the particle/fluid system.

Three phases run back to back:

1. *smoothing*: ``g = 0`` for a short time so rough data become ``H^1``;
2. *tracking*: the particle is driven along ``h(t) = (1 + sin phi(t)) / 2``
   with ``phi`` a cubic Hermite interpolant, using the open-loop force
   ``g = m h'' - [u_x]`` synthesised from a prescribed-motion fluid solve;
3. *hold*: the feedback ``g = -[u_x]`` pins the particle at the target
   while the fluid decays like ``1 / (t - T1)`` whatever the data.

The hold duration depends only on the requested smallness, which is what
makes the total time independent of the initial state.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from bpc.core import CoupledState, SimConfig, discrete_norms, physical_profile, reposition
from bpc.coupled import (ControlSchedule, RunResult, Termination, derivative_jump, solve)
from bpc.mapped_burgers import NumericalFailure, PrescribedMotion, solve_prescribed

_DEGENERATE = 1e-9


# {{{ reference trajectory

def _hermite(s):
    s2 = s * s
    s3 = s2 * s
    return (2 * s3 - 3 * s2 + 1, s3 - 2 * s2 + s, -2 * s3 + 3 * s2)


def _hermite_d1(s):
    s2 = s * s
    return (6 * s2 - 6 * s, 3 * s2 - 4 * s + 1, -6 * s2 + 6 * s)


def _hermite_d2(s):
    return (12 * s - 6, 6 * s - 4, -12 * s + 6)


@dataclass(frozen=True)
class ReferenceTrajectory:
    """``h(t) = (1 + sin phi(t)) / 2`` on ``[T0, T1]`` with cubic ``phi``.

    ``phi`` is stored through its Hermite data; the end slope is zero.
    """

    T0: float
    T1: float
    phi0: float
    dphi0: float
    phi1: float
    h_start: float
    ell_start: float
    h_target: float

    @property
    def duration(self) -> float:
        return self.T1 - self.T0

    def _s(self, t):
        return (np.asarray(t, dtype=float) - self.T0) / self.duration

    def phi(self, t):
        b = _hermite(self._s(t))
        return self.phi0 * b[0] + self.duration * self.dphi0 * b[1] + self.phi1 * b[2]

    def dphi(self, t):
        b = _hermite_d1(self._s(t))
        return (self.phi0 * b[0] + self.phi1 * b[2]) / self.duration + self.dphi0 * b[1]

    def d2phi(self, t):
        b = _hermite_d2(self._s(t))
        lam = self.duration
        return (self.phi0 * b[0] + self.phi1 * b[2]) / lam ** 2 + self.dphi0 * b[1] / lam

    def h(self, t):
        return 0.5 * (1.0 + np.sin(self.phi(t)))

    def dh(self, t):
        return 0.5 * np.cos(self.phi(t)) * self.dphi(t)

    def d2h(self, t):
        p, dp = self.phi(t), self.dphi(t)
        return 0.5 * (np.cos(p) * self.d2phi(t) - np.sin(p) * dp * dp)

    @property
    def coefficients(self) -> np.ndarray:
        """Monomial coefficients of ``phi`` in ``t - T0``, highest degree first."""
        lam = self.duration
        # H00, H10, H01 in powers of s, s = (t - T0) / lam
        c = (self.phi0 * np.array([2.0, -3.0, 0.0, 1.0])
             + lam * self.dphi0 * np.array([1.0, -2.0, 1.0, 0.0])
             + self.phi1 * np.array([-2.0, 3.0, 0.0, 0.0]))
        return c / lam ** np.arange(3, -1, -1)

    def motion(self) -> PrescribedMotion:
        return PrescribedMotion(lambda t: float(self.h(t)), lambda t: float(self.dh(t)),
                                lambda t: float(self.d2h(t)), self.T0, self.T1)

    def phi_range(self) -> tuple[float, float]:
        """Exact extremes of ``phi`` over ``[T0, T1]`` from its critical points."""
        c = self.coefficients
        crit = np.roots(np.polyder(c)) if np.any(c[:-1] != 0) else np.array([])
        crit = crit[np.isreal(crit)].real
        crit = crit[(crit > 0) & (crit < self.duration)]
        vals = np.concatenate([[self.phi(self.T0), self.phi(self.T1)], self.phi(self.T0 + crit)])
        return float(vals.min()), float(vals.max())

    def touches_wall(self) -> bool:
        lo, hi = self.phi_range()
        return lo <= -0.5 * math.pi or hi >= 0.5 * math.pi

    def min_wall_distance(self, n_samples: int = 10_000) -> float:
        if self.touches_wall():
            return 0.0
        hs = self.h(np.linspace(self.T0, self.T1, n_samples))
        return float(min(hs.min(), 1.0 - hs.max()))


def build_reference(h_start: float, ell_start: float, h_target: float, T0: float, T1: float,
                    wall_margin: float = 0.0) -> ReferenceTrajectory:
    """Cubic-in-angle path from ``(h_start, ell_start)`` at ``T0`` to rest at ``h_target``.

    Raises ``ValueError`` if ``h_start`` is degenerate for ``arcsin``, if the
    inputs are out of range, or if the sampled path comes within
    ``wall_margin`` of a wall (it touches a wall whenever ``phi`` crosses
    an odd multiple of pi/2, which large initial velocities force).
    """
    if not (T1 > T0):
        raise ValueError("T1 must exceed T0")
    if not (0.0 < h_target < 1.0):
        raise ValueError("h_target must lie in (0, 1)")
    if not (0.0 < h_start < 1.0):
        raise ValueError("h_start must lie in (0, 1)")
    if min(h_start, 1.0 - h_start) < _DEGENERATE:
        raise ValueError(f"h_start={h_start!r} is too close to a wall for the arcsin map")
    a = 2.0 * h_start - 1.0
    ref = ReferenceTrajectory(
        T0=float(T0), T1=float(T1),
        phi0=math.asin(a),
        dphi0=2.0 * ell_start / math.sqrt(1.0 - a * a),
        phi1=math.asin(2.0 * h_target - 1.0),
        h_start=h_start, ell_start=ell_start, h_target=h_target)
    if ref.min_wall_distance() <= wall_margin:
        raise ValueError("reference trajectory reaches a wall; shorten or lengthen the "
                         "tracking phase or reduce the initial particle velocity")
    return ref

# }}}


# {{{ phases

@dataclass
class SmoothingOutcome:
    state: CoupledState
    duration: float
    h1_seminorm: float
    run: RunResult


def smoothing_phase(u0, h0: float, ell0: float, T0_duration: float, config: SimConfig,
                    floor: float = 1e-4) -> SmoothingOutcome:
    """Free evolution (``g = 0``) for ``T0_duration``.

    ``u0`` is a callable of ``x`` or a ready :class:`CoupledState`.  On contact
    the duration is halved and the phase rerun, down to ``floor``.
    """
    if T0_duration <= 0:
        raise ValueError("T0_duration must be positive")
    if isinstance(u0, CoupledState):
        state0 = u0
    else:
        state0 = CoupledState.from_function(u0, h0, ell0, config.n_left, config.n_right)
    duration = T0_duration
    while True:
        run = solve(state0, 0.0, state0.t + duration, config)
        if run.termination is Termination.REACHED_FINAL_TIME:
            final = run.final
            return SmoothingOutcome(final, duration, discrete_norms(final).h1, run)
        if run.termination is Termination.NUMERICAL_FAILURE:
            raise NumericalFailure(run.t_event, f"smoothing failed: {run.message}")
        duration *= 0.5
        if duration < floor:
            raise PhaseFailure("smoothing", f"contact even with T0 below {floor}")


class PhaseFailure(RuntimeError):
    def __init__(self, phase: str, message: str):
        super().__init__(f"{phase}: {message}")
        self.phase = phase


def tracking_control(state_T0: CoupledState, ref: ReferenceTrajectory, config: SimConfig):
    """Open-loop tracking force from a prescribed-motion fluid solve.

    Returns ``(schedule, trajectory)`` where ``schedule.g[n] =
    m h''(t_n) - [u_x](t_n)`` on the solve's time grid.
    """
    if abs(state_T0.h - ref.h_start) > 1e-12 or abs(state_T0.ell - ref.ell_start) > 1e-12:
        raise ValueError("reference does not start from the given state")
    motion = ref.motion()
    cfg = _replace(config, decimate=1)
    start = state_T0.with_time(ref.T0)
    traj = solve_prescribed(start, motion, (ref.T0, ref.T1), cfg)
    t = traj.times
    g = np.array([config.m * float(ref.d2h(s.t)) - derivative_jump(s) for s in traj.states])
    return ControlSchedule(t, g), traj


def replay_tracking(state_T0: CoupledState, schedule: ControlSchedule, config: SimConfig,
                    ref: Optional[ReferenceTrajectory] = None, closed_loop: bool = False) -> RunResult:
    """Run the coupled solver through the tracking phase on the schedule's grid.

    ``closed_loop`` recomputes the jump from the replayed state instead of
    using the synthesised one (needs ``ref``).
    """
    start = state_T0.with_time(float(schedule.t[0]))
    t_end = float(schedule.t[-1])
    if closed_loop:
        if ref is None:
            raise ValueError("closed-loop tracking needs the reference trajectory")
        m = config.m
        law = lambda state, jump, t: m * float(ref.d2h(t)) - jump
        return solve(start, None, t_end, config, times=schedule.t, feedback=law)
    return solve(start, schedule, t_end, config, times=schedule.t)


def hold_control_step(state: CoupledState) -> float:
    """Feedback that cancels the hydrodynamic force on the particle."""
    return -derivative_jump(state)


def hold_law(state: CoupledState, jump: float, t: float = 0.0) -> float:
    return -jump


def hold_phase(state_T1: CoupledState, duration: float, config: SimConfig) -> RunResult:
    if abs(state_T1.ell) > config.coupling_tol:
        raise ValueError("hold phase must start with the particle at rest")
    return solve(state_T1, None, state_T1.t + duration, config, feedback=hold_law)


def decay_horizon(delta: float, norm_kind: str = "sup") -> float:
    """Hold duration after which ``|u| <= max(x, 1-x) / (t - T1)`` is below ``delta``.

    ``sup``: ``1 / delta``; ``l2``: ``sqrt(7/12) / delta``.
    """
    if not (delta > 0):
        raise ValueError("delta must be positive")
    if norm_kind == "sup":
        return 1.0 / delta
    if norm_kind == "l2":
        return math.sqrt(7.0 / 12.0) / delta
    raise ValueError(f"unknown norm kind {norm_kind!r}")


@dataclass
class OleinikReport:
    max_violation: float
    t: float
    x: float
    per_time: np.ndarray  # rows (t - T1, max violation at that time)


def oleinik_check(result: RunResult, T1: float, min_elapsed: float = 0.0) -> OleinikReport:
    """Largest violation of ``-(1-x)/(t-T1) <= u <= x/(t-T1)`` over stored samples."""
    best = (0.0, np.nan, np.nan)
    rows = []
    for s in result.states:
        tau = s.t - T1
        if tau <= 0 or tau < min_elapsed:
            continue
        x, u = physical_profile(s)
        viol = np.maximum(u - x / tau, -(1.0 - x) / tau - u)
        k = int(np.argmax(viol))
        v = max(float(viol[k]), 0.0)
        rows.append((tau, v))
        if v > best[0] or np.isnan(best[1]):
            best = (v, s.t, float(x[k]))
    return OleinikReport(best[0], best[1], best[2], np.array(rows).reshape(-1, 2))

# }}}


# {{{ end-to-end strategy

@dataclass
class StrategyParams:
    """Phase layout and pass thresholds of :func:`run_global_strategy`."""

    T0_duration: float = 0.01
    tracking_duration: float = 1.0
    norm_kind: str = "sup"
    slack: float = 0.1
    tol_h: float = 1e-12
    tol_ell: float = 1e-12
    handoff_tol: float = 1e-2
    closed_loop_tracking: bool = False
    keep_runs: bool = True


@dataclass
class StrategyReport:
    T0: float
    T1: float
    T2: float
    passed: bool
    checks: dict
    terminal_state: Optional[CoupledState]
    controls: dict = field(default_factory=dict)
    phases: dict = field(default_factory=dict)
    failed_phase: Optional[str] = None
    message: str = ""
    info: dict = field(default_factory=dict)


def _replace(config: SimConfig, **changes) -> SimConfig:
    return replace(config, **changes)


def _failed(T0, T1, T2, phase, message, phases, controls, info) -> StrategyReport:
    return StrategyReport(T0, T1, T2, False, {}, None, controls, phases, phase, message, info)


def run_global_strategy(u0, h0: float, ell0: float, h_target: float, delta: float,
                        config: SimConfig, params: Optional[StrategyParams] = None) -> StrategyReport:
    """Smoothing, tracking and hold phases followed by terminal smallness checks.

    Between tracking and hold the particle is snapped to ``(h_target, 0)``;
    the discrete replay mismatch this removes is recorded in ``info`` and
    must stay below ``params.handoff_tol``.
    """
    p = params or StrategyParams()
    if not (0.0 < h_target < 1.0):
        raise ValueError("h_target must lie in (0, 1)")
    hold = decay_horizon(delta, p.norm_kind)
    phases, controls, info = {}, {}, {"hold_duration": hold}
    T0 = p.T0_duration
    T1 = T0 + p.tracking_duration
    T2 = T1 + hold

    try:
        smooth = smoothing_phase(u0, h0, ell0, p.T0_duration, config)
    except (PhaseFailure, NumericalFailure) as exc:
        return _failed(T0, T1, T2, "smoothing", str(exc), phases, controls, info)
    T0 = smooth.state.t
    T1 = T0 + p.tracking_duration
    T2 = T1 + hold
    info["smoothing_duration"] = smooth.duration
    info["h1_after_smoothing"] = smooth.h1_seminorm
    if p.keep_runs:
        phases["smoothing"] = smooth.run
    controls["smoothing"] = ControlSchedule.zero(0.0, T0)

    state = smooth.state
    try:
        ref = build_reference(state.h, state.ell, h_target, T0, T1, wall_margin=config.contact_tol)
        schedule, predicted = tracking_control(state, ref, config)
    except (ValueError, NumericalFailure) as exc:
        return _failed(T0, T1, T2, "tracking", str(exc), phases, controls, info)
    controls["tracking"] = schedule
    replay = replay_tracking(state, schedule, config, ref, closed_loop=p.closed_loop_tracking)
    if p.keep_runs:
        phases["tracking"] = replay
        phases["tracking_prediction"] = predicted
    if replay.termination is not Termination.REACHED_FINAL_TIME:
        return _failed(T0, T1, T2, "tracking", replay.message, phases, controls, info)
    end = replay.final
    info["tracking_h_error"] = abs(end.h - h_target)
    info["tracking_ell_error"] = abs(end.ell)
    miss = max(info["tracking_h_error"], info["tracking_ell_error"])
    if miss > p.handoff_tol:
        return _failed(T0, T1, T2, "tracking",
                       f"replay missed (h_target, 0) by {miss:.3e} (tolerance {p.handoff_tol:g})",
                       phases, controls, info)
    handoff = reposition(end, h_target, 0.0).with_time(T1)
    info["handoff_l2_change"] = abs(discrete_norms(handoff).l2 - discrete_norms(end).l2)

    held = hold_phase(handoff, hold, config)
    if p.keep_runs:
        phases["hold"] = held
    controls["hold"] = held.control
    if held.termination is not Termination.REACHED_FINAL_TIME:
        return _failed(T0, T1, T2, "hold", held.message, phases, controls, info)

    final = held.final
    norms = discrete_norms(final)
    fluid = norms.linf if p.norm_kind == "sup" else norms.l2
    checks = {
        "h_error": abs(final.h - h_target),
        "ell_abs": abs(final.ell),
        "u_l2": norms.l2,
        "u_linf": norms.linf,
    }
    passed = (fluid <= delta * (1.0 + p.slack) and checks["h_error"] <= p.tol_h
              and checks["ell_abs"] <= p.tol_ell)
    return StrategyReport(T0, T1, T2, passed, checks, final, controls, phases, None, "", info)

# }}}
