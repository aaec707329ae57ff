"""
Integrator for the coupled fluid/particle system.

A step is partitioned: the hydrodynamic force (derivative jump) is read
off the current iterate, the particle is advanced with semi-implicit Euler,
then both fluid sides are advanced with the new position and velocity as
interface data.  Optional fixed-point sub-iterations re-read the force from
the new iterate until the particle velocity settles.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from bpc.core import (CoupledState, ParticleState, SimConfig, l2_squared, reference_grid,
                      to_physical, Side)
from bpc.mapped_burgers import NumericalFailure, advance_fluid, stable_dt

ControlLaw = Callable[[CoupledState, float], float]


# {{{ control schedule

@dataclass(frozen=True, eq=False)
class ControlSchedule:
    """Sampled control ``g(t_n)``; ``rule`` is ``"constant"`` (left value) or ``"linear"``."""

    t: np.ndarray
    g: np.ndarray
    rule: str = "constant"

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        g = np.asarray(self.g, dtype=float)
        if t.ndim != 1 or t.shape != g.shape or t.size < 1:
            raise ValueError("time nodes and samples must be 1D arrays of equal length")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("time nodes must be strictly increasing")
        if not np.all(np.isfinite(g)):
            raise ValueError("control samples must be finite")
        if self.rule not in ("constant", "linear"):
            raise ValueError(f"unknown interpolation rule {self.rule!r}")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "g", g)

    @classmethod
    def constant(cls, value: float, t0: float = 0.0, t1: float = np.inf) -> "ControlSchedule":
        if np.isfinite(t1):
            return cls(np.array([t0, t1]), np.array([value, value]))
        return cls(np.array([t0]), np.array([value]))

    @classmethod
    def zero(cls, t0: float = 0.0, t1: float = np.inf) -> "ControlSchedule":
        return cls.constant(0.0, t0, t1)

    def __call__(self, t: float) -> float:
        if self.rule == "linear" and self.t.size > 1:
            return float(np.interp(t, self.t, self.g))
        k = int(np.searchsorted(self.t, t, side="right")) - 1
        # tolerate rounding just below a node
        if k + 1 < self.t.size and self.t[k + 1] - t <= 1e-12 * max(1.0, abs(t)):
            k += 1
        return float(self.g[min(max(k, 0), self.g.size - 1)])

# }}}


# {{{ force and particle

def _interface_slope(c: np.ndarray, L: float) -> float:
    # second-order one-sided difference at the particle end of a canonical field
    dy = 1.0 / (c.size - 1)
    return (3.0 * c[-1] - 4.0 * c[-2] + c[-3]) / (2.0 * dy * L)


def derivative_jump(state: CoupledState) -> float:
    """``u_x(h+) - u_x(h-)`` from one-sided three-point stencils on each side."""
    h = state.h
    left = _interface_slope(state.left.values, h)
    # the mirror x -> 1 - x, u -> -u leaves u_x unchanged
    right = _interface_slope(state.right.canonical(), 1.0 - h)
    return right - left


def particle_step(p: ParticleState, jump: float, g: float, dt: float, m: float) -> ParticleState:
    """Semi-implicit Euler for ``m h'' = jump + g`` (velocity first)."""
    ell = p.ell + (dt / m) * (jump + g)
    return ParticleState(p.h + dt * ell, ell)


def energy(state: CoupledState, m: float) -> float:
    """``0.5 ||u||^2 + 0.5 m ell^2`` with trapezoidal quadrature."""
    return 0.5 * l2_squared(state) + 0.5 * m * state.ell ** 2


def dissipation(state: CoupledState) -> float:
    """Discrete ``int |u_x|^2`` (piecewise-linear gradient)."""
    h = state.h
    out = 0.0
    for f, L in ((state.left, h), (state.right, 1.0 - h)):
        d = np.diff(f.values)
        out += float(np.dot(d, d)) / (L * f.dy)
    return out

# }}}


# {{{ coupled step

class ContactDetected(Exception):
    """The particle came within ``contact_tol`` of a wall during a step."""

    def __init__(self, state: CoupledState, t_contact: float, jump: float, g: float):
        super().__init__(f"contact at t={t_contact!r} (h={state.h!r})")
        self.state = state
        self.t_contact = t_contact
        self.jump = jump
        self.g = g


def _as_law(g) -> ControlLaw:
    if callable(g):
        return g
    value = float(g)
    return lambda state, jump: value


def _step(state: CoupledState, law: ControlLaw, dt: float, config: SimConfig):
    """Returns ``(new_state, jump, g)``; ``jump``/``g`` are those that moved the particle."""
    p = state.particle
    cand = state
    ell_prev = None
    used = (0.0, 0.0)
    for _ in range(int(config.coupling_iters)):
        jump = derivative_jump(cand)
        g = law(cand, jump)
        if not np.isfinite(jump + g):
            raise NumericalFailure(state.t + dt, "non-finite force")
        new = particle_step(p, jump, g, dt, config.m)
        if ell_prev is not None and abs(new.ell - ell_prev) < config.coupling_tol:
            break
        if not (0.0 < new.h < 1.0):
            return None, jump, g
        cand = advance_fluid(state, new.h, new.ell, dt, mesh_speed=new.ell)
        ell_prev = new.ell
        used = (jump, g)
    return cand, used[0], used[1]


def coupled_step_detailed(state: CoupledState, g, dt: float, config: SimConfig):
    """Like :func:`coupled_step` but also returns the force and control used.

    A step that would carry the particle through a wall is retried with
    halved ``dt`` so the state that reports contact is always well defined.
    """
    law = _as_law(g)
    for _ in range(60):
        new, jump, g_used = _step(state, law, dt, config)
        if new is not None:
            break
        dt *= 0.5
    else:
        raise NumericalFailure(state.t, "particle crossed a wall")
    tol = config.contact_tol
    if not (tol < new.h < 1.0 - tol):
        # linear interpolation of the crossing of the contact band
        wall = tol if new.h <= tol else 1.0 - tol
        frac = (state.h - wall) / (state.h - new.h) if new.h != state.h else 1.0
        t_c = state.t + min(max(frac, 0.0), 1.0) * dt
        raise ContactDetected(new, t_c, jump, g_used)
    return new, jump, g_used


def coupled_step(state: CoupledState, g, dt: float, config: SimConfig) -> CoupledState:
    """One partitioned step; ``g`` is a number or a law ``g(state, jump)``.

    Raises :class:`ContactDetected` or :class:`NumericalFailure`.
    """
    return coupled_step_detailed(state, g, dt, config)[0]

# }}}


# {{{ runs

class Termination(enum.Enum):
    REACHED_FINAL_TIME = "reached_final_time"
    CONTACT = "contact"
    NUMERICAL_FAILURE = "numerical_failure"


DIAGNOSTIC_COLUMNS = ("t", "h", "ell", "g", "l2_norm", "linf_norm", "energy", "jump", "dissipation")


@dataclass
class RunResult:
    """Outcome of :func:`solve`.

    ``diagnostics`` has one row per step boundary (column names in
    :data:`DIAGNOSTIC_COLUMNS`); ``g`` in a row is the control applied on the
    step that starts there.  ``control`` holds the same values as a
    piecewise-constant schedule.
    """

    states: list
    termination: Termination
    t_event: Optional[float]
    diagnostics: dict
    control: ControlSchedule
    m: float
    message: str = ""
    step_times: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def final(self) -> CoupledState:
        return self.states[-1]

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])


def _diag_row(state: CoupledState, m: float) -> list:
    l2sq = l2_squared(state)
    linf = max(np.abs(state.left.values).max(), np.abs(state.right.values).max())
    return [state.t, state.h, state.ell, np.nan, np.sqrt(l2sq), linf,
            0.5 * l2sq + 0.5 * m * state.ell ** 2, derivative_jump(state), dissipation(state)]


def solve(state0: CoupledState, control, t_end: float, config: SimConfig,
          times=None, feedback: Optional[Callable] = None) -> RunResult:
    """Integrate from ``state0`` to ``t_end`` (or contact, or failure).

    ``control`` is a :class:`ControlSchedule`, a number, or ``None`` with a
    ``feedback`` law ``g(state, jump, t_step)`` evaluated on every coupling
    iterate (``t_step`` is the start of the current step).
    Steps follow ``times`` when given, else ``config.dt`` (capped by the
    stability limit when ``config.adaptive``).  Termination is reported in
    the result, never raised.
    """
    if feedback is not None:
        law_for = lambda t: (lambda state, jump: feedback(state, jump, t))
    elif isinstance(control, ControlSchedule):
        law_for = lambda t: _as_law(control(t))
    else:
        law_for = lambda t: _as_law(0.0 if control is None else control)

    if times is not None:
        grid = np.asarray(times, dtype=float)
    elif not config.adaptive:
        # uniform steps from a precomputed grid: no drift from summing dt
        nsteps = max(1, int(np.ceil((t_end - state0.t) / config.dt - 1e-9)))
        grid = np.linspace(state0.t, t_end, nsteps + 1)
    else:
        grid = None
    state = state0
    states = [state]
    rows = [_diag_row(state, config.m)]
    step_times = [state.t]
    termination, t_event, message = Termination.REACHED_FINAL_TIME, None, ""
    k = 0
    eps = 1e-12 * max(1.0, abs(t_end))
    while state.t < t_end - eps:
        if grid is not None:
            j = int(np.searchsorted(grid, state.t + eps, side="right"))
            if j >= grid.size:
                break
            target = grid[j]
            dt = target - state.t
        else:
            dt = config.dt
            if config.adaptive:
                dt = min(dt, stable_dt(state, state.ell, config.cfl_safety))
            rem = t_end - state.t
            # accumulated rounding must not turn the last step into two
            if rem <= dt * (1.0 + 1e-8):
                dt = rem
            elif rem < 1.5 * dt:
                dt = 0.5 * rem
            target = state.t + dt if state.t + dt < t_end - eps else t_end
        law = law_for(state.t)
        try:
            new, jump, g = coupled_step_detailed(state, law, dt, config)
        except ContactDetected as event:
            rows[-1][3] = event.g
            state = event.state
            states.append(state)
            rows.append(_diag_row(state, config.m))
            step_times.append(state.t)
            termination, t_event = Termination.CONTACT, event.t_contact
            message = str(event)
            break
        except (NumericalFailure, np.linalg.LinAlgError) as exc:
            termination = Termination.NUMERICAL_FAILURE
            t_event = getattr(exc, "t", state.t + dt)
            message = str(exc)
            break
        if abs(new.t - target) <= 1e-9 * max(1.0, abs(target)):
            new = new.with_time(target)
        rows[-1][3] = g
        state = new
        k += 1
        rows.append(_diag_row(state, config.m))
        step_times.append(state.t)
        if k % config.decimate == 0:
            states.append(state)
    if states[-1] is not state:
        states.append(state)
    if rows:
        rows[-1][3] = rows[-2][3] if len(rows) > 1 else 0.0
    arr = np.array(rows, dtype=float)
    diagnostics = {name: arr[:, i] for i, name in enumerate(DIAGNOSTIC_COLUMNS)}
    st = np.array(step_times)
    control_used = ControlSchedule(st, diagnostics["g"]) if st.size else ControlSchedule.zero()
    return RunResult(states, termination, t_event, diagnostics, control_used, config.m,
                     message, st)

# }}}


# {{{ weak form

@dataclass(frozen=True)
class TestPair:
    """Admissible test pair: ``psi(t, x)`` vanishing at the walls, ``xi = psi(t, h(t))``.

    ``psi``, ``psi_t`` and ``psi_x`` take ``(t, x)`` with array ``x``.  An
    explicit ``xi`` may be supplied; it is checked against ``psi`` along the
    particle path.
    """

    psi: Callable
    psi_t: Callable
    psi_x: Callable
    xi: Optional[Callable] = None

    __test__ = False


def _side_nodes(state: CoupledState):
    h = state.h
    for f, side, L in ((state.left, Side.LEFT, h), (state.right, Side.RIGHT, 1.0 - h)):
        yield f.values, to_physical(reference_grid(f.n), h, side), L * f.dy


def _trap(v: np.ndarray, dx: float) -> float:
    return dx * (v[1:-1].sum() + 0.5 * (v[0] + v[-1]))


def _space_terms(state: CoupledState, pair: TestPair):
    """``(int u psi, int u psi_t, int u_x psi_x, int u^2 psi_x)`` at one time."""
    t = state.t
    a = b = c = d = 0.0
    for u, x, dx in _side_nodes(state):
        a += _trap(u * pair.psi(t, x), dx)
        b += _trap(u * pair.psi_t(t, x), dx)
        d += _trap(u * u * pair.psi_x(t, x), dx)
        xm = 0.5 * (x[1:] + x[:-1])
        c += float(np.sum(np.diff(u) * pair.psi_x(t, xm)))
    return a, b, c, d


def _time_trap(t: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Cumulative trapezoid with a leading zero."""
    out = np.zeros_like(f)
    out[1:] = np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(t))
    return out


def weak_form_residual(result: RunResult, pair: TestPair, reduce: str = "max") -> float:
    """Residual of the integral identity defining weak solutions.

    Every term is assembled by quadrature over the stored states (trapezoid
    in time and space, midpoint for the gradient term); the particle terms
    carry the mass ``m``.  Returns the max over stored times of
    ``|LHS - RHS|`` (``reduce="final"`` for the last time only).
    """
    states = result.states
    if len(states) != result.step_times.size:
        raise ValueError("weak-form residual needs every step stored (decimate=1)")
    t = np.array([s.t for s in states])
    ell = np.array([s.ell for s in states])
    xi = np.array([float(pair.psi(s.t, np.array([s.h]))[0]) for s in states])
    if pair.xi is not None:
        xi_given = np.array([float(pair.xi(s.t)) for s in states])
        if np.max(np.abs(xi_given - xi)) > 1e-12:
            raise ValueError("test pair violates xi(t) = psi(t, h(t))")
    walls = np.array([0.0, 1.0])
    for s in states[:: max(1, len(states) // 10)]:
        if np.max(np.abs(pair.psi(s.t, walls))) > 1e-12:
            raise ValueError("psi must vanish at x = 0 and x = 1")
    xi_dot = np.array([float(pair.psi_t(s.t, np.array([s.h]))[0]
                             + pair.psi_x(s.t, np.array([s.h]))[0] * s.ell) for s in states])
    terms = np.array([_space_terms(s, pair) for s in states])
    u_psi, u_psit, ux_psix, u2_psix = terms.T
    m = result.m
    lhs = (u_psi - u_psi[0]
           + m * (ell * xi - ell[0] * xi[0] - _time_trap(t, ell * xi_dot))
           - _time_trap(t, u_psit) + _time_trap(t, ux_psix) - 0.5 * _time_trap(t, u2_psix))
    # piecewise-constant control against the trapezoid average of xi
    sched = result.control
    g_steps = np.array([sched(tk) for tk in t[:-1]])
    rhs = np.zeros_like(t)
    rhs[1:] = np.cumsum(g_steps * 0.5 * (xi[1:] + xi[:-1]) * np.diff(t))
    res = np.abs(lhs - rhs)
    return float(res[-1] if reduce == "final" else res.max())

# }}}
