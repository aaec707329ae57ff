r"""
Viscous Burgers on the two moving subintervals ``(0, h(t))`` and ``(h(t), 1)``.

In the canonical frame of a side (wall at ``y = 0``, particle at ``y = 1``,
length ``L(t)``) the field ``U(t, y) = u(t, L y)`` obeys

.. math::

    U_t - L^{-2} U_{yy} + L^{-1} U U_y - \frac{L'}{L} y U_y = 0,
    \qquad U(t, 0) = 0,\quad U(t, 1) = L'(t).

Subtracting the affine lift ``L' y`` gives the homogeneous form

.. math::

    V_t - L^{-2} V_{yy} + L^{-1} V V_y + \frac{L'}{L} V + L'' y = 0,
    \qquad V(t, 0) = V(t, 1) = 0,

in which the mesh drift cancels.  For the left side ``L = h``; the right
side is mirrored, so ``L = 1 - h`` and the field changes sign.

Time stepping is IMEX Euler: diffusion implicit with the coefficient at the
new level, everything else explicit.  Convection uses the skew-symmetric
split ``(1/3)[(U^2)_y + U U_y]``, whose central discretisation telescopes
and so neither creates nor destroys discrete energy.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import lapack

from bpc.core import (CoupledState, ParticleState, Side, SideField, SimConfig,
                      reference_grid, to_physical)

Source = Callable[[float, np.ndarray], np.ndarray]


class NumericalFailure(RuntimeError):
    """Raised when a step produces non-finite values."""

    def __init__(self, t: float, message: str = "non-finite values"):
        super().__init__(f"{message} at t={t!r}")
        self.t = t


# {{{ coefficients

@dataclass(frozen=True)
class MappedCoefficients:
    """Coefficients of the mapped equation in a side's canonical frame.

    The equation reads ``W_t - diff W_yy + conv W W_y + drift y W_y
    + zeroth W + forcing_slope y = 0``.  ``drift`` belongs to the direct
    form (field ``U``), ``zeroth`` and ``forcing_slope`` to the lifted form
    (field ``V``); the lifted form has no drift.
    """

    diff: float
    conv: float
    zeroth: float
    forcing_slope: float
    drift: float


def canonical_motion(h: float, h_prime: float, h_dprime: float, side: Side):
    """``(L, L', L'')`` of the canonical frame of ``side``."""
    if side is Side.LEFT:
        return h, h_prime, h_dprime
    return 1.0 - h, -h_prime, -h_dprime


def mapped_coefficients(h: float, h_prime: float, h_dprime: float,
                        side: Side = Side.LEFT) -> MappedCoefficients:
    if not (0.0 < h < 1.0):
        raise ValueError(f"particle position must lie in (0, 1), got {h!r}")
    L, Lp, Lpp = canonical_motion(h, h_prime, h_dprime, side)
    return MappedCoefficients(diff=1.0 / (L * L), conv=1.0 / L, zeroth=Lp / L,
                              forcing_slope=Lpp, drift=-Lp / L)

# }}}


# {{{ prescribed motion

@dataclass(frozen=True)
class PrescribedMotion:
    """Particle path ``h`` with its first two derivatives on ``[t_start, t_end]``."""

    h: Callable[[float], float]
    dh: Callable[[float], float]
    d2h: Callable[[float], float]
    t_start: float
    t_end: float

    @classmethod
    def stationary(cls, h0: float, t_start: float = 0.0, t_end: float = np.inf) -> "PrescribedMotion":
        return cls(lambda t: h0, lambda t: 0.0, lambda t: 0.0, t_start, t_end)

    @classmethod
    def from_samples(cls, t, h) -> "PrescribedMotion":
        """Not-a-knot cubic spline through tabulated positions."""
        t = np.asarray(t, dtype=float)
        spline = CubicSpline(t, np.asarray(h, dtype=float), bc_type="not-a-knot")
        d1, d2 = spline.derivative(1), spline.derivative(2)
        return cls(lambda s: float(spline(s)), lambda s: float(d1(s)),
                   lambda s: float(d2(s)), float(t[0]), float(t[-1]))

    @classmethod
    def from_trajectory(cls, ref) -> "PrescribedMotion":
        """Wrap any object exposing ``h``, ``dh``, ``d2h``, ``T0`` and ``T1``."""
        return cls(ref.h, ref.dh, ref.d2h, ref.T0, ref.T1)

    def validate(self, n_samples: int = 10_000) -> None:
        t_end = self.t_end if np.isfinite(self.t_end) else self.t_start + 1.0
        ts = np.linspace(self.t_start, t_end, n_samples)
        hs = np.array([self.h(s) for s in ts])
        if not np.all((hs > 0.0) & (hs < 1.0)):
            raise ValueError("prescribed motion leaves (0, 1)")

# }}}


# {{{ lifting

def lift_profile(h: float, h_prime: float, side: Side, n: int) -> np.ndarray:
    """Affine function equal to ``h_prime`` at the particle and 0 at the wall."""
    y = reference_grid(n)
    return h_prime * (y if side is Side.LEFT else 1.0 - y)


def lift(values, h: float, h_prime: float, side: Side = Side.LEFT, atol: float = 1e-12) -> np.ndarray:
    """Subtract the affine lift; the result vanishes at both ends of the side."""
    values = np.asarray(values, dtype=float)
    iface = values[-1] if side is Side.LEFT else values[0]
    if abs(iface - h_prime) > atol * max(1.0, abs(h_prime)):
        raise ValueError(f"interface sample {iface!r} is not compatible with h'={h_prime!r}")
    v = values - lift_profile(h, h_prime, side, values.size - 2)
    v[0] = v[-1] = 0.0
    return v


def unlift(v, h: float, h_prime: float, side: Side = Side.LEFT) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    u = v + lift_profile(h, h_prime, side, v.size - 2)
    if side is Side.LEFT:
        u[0], u[-1] = 0.0, h_prime
    else:
        u[0], u[-1] = h_prime, 0.0
    return u

# }}}


# {{{ kernel

def _implicit_diffusion(rhs: np.ndarray, r: float, right_value: float) -> np.ndarray:
    """Solve ``(1 + 2r) x_i - r (x_{i-1} + x_{i+1}) = rhs_i`` with x_0 = 0, x_{n+1} fixed."""
    n = rhs.size
    rhs = rhs.copy()
    rhs[-1] += r * right_value
    off = np.full(n - 1, -r)
    _, _, _, x, info = lapack.dgtsv(off, np.full(n, 1.0 + 2.0 * r), off.copy(), rhs)
    if info != 0:
        raise np.linalg.LinAlgError(f"tridiagonal solve failed (info={info})")
    return x


def skew_convection(c: np.ndarray, dy: float) -> np.ndarray:
    """Central skew-symmetric approximation of ``c c_y`` at interior nodes."""
    cp, cm = c[2:], c[:-2]
    return (cp - cm) * (cp + cm + c[1:-1]) / (6.0 * dy)


def canonical_step(c: np.ndarray, dt: float, L_old: float, L_new: float, mesh_speed: float,
                   interface_value: float, source: Optional[np.ndarray] = None) -> np.ndarray:
    """One IMEX step of the direct form for a single side in its canonical frame.

    ``mesh_speed`` is ``dL/dt`` over the step; ``source`` (interior nodes
    only) is added explicitly.
    """
    n = c.size - 2
    dy = 1.0 / (n + 1)
    y = reference_grid(n)[1:-1]
    conv = 1.0 / L_old
    drift = -mesh_speed / L_old
    rhs = -conv * skew_convection(c, dy) - drift * y * (c[2:] - c[:-2]) / (2.0 * dy)
    if source is not None:
        rhs = rhs + source
    r = dt / (L_new * L_new * dy * dy)
    out = np.empty_like(c)
    out[0] = 0.0
    out[-1] = interface_value
    out[1:-1] = _implicit_diffusion(c[1:-1] + dt * rhs, r, interface_value)
    return out


def canonical_lifted_step(v: np.ndarray, dt: float, motion_old, L_new: float) -> np.ndarray:
    """One IMEX step of the lifted (homogeneous) form, canonical frame."""
    L, Lp, Lpp = motion_old
    n = v.size - 2
    dy = 1.0 / (n + 1)
    y = reference_grid(n)[1:-1]
    rhs = -(1.0 / L) * skew_convection(v, dy) - (Lp / L) * v[1:-1] - Lpp * y
    r = dt / (L_new * L_new * dy * dy)
    out = np.zeros_like(v)
    out[1:-1] = _implicit_diffusion(v[1:-1] + dt * rhs, r, 0.0)
    return out


def stable_dt(state: CoupledState, mesh_speed: float, safety: float) -> float:
    """Largest step allowed by the explicit terms.

    Per side in reference units the advective speed is ``max|U|/L + |L'|/L``;
    the step obeys both ``dt <= safety * dy / a`` and ``dt <= safety * 2 D / a^2``
    (``D = 1/L^2``), the latter being the long-wave condition of explicit
    central advection against implicit diffusion.
    """
    limit = np.inf
    h = state.h
    for f, L in ((state.left, h), (state.right, 1.0 - h)):
        a = np.abs(f.values).max() / L + abs(mesh_speed) / L
        if a > 1e-200:
            limit = min(limit, f.dy / a)
            La = L * a
            if La > 1e-100:
                limit = min(limit, 2.0 / (La * La))
    return safety * limit


def _side_source(source: Source, t: float, state: CoupledState, side: Side) -> np.ndarray:
    f = state.left if side is Side.LEFT else state.right
    x = to_physical(reference_grid(f.n), state.h, side)
    s = np.asarray(source(t, x), dtype=float) * np.ones_like(x)
    if side is Side.RIGHT:
        s = -s[::-1]
    return s[1:-1]


def advance_fluid(state: CoupledState, h_new: float, ell_new: float, dt: float,
                  mesh_speed: Optional[float] = None, source: Optional[Source] = None) -> CoupledState:
    """Advance both sides over ``[t, t + dt]`` while the particle moves to ``h_new``.

    ``ell_new`` is imposed at the particle node; ``mesh_speed`` (default the
    secant ``(h_new - h) / dt``) drives the drift term.
    """
    if not (0.0 < h_new < 1.0):
        raise ValueError(f"particle position must lie in (0, 1), got {h_new!r}")
    h = state.h
    if mesh_speed is None:
        mesh_speed = (h_new - h) / dt
    new = []
    for f, L_old, L_new, sign in ((state.left, h, h_new, 1.0),
                                  (state.right, 1.0 - h, 1.0 - h_new, -1.0)):
        src = None if source is None else _side_source(source, state.t, state, f.side)
        c = canonical_step(f.canonical(), dt, L_old, L_new, sign * mesh_speed, sign * ell_new, src)
        if not np.isfinite(c.sum()):
            raise NumericalFailure(state.t + dt)
        new.append(SideField.from_canonical(f.side, c))
    return CoupledState(state.t + dt, new[0], new[1], ParticleState(h_new, ell_new))

# }}}


# {{{ prescribed-motion solver

@dataclass
class Trajectory:
    """Stored states of a run (first and last always included)."""

    states: list

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    @property
    def final(self) -> CoupledState:
        return self.states[-1]


def step_prescribed(state: CoupledState, motion: PrescribedMotion, t: float, dt: float,
                    source: Optional[Source] = None) -> CoupledState:
    """One step with the particle following ``motion`` exactly."""
    t_new = t + dt
    state = state.with_time(t)
    return advance_fluid(state, motion.h(t_new), motion.dh(t_new), dt, source=source)


def apply_manufactured_source(state: CoupledState, motion: PrescribedMotion, t: float, dt: float,
                              source: Source) -> CoupledState:
    """Forced variant of :func:`step_prescribed`; ``source(t, x)`` is physical."""
    return step_prescribed(state, motion, t, dt, source=source)


def _time_grid_step(t: float, t_end: float, dt: float) -> float:
    # avoid a final sliver step; rounding must not split the last step
    rem = t_end - t
    if rem <= dt * (1.0 + 1e-8):
        return rem
    return 0.5 * rem if rem < 1.5 * dt else dt


def _check_compatible(state: CoupledState, motion: PrescribedMotion, t: float, atol: float = 1e-9) -> None:
    if abs(state.h - motion.h(t)) > atol or abs(state.ell - motion.dh(t)) > atol * max(1.0, abs(state.ell)):
        raise ValueError("initial state is not compatible with the prescribed motion")


def solve_prescribed(u0: CoupledState, motion: PrescribedMotion, t_span, config: SimConfig,
                     source: Optional[Source] = None, times=None) -> Trajectory:
    """Integrate the fluid with the particle following ``motion`` on ``t_span``.

    The step is ``config.dt`` (capped by :func:`stable_dt` when
    ``config.adaptive``), or the explicit ``times`` grid if given.  Every
    ``config.decimate``-th state is stored.
    """
    t0, t_end = t_span
    _check_compatible(u0, motion, t0)
    state = u0.with_time(t0)
    states = [state]
    if times is not None:
        grid = np.asarray(times, dtype=float)
    elif not config.adaptive:
        nsteps = max(1, int(np.ceil((t_end - t0) / config.dt - 1e-9)))
        grid = np.linspace(t0, t_end, nsteps + 1)
    else:
        grid = None
    eps = 1e-12 * max(1.0, abs(t_end))
    k = 0
    t = t0
    while t < t_end - eps:
        if grid is not None:
            if k + 1 >= grid.size:
                break
            t_new = grid[k + 1]
            dt = t_new - t
        else:
            dt = config.dt
            if config.adaptive:
                speed = motion.dh(t)
                dt = min(dt, stable_dt(state, speed, config.cfl_safety))
            dt = _time_grid_step(t, t_end, dt)
            t_new = t_end if t + dt >= t_end - eps else t + dt
            dt = t_new - t
        state = advance_fluid(state, motion.h(t_new), motion.dh(t_new), dt, source=source)
        state = state.with_time(t_new)
        t = t_new
        k += 1
        if k % config.decimate == 0:
            states.append(state)
    if states[-1] is not state:
        states.append(state)
    return Trajectory(states)


def solve_prescribed_lifted(u0: CoupledState, motion: PrescribedMotion, t_span, config: SimConfig,
                            times=None) -> Trajectory:
    """Same problem through the lifted homogeneous form (verification path).

    Uses the time grid ``times`` when given (e.g. from a direct run),
    otherwise fixed steps of ``config.dt``.
    """
    t0, t_end = t_span
    _check_compatible(u0, motion, t0)
    if times is None:
        nsteps = max(1, int(np.ceil((t_end - t0) / config.dt - 1e-9)))
        times = np.linspace(t0, t_end, nsteps + 1)
    times = np.asarray(times, dtype=float)

    def lifted(state, t):
        out = []
        for f, side in ((state.left, Side.LEFT), (state.right, Side.RIGHT)):
            L, Lp, _ = canonical_motion(motion.h(t), motion.dh(t), 0.0, side)
            out.append(f.canonical() - Lp * reference_grid(f.n))
        return out

    vs = lifted(u0, t0)
    for v in vs:
        v[0] = v[-1] = 0.0
    states = [u0.with_time(t0)]
    for k in range(times.size - 1):
        t, t_new = times[k], times[k + 1]
        dt = t_new - t
        hn, hpn = motion.h(t_new), motion.dh(t_new)
        new_vs = []
        for v, side in zip(vs, (Side.LEFT, Side.RIGHT)):
            m_old = canonical_motion(motion.h(t), motion.dh(t), motion.d2h(t), side)
            L_new = canonical_motion(hn, hpn, 0.0, side)[0]
            v = canonical_lifted_step(v, dt, m_old, L_new)
            if not np.all(np.isfinite(v)):
                raise NumericalFailure(t_new)
            new_vs.append(v)
        vs = new_vs
        if (k + 1) % config.decimate == 0 or k + 2 == times.size:
            fields = []
            for v, side in zip(vs, (Side.LEFT, Side.RIGHT)):
                Lp = canonical_motion(hn, hpn, 0.0, side)[1]
                c = v + Lp * reference_grid(v.size - 2)
                c[0], c[-1] = 0.0, Lp
                fields.append(SideField.from_canonical(side, c))
            states.append(CoupledState(t_new, fields[0], fields[1], ParticleState(hn, hpn)))
    return Trajectory(states)

# }}}
