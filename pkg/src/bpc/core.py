"""
Domain types, coordinate maps and discrete norms.

Each fluid subdomain is pulled back to a uniform reference grid
``y in [0, 1]``.  The left side ``(0, h)`` uses ``x = h y`` and the right
side ``(h, 1)`` uses ``x = h + (1 - h) y``, so the particle sits at
``y = 1`` on the left grid and at ``y = 0`` on the right grid.

Solvers work in a *canonical* wall-to-interface frame for both sides: the
left side is used as is, the right side is mirrored (``x -> 1 - x``,
``u -> -u``).  Burgers is invariant under that reflection, so one kernel
serves both sides and odd-symmetric data stay odd-symmetric bit for bit.
"""
from __future__ import annotations

import enum
import functools
from dataclasses import dataclass
from typing import Callable

import numpy as np


class Side(enum.Enum):
    LEFT = "left"
    RIGHT = "right"


def _check_position(h: float) -> None:
    if not (0.0 < h < 1.0) or not np.isfinite(h):
        raise ValueError(f"particle position must lie in (0, 1), got {h!r}")


def side_length(h: float, side: Side) -> float:
    """Physical length of the subdomain on ``side`` of a particle at ``h``."""
    return h if side is Side.LEFT else 1.0 - h


def to_reference(x, h: float, side: Side):
    """Map physical ``x`` to the reference coordinate of ``side``."""
    _check_position(h)
    if side is Side.LEFT:
        return np.asarray(x) / h if np.ndim(x) else x / h
    return (np.asarray(x) - h) / (1.0 - h) if np.ndim(x) else (x - h) / (1.0 - h)


def to_physical(y, h: float, side: Side):
    """Inverse of :func:`to_reference`."""
    _check_position(h)
    y = np.asarray(y) if np.ndim(y) else y
    if side is Side.LEFT:
        return h * y
    # both endpoints land exactly on the particle and on the wall
    x = h + (1.0 - h) * y
    if np.ndim(x):
        return np.where(y == 1.0, 1.0, x)
    return 1.0 if y == 1.0 else x


@functools.lru_cache(maxsize=64)
def reference_grid(n: int) -> np.ndarray:
    """Uniform grid of ``n + 2`` points on ``[0, 1]``, endpoints included (read-only)."""
    y = np.linspace(0.0, 1.0, n + 2)
    y.setflags(write=False)
    return y


@dataclass(frozen=True)
class ParticleState:
    h: float
    ell: float

    def __post_init__(self):
        if not (np.isfinite(self.h) and np.isfinite(self.ell)):
            raise ValueError("particle state must be finite")

    @property
    def valid(self) -> bool:
        return 0.0 < self.h < 1.0


@dataclass(frozen=True, eq=False)
class SideField:
    """Velocity samples of one subdomain on its reference grid.

    ``values`` has ``n + 2`` entries in physical orientation: for the left
    side ``values[0]`` is the wall and ``values[-1]`` the particle; for the
    right side ``values[0]`` is the particle and ``values[-1]`` the wall.
    """

    side: Side
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size < 4:
            raise ValueError("a side field needs at least two interior nodes")
        if not np.isfinite(v.sum()):
            raise ValueError("side field contains non-finite samples")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.size - 2

    @property
    def dy(self) -> float:
        return 1.0 / (self.n + 1)

    @property
    def wall_value(self) -> float:
        return float(self.values[0] if self.side is Side.LEFT else self.values[-1])

    @property
    def interface_value(self) -> float:
        return float(self.values[-1] if self.side is Side.LEFT else self.values[0])

    def canonical(self) -> np.ndarray:
        """Samples in the wall-to-interface frame (mirrored for the right side)."""
        if self.side is Side.LEFT:
            return self.values.copy()
        return -self.values[::-1]

    @classmethod
    def from_canonical(cls, side: Side, c: np.ndarray) -> "SideField":
        if side is Side.LEFT:
            return cls(side, c)
        return cls(side, -np.asarray(c)[::-1])


@dataclass(frozen=True, eq=False)
class CoupledState:
    """Full discrete state: both fluid sides plus the particle at time ``t``."""

    t: float
    left: SideField
    right: SideField
    particle: ParticleState

    def __post_init__(self):
        if self.left.side is not Side.LEFT or self.right.side is not Side.RIGHT:
            raise ValueError("left/right side fields are swapped")
        ell = self.particle.ell
        if self.left.interface_value != ell or self.right.interface_value != ell:
            raise ValueError(
                "interface samples must equal the particle velocity "
                f"(left={self.left.interface_value!r}, right={self.right.interface_value!r}, "
                f"ell={ell!r})")
        if self.left.wall_value != 0.0 or self.right.wall_value != 0.0:
            raise ValueError("wall samples must vanish")

    @property
    def h(self) -> float:
        return self.particle.h

    @property
    def ell(self) -> float:
        return self.particle.ell

    def physical_nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Physical coordinates of the left and right grid nodes."""
        h = self.h
        return (to_physical(reference_grid(self.left.n), h, Side.LEFT),
                to_physical(reference_grid(self.right.n), h, Side.RIGHT))

    def with_time(self, t: float) -> "CoupledState":
        return CoupledState(t, self.left, self.right, self.particle)

    @classmethod
    def from_function(cls, u0: Callable[[np.ndarray], np.ndarray], h: float, ell: float,
                      n_left: int, n_right: int | None = None, t: float = 0.0) -> "CoupledState":
        """Sample ``u0`` on both grids, zero walls and overwrite the particle node with ``ell``.

        ``u0`` only needs to be defined pointwise (L2 data is fine); the
        interface overwrite is what makes the state compatible.
        """
        _check_position(h)
        n_right = n_left if n_right is None else n_right
        xl = to_physical(reference_grid(n_left), h, Side.LEFT)
        xr = to_physical(reference_grid(n_right), h, Side.RIGHT)
        vl = np.array(u0(xl), dtype=float) * np.ones_like(xl)
        vr = np.array(u0(xr), dtype=float) * np.ones_like(xr)
        vl[0] = 0.0
        vr[-1] = 0.0
        vl[-1] = ell
        vr[0] = ell
        return cls(t, SideField(Side.LEFT, vl), SideField(Side.RIGHT, vr), ParticleState(h, ell))

    @classmethod
    def rest(cls, h: float, n_left: int, n_right: int | None = None, t: float = 0.0) -> "CoupledState":
        return cls.from_function(lambda x: np.zeros_like(x), h, 0.0, n_left, n_right, t)


# {{{ norms and reconstruction

@dataclass(frozen=True)
class Norms:
    l2: float
    linf: float
    h1: float


def _trapezoid_sq(values: np.ndarray, dx: float) -> float:
    v2 = values * values
    return dx * (v2[1:-1].sum() + 0.5 * (v2[0] + v2[-1]))


def _side_integrals(f: SideField, length: float) -> tuple[float, float]:
    dx = length * f.dy
    d = np.diff(f.values)
    return _trapezoid_sq(f.values, dx), float(np.dot(d, d) / dx)


def l2_squared(state: CoupledState) -> float:
    """Trapezoidal approximation of the squared L2 norm of ``u`` over (0, 1)."""
    h = state.h
    return (_trapezoid_sq(state.left.values, h * state.left.dy)
            + _trapezoid_sq(state.right.values, (1.0 - h) * state.right.dy))


def discrete_norms(state: CoupledState) -> Norms:
    h = state.h
    l2l, h1l = _side_integrals(state.left, h)
    l2r, h1r = _side_integrals(state.right, 1.0 - h)
    linf = max(np.abs(state.left.values).max(), np.abs(state.right.values).max())
    return Norms(l2=float(np.sqrt(l2l + l2r)), linf=float(linf), h1=float(np.sqrt(h1l + h1r)))


def reconstruct_physical(state: CoupledState, n_out: int = 201) -> np.ndarray:
    """Piecewise-linear field on ``n_out`` uniform points plus the particle node.

    Returns an ``(m, 2)`` array of ``(x, u)`` rows with strictly increasing ``x``.
    """
    h = state.h
    x = np.union1d(np.linspace(0.0, 1.0, n_out), [h])
    u = np.empty_like(x)
    left = x < h
    right = x > h
    u[left] = np.interp(x[left] / h, reference_grid(state.left.n), state.left.values)
    u[right] = np.interp((x[right] - h) / (1.0 - h), reference_grid(state.right.n), state.right.values)
    u[x == h] = state.ell
    return np.column_stack([x, u])


def physical_profile(state: CoupledState) -> tuple[np.ndarray, np.ndarray]:
    """All grid nodes of both sides in physical order (particle node once)."""
    xl, xr = state.physical_nodes()
    return (np.concatenate([xl, xr[1:]]),
            np.concatenate([state.left.values, state.right.values[1:]]))


def reposition(state: CoupledState, h: float, ell: float) -> CoupledState:
    """Move the particle to ``h`` with velocity ``ell``, resampling the fluid.

    The fluid profile is linearly interpolated in physical space onto the new
    grids; walls stay at zero and the particle node is set to ``ell``.
    """
    _check_position(h)
    xs, us = physical_profile(state)
    xl = to_physical(reference_grid(state.left.n), h, Side.LEFT)
    xr = to_physical(reference_grid(state.right.n), h, Side.RIGHT)
    vl = np.interp(xl, xs, us)
    vr = np.interp(xr, xs, us)
    vl[0] = vr[-1] = 0.0
    vl[-1] = vr[0] = ell
    return CoupledState(state.t, SideField(Side.LEFT, vl), SideField(Side.RIGHT, vr),
                        ParticleState(h, ell))

# }}}


@dataclass
class SimConfig:
    """Numerical and physical parameters shared by all solvers.

    ``dt`` is the fixed step, or the cap on the step when ``adaptive`` is on.
    """

    m: float = 1.0
    n_left: int = 100
    n_right: int = 100
    dt: float = 1e-3
    adaptive: bool = True
    cfl_safety: float = 0.5
    delta: float = 0.05
    h_target: float = 0.6
    contact_tol: float = 1e-3
    coupling_iters: int = 3
    coupling_tol: float = 1e-10
    decimate: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in ("m", "dt", "cfl_safety", "delta", "contact_tol", "coupling_tol"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        for name in ("n_left", "n_right"):
            if int(getattr(self, name)) < 2:
                raise ValueError(f"{name} must be at least 2")
        if int(self.coupling_iters) < 1 or int(self.decimate) < 1:
            raise ValueError("coupling_iters and decimate must be at least 1")
        if not (self.contact_tol < self.h_target < 1.0 - self.contact_tol):
            raise ValueError("h_target must lie in (contact_tol, 1 - contact_tol)")
