"""
Refinement ladders and property checks.

Each function runs one experiment and returns a :class:`CheckResult` with
per-level rows and a verdict against fixed thresholds.  The command line
``verify`` subcommand and the acceptance tests both call these.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from bpc import initial_data
from bpc.control import (StrategyParams, hold_phase, oleinik_check, replay_tracking,
                         run_global_strategy, smoothing_phase, build_reference, tracking_control)
from bpc.core import CoupledState, SimConfig, physical_profile
from bpc.coupled import Termination, TestPair, solve, weak_form_residual
from bpc.mapped_burgers import PrescribedMotion, solve_prescribed, solve_prescribed_lifted


@dataclass
class CheckResult:
    name: str
    passed: bool
    rows: list = field(default_factory=list)
    summary: str = ""
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.summary}"


def observed_orders(errors, ratio: float = 2.0) -> np.ndarray:
    """Pairwise orders ``log(e_k / e_{k+1}) / log(ratio)``."""
    e = np.asarray(errors, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(e[:-1] / e[1:]) / math.log(ratio)


def fitted_order(sizes, errors) -> float:
    """Least-squares slope of ``log e`` against ``log size``."""
    return float(np.polyfit(np.log(sizes), np.log(errors), 1)[0])


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


# {{{ manufactured solution on a moving interface

class Manufactured:
    """Exact solution with a sinusoidally moving interface.

    Left of ``h``: ``e^{-t} sin(pi x / h) + h' x / h``; right of ``h``:
    ``e^{-t} sin(pi (x - h) / (1 - h)) + h' (1 - x) / (1 - h)``, so both sides
    vanish at the walls and equal ``h'`` at the particle.
    """

    def __init__(self, h_mean: float = 0.5, amp: float = 0.1, omega: float = 2.0):
        self.h_mean, self.amp, self.omega = h_mean, amp, omega

    def h(self, t):
        return self.h_mean + self.amp * np.sin(self.omega * t)

    def dh(self, t):
        return self.amp * self.omega * np.cos(self.omega * t)

    def d2h(self, t):
        return -self.amp * self.omega ** 2 * np.sin(self.omega * t)

    def motion(self, t0: float = 0.0, t1: float = np.inf) -> PrescribedMotion:
        return PrescribedMotion(lambda t: float(self.h(t)), lambda t: float(self.dh(t)),
                                lambda t: float(self.d2h(t)), t0, t1)

    def _parts(self, t, x):
        x = np.asarray(x, dtype=float)
        h, hp, hpp = self.h(t), self.dh(t), self.d2h(t)
        e = math.exp(-t)
        left = x < h
        L = np.where(left, h, 1.0 - h)
        eta = np.where(left, x / h, (x - h) / (1.0 - h))
        # affine part: slope and time derivative of the lift
        w = np.where(left, x, 1.0 - x)
        sgn = np.where(left, 1.0, -1.0)
        s, c = np.sin(np.pi * eta), np.cos(np.pi * eta)
        u = e * s + hp * w / L
        eta_t = np.where(left, -x * hp / h ** 2, -hp * (1.0 - x) / (1.0 - h) ** 2)
        u_t = -e * s + e * c * np.pi * eta_t + hpp * w / L - sgn * hp * hp * w / L ** 2
        u_x = e * c * np.pi / L + sgn * hp / L
        u_xx = -e * s * np.pi ** 2 / L ** 2
        return u, u_t, u_x, u_xx

    def exact(self, t, x):
        x = np.asarray(x, dtype=float)
        u = self._parts(t, x)[0]
        return np.where(x == self.h(t), self.dh(t), u)

    def source(self, t, x):
        u, u_t, u_x, u_xx = self._parts(t, x)
        return u_t - u_xx + u * u_x


def _mms_error(mms: Manufactured, n: int, dt: float, t_end: float) -> float:
    s0 = CoupledState.from_function(lambda x: mms.exact(0.0, x), float(mms.h(0.0)),
                                    float(mms.dh(0.0)), n)
    cfg = SimConfig(n_left=n, n_right=n, dt=dt, adaptive=False, decimate=10 ** 9)
    final = solve_prescribed(s0, mms.motion(0.0, t_end), (0.0, t_end), cfg, source=mms.source).final
    x, u = physical_profile(final)
    return float(np.abs(u - mms.exact(final.t, x)).max())


def _lift_profile(n, dt, t_end, lifted, mms):
    u0 = lambda x: mms.exact(0.0, x)
    s0 = CoupledState.from_function(u0, float(mms.h(0.0)), float(mms.dh(0.0)), n)
    cfg = SimConfig(n_left=n, n_right=n, dt=dt, adaptive=False, decimate=10 ** 9)
    fn = solve_prescribed_lifted if lifted else solve_prescribed
    final = fn(s0, mms.motion(0.0, t_end), (0.0, t_end), cfg).final
    return physical_profile(final)


@_timed
def convergence_suite(space_levels=(20, 40, 80), time_levels=(4e-3, 2e-3, 1e-3),
                      n_time: int = 400, t_end: float = 0.2, lift_n: int = 40) -> CheckResult:
    """Manufactured-solution orders plus lifted-versus-direct agreement.

    Spatial ladder uses ``dt = t_end / (4 N^2)`` so time error is negligible;
    temporal ladder runs at ``N = n_time``.  The lifted comparison uses the
    unforced problem and a reference computed at 16x the resolution.
    """
    mms = Manufactured()
    rows = []
    space_err = [_mms_error(mms, n, t_end / (4 * n * n), t_end) for n in space_levels]
    p_space = observed_orders(space_err)
    for i, (n, e) in enumerate(zip(space_levels, space_err)):
        rows.append(dict(ladder="space", level=n, error=e,
                         order=p_space[i - 1] if i else np.nan))
    time_err = [_mms_error(mms, n_time, dt, t_end) for dt in time_levels]
    p_time = observed_orders(time_err)
    for i, (dt, e) in enumerate(zip(time_levels, time_err)):
        rows.append(dict(ladder="time", level=dt, error=e,
                         order=p_time[i - 1] if i else np.nan))

    xs = np.linspace(0.0, 1.0, 501)
    dt_lift = t_end / (10 * lift_n)
    on = lambda p: np.interp(xs, p[0], p[1])
    ref_u = on(_lift_profile(16 * lift_n, dt_lift / 16, t_end, False, mms))
    direct = on(_lift_profile(lift_n, dt_lift, t_end, False, mms))
    lifted = on(_lift_profile(lift_n, dt_lift, t_end, True, mms))
    disc = float(np.abs(direct - ref_u).max())
    gap = float(np.abs(direct - lifted).max())
    rows.append(dict(ladder="lifted_vs_direct", level=lift_n, error=gap, order=gap / disc))

    ok_space = bool(np.all(p_space >= 1.8))
    ok_time = bool(np.all(np.abs(p_time - 1.0) <= 0.3))
    ok_lift = gap <= 5.0 * disc
    summary = (f"space orders {np.round(p_space, 3).tolist()} (>= 1.8), "
               f"time orders {np.round(p_time, 3).tolist()} (1 +- 0.3), "
               f"lifted-direct gap {gap:.2e} = {gap / disc:.2f} x discretisation error (<= 5)")
    return CheckResult("convergence", ok_space and ok_time and ok_lift, rows, summary)

# }}}


# {{{ coupled-system properties

def standard_test_pairs() -> list[TestPair]:
    """Three admissible pairs: static, decaying in time, and oscillating."""
    pi = np.pi
    return [
        TestPair(lambda t, x: np.sin(pi * x), lambda t, x: 0.0 * x,
                 lambda t, x: pi * np.cos(pi * x)),
        TestPair(lambda t, x: np.exp(-t) * x * (1 - x) * (1 + x),
                 lambda t, x: -np.exp(-t) * x * (1 - x) * (1 + x),
                 lambda t, x: np.exp(-t) * (1 - 3 * x ** 2)),
        TestPair(lambda t, x: np.cos(3 * t) * np.sin(2 * pi * x) + x * (1 - x),
                 lambda t, x: -3 * np.sin(3 * t) * np.sin(2 * pi * x),
                 lambda t, x: 2 * pi * np.cos(3 * t) * np.cos(2 * pi * x) + 1 - 2 * x),
    ]


@_timed
def weak_form_suite(levels=((25, 4e-3), (50, 2e-3), (100, 1e-3)), kind: str = "step",
                    amplitude: float = 5.0, g: float = 2.0, m: float = 1.0, h0: float = 0.4,
                    t_end: float = 0.2) -> CheckResult:
    """Residual of the weak identity for three test pairs under joint refinement."""
    u0 = initial_data.make(kind, amplitude=amplitude)
    pairs = standard_test_pairs()
    res = np.zeros((len(levels), len(pairs)))
    rows = []
    for i, (n, dt) in enumerate(levels):
        cfg = SimConfig(m=m, n_left=n, n_right=n, dt=dt, adaptive=False)
        run = solve(CoupledState.from_function(u0, h0, 0.0, n), g, t_end, cfg)
        if run.termination is not Termination.REACHED_FINAL_TIME:
            return CheckResult("weak_form", False, rows, f"run ended early: {run.message}")
        res[i] = [weak_form_residual(run, p) for p in pairs]
    orders = np.array([observed_orders(res[:, j]) for j in range(len(pairs))])
    for i, (n, dt) in enumerate(levels):
        for j in range(len(pairs)):
            rows.append(dict(pair=j + 1, n=n, dt=dt, residual=res[i, j],
                             order=orders[j, i - 1] if i else np.nan))
    decreasing = bool(np.all(np.diff(res, axis=0) < 0))
    ok = decreasing and bool(np.all(orders >= 1.0))
    summary = (f"residual orders per pair {np.round(orders, 3).tolist()} (>= 1), "
               f"finest residuals {np.array2string(res[-1], precision=2)}")
    return CheckResult("weak_form", ok, rows, summary)


@_timed
def energy_suite(n: int = 100, steps: int = 10_000, dt: float = 1e-4, amplitude: float = 5.0,
                 kinds=("sine", "step"), m: float = 1.0, h0: float = 0.4,
                 rel_tol: float = 1e-10) -> CheckResult:
    """Step-by-step energy monotonicity with ``g = 0``."""
    rows = []
    ok = True
    for kind in kinds:
        cfg = SimConfig(m=m, n_left=n, n_right=n, dt=dt, adaptive=False, decimate=10 ** 9)
        s0 = CoupledState.from_function(initial_data.make(kind, amplitude=amplitude), h0, 0.0, n)
        run = solve(s0, 0.0, steps * dt, cfg)
        E = run.diagnostics["energy"]
        excess = np.diff(E) - rel_tol * (1.0 + E[:-1])
        worst = float(excess.max()) if excess.size else -np.inf
        n_steps = E.size - 1
        good = (run.termination is Termination.REACHED_FINAL_TIME and n_steps == steps
                and worst <= 0.0)
        ok &= good
        rows.append(dict(data=kind, steps=n_steps, E0=E[0], E_end=E[-1],
                         worst_increase=float(np.diff(E).max()), passed=good))
    summary = "; ".join(f"{r['data']}: {r['steps']} steps, E {r['E0']:.4g} -> {r['E_end']:.4g}, "
                        f"max dE {r['worst_increase']:.2e}" for r in rows)
    return CheckResult("energy", ok, rows, summary)


@_timed
def oleinik_suite(levels=(200, 400), kind: str = "step", amplitude: float = 50.0, m: float = 10.0,
                  h0: float = 0.3, h_target: float = 0.6, delta: float = 0.05,
                  min_elapsed: float = 0.1, bound: float = 0.05) -> CheckResult:
    """Two-sided decay bound on the hold phase of the full strategy.

    The halving requirement compares the maximum violation at the two
    levels.  When both are exactly zero the scheme satisfies the bound
    discretely and the ratio is undefined; that case is flagged as vacuous.
    """
    rows = []
    viol = []
    for n in levels:
        cfg = SimConfig(m=m, n_left=n, n_right=n)
        rep = run_global_strategy(initial_data.make(kind, amplitude=amplitude), h0, 0.0,
                                  h_target, delta, cfg)
        if "hold" not in rep.phases:
            return CheckResult("oleinik", False, rows, f"strategy failed: {rep.message}")
        o = oleinik_check(rep.phases["hold"], rep.T1, min_elapsed=min_elapsed)
        viol.append(o.max_violation)
        rows.append(dict(n=n, max_violation=o.max_violation, t=o.t, x=o.x,
                         samples=o.per_time.shape[0]))
    first = viol[levels.index(200)] if 200 in levels else viol[0]
    within = first <= bound
    ratios = [b / a if a > 0 else (0.0 if b == 0 else np.inf) for a, b in zip(viol, viol[1:])]
    vacuous = all(v == 0.0 for v in viol)
    halving = vacuous or all(0.35 <= r <= 0.65 for r in ratios)
    note = "both exactly zero, halving vacuous" if vacuous else f"ratios {np.round(ratios, 3).tolist()}"
    summary = (f"max violation {viol} at N={list(levels)} (<= {bound} at first level); {note}")
    return CheckResult("oleinik", within and halving, rows, summary)


@_timed
def tracking_suite(levels=((50, 8e-4), (100, 4e-4), (200, 2e-4)), kind: str = "sine",
                   amplitude: float = 5.0, m: float = 10.0, h0: float = 0.3,
                   h_target: float = 0.6, T0: float = 0.01, duration: float = 1.0,
                   tol: float = 1e-3) -> CheckResult:
    """Open-loop replay error ``|h(T1) - h_target|`` under joint refinement."""
    rows = []
    errs = []
    for n, dt in levels:
        cfg = SimConfig(m=m, n_left=n, n_right=n, dt=dt)
        sm = smoothing_phase(initial_data.make(kind, amplitude=amplitude), h0, 0.0, T0, cfg)
        st = sm.state
        ref = build_reference(st.h, st.ell, h_target, st.t, st.t + duration)
        schedule, _ = tracking_control(st, ref, cfg)
        run = replay_tracking(st, schedule, cfg, ref)
        err = abs(run.final.h - h_target) if run.termination is Termination.REACHED_FINAL_TIME \
            else np.inf
        errs.append(err)
        rows.append(dict(n=n, dt=dt, h_error=err, ell_error=abs(run.final.ell),
                         steps=schedule.t.size - 1))
    orders = observed_orders(errs)
    for r, p in zip(rows[1:], orders):
        r["order"] = p
    ok = errs[-1] <= tol and bool(np.all(orders >= 1.0))
    summary = (f"|h(T1) - h_target| = {errs[-1]:.3e} at N={levels[-1][0]}, dt={levels[-1][1]:g} "
               f"(<= {tol:g}); orders {np.round(orders, 3).tolist()} (>= 1)")
    return CheckResult("tracking", ok, rows, summary)


@_timed
def hold_suite(n: int = 50, steps: int = 100_000, dt: float = 1e-4, kind: str = "step",
               amplitude: float = 50.0, h1: float = 0.6, m: float = 1.0,
               tol: float = 1e-13) -> CheckResult:
    """Closed-loop hold from an excited fluid keeps the particle in place."""
    cfg = SimConfig(m=m, n_left=n, n_right=n, dt=dt, adaptive=False, decimate=10 ** 9)
    s0 = CoupledState.from_function(initial_data.make(kind, amplitude=amplitude), h1, 0.0, n)
    run = hold_phase(s0, steps * dt, cfg)
    h = run.diagnostics["h"]
    dev = float(np.abs(h - h1).max())
    n_steps = h.size - 1
    ok = run.termination is Termination.REACHED_FINAL_TIME and n_steps == steps and dev <= tol
    rows = [dict(steps=n_steps, max_h_deviation=dev, max_abs_ell=float(np.abs(run.diagnostics["ell"]).max()),
                 u_linf_end=float(run.diagnostics["linf_norm"][-1]))]
    return CheckResult("hold", ok, rows, f"max |h - h1| = {dev:.1e} over {n_steps} steps (<= {tol:g})")


@_timed
def symmetry_suite(n: int = 100, steps: int = 10_000, dt: float = 1e-4, amplitude: float = 5.0,
                   m: float = 1.0, tol: float = 1e-12) -> CheckResult:
    """Odd data about ``x = 1/2`` with the particle at the centre and ``g = 0``."""
    u0 = lambda x: amplitude * (np.sin(2 * np.pi * x) + 0.5 * np.sin(4 * np.pi * x))
    cfg = SimConfig(m=m, n_left=n, n_right=n, dt=dt, adaptive=False, decimate=10 ** 9)
    run = solve(CoupledState.from_function(u0, 0.5, 0.0, n), 0.0, steps * dt, cfg)
    h = run.diagnostics["h"]
    dev = float(np.abs(h - 0.5).max())
    ok = run.termination is Termination.REACHED_FINAL_TIME and h.size - 1 == steps and dev <= tol
    return CheckResult("symmetry", ok, [dict(steps=h.size - 1, max_h_deviation=dev)],
                       f"max |h - 1/2| = {dev:.1e} over {h.size - 1} steps (<= {tol:g})")


@_timed
def contact_suite(n: int = 50, dts=(2e-4, 1e-4), g: float = 10.0, m: float = 1.0,
                  h0: float = 0.5, t_end: float = 5.0, rel_tol: float = 0.05) -> CheckResult:
    """Constant push from rest must end in contact at a dt-stable time."""
    rows = []
    tcs = []
    for dt in dts:
        cfg = SimConfig(m=m, n_left=n, n_right=n, dt=dt, adaptive=False, decimate=10 ** 9)
        run = solve(CoupledState.rest(h0, n), g, t_end, cfg)
        tc = run.t_event if run.termination is Termination.CONTACT else np.nan
        tcs.append(tc)
        rows.append(dict(dt=dt, termination=run.termination.name, t_contact=tc))
    change = abs(tcs[-1] - tcs[0]) / tcs[0] if np.isfinite(tcs).all() else np.inf
    ok = bool(np.isfinite(tcs).all()) and change < rel_tol
    return CheckResult("contact", ok, rows,
                       f"T_c = {np.round(tcs, 5).tolist()} for dt = {list(dts)}; "
                       f"relative change {change:.2%} (< {rel_tol:.0%})")


@_timed
def decay_suite(amplitudes=(0.5, 5.0, 50.0), kinds=("sine", "step"), n: int = 400,
                m: float = 10.0, h0: float = 0.3, h_target: float = 0.6,
                delta: float = 0.05, params: StrategyParams | None = None,
                budget: float = 300.0) -> CheckResult:
    """Full strategy with fixed phase durations for every amplitude and data shape."""
    params = replace(params or StrategyParams(), keep_runs=False)
    rows = []
    t0 = time.perf_counter()
    for kind in kinds:
        for A in amplitudes:
            cfg = SimConfig(m=m, n_left=n, n_right=n)
            rep = run_global_strategy(initial_data.make(kind, amplitude=A), h0, 0.0, h_target,
                                      delta, cfg, params)
            c = rep.checks
            rows.append(dict(data=kind, amplitude=A, passed=rep.passed, T2=rep.T2,
                             u_linf=c.get("u_linf", np.nan), h_error=c.get("h_error", np.nan),
                             ell_abs=c.get("ell_abs", np.nan), failed_phase=rep.failed_phase,
                             message=rep.message))
    elapsed = time.perf_counter() - t0
    same_T2 = len({r["T2"] for r in rows}) == 1
    ok = all(r["passed"] and r["h_error"] == 0.0 and r["ell_abs"] == 0.0 for r in rows) \
        and same_T2 and elapsed <= budget
    worst = max(r["u_linf"] for r in rows)
    summary = (f"{sum(r['passed'] for r in rows)}/{len(rows)} runs pass, max ||u(T2)||_inf = {worst:.2e} "
               f"(<= {delta * 1.1:g}), T2 values {sorted({r['T2'] for r in rows})}, "
               f"{elapsed:.0f} s (<= {budget:g})")
    return CheckResult("decay", ok, rows, summary)

# }}}


SUITES = {
    "convergence": convergence_suite,
    "weak_form": weak_form_suite,
    "energy": energy_suite,
    "oleinik": oleinik_suite,
    "tracking": tracking_suite,
    "hold": hold_suite,
    "symmetry": symmetry_suite,
    "contact": contact_suite,
    "decay": decay_suite,
}
