"""Initial fluid velocity presets (all L2 functions on (0, 1))."""
from __future__ import annotations

import numpy as np


def zero():
    return lambda x: np.zeros_like(np.asarray(x, dtype=float))


def sine(amplitude: float = 1.0, k: int = 1):
    """``A sin(k pi x)``."""
    return lambda x: amplitude * np.sin(k * np.pi * np.asarray(x, dtype=float))


def step(amplitude: float = 1.0, x_jump: float = 0.5):
    """``A`` on ``(0, x_jump)``, zero beyond: a right-moving slab."""
    return lambda x: np.where(np.asarray(x, dtype=float) < x_jump, amplitude, 0.0)


def random_fourier(amplitude: float = 1.0, modes: int = 8, seed: int = 0):
    """Random sine series with ``1/k`` decay, rescaled to sup norm ``amplitude``."""
    rng = np.random.default_rng(seed)
    coef = rng.standard_normal(modes) / np.arange(1, modes + 1)
    k = np.arange(1, modes + 1)
    fine = np.linspace(0.0, 1.0, 4097)
    peak = np.abs(np.sin(np.pi * np.outer(fine, k)) @ coef).max()
    coef = coef * (amplitude / peak if peak > 0 else 0.0)
    return lambda x: np.sin(np.pi * np.outer(np.ravel(x), k)) @ coef if np.ndim(x) else \
        float(np.sin(np.pi * k * x) @ coef)


def from_samples(x, u):
    """Piecewise-linear interpolant of tabulated samples."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    order = np.argsort(x)
    x, u = x[order], u[order]
    return lambda s: np.interp(s, x, u)


PRESETS = {
    "zero": lambda amplitude=0.0, **kw: zero(),
    "sine": lambda amplitude=1.0, k=1, **kw: sine(amplitude, int(k)),
    "step": lambda amplitude=1.0, x_jump=0.5, **kw: step(amplitude, float(x_jump)),
    "random_fourier": lambda amplitude=1.0, modes=8, seed=0, **kw: random_fourier(
        amplitude, int(modes), int(seed)),
}


def make(kind: str, **params):
    try:
        factory = PRESETS[kind]
    except KeyError:
        raise ValueError(f"unknown initial data {kind!r}; choose from {sorted(PRESETS)}") from None
    return factory(**params)
