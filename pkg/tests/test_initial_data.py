import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bpc import initial_data


def test_zero_and_sine_values():
    x = np.linspace(0, 1, 5)
    assert np.all(initial_data.zero()(x) == 0.0)
    assert initial_data.sine(2.0, 1)(0.5) == pytest.approx(2.0)
    assert np.allclose(initial_data.sine(1.0, 2)(x), np.sin(2 * np.pi * x))


def test_step_is_a_slab():
    f = initial_data.step(3.0, 0.25)
    assert f(0.1) == 3.0 and f(0.25) == 0.0 and f(0.9) == 0.0


@settings(max_examples=30, deadline=None)
@given(A=st.floats(0.01, 100), modes=st.integers(1, 16), seed=st.integers(0, 2 ** 16))
def test_random_fourier_hits_requested_sup_norm(A, modes, seed):
    f = initial_data.random_fourier(A, modes, seed)
    x = np.linspace(0, 1, 4097)
    u = f(x)
    assert np.max(np.abs(u)) == pytest.approx(A, rel=1e-12)
    assert abs(u[0]) < 1e-12 * A and abs(u[-1]) < 1e-12 * A
    assert f(0.3) == pytest.approx(float(f(np.array([0.3]))[0]), rel=1e-14)


def test_random_fourier_is_seed_deterministic():
    x = np.linspace(0, 1, 33)
    a = initial_data.random_fourier(1.0, 8, 5)(x)
    assert np.array_equal(a, initial_data.random_fourier(1.0, 8, 5)(x))
    assert not np.array_equal(a, initial_data.random_fourier(1.0, 8, 6)(x))


def test_from_samples_interpolates_unsorted_input():
    f = initial_data.from_samples([1.0, 0.0, 0.5], [0.0, 0.0, 2.0])
    assert f(0.25) == pytest.approx(1.0) and f(0.5) == 2.0


def test_make_dispatch():
    assert initial_data.make("sine", amplitude=4.0, k=1)(0.5) == pytest.approx(4.0)
    assert initial_data.make("step", amplitude=2.0, x_jump=0.5, modes=3)(0.2) == 2.0
    with pytest.raises(ValueError, match="unknown"):
        initial_data.make("gauss")
