import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from irsdirect.phaseopt import OptimizerSettings, ascend, gradient, greedy_init, optimize_phases


def test_settings_validation():
    OptimizerSettings()
    for bad in (dict(grid_points=1), dict(armijo_beta=1.0), dict(grad_tol=0.0),
                dict(max_backtracks=0), dict(n_starts=0), dict(fd_step=-1.0)):
        with pytest.raises(ValueError):
            OptimizerSettings(**bad)


def test_greedy_examples():
    assert greedy_init(lambda p: np.cos(p[0]), 1, OptimizerSettings(grid_points=4))[0] == 0.0


def test_greedy_example_literal():
    # Re(exp(-j 2pi/8) w) peaks where phi = 2pi/8
    phi = greedy_init(lambda p: np.real(np.exp(-2j * np.pi / 8) * np.exp(1j * p[0])), 1)
    assert np.isclose(phi[0], 2 * np.pi / 8)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_greedy_separable_is_grid_optimal(seed):
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    f = lambda p: float(np.sum(np.real(np.conj(c) * np.exp(1j * p))))  # noqa: E731
    s = OptimizerSettings(grid_points=6)
    grid = 2 * np.pi * np.arange(6) / 6
    best = max(f(np.array(p)) for p in itertools.product(grid, repeat=4))
    assert np.isclose(f(greedy_init(f, 4, s)), best)


def test_ascend_cos():
    f = lambda p: float(np.sum(np.cos(p)))  # noqa: E731
    phi, tr = ascend(f, np.full(5, 0.4))
    assert tr.converged and np.isclose(tr.values[-1], 5.0)
    assert np.allclose(np.angle(np.exp(1j * phi)), 0, atol=1e-5)


def test_ascend_planted_optimum():
    rng = np.random.default_rng(0)
    target = rng.uniform(0, 2 * np.pi, 6)
    a = rng.uniform(0.5, 2, 6)
    f = lambda p: float(-np.sum(a * (1 - np.cos(p - target))))  # noqa: E731
    phi, tr = ascend(f, target + rng.uniform(-1, 1, 6), grad=lambda p: -a * np.sin(p - target))
    assert tr.values[-1] > -1e-6


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_trace_monotone_and_unit_modulus(seed):
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    q = m @ m.conj().T
    f = lambda p: float(np.real(np.vdot(np.exp(1j * p), q @ np.exp(1j * p))))  # noqa: E731
    phi, tr = ascend(f, rng.uniform(0, 6, 5), OptimizerSettings(max_iters=50))
    assert np.all(np.diff(tr.values) >= 0)
    assert np.allclose(np.abs(np.exp(1j * phi)), 1.0)
    assert np.all((phi >= 0) & (phi < 2 * np.pi))


def test_stalled_flag():
    # a gradient pointing the wrong way can never satisfy Armijo
    f = lambda p: float(-np.sum(p**2))  # noqa: E731
    _, tr = ascend(f, np.ones(2), OptimizerSettings(max_backtracks=5), grad=lambda p: p)
    assert tr.stalled and tr.iterations == 0


def test_gradient_examples():
    c = 0.3 - 1.2j
    f = lambda p: float(np.real(np.conj(c) * np.exp(1j * p[0])))  # noqa: E731
    for phi in (0.0, 1.0, 4.0):
        assert abs(gradient(f, np.array([phi]))[0] + np.imag(np.conj(c) * np.exp(1j * phi))) < 1e-6
    assert np.allclose(gradient(lambda p: 3.0, np.zeros(4)), 0)
    g = gradient(lambda p: np.cos(p[0]) + np.cos(p[1]), np.array([0.7, 0.7]))
    assert np.isclose(g[0], g[1])


def test_optimize_deterministic():
    f = lambda p: float(np.sum(np.cos(p - np.arange(4))) + np.cos(p[0] - p[3]))  # noqa: E731
    s = OptimizerSettings(n_starts=3)
    a, ta = optimize_phases(f, 4, s, rng=5)
    b, tb = optimize_phases(f, 4, s, rng=5)
    assert np.array_equal(a, b) and ta.values == tb.values


def test_optimize_empty():
    phi, tr = optimize_phases(lambda p: 2.0, 0)
    assert phi.size == 0 and tr.values == [2.0]


def test_multistart_not_worse():
    rng = np.random.default_rng(1)
    c = rng.standard_normal((3, 4))
    f = lambda p: float(np.sum(c[0] * np.cos(p) + c[1] * np.sin(2 * p) + c[2] * np.cos(3 * p)))  # noqa: E731
    one = optimize_phases(f, 4)[1].values[-1]
    many = optimize_phases(f, 4, OptimizerSettings(n_starts=5), rng=0)[1].values[-1]
    assert many >= one
