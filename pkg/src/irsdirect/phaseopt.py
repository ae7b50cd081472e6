"""Unit-modulus phase optimization: greedy grid search, then gradient ascent
with Armijo backtracking.

Iterates live in phase space, ``w = exp(1j * phi)``, so ``|w_j| = 1`` holds
exactly at every step.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = ["OptimizerSettings", "AscentTrace", "greedy_init", "ascend", "gradient",
           "optimize_phases"]


@dataclass(frozen=True)
class OptimizerSettings:
    grid_points: int = 8
    max_iters: int = 200
    grad_tol: float = 1e-5
    armijo_c1: float = 1e-4
    armijo_beta: float = 0.5
    max_backtracks: int = 30
    fd_step: float = 1e-5
    n_starts: int = 1

    def __post_init__(self):
        if self.grid_points < 2:
            raise ValueError("grid_points must be >= 2")
        if self.max_iters < 0 or self.max_backtracks < 1 or self.n_starts < 1:
            raise ValueError("max_iters >= 0, max_backtracks >= 1 and n_starts >= 1 required")
        if not (self.grad_tol > 0 and self.armijo_c1 > 0 and self.fd_step > 0):
            raise ValueError("tolerances must be positive")
        if not 0 < self.armijo_beta < 1:
            raise ValueError("armijo_beta must lie in (0, 1)")


@dataclass
class AscentTrace:
    values: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    stalled: bool = False
    converged: bool = False

    @property
    def iterations(self):
        return len(self.steps)


def gradient(objective, phi, settings=OptimizerSettings()):
    """Central finite-difference gradient of `objective` at `phi`."""
    phi = np.asarray(phi, dtype=float)
    h = settings.fd_step
    g = np.empty(phi.size)
    for j in range(phi.size):
        e = np.zeros(phi.size)
        e[j] = h
        g[j] = (objective(phi + e) - objective(phi - e)) / (2 * h)
    return g


def greedy_init(objective, n, settings=OptimizerSettings()):
    """One coordinate pass over a uniform phase grid.

    Element ``j`` takes the grid phase that maximizes the objective with
    earlier elements at their chosen phases and later ones at 0.
    """
    grid = 2 * np.pi * np.arange(settings.grid_points) / settings.grid_points
    phi = np.zeros(n)
    for j in range(n):
        best, best_val = 0.0, -np.inf
        for g in grid:
            phi[j] = g
            val = objective(phi)
            if val > best_val:
                best, best_val = g, val
        phi[j] = best
    return phi


def ascend(objective, phi0, settings=OptimizerSettings(), grad=None):
    """Steepest ascent in phase space with Armijo backtracking.

    Each step starts at ``alpha = 1`` and shrinks by ``armijo_beta`` until
    ``f(phi + alpha g) >= f(phi) + c1 alpha ||g||^2``. If no step is accepted
    within ``max_backtracks`` the run stops and is flagged as stalled.

    Parameters
    ----------
    objective : callable
        Maps a phase vector to a real value.
    grad : callable, optional
        Analytic gradient; finite differences are used otherwise.

    Returns
    -------
    phi : ndarray
        Best iterate (the last one, since the trace never decreases).
    trace : AscentTrace
    """
    if grad is None:
        grad = lambda p: gradient(objective, p, settings)  # noqa: E731
    phi = np.array(phi0, dtype=float)
    f = objective(phi)
    trace = AscentTrace(values=[f])
    for _ in range(settings.max_iters):
        g = grad(phi)
        gg = float(g @ g)
        if np.sqrt(gg) < settings.grad_tol:
            trace.converged = True
            break
        alpha = 1.0
        for _ in range(settings.max_backtracks):
            cand = phi + alpha * g
            fc = objective(cand)
            if fc >= f + settings.armijo_c1 * alpha * gg:
                break
            alpha *= settings.armijo_beta
        else:
            trace.stalled = True
            break
        phi, f = cand, fc
        trace.values.append(f)
        trace.steps.append(alpha)
    return np.mod(phi, 2 * np.pi), trace


def optimize_phases(objective, n, settings=OptimizerSettings(), grad=None, rng=None):
    """Greedy start followed by `ascend`; extra random starts if
    ``settings.n_starts > 1``. Returns the best ``(phi, trace)``."""
    if n == 0:
        return np.zeros(0), AscentTrace(values=[objective(np.zeros(0))], converged=True)
    starts = [greedy_init(objective, n, settings)]
    if settings.n_starts > 1:
        rng = np.random.default_rng(rng)
        starts += [rng.uniform(0, 2 * np.pi, n) for _ in range(settings.n_starts - 1)]
    best = None
    for phi0 in starts:
        phi, trace = ascend(objective, phi0, settings, grad)
        if best is None or trace.values[-1] > best[1].values[-1]:
            best = (phi, trace)
    return best
