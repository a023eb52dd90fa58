"""Measurement misfit, its adjoint gradient, and the descent drivers.

The gradient is the exact discrete adjoint of the RK4 scheme used by
:func:`heatrecon.forward.integrate`, so it matches finite differences of
:func:`loss` up to rounding.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .field import eval_pixel_log, fourier_basis
from .forward import HeatSource, NumericalError, assemble, edge_list, step_schedule, time_step
from .grid import Grid
from .sensing import MeasurementSet

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class InverseProblem:
    """Everything but the measurements: grid, initial state, source, parameterisation.

    ``parameterization`` is ``"fourier"`` (1D log-Fourier coefficients) or
    ``"pixel"`` (one log-conductivity per node, 1D or 2D).
    """

    grid: Grid
    u0: np.ndarray
    source: HeatSource
    parameterization: str = "fourier"

    def __post_init__(self):
        if self.parameterization not in ("fourier", "pixel"):
            raise ValueError(f"unknown parameterization {self.parameterization!r}")
        if self.parameterization == "fourier" and self.grid.ndim != 1:
            raise ValueError("the Fourier parameterization is 1D only")
        u0 = np.asarray(self.u0, dtype=float).ravel()
        if u0.size != self.grid.size:
            raise ValueError(f"initial state has {u0.size} entries, grid has {self.grid.size}")
        object.__setattr__(self, "u0", u0)

    def basis(self, dim: int) -> np.ndarray | None:
        if self.parameterization == "pixel":
            if dim != self.grid.size:
                raise ValueError(f"pixel parameterization needs {self.grid.size} parameters, got {dim}")
            return None
        return fourier_basis(dim, self.grid)

    def conductivity(self, theta) -> np.ndarray:
        """Conductivity on the grid (shape ``grid.shape``) for parameters ``theta``."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if self.parameterization == "pixel":
            if self.grid.ndim == 1:
                if theta.size != self.grid.size:
                    raise ValueError(f"pixel parameterization needs {self.grid.size} parameters, got {theta.size}")
                return np.exp(theta)
            return eval_pixel_log(theta, self.grid)
        with np.errstate(over="ignore"):
            return np.exp(self.basis(theta.size) @ theta)

    def constant_theta(self, log_a: float, dim: int = 1) -> np.ndarray:
        """Parameters of the constant field ``exp(log_a)``."""
        if self.parameterization == "pixel":
            return np.full(self.grid.size, float(log_a))
        theta = np.zeros(dim)
        theta[0] = log_a
        return theta


class _Schedule:
    """Measurement layout resolved against the time grid."""

    def __init__(self, observed: MeasurementSet, grid: Grid):
        if len(observed) == 0:
            raise ValueError("no measurements")
        times = observed.times
        if times[0] <= 0:
            raise ValueError("measurement times must be positive")
        if np.any(observed.node < 1) or np.any(observed.node > grid.size):
            raise ValueError("measurement node index outside the grid")
        self.t_grid = np.concatenate([[0.0], times])
        self.tidx = np.searchsorted(times, observed.t) + 1
        self.pos = observed.node - 1
        self.values = observed.temperature
        self.n = len(observed)


def _simulate(A, u0, source: HeatSource, steps: np.ndarray, keep_stages: bool):
    """RK4 march; returns states at every step and, optionally, stage inputs."""
    nsteps = steps.size - 1
    states = np.empty((steps.size, u0.size))
    states[0] = u0
    stages = np.empty((nsteps, 4, u0.size)) if keep_stages else None
    u = u0
    for k in range(nsteps):
        t, h = steps[k], steps[k + 1] - steps[k]
        f0, fh, f1 = source(t), source(t + h / 2), source(t + h)
        k1 = A @ u + f0
        y2 = u + 0.5 * h * k1
        k2 = A @ y2 + fh
        y3 = u + 0.5 * h * k2
        k3 = A @ y3 + fh
        y4 = u + h * k3
        k4 = A @ y4 + f1
        if keep_stages:
            stages[k, 0] = u
            stages[k, 1] = y2
            stages[k, 2] = y3
            stages[k, 3] = y4
        u = u + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        states[k + 1] = u
    return states, stages


def _prepare(theta, observed: MeasurementSet, problem: InverseProblem):
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if not np.all(np.isfinite(theta)):
        raise NumericalError("parameter vector is not finite")
    sched = _Schedule(observed, problem.grid)
    a = problem.conductivity(theta)
    if not np.all(np.isfinite(a)):
        raise NumericalError("conductivity overflowed")
    op = assemble(a, problem.grid)
    steps, marks = step_schedule(sched.t_grid, time_step(op))
    return theta, sched, a, op, steps, marks


def loss(theta, observed: MeasurementSet, problem: InverseProblem) -> float:
    """Mean squared misfit between simulated and observed measurements."""
    return loss_and_grad(theta, observed, problem, need_grad=False)[0]


def simulate_measurements(theta, observed: MeasurementSet, problem: InverseProblem) -> np.ndarray:
    """Simulated temperatures at the observed (time, node) pairs."""
    theta, sched, a, op, steps, marks = _prepare(theta, observed, problem)
    states, _ = _simulate(op.matrix, problem.u0, problem.source, steps, keep_stages=False)
    return states[marks[sched.tidx], sched.pos]


def loss_and_grad(theta, observed: MeasurementSet, problem: InverseProblem, need_grad: bool = True):
    """Loss and its gradient with respect to ``theta`` (``None`` when not requested).

    One forward RK4 pass stores the stage inputs of every step; one backward
    pass propagates the adjoint state through the transposed stages and
    accumulates the derivative with respect to every edge weight of A.
    """
    theta, sched, a, op, steps, marks = _prepare(theta, observed, problem)
    A = op.matrix
    states, stages = _simulate(A, problem.u0, problem.source, steps, keep_stages=need_grad)
    sim = states[marks[sched.tidx], sched.pos]
    resid = sim - sched.values
    value = float(np.mean(resid**2))
    if not need_grad:
        return value, None

    n = problem.grid.size
    nsteps = steps.size - 1
    # dL/du at each step boundary that carries measurements
    seeds: dict[int, np.ndarray] = {}
    w = 2.0 * resid / sched.n
    step_of = marks[sched.tidx]
    for s in np.unique(step_of):
        sel = step_of == s
        seeds[int(s)] = np.bincount(sched.pos[sel], weights=w[sel], minlength=n)

    kbar = np.empty((nsteps, 4, n))
    lam = np.zeros(n)
    for k in range(nsteps - 1, -1, -1):
        if k + 1 in seeds:
            lam = lam + seeds[k + 1]
        h = steps[k + 1] - steps[k]
        kb4 = (h / 6.0) * lam
        yb4 = A @ kb4  # A is symmetric
        kb3 = (h / 3.0) * lam + h * yb4
        yb3 = A @ kb3
        kb2 = (h / 3.0) * lam + 0.5 * h * yb3
        yb2 = A @ kb2
        kb1 = (h / 6.0) * lam + 0.5 * h * yb2
        yb1 = A @ kb1
        kbar[k, 0], kbar[k, 1], kbar[k, 2], kbar[k, 3] = kb1, kb2, kb3, kb4
        lam = lam + yb1 + yb2 + yb3 + yb4

    # d(k^T A y)/d a_p = -(k_P - k_Q)(y_P - y_Q) / dx^2 summed over edges weighted by a_p
    P, Q = edge_list(problem.grid)
    D = _difference_matrix(P, Q, n)
    KD = D @ kbar.reshape(-1, n).T
    YD = D @ stages.reshape(-1, n).T
    per_edge = np.einsum("es,es->e", KD, YD)
    grad_a = -np.bincount(P, weights=per_edge, minlength=n) / problem.grid.dx**2

    chain = a.ravel() * grad_a
    B = problem.basis(theta.size)
    grad = chain if B is None else B.T @ chain
    return value, grad


def _difference_matrix(P, Q, n):
    E = P.size
    rows = np.concatenate([np.arange(E), np.arange(E)])
    return sp.csr_matrix((np.r_[np.ones(E), -np.ones(E)], (rows, np.r_[P, Q])), shape=(E, n))


def grad_adjoint(theta, observed: MeasurementSet, problem: InverseProblem) -> np.ndarray:
    return loss_and_grad(theta, observed, problem)[1]


def grad_finite_difference(theta, observed: MeasurementSet, problem: InverseProblem, h: float = 1e-6) -> np.ndarray:
    """Central differences of :func:`loss`, one coordinate at a time."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    g = np.empty(theta.size)
    for j in range(theta.size):
        e = np.zeros(theta.size)
        e[j] = h
        g[j] = (loss(theta + e, observed, problem) - loss(theta - e, observed, problem)) / (2 * h)
    return g


def relative_error(a_rec, a_truth) -> float:
    """``||a_rec - a_truth|| / ||a_truth||`` (Euclidean in 1D, Frobenius in 2D)."""
    a_rec = np.asarray(a_rec, dtype=float)
    a_truth = np.asarray(a_truth, dtype=float)
    if a_rec.shape != a_truth.shape:
        raise ValueError(f"shape mismatch: {a_rec.shape} vs {a_truth.shape}")
    norm = np.linalg.norm(a_truth)
    if norm == 0:
        raise ValueError("reference field has zero norm")
    return float(np.linalg.norm(a_rec - a_truth) / norm)


@dataclass
class GDConfig:
    gamma: float = 0.1
    epsilon: float = 1e-12
    max_epoch: int = 500
    N: int = 9
    initial_log_conductivity: float = math.log(1e-2)

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be non-negative")
        if self.max_epoch < 1:
            raise ValueError("max_epoch must be at least 1")
        if self.N < 0:
            raise ValueError("N must be non-negative")


HISTORY_FIELDS = ("epoch", "dim_theta", "loss", "relative_error", "grad_norm2")


@dataclass
class OptimizerState:
    """Parameters, last gradient and per-epoch history.

    History row ``n`` describes the parameters after ``n`` updates, so row 0
    is the initial guess and the last row is the returned ``theta``.
    """

    theta: np.ndarray
    grad: np.ndarray
    epoch: int = 0
    history: list[tuple] = field(default_factory=list)

    def record(self, loss_value: float, rel_err: float) -> None:
        self.history.append(
            (self.epoch, int(self.theta.size), float(loss_value), float(rel_err), float(self.grad @ self.grad))
        )

    def column(self, name: str) -> np.ndarray:
        return np.array([row[HISTORY_FIELDS.index(name)] for row in self.history])


def _error(problem: InverseProblem, theta, truth) -> float:
    if truth is None:
        return math.nan
    return relative_error(problem.conductivity(theta), truth)


def adaptive_fs_gd(
    config: GDConfig,
    observed: MeasurementSet,
    problem: InverseProblem,
    truth=None,
    theta0=None,
    callback=None,
) -> OptimizerState:
    """Gradient descent on log-Fourier coefficients with adaptive mode growth.

    Each epoch either appends one zero coefficient (when ``||g||**2`` is
    below ``epsilon`` and ``dim theta <= 2N``) or takes a step
    ``theta -= gamma * g``.  Exactly ``max_epoch`` epochs are run.
    """
    if problem.parameterization != "fourier":
        raise ValueError("adaptive_fs_gd needs a Fourier-parameterised 1D problem")
    if theta0 is None:
        theta0 = problem.constant_theta(config.initial_log_conductivity)
    theta = np.atleast_1d(np.asarray(theta0, dtype=float)).copy()
    value, g = loss_and_grad(theta, observed, problem)
    state = OptimizerState(theta, g)
    state.record(value, _error(problem, theta, truth))
    for n in range(1, config.max_epoch + 1):
        if g @ g < config.epsilon and theta.size <= 2 * config.N:
            theta = np.append(theta, 0.0)
        else:
            theta = theta - config.gamma * g
        value, g = loss_and_grad(theta, observed, problem)
        state.theta, state.grad, state.epoch = theta, g, n
        state.record(value, _error(problem, theta, truth))
        if callback is not None:
            callback(state)
    log.debug("adaptive_fs_gd finished: dim=%d loss=%.3e", theta.size, value)
    return state


def gd_2d(
    config: GDConfig,
    observed: MeasurementSet,
    problem: InverseProblem,
    truth=None,
    theta0=None,
    callback=None,
) -> OptimizerState:
    """Plain gradient descent for ``max_epoch`` steps (used with log-pixel parameters)."""
    if theta0 is None:
        theta0 = problem.constant_theta(config.initial_log_conductivity)
    theta = np.asarray(theta0, dtype=float).ravel().copy()
    value, g = loss_and_grad(theta, observed, problem)
    state = OptimizerState(theta, g)
    state.record(value, _error(problem, theta, truth))
    for n in range(1, config.max_epoch + 1):
        theta = theta - config.gamma * g
        value, g = loss_and_grad(theta, observed, problem)
        state.theta, state.grad, state.epoch = theta, g, n
        state.record(value, _error(problem, theta, truth))
        if callback is not None:
            callback(state)
    return state
