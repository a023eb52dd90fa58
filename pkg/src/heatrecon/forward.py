"""Semi-discrete heat operator, time integration and solution oracles.

The operator is assembled from edges: every node ``p`` is joined to its
forward neighbour ``q`` (``j -> j+1`` in 1D, ``(i,j) -> (i+1,j)`` and
``(i,j) -> (i,j+1)`` in 2D, wrapping periodically) with weight ``a[p]``.
Each edge adds ``a[p] / dx**2`` to the off-diagonal pair and subtracts it
from both diagonal entries, so the matrix is symmetric with zero row sums.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy import integrate as spint
from scipy import linalg

from .grid import Grid, Grid1D, Grid2D

# Upper bound on RK4 steps per solve; a runaway conductivity would otherwise
# shrink the stable step until a single solve never finishes.
MAX_STEPS = 2_000_000

# Steps are also kept short enough to resolve the time dependence of the
# source; on coarse grids the stability bound alone allows steps near 0.2.
ACCURACY_STEP = 4e-3


class NumericalError(ArithmeticError):
    """A solve produced non-finite values or needs an unreasonable number of steps."""


def edge_list(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Edge endpoints ``(P, Q)`` (0-based flat positions); edge weight is ``a.flat[P]``."""
    J = grid.J
    if grid.ndim == 1:
        P = np.arange(J)
        return P, (P + 1) % J
    idx = np.arange(J * J).reshape(J, J)
    P = np.concatenate([idx.ravel(), idx.ravel()])
    Q = np.concatenate([np.roll(idx, -1, axis=0).ravel(), np.roll(idx, -1, axis=1).ravel()])
    return P, Q


@dataclass(frozen=True, eq=False)
class HeatOperator:
    matrix: sp.csr_matrix
    dx: float
    conductivity: np.ndarray
    grid: Grid

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def stable_step(self) -> float:
        """Largest explicit RK4 step used by :func:`integrate`: dx**2 / (4 max a)."""
        return self.dx**2 / (4.0 * float(np.max(self.conductivity)))


def _check_positive(a):
    if not np.all(np.isfinite(a)) or np.any(a <= 0):
        raise ValueError("conductivity must be strictly positive and finite")


def _assemble(a: np.ndarray, grid: Grid) -> HeatOperator:
    P, Q = edge_list(grid)
    w = a.ravel()[P] / grid.dx**2
    rows = np.concatenate([P, Q, P, Q])
    cols = np.concatenate([Q, P, P, Q])
    vals = np.concatenate([w, w, -w, -w])
    n = grid.size
    A = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    a = a.copy()
    a.setflags(write=False)
    return HeatOperator(A, grid.dx, a, grid)


def assemble_1d(a, grid: Grid1D) -> HeatOperator:
    a = np.asarray(a, dtype=float)
    if a.shape != (grid.J,):
        raise ValueError(f"expected conductivity of shape ({grid.J},), got {a.shape}")
    _check_positive(a)
    return _assemble(a, grid)


def assemble_2d(a, grid: Grid2D) -> HeatOperator:
    a = np.asarray(a, dtype=float)
    if a.shape == (grid.size,):
        a = a.reshape(grid.shape)
    if a.shape != grid.shape:
        raise ValueError(f"expected conductivity of shape {grid.shape}, got {a.shape}")
    _check_positive(a)
    return _assemble(a, grid)


def assemble(a, grid: Grid) -> HeatOperator:
    return assemble_1d(a, grid) if grid.ndim == 1 else assemble_2d(a, grid)


@dataclass(frozen=True)
class HeatSource:
    """Spatially constant heat source ``f(t, x) = g(t)``.

    ``kind`` is one of ``sin_pi_t``, ``sin_2pi_t``, ``zero`` or ``custom``;
    a custom source needs ``func``.
    """

    kind: str = "zero"
    func: Callable[[float], float] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("sin_pi_t", "sin_2pi_t", "zero", "custom"):
            raise ValueError(f"unknown heat source kind {self.kind!r}")
        if self.kind == "custom" and self.func is None:
            raise ValueError("a custom heat source needs a function of time")

    spatially_constant = True

    def __call__(self, t: float) -> float:
        if self.kind == "sin_pi_t":
            return math.sin(math.pi * t)
        if self.kind == "sin_2pi_t":
            return math.sin(2 * math.pi * t)
        if self.kind == "zero":
            return 0.0
        return float(self.func(t))

    def integral(self, t: float) -> float:
        """``int_0^t f(s) ds``."""
        if self.kind == "sin_pi_t":
            return (1 - math.cos(math.pi * t)) / math.pi
        if self.kind == "sin_2pi_t":
            return (1 - math.cos(2 * math.pi * t)) / (2 * math.pi)
        if self.kind == "zero":
            return 0.0
        return spint.quad(self.func, 0.0, t, epsabs=1e-14, epsrel=1e-13, limit=200)[0]

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero"


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (len(times), n)

    def at(self, t: float, tol: float = 1e-12) -> np.ndarray:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > tol:
            raise KeyError(f"time {t} is not on the trajectory grid")
        return self.states[k]

    def to_csv(self, path) -> None:
        n = self.states.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"u_{k}" for k in range(1, n + 1)])
            for t, row in zip(self.times, self.states):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1:])


def _check_time_grid(t_grid) -> np.ndarray:
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size < 1:
        raise ValueError("time grid must be a non-empty 1D array")
    if t[0] != 0.0:
        raise ValueError("time grid must start at 0")
    if np.any(np.diff(t) <= 0):
        raise ValueError("time grid must be strictly increasing")
    return t


def step_schedule(t_grid: np.ndarray, max_step: float) -> tuple[np.ndarray, np.ndarray]:
    """Split every interval of ``t_grid`` into equal RK4 steps no longer than ``max_step``.

    Returns ``(step_times, marks)``: all step boundaries, and the position of
    each ``t_grid`` entry within them.
    """
    pieces = [np.array([t_grid[0]])]
    marks = [0]
    for t0, t1 in zip(t_grid[:-1], t_grid[1:]):
        n = max(1, math.ceil((t1 - t0) / max_step - 1e-12))
        if marks[-1] + n > MAX_STEPS:
            raise NumericalError(f"more than {MAX_STEPS} time steps needed; conductivity too large")
        pieces.append(t0 + (t1 - t0) * np.arange(1, n + 1) / n)
        pieces[-1][-1] = t1
        marks.append(marks[-1] + n)
    return np.concatenate(pieces), np.asarray(marks)


def time_step(op: HeatOperator) -> float:
    """Largest RK4 step used for ``op``: the stability bound, capped at ``ACCURACY_STEP``."""
    return min(op.stable_step(), ACCURACY_STEP)


def rk4_step(A, u, t, h, source: HeatSource) -> np.ndarray:
    f0, fh, f1 = source(t), source(t + h / 2), source(t + h)
    k1 = A @ u + f0
    k2 = A @ (u + 0.5 * h * k1) + fh
    k3 = A @ (u + 0.5 * h * k2) + fh
    k4 = A @ (u + h * k3) + f1
    return u + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def rk4_march(A, u0, source: HeatSource, step_times: np.ndarray) -> np.ndarray:
    """All states on ``step_times`` (shape ``(len(step_times), n)``)."""
    out = np.empty((step_times.size, u0.size))
    out[0] = u0
    u = u0
    for k in range(step_times.size - 1):
        t = step_times[k]
        u = rk4_step(A, u, t, step_times[k + 1] - t, source)
        out[k + 1] = u
    return out


def integrate(
    op: HeatOperator, u0, source: HeatSource, t_grid, max_step: float | None = None
) -> Trajectory:
    """Classical RK4 solution of ``u' = A u + f(t)``, reported on ``t_grid``.

    Steps are no longer than :func:`time_step` (or ``max_step`` when
    smaller); every ``t_grid`` entry is a step boundary.
    """
    t = _check_time_grid(t_grid)
    u0 = np.asarray(u0, dtype=float).ravel()
    if u0.size != op.size:
        raise ValueError(f"initial state has {u0.size} entries, operator has {op.size}")
    h = time_step(op) if max_step is None else min(max_step, time_step(op))
    steps, marks = step_schedule(t, h)
    states = rk4_march(op.matrix, u0, source, steps)
    return Trajectory(t, states[marks])


def symmetric_eigh(op: HeatOperator, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    A = op.dense()
    scale = max(np.abs(A).max(), 1.0)
    if np.abs(A - A.T).max() > tol * scale:
        raise ValueError("heat operator is not symmetric")
    return linalg.eigh(A)


def integrate_spectral_oracle(op: HeatOperator, u0, source: HeatSource, t_grid) -> Trajectory:
    """Duhamel's formula through the symmetric eigendecomposition of A.

    With a spatially constant source the forcing term is ``1 * int_0^t f``
    because ``exp(s A) 1 = 1``.
    """
    t = _check_time_grid(t_grid)
    u0 = np.asarray(u0, dtype=float).ravel()
    if u0.size != op.size:
        raise ValueError(f"initial state has {u0.size} entries, operator has {op.size}")
    lam, Q = symmetric_eigh(op)
    c = Q.T @ u0
    states = (np.exp(np.outer(t, lam)) * c) @ Q.T
    states += np.array([source.integral(s) for s in t])[:, None]
    return Trajectory(t, states)


def fourier_coefficients(samples) -> np.ndarray:
    """Discrete Fourier coefficients ``hat(n)`` of grid samples, indexed by ``n mod J``."""
    samples = np.asarray(samples, dtype=float)
    return np.fft.fft(samples) / samples.size


def fourier_galerkin_1d(a, u0_hat, source: HeatSource, n_modes: int, t_grid) -> Trajectory:
    """Truncated Fourier-Galerkin solution on modes ``-n_modes..n_modes``.

    ``a`` holds conductivity samples on a uniform 1D grid; ``u0_hat`` holds
    the initial coefficients in the order ``-n_modes..n_modes``.  The system
    ``uhat' = -4 pi^2 D ahat(n - m) D uhat + e_0 f(t)`` is solved exactly via
    the Hermitian eigendecomposition of its matrix.  States are complex mode
    coefficients in the same order.
    """
    a = np.asarray(a, dtype=float)
    J = a.size
    if n_modes < 1:
        raise ValueError("n_modes must be at least 1")
    if 2 * n_modes + 1 > J:
        raise ValueError(f"n_modes={n_modes} aliases on a grid of {J} samples")
    t = _check_time_grid(t_grid)
    u0_hat = np.asarray(u0_hat, dtype=complex)
    if u0_hat.size != 2 * n_modes + 1:
        raise ValueError(f"expected {2 * n_modes + 1} initial coefficients, got {u0_hat.size}")
    ahat = fourier_coefficients(a)
    n = np.arange(-n_modes, n_modes + 1)
    toeplitz = ahat[(n[:, None] - n[None, :]) % J]
    G = -4 * np.pi**2 * n[:, None] * toeplitz * n[None, :]
    G = 0.5 * (G + G.conj().T)
    lam, V = linalg.eigh(G)
    c = V.conj().T @ u0_hat
    states = (np.exp(np.outer(t, lam)) * c) @ V.T
    states[:, n_modes] += np.array([source.integral(s) for s in t])
    return Trajectory(t, states)


def modes_to_grid(coeffs, J: int) -> np.ndarray:
    """Evaluate symmetric-order Fourier coefficients at ``J`` grid nodes (real part)."""
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=complex))
    n_modes = (coeffs.shape[1] - 1) // 2
    n = np.arange(-n_modes, n_modes + 1)
    x = np.arange(J) / J
    E = np.exp(2j * np.pi * np.outer(n, x))
    return (coeffs @ E).real


def grid_to_modes(samples, n_modes: int) -> np.ndarray:
    """Fourier coefficients of grid samples in the order ``-n_modes..n_modes``."""
    ahat = fourier_coefficients(samples)
    n = np.arange(-n_modes, n_modes + 1)
    return ahat[n % ahat.size]
