"""Sensitivity diagnostics from the eigendecomposition of the heat operator.

Eigenvalues here are those of A itself (the 1/dx**2 factor is already
included), so the sensitivity of a measurement to mode ``k`` peaks at
``t* = -1/lambda_k``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .forward import HeatOperator, HeatSource, symmetric_eigh

WINDOW_LO = 0.05
WINDOW_HI = 3.0


@dataclass(frozen=True, eq=False)
class EigenSystem:
    lambdas: np.ndarray  # ascending; the last one is the null mode
    vectors: np.ndarray  # columns are orthonormal eigenvectors

    @property
    def size(self) -> int:
        return self.lambdas.size

    def t_star(self, k: int) -> float:
        """Peak sensitivity time of mode ``k`` (1-based, ascending eigenvalues)."""
        lam = self.lambdas[k - 1]
        return np.inf if lam == 0 else -1.0 / lam


@dataclass(frozen=True, eq=False)
class SensitivityCurve:
    k: int
    times: np.ndarray
    values: np.ndarray

    def peak_time(self) -> float:
        return float(self.times[np.argmax(self.values)])


def eigensystem(op: HeatOperator) -> EigenSystem:
    lam, Q = symmetric_eigh(op)
    # The null mode comes out as a tiny +-eps; pin it and fix the eigenvector sign.
    lam = lam.copy()
    lam[-1] = min(lam[-1], 0.0)
    if Q[:, -1].sum() < 0:
        Q = Q.copy()
        Q[:, -1] *= -1
    return EigenSystem(lam, Q)


def sensitivity_curve(es: EigenSystem, k: int, u0, node: int, t_grid) -> SensitivityCurve:
    """``|t exp(t lambda_k) (e_node . v_k)(v_k . u0)|`` over ``t_grid``.

    ``k`` and ``node`` are 1-based.  The null mode ``k = J`` gives an
    all-zero curve.
    """
    if not 1 <= k <= es.size:
        raise ValueError(f"mode index {k} outside 1..{es.size}")
    if not 1 <= node <= es.size:
        raise ValueError(f"node index {node} outside 1..{es.size}")
    t = np.asarray(t_grid, dtype=float)
    if k == es.size:
        return SensitivityCurve(k, t, np.zeros_like(t))
    v = es.vectors[:, k - 1]
    coef = v[node - 1] * (v @ np.asarray(u0, dtype=float).ravel())
    lam = es.lambdas[k - 1]
    return SensitivityCurve(k, t, np.abs(t * np.exp(t * lam) * coef))


def sensitivity_window(es: EigenSystem, k: int) -> tuple[float, float]:
    ts = es.t_star(k)
    return WINDOW_LO * ts, WINDOW_HI * ts


def check_recoverable(u0, source: HeatSource | None = None, source_spatially_constant: bool = True) -> str:
    """``"degenerate"`` when both the initial state and the source are flat in space."""
    u0 = np.asarray(u0, dtype=float)
    flat = float(u0.max() - u0.min()) < 1e-12
    if source is not None:
        source_spatially_constant = source.spatially_constant
    return "degenerate" if flat and source_spatially_constant else "recoverable"


def equilibrium_decomposition(es: EigenSystem, u0, source: HeatSource, t: float):
    """Split the state at time ``t`` into mean, accumulated forcing and transient.

    The three vectors sum to the Duhamel solution of ``u' = A u + f(t)``.
    """
    if not source.spatially_constant:
        raise ValueError("the decomposition needs a spatially constant source")
    u0 = np.asarray(u0, dtype=float).ravel()
    n = u0.size
    mean = np.full(n, u0.mean())
    forcing = np.full(n, source.integral(t))
    V = es.vectors[:, :-1]
    transient = V @ (np.exp(t * es.lambdas[:-1]) * (V.T @ u0))
    return mean, forcing, transient


def sensitivity_report(es: EigenSystem, modes: int | None = None) -> list[dict]:
    """Rows ``k, lambda_k, t_star, window_lo, window_hi`` for the slowest modes.

    ``modes`` limits the report to that many non-null modes, slowest first;
    the null mode is always included as the first row.
    """
    J = es.size
    ks = list(range(J - 1, 0, -1))
    if modes is not None:
        ks = ks[:modes]
    rows = [dict(k=J, lambda_k=float(es.lambdas[-1]), t_star=np.inf, window_lo=np.inf, window_hi=np.inf, null_mode=1)]
    for k in ks:
        lo, hi = sensitivity_window(es, k)
        rows.append(dict(k=k, lambda_k=float(es.lambdas[k - 1]), t_star=es.t_star(k), window_lo=lo, window_hi=hi, null_mode=0))
    return rows


REPORT_FIELDS = ("k", "lambda_k", "t_star", "window_lo", "window_hi", "null_mode")


def write_report(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=REPORT_FIELDS)
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(float(v)) if isinstance(v, float) else v for k, v in r.items()})
