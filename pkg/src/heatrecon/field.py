"""Conductivity fields, their log-space parameterisations and test cases."""

from __future__ import annotations

import numpy as np

from .grid import Grid1D, Grid2D

TRUTHS_1D = ("heaviside", "piecelinear3s", "piecelinear4w")


def fourier_basis(dim: int, grid: Grid1D) -> np.ndarray:
    """Matrix ``B`` of shape (J, dim) with ``ln a = B @ theta``.

    Column 0 is the constant mode; column ``2k-1`` is ``sin(2 k pi x)`` and
    column ``2k`` is ``cos(2 k pi x)``.  An even ``dim`` ends on an unpaired
    sine column.
    """
    if dim < 1:
        raise ValueError("theta needs at least one coefficient")
    x = grid.coords()
    B = np.empty((grid.J, dim))
    B[:, 0] = 1.0
    for col in range(1, dim):
        k = (col + 1) // 2
        B[:, col] = np.sin(2 * k * np.pi * x) if col % 2 else np.cos(2 * k * np.pi * x)
    return B


def eval_fourier_log(theta, grid: Grid1D) -> np.ndarray:
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    # Trailing zeros are dropped so that padding leaves the result bit-identical.
    nz = np.flatnonzero(theta)
    theta = theta[: max(1, nz[-1] + 1 if nz.size else 1)]
    return np.exp(fourier_basis(theta.size, grid) @ theta)


def eval_pixel_log(theta, grid: Grid2D) -> np.ndarray:
    """Conductivity matrix (J, J) from log-pixel parameters of length J**2."""
    theta = np.asarray(theta, dtype=float)
    if theta.size != grid.size:
        raise ValueError(f"expected {grid.size} log-pixel parameters, got {theta.size}")
    return np.exp(theta).reshape(grid.shape)


def _heaviside(x):
    return np.where(x < 0.5, 1.0, 2.0) / 100


def _piecelinear3s(x):
    return np.select([x < 1 / 3, x < 2 / 3], [2 - 3 * x, 6 * x - 1], 5 - 3 * x) / 100


def _piecelinear4w(x):
    return np.select(
        [x < 1 / 4, x < 1 / 2, x < 3 / 4], [2 - 4 * x, 8 * x - 1, 7 - 8 * x], 4 * x - 2
    ) / 100


_TRUTH_FUNCS = {
    "heaviside": _heaviside,
    "piecelinear3s": _piecelinear3s,
    "piecelinear4w": _piecelinear4w,
}


def truth_function_1d(name: str):
    try:
        return _TRUTH_FUNCS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown 1D test case {name!r}; choose from {', '.join(TRUTHS_1D)}") from None


def make_truth_1d(name: str, grid: Grid1D) -> np.ndarray:
    """Built-in 1D ground truth sampled at the grid nodes."""
    return truth_function_1d(name)(grid.coords())


def image_to_conductivity(pixels) -> np.ndarray:
    """Affine map from grayscale in [0, 1] to conductivity in [0.01, 0.02]."""
    p = np.asarray(pixels, dtype=float)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ValueError(f"expected a square grayscale image, got shape {p.shape}")
    if p.min() < 0.0 or p.max() > 1.0:
        raise ValueError("pixel values must lie in [0, 1]")
    return (p + 1.0) / 100


def resize_bilinear(pixels, size: int = 32) -> np.ndarray:
    """Bilinear resize of a square image with half-pixel centres.

    Matches the usual ``align_corners=False`` convention: output pixel ``k``
    samples the input at ``(k + 0.5) * n / size - 0.5``, clamped to the
    image.  Constant images map to the same constant.
    """
    p = np.asarray(pixels, dtype=float)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ValueError(f"expected a square image, got shape {p.shape}")
    n = p.shape[0]
    src = np.clip((np.arange(size) + 0.5) * n / size - 0.5, 0.0, n - 1)
    lo = np.floor(src).astype(int)
    hi = np.minimum(lo + 1, n - 1)
    w = src - lo
    rows = p[lo] * (1 - w)[:, None] + p[hi] * w[:, None]
    out = rows[:, lo] * (1 - w)[None, :] + rows[:, hi] * w[None, :]
    return np.clip(out, 0.0, 1.0)
