"""Uniform periodic grids on the unit circle and the unit torus.

Node indices exposed by this module are 1-based: node ``j`` of a
:class:`Grid1D` sits at ``(j - 1) * dx`` and node ``(i, j)`` of a
:class:`Grid2D` sits at ``((i - 1) * dx, (j - 1) * dx)`` with flat index
``(i - 1) * J + j``.  Arrays are stored 0-based, so flat index ``n`` maps to
array position ``n - 1`` of a C-ordered ``(J, J)`` array.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Grid1D:
    J: int

    def __post_init__(self):
        if int(self.J) != self.J or self.J < 3:
            raise ValueError(f"Grid1D needs an integer J >= 3, got {self.J}")

    ndim = 1

    @property
    def dx(self) -> float:
        return 1.0 / self.J

    @property
    def size(self) -> int:
        return self.J

    @property
    def shape(self) -> tuple[int]:
        return (self.J,)

    def coords(self) -> np.ndarray:
        return np.arange(self.J) * self.dx


@dataclass(frozen=True)
class Grid2D:
    J: int

    def __post_init__(self):
        if int(self.J) != self.J or self.J < 3:
            raise ValueError(f"Grid2D needs an integer J >= 3, got {self.J}")

    ndim = 2

    @property
    def dx(self) -> float:
        return 1.0 / self.J

    @property
    def size(self) -> int:
        return self.J * self.J

    @property
    def shape(self) -> tuple[int, int]:
        return (self.J, self.J)

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid ``(X, Y)`` with the first axis running along x."""
        x = np.arange(self.J) * self.dx
        return np.meshgrid(x, x, indexing="ij")

    def flat_index(self, node: tuple[int, int]) -> int:
        i, j = node
        return (i - 1) * self.J + j

    def node_of(self, flat: int) -> tuple[int, int]:
        i, j = divmod(flat - 1, self.J)
        return i + 1, j + 1


Grid = Grid1D | Grid2D


def make_grid(dim: int, J: int) -> Grid:
    if dim == 1:
        return Grid1D(J)
    if dim == 2:
        return Grid2D(J)
    raise ValueError(f"dimension must be 1 or 2, got {dim}")


def reduce_point(p) -> np.ndarray:
    """Reduce every coordinate of a point into [0, 1)."""
    p = np.atleast_1d(np.asarray(p, dtype=float)) % 1.0
    # x % 1.0 can round up to exactly 1.0 for tiny negative x
    p[p >= 1.0] = 0.0
    return p


def periodic_distance(p, q) -> np.ndarray:
    """Per-axis wrap-around distance ``min(|d|, 1 - |d|)``.

    Returns an array with one entry per axis; sum it for the Manhattan
    distance and take its max for the Chebyshev distance.
    """
    d = np.abs(reduce_point(p) - reduce_point(q))
    return np.minimum(d, 1.0 - d)


def manhattan_distance(p, q) -> float:
    return float(periodic_distance(p, q).sum())


def chebyshev_distance(p, q) -> float:
    return float(periodic_distance(p, q).max())


def _snap_axis(x: np.ndarray, J: int) -> np.ndarray:
    # Ties go to the node at or below the point: round half down on x * J.
    s = np.asarray(x, dtype=float) * J
    k = np.floor(s)
    frac = s - k
    k = np.where(frac > 0.5, k + 1, k)
    return k.astype(int) % J


def snap_indices(points, grid: Grid) -> np.ndarray:
    """Vectorised snapping: 0-based flat array positions for many points.

    ``points`` has shape ``(n,)`` in 1D or ``(n, 2)`` in 2D.
    """
    pts = np.asarray(points, dtype=float) % 1.0
    if grid.ndim == 1:
        return _snap_axis(pts.reshape(-1), grid.J)
    pts = pts.reshape(-1, 2)
    i = _snap_axis(pts[:, 0], grid.J)
    j = _snap_axis(pts[:, 1], grid.J)
    return i * grid.J + j


def snap_to_grid(p, grid: Grid):
    """Nearest grid node under the periodic metric (1-based).

    Returns an ``int`` on a :class:`Grid1D` and an ``(i, j)`` tuple on a
    :class:`Grid2D`.  On an exact tie the node at or below the point wins,
    so 0.995 on a 100-node circle snaps to node 100 and not to node 1.
    """
    p = reduce_point(p)
    if grid.ndim == 1:
        if p.size != 1:
            raise ValueError("a 1D grid needs a scalar point")
        return int(_snap_axis(p, grid.J)[0]) + 1
    if p.size != 2:
        raise ValueError("a 2D grid needs a point with two coordinates")
    i, j = _snap_axis(p, grid.J)
    return int(i) + 1, int(j) + 1
