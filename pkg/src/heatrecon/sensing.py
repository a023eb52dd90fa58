"""Sensor paths and temperature measurements."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .forward import Trajectory
from .grid import Grid, snap_indices


@dataclass(frozen=True, eq=False)
class SensorPath:
    """Positions of one sensor at its measurement times.

    ``positions`` has shape ``(M,)`` on the circle and ``(M, 2)`` on the torus.
    """

    sensor_id: int
    times: np.ndarray
    positions: np.ndarray

    @property
    def ndim(self) -> int:
        return 1 if self.positions.ndim == 1 else 2


def measurement_times(M: int, T_final: float = 1.0) -> np.ndarray:
    """``t_m = m T / M`` for ``m = 1..M``; t = 0 is never a measurement time."""
    if M < 1:
        raise ValueError("need at least one measurement time")
    return T_final * np.arange(1, M + 1) / M


def path_circle_1d(M: int, T_final: float = 1.0, sensor_id: int = 1) -> SensorPath:
    """One sensor making a full constant-speed circuit of the circle by ``T_final``."""
    t = measurement_times(M, T_final)
    return SensorPath(sensor_id, t, (t / T_final) % 1.0)


def orbit_half_width(k: int) -> float:
    return k / 10


def orbit_cycles(k: int) -> int:
    return 2 ** (4 - k)


def orbit_position(k: int, t) -> np.ndarray:
    """Position of orbit sensor ``k`` (1 innermost .. 4 outermost) at time ``t``.

    The sensor starts at the top-left corner of the square of half width
    ``k/10`` centred at (1/2, 1/2) and runs counterclockwise (down the left
    edge first) at constant speed, completing ``2**(4-k)`` cycles by t = 1.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    r = orbit_half_width(k)
    side = 2 * r
    # Arc length within the current cycle, in units of one side.
    s = ((t * orbit_cycles(k)) % 1.0) * 4.0
    leg = np.minimum(np.floor(s).astype(int), 3)
    frac = s - leg
    lo, hi = 0.5 - r, 0.5 + r
    x = np.select(
        [leg == 0, leg == 1, leg == 2], [np.full_like(t, lo), lo + side * frac, np.full_like(t, hi)],
        hi - side * frac,
    )
    y = np.select(
        [leg == 0, leg == 1, leg == 2], [hi - side * frac, np.full_like(t, lo), lo + side * frac],
        np.full_like(t, hi),
    )
    return np.stack([x, y], axis=-1)


def path_orbits_2d(M: int, T_final: float = 1.0) -> list[SensorPath]:
    t = measurement_times(M, T_final)
    return [SensorPath(k, t, orbit_position(k, t / T_final)) for k in range(1, 5)]


def path_static_grid_2d(K: int, grid: Grid, M: int, T_final: float = 1.0) -> list[SensorPath]:
    """``K`` static sensors on an equidistant lattice with spacing ``1/sqrt(K)``."""
    n = math.isqrt(K)
    if n * n != K:
        raise ValueError(f"K={K} is not a perfect square")
    if grid.J % n:
        raise ValueError(f"sqrt(K)={n} does not divide J={grid.J}")
    t = measurement_times(M, T_final)
    paths = []
    for i in range(n):
        for j in range(n):
            pos = np.tile([i / n, j / n], (t.size, 1))
            paths.append(SensorPath(i * n + j + 1, t, pos))
    return paths


def make_paths(config: str, grid: Grid, M: int) -> list[SensorPath]:
    """Sensor layout by name: ``circle``, ``orbits4``, ``static16`` or ``static64``."""
    name = config.lower().replace("_", "")
    if name in ("circle", "circle1d"):
        return [path_circle_1d(M)]
    if name in ("orbits4", "orbits"):
        return path_orbits_2d(M)
    if name.startswith("static"):
        return path_static_grid_2d(int(name[len("static"):]), grid, M)
    raise ValueError(f"unknown sensor configuration {config!r}")


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    """Column-wise measurement records.

    ``node`` is the 1-based (flat, in 2D) index of the snapped grid node;
    ``y`` is NaN on the circle.
    """

    sensor_id: np.ndarray
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    node: np.ndarray
    temperature: np.ndarray

    def __len__(self) -> int:
        return self.t.size

    @property
    def times(self) -> np.ndarray:
        """Distinct measurement times, ascending."""
        return np.unique(self.t)

    @property
    def sensors(self) -> np.ndarray:
        return np.unique(self.sensor_id)

    def with_temperature(self, temperature) -> "MeasurementSet":
        return MeasurementSet(self.sensor_id, self.t, self.x, self.y, self.node, np.asarray(temperature, dtype=float))

    def subset(self, mask) -> "MeasurementSet":
        return MeasurementSet(*(getattr(self, f)[mask] for f in _FIELDS))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["sensor_id", "t", "x", "y", "node", "temperature"])
            for s, t, x, y, n, u in zip(*(getattr(self, f) for f in _FIELDS)):
                w.writerow([int(s), repr(float(t)), repr(float(x)), "" if np.isnan(y) else repr(float(y)), int(n), repr(float(u))])

    @classmethod
    def from_csv(cls, path) -> "MeasurementSet":
        cols = {f: [] for f in _FIELDS}
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh, skipinitialspace=True):
                cols["sensor_id"].append(int(row["sensor_id"]))
                cols["node"].append(int(row["node"]))
                for f in ("t", "x", "temperature"):
                    cols[f].append(float(row[f]))
                cols["y"].append(float(row["y"]) if row["y"].strip() else np.nan)
        return cls(
            np.asarray(cols["sensor_id"], dtype=int), np.asarray(cols["t"]), np.asarray(cols["x"]),
            np.asarray(cols["y"]), np.asarray(cols["node"], dtype=int), np.asarray(cols["temperature"]),
        )


_FIELDS = ("sensor_id", "t", "x", "y", "node", "temperature")


def plan_measurements(paths: list[SensorPath], grid: Grid) -> MeasurementSet:
    """Records for every (sensor, time) pair with snapped nodes and zero temperature."""
    if not paths:
        raise ValueError("no sensor paths given")
    times = paths[0].times
    for p in paths:
        if p.times.shape != times.shape or np.any(p.times != times):
            raise ValueError("all sensors must share one time grid")
        if p.ndim != grid.ndim:
            raise ValueError("sensor path dimension does not match the grid")
    sid = np.concatenate([np.full(p.times.size, p.sensor_id) for p in paths])
    t = np.concatenate([p.times for p in paths])
    pos = np.concatenate([p.positions for p in paths]) % 1.0
    node = snap_indices(pos, grid) + 1
    if grid.ndim == 1:
        x, y = pos, np.full(t.size, np.nan)
    else:
        x, y = pos[:, 0], pos[:, 1]
    return MeasurementSet(sid.astype(int), t, x, y, node, np.zeros(t.size))


def measure(
    traj: Trajectory, paths: list[SensorPath], grid: Grid, noise_sd: float = 0.0, seed: int = 0
) -> MeasurementSet:
    """Read the trajectory at each sensor's snapped node, plus optional Gaussian noise."""
    if noise_sd < 0:
        raise ValueError("noise_sd must be non-negative")
    plan = plan_measurements(paths, grid)
    k = np.searchsorted(traj.times, plan.t)
    k = np.minimum(k, traj.times.size - 1)
    missing = np.abs(traj.times[k] - plan.t) > 1e-12
    if np.any(missing):
        raise ValueError(f"measurement time {plan.t[missing][0]} is not on the trajectory grid")
    temp = traj.states[k, plan.node - 1]
    if noise_sd > 0:
        temp = temp + np.random.default_rng(seed).normal(0.0, noise_sd, size=temp.size)
    return plan.with_temperature(temp)
