"""End-to-end experiments: build, simulate, measure, reconstruct, evaluate."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .field import TRUTHS_1D, image_to_conductivity, make_truth_1d, resize_bilinear
from .forward import HeatSource, Trajectory, assemble, integrate
from .grid import Grid, make_grid
from .imageio import bundled_image, read_image
from .inverse import HISTORY_FIELDS, GDConfig, InverseProblem, OptimizerState, adaptive_fs_gd, gd_2d, relative_error
from .sensing import MeasurementSet, make_paths, measure, measurement_times
from .spectral import check_recoverable

log = logging.getLogger(__name__)


class NonRecoverableError(ValueError):
    """Flat initial state plus spatially constant source: the data carry no information on a."""


DEFAULT_GAMMA = {1: 10.0, 2: 3000.0}
DEFAULT_EPSILON = 1e-7


@dataclass
class ExperimentSpec:
    dim: int = 1
    J: int | None = None
    truth: str = "heaviside"
    image: str | None = None
    a_const: float = 0.01
    u0: str | None = None
    source: str | None = None
    sensors: str | None = None
    M: int | None = None
    noise_sd: float = 0.0
    gamma: float | None = None
    epsilon: float = DEFAULT_EPSILON
    max_epoch: int = 500
    N: int = 9
    initial_log_conductivity: float = math.log(1e-2)
    seed: int = 0

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        d = self.dim
        if self.J is None:
            self.J = 100 if d == 1 else 32
        if self.u0 is None:
            self.u0 = "sin_2pix" if d == 1 else "coscos"
        if self.source is None:
            self.source = "sin_pi_t" if d == 1 else "sin_2pi_t"
        if self.sensors is None:
            self.sensors = "circle" if d == 1 else "orbits4"
        if self.M is None:
            self.M = 100 if d == 1 else 256
        if self.gamma is None:
            self.gamma = DEFAULT_GAMMA[d]
        if (self.sensors == "circle") != (d == 1):
            raise ValueError(f"sensor layout {self.sensors!r} does not fit a {d}D problem")
        if self.u0 not in ("sin_2pix", "coscos", "constant"):
            raise ValueError(f"unknown initial condition {self.u0!r}")
        if (self.u0 == "sin_2pix" and d != 1) or (self.u0 == "coscos" and d != 2):
            raise ValueError(f"initial condition {self.u0!r} does not fit a {d}D problem")
        if d == 2 and self.image is None and self.truth != "constant":
            raise ValueError("a 2D experiment needs an image (or truth='constant')")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be non-negative")
        if self.M < 1:
            raise ValueError("M must be at least 1")

    def gd_config(self) -> GDConfig:
        return GDConfig(self.gamma, self.epsilon, self.max_epoch, self.N, self.initial_log_conductivity)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def build_grid(spec: ExperimentSpec) -> Grid:
    return make_grid(spec.dim, spec.J)


def resolve_image(image: str) -> Path:
    """Path for an image argument; ``mnist:<k>`` names a bundled sample digit."""
    if image.startswith("mnist:"):
        return bundled_image(int(image.split(":", 1)[1]))
    return Path(image)


def load_image_truth(image: str, J: int) -> np.ndarray:
    pixels = read_image(resolve_image(image))
    if pixels.shape != (J, J):
        pixels = resize_bilinear(pixels, J)
    return image_to_conductivity(pixels)


def build_truth(spec: ExperimentSpec, grid: Grid) -> np.ndarray:
    if spec.truth == "constant" and spec.image is None:
        if spec.a_const <= 0:
            raise ValueError("a_const must be positive")
        return np.full(grid.shape, float(spec.a_const))
    if spec.dim == 1:
        if spec.truth.lower() not in TRUTHS_1D:
            raise ValueError(f"unknown 1D truth {spec.truth!r}; choose from {', '.join(TRUTHS_1D)} or constant")
        return make_truth_1d(spec.truth, grid)
    return load_image_truth(spec.image, spec.J)


def build_initial_state(kind: str, grid: Grid) -> np.ndarray:
    if kind == "constant":
        return np.ones(grid.size)
    if kind == "sin_2pix":
        return np.sin(2 * np.pi * grid.coords())
    X, Y = grid.coords()
    return (np.cos(2 * np.pi * X) * np.cos(2 * np.pi * Y)).ravel()


def build_problem(spec: ExperimentSpec, grid: Grid) -> InverseProblem:
    u0 = build_initial_state(spec.u0, grid)
    source = HeatSource(spec.source)
    if check_recoverable(u0, source) == "degenerate":
        raise NonRecoverableError(
            "non-recoverable configuration: the initial temperature is spatially constant and the "
            "heat source is uniform in space, so the temperature never depends on the conductivity"
        )
    return InverseProblem(grid, u0, source, "fourier" if spec.dim == 1 else "pixel")


def simulate_truth(truth: np.ndarray, problem: InverseProblem, M: int) -> Trajectory:
    t_grid = np.concatenate([[0.0], measurement_times(M)])
    return integrate(assemble(truth, problem.grid), problem.u0, problem.source, t_grid)


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    truth: np.ndarray
    reconstruction: np.ndarray
    state: OptimizerState
    measurements: MeasurementSet
    wall_time: float
    out_dir: Path | None = None

    @property
    def history(self) -> list[tuple]:
        return self.state.history

    @property
    def final_loss(self) -> float:
        return self.history[-1][2]

    @property
    def final_relative_error(self) -> float:
        return self.history[-1][3]

    @property
    def initial_relative_error(self) -> float:
        return self.history[0][3]


def reconstruct(spec: ExperimentSpec, problem: InverseProblem, observed: MeasurementSet, truth) -> OptimizerState:
    if spec.dim == 1:
        return adaptive_fs_gd(spec.gd_config(), observed, problem, truth=truth)
    return gd_2d(spec.gd_config(), observed, problem, truth=truth)


def run_experiment(spec: ExperimentSpec, out_dir=None, plots: bool = False) -> ExperimentResult:
    """Run one experiment; writes a run directory when ``out_dir`` is given."""
    start = time.perf_counter()
    grid = build_grid(spec)
    problem = build_problem(spec, grid)
    truth = build_truth(spec, grid)
    traj = simulate_truth(truth, problem, spec.M)
    paths = make_paths(spec.sensors, grid, spec.M)
    observed = measure(traj, paths, grid, spec.noise_sd, spec.seed)
    state = reconstruct(spec, problem, observed, truth)
    result = ExperimentResult(
        spec, truth, problem.conductivity(state.theta), state, observed, time.perf_counter() - start
    )
    log.info(
        "%dD %s/%s: loss=%.3e rel_err=%.4f (%.1fs)",
        spec.dim, spec.truth if spec.dim == 1 else spec.image, spec.sensors,
        result.final_loss, result.final_relative_error, result.wall_time,
    )
    if out_dir is not None:
        write_run_dir(result, out_dir, problem=problem, plots=plots)
    return result


def write_training_log(state: OptimizerState, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HISTORY_FIELDS)
        for epoch, dim, loss_v, err, g2 in state.history:
            w.writerow([epoch, dim, repr(loss_v), repr(err), repr(g2)])


def write_field_csv(a: np.ndarray, path) -> None:
    """Node-wise conductivity: ``node, x, value`` in 1D, ``node, x, y, value`` in 2D."""
    a = np.asarray(a)
    J = a.shape[0]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if a.ndim == 1:
            w.writerow(["node", "x", "conductivity"])
            for j in range(J):
                w.writerow([j + 1, repr(j / J), repr(float(a[j]))])
        else:
            w.writerow(["node", "x", "y", "conductivity"])
            for i in range(J):
                for j in range(J):
                    w.writerow([i * J + j + 1, repr(i / J), repr(j / J), repr(float(a[i, j]))])


def read_field_csv(path) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    values = data[:, -1]
    if data.shape[1] == 3:
        return values
    J = math.isqrt(values.size)
    return values.reshape(J, J)


def write_run_dir(result: ExperimentResult, out_dir, problem: InverseProblem | None = None, plots: bool = False) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = result.spec
    (out / "spec.json").write_text(spec.to_json() + "\n")
    result.measurements.to_csv(out / "measurements.csv")
    write_training_log(result.state, out / "training_log.csv")
    write_field_csv(result.reconstruction, out / "reconstruction.csv")
    summary = dict(
        final_loss=result.final_loss,
        relative_error=result.final_relative_error,
        initial_relative_error=result.initial_relative_error,
        dim_theta=int(result.state.theta.size),
        epochs=result.state.epoch,
        seed=spec.seed,
        wall_time=result.wall_time,
    )
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if plots:
        from . import plots as plotting

        plotting.plot_training(result.state, out / "training.svg")
        if spec.dim == 1:
            plotting.plot_conductivity_1d(result.truth, result.reconstruction, out / "conductivity.svg")
        else:
            plotting.plot_conductivity_2d(result.truth, result.reconstruction, out / "conductivity.svg")
        plotting.plot_measurements(result.measurements, out / "measurements.svg")
    result.out_dir = out
    return out


FRONTIER_FIELDS = ("config", "loss_level", "epoch", "rel_err")


def loss_crossings(state: OptimizerState, levels) -> list[tuple[int | None, float]]:
    """First epoch with loss <= level, and the relative error there."""
    losses = state.column("loss")
    errors = state.column("relative_error")
    out = []
    for level in levels:
        hit = np.flatnonzero(losses <= level)
        out.append((int(hit[0]), float(errors[hit[0]])) if hit.size else (None, math.nan))
    return out


@dataclass
class Frontier:
    rows: list[dict]
    results: dict[str, ExperimentResult] = field(default_factory=dict)

    def error_at(self, config: str, level: float) -> float:
        for r in self.rows:
            if r["config"] == config and r["loss_level"] == level:
                return r["rel_err"]
        raise KeyError((config, level))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(FRONTIER_FIELDS)
            for r in self.rows:
                reached = r["epoch"] is not None
                w.writerow([
                    r["config"], repr(r["loss_level"]),
                    r["epoch"] if reached else "unreached",
                    repr(r["rel_err"]) if reached else "unreached",
                ])


def compare_configs(image: str, configs, loss_levels, base: ExperimentSpec | None = None, jobs: int | None = None) -> Frontier:
    """Relative error at the first crossing of each loss level, per sensor layout.

    All layouts read their measurements off one shared forward solution of the
    true conductivity.
    """
    configs = list(configs)
    levels = [float(v) for v in loss_levels]
    if len(configs) < 2:
        raise ValueError("compare needs at least two sensor configurations")
    if any(b >= a for a, b in zip(levels, levels[1:])):
        raise ValueError("loss levels must be strictly descending")
    base = base or ExperimentSpec(dim=2, image=image)
    base = replace(base, dim=2, image=image)
    grid = build_grid(base)
    problem = build_problem(base, grid)
    truth = build_truth(base, grid)
    traj = simulate_truth(truth, problem, base.M)

    def run(config: str) -> ExperimentResult:
        spec = replace(base, sensors=config)
        start = time.perf_counter()
        observed = measure(traj, make_paths(config, grid, spec.M), grid, spec.noise_sd, spec.seed)
        state = reconstruct(spec, problem, observed, truth)
        return ExperimentResult(
            spec, truth, problem.conductivity(state.theta), state, observed, time.perf_counter() - start
        )

    jobs = jobs or os.cpu_count() or 1
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=min(jobs, len(configs))) as pool:
            results = list(pool.map(run, configs))
    else:
        results = [run(c) for c in configs]

    rows = []
    for config, result in zip(configs, results):
        for level, (epoch, err) in zip(levels, loss_crossings(result.state, levels)):
            rows.append(dict(config=config, loss_level=level, epoch=epoch, rel_err=err))
    return Frontier(rows, dict(zip(configs, results)))
