"""Conductivity reconstruction for the periodic heat equation from moving or static sensors."""

from .forward import HeatOperator, HeatSource, NumericalError, Trajectory, assemble, integrate
from .grid import Grid1D, Grid2D, make_grid, snap_to_grid
from .inverse import GDConfig, InverseProblem, adaptive_fs_gd, gd_2d, loss_and_grad, relative_error
from .pipeline import ExperimentSpec, NonRecoverableError, compare_configs, run_experiment
from .sensing import MeasurementSet, make_paths, measure
from .spectral import check_recoverable, eigensystem, sensitivity_report

__version__ = "0.1.0"
