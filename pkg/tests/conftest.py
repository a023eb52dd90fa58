import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

# One summary line per acceptance criterion, filled in by test_acceptance.py.
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def small_problem_1d(J=16, M=20, dim=5, seed=0, source="sin_pi_t"):
    """Random 1D instance: Fourier problem, noise-free data from a random truth, and a random start."""
    from heatrecon.forward import HeatSource, assemble, integrate
    from heatrecon.grid import Grid1D
    from heatrecon.inverse import InverseProblem
    from heatrecon.sensing import measure, measurement_times, path_circle_1d

    r = np.random.default_rng(seed)
    g = Grid1D(J)
    problem = InverseProblem(g, np.sin(2 * np.pi * g.coords()), HeatSource(source), "fourier")
    theta_true = np.r_[np.log(0.015), 0.3 * r.normal(size=dim - 1)]
    t = np.concatenate([[0.0], measurement_times(M)])
    traj = integrate(assemble(problem.conductivity(theta_true), g), problem.u0, problem.source, t)
    observed = measure(traj, [path_circle_1d(M)], g)
    theta = np.r_[np.log(0.01), 0.3 * r.normal(size=dim - 1)]
    return problem, observed, theta_true, theta


def small_problem_2d(J=8, M=20, seed=0, n_sensors=2):
    from heatrecon.forward import HeatSource, assemble, integrate
    from heatrecon.grid import Grid2D
    from heatrecon.inverse import InverseProblem
    from heatrecon.sensing import measure, measurement_times, path_orbits_2d

    r = np.random.default_rng(seed)
    g = Grid2D(J)
    X, Y = g.coords()
    u0 = (np.cos(2 * np.pi * X) * np.cos(2 * np.pi * Y)).ravel()
    problem = InverseProblem(g, u0, HeatSource("sin_2pi_t"), "pixel")
    theta_true = np.log(r.uniform(0.01, 0.02, J * J))
    t = np.concatenate([[0.0], measurement_times(M)])
    traj = integrate(assemble(problem.conductivity(theta_true), g), u0, problem.source, t)
    observed = measure(traj, path_orbits_2d(M)[-n_sensors:], g)
    theta = np.log(r.uniform(0.01, 0.02, J * J))
    return problem, observed, theta_true, theta
