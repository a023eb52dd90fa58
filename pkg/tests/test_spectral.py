import csv
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from heatrecon.forward import HeatSource, assemble, integrate_spectral_oracle
from heatrecon.grid import Grid1D, Grid2D
from heatrecon.inverse import InverseProblem, grad_adjoint
from heatrecon.sensing import path_circle_1d, plan_measurements
from heatrecon.spectral import (
    REPORT_FIELDS,
    EigenSystem,
    check_recoverable,
    eigensystem,
    equilibrium_decomposition,
    sensitivity_curve,
    sensitivity_report,
    sensitivity_window,
    write_report,
)

seeds = st.integers(0, 2**32 - 1)


def random_system(seed, J=None):
    r = np.random.default_rng(seed)
    J = J or int(r.integers(4, 40))
    op = assemble(r.uniform(0.005, 0.03, J), Grid1D(J))
    return op, eigensystem(op), r


class TestEigensystem:
    @pytest.mark.parametrize("J, c", [(8, 1.0), (25, 0.013), (64, 0.02)])
    def test_circulant_closed_form(self, J, c):
        es = eigensystem(assemble(np.full(J, c), Grid1D(J)))
        n = np.arange(J)
        expected = np.sort(2 * c * (np.cos(2 * np.pi * n / J) - 1) * J**2)
        np.testing.assert_allclose(es.lambdas, expected, atol=1e-9 * np.abs(expected).max())

    @given(seeds)
    def test_null_pair(self, seed):
        _, es, _ = random_system(seed)
        J = es.size
        assert abs(es.lambdas[-1]) <= 1e-9 and np.all(es.lambdas <= 0)
        np.testing.assert_allclose(es.vectors[:, -1], 1 / math.sqrt(J), atol=1e-8)

    @given(seeds)
    def test_orthonormal_and_reconstructs(self, seed):
        op, es, _ = random_system(seed)
        Q, lam = es.vectors, es.lambdas
        np.testing.assert_allclose(Q.T @ Q, np.eye(es.size), atol=1e-10)
        A = op.dense()
        assert np.linalg.norm(Q @ np.diag(lam) @ Q.T - A) <= 1e-9 * np.linalg.norm(A)

    def test_ascending(self):
        _, es, _ = random_system(3)
        assert np.all(np.diff(es.lambdas) >= 0)

    def test_two_dimensional(self, rng):
        es = eigensystem(assemble(rng.uniform(0.01, 0.02, (5, 5)), Grid2D(5)))
        assert es.size == 25 and abs(es.lambdas[-1]) <= 1e-9


class TestSensitivityCurve:
    def test_unit_value(self):
        es = EigenSystem(np.array([-1.0, 0.0]), np.eye(2))
        c = sensitivity_curve(es, 1, np.array([1.0, 0.0]), 1, np.array([1.0]))
        assert c.values[0] == pytest.approx(math.exp(-1))

    def test_null_mode_is_zero(self):
        _, es, r = random_system(1, J=10)
        c = sensitivity_curve(es, 10, r.normal(size=10), 3, np.linspace(0, 1, 5))
        assert np.all(c.values == 0)

    def test_index_validation(self):
        _, es, _ = random_system(1, J=10)
        with pytest.raises(ValueError):
            sensitivity_curve(es, 0, np.ones(10), 1, [1.0])
        with pytest.raises(ValueError):
            sensitivity_curve(es, 1, np.ones(10), 11, [1.0])

    @given(seeds)
    def test_peak_and_unimodality(self, seed):
        _, es, r = random_system(seed, J=20)
        u0 = np.sin(2 * np.pi * np.arange(20) / 20) + 0.3 * r.normal(size=20)
        for k in (19, 18, 17):
            ts = es.t_star(k)
            t = np.linspace(0, 4 * ts, 4001)
            c = sensitivity_curve(es, k, u0, 1 + int(r.integers(20)), t)
            if c.values.max() == 0:
                continue
            assert abs(c.peak_time() - ts) <= t[1] - t[0]
            i = int(np.argmax(c.values))
            assert np.all(np.diff(c.values[: i + 1]) >= 0)
            assert np.all(np.diff(c.values[i:]) <= 0)

    def test_window(self):
        _, es, _ = random_system(2, J=12)
        lo, hi = sensitivity_window(es, 11)
        assert lo == pytest.approx(0.05 * es.t_star(11)) and hi == pytest.approx(3 * es.t_star(11))


class TestRecoverable:
    def test_examples(self):
        x = np.arange(10) / 10
        assert check_recoverable(np.sin(2 * np.pi * x), HeatSource("sin_pi_t")) == "recoverable"
        assert check_recoverable(np.full(10, 5.0), HeatSource("sin_pi_t")) == "degenerate"
        assert check_recoverable(np.zeros(10), HeatSource("zero")) == "degenerate"
        assert check_recoverable(np.zeros(10), source_spatially_constant=False) == "recoverable"

    def test_degenerate_means_zero_gradient(self):
        g = Grid1D(10)
        u0 = np.full(10, 5.0)
        src = HeatSource("sin_pi_t")
        assert check_recoverable(u0, src) == "degenerate"
        problem = InverseProblem(g, u0, src)
        observed = plan_measurements([path_circle_1d(10)], g).with_temperature(np.zeros(10))
        assert np.abs(grad_adjoint(np.array([-4.0, 0.5, 0.5]), observed, problem)).max() <= 1e-12


class TestEquilibrium:
    @given(seeds, st.sampled_from(["zero", "sin_pi_t", "sin_2pi_t"]), st.floats(0, 1))
    def test_terms_sum_to_state(self, seed, kind, t):
        op, es, r = random_system(seed)
        u0 = r.normal(size=es.size)
        src = HeatSource(kind)
        mean, forcing, transient = equilibrium_decomposition(es, u0, src, t)
        exact = integrate_spectral_oracle(op, u0, src, [0.0, t] if t > 0 else [0.0]).states[-1]
        np.testing.assert_allclose(mean + forcing + transient, exact, atol=1e-9)

    def test_transient_vanishes(self):
        _, es, r = random_system(4, J=16)
        t = 31 / -es.lambdas[-2]
        _, _, transient = equilibrium_decomposition(es, r.normal(size=16), HeatSource("sin_pi_t"), t)
        assert np.abs(transient).max() < 1e-12

    def test_initial_transient(self):
        _, es, r = random_system(5, J=16)
        u0 = r.normal(size=16)
        mean, forcing, transient = equilibrium_decomposition(es, u0, HeatSource("zero"), 0.0)
        np.testing.assert_allclose(transient, u0 - u0.mean(), atol=1e-13)
        assert np.all(forcing == 0)
        np.testing.assert_allclose(mean, u0.mean())


class TestReport:
    def test_rows(self):
        _, es, _ = random_system(6, J=12)
        rows = sensitivity_report(es)
        assert len(rows) == 12
        assert rows[0]["null_mode"] == 1 and rows[0]["lambda_k"] == 0.0
        assert sum(r["null_mode"] for r in rows) == 1
        assert [r["k"] for r in rows[1:]] == list(range(11, 0, -1))

    def test_truncation(self, tmp_path):
        _, es, _ = random_system(6, J=12)
        rows = sensitivity_report(es, modes=5)
        assert sum(1 for r in rows if not r["null_mode"]) == 5
        write_report(rows, tmp_path / "s.csv")
        with open(tmp_path / "s.csv") as fh:
            back = list(csv.DictReader(fh))
        assert tuple(back[0]) == REPORT_FIELDS
        assert float(back[1]["t_star"]) == pytest.approx(-1 / float(back[1]["lambda_k"]))
