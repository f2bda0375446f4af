import numpy as np
import pytest

from conftest import random_spd
from masscale import analysis, integrator, scaling
from masscale.errors import SolveFailure
from masscale.linalg import LowRankUpdate, MatrixPair, generalized_eigvalues
from masscale.integrator import MassSolver, central_difference_run, stability_bracket


class TestMassSolver:
    def test_diagonal_mode(self):
        solver = MassSolver(np.array([2.0, 4.0]))
        assert solver.mode == "diagonal"
        assert np.allclose(solver.solve(np.array([2.0, 4.0])), [1.0, 1.0])
        assert np.allclose(solver.dot(np.array([1.0, 1.0])), [2.0, 4.0])

    def test_dense_diagonal_is_detected(self):
        solver = MassSolver(np.diag([3.0, 5.0]))
        assert solver.mode == "diagonal"

    def test_dense_mode(self):
        rng = np.random.default_rng(2)
        m = random_spd(6, rng)
        solver = MassSolver(m)
        assert solver.mode == "dense"
        rhs = rng.standard_normal(6)
        assert np.allclose(solver.solve(rhs), np.linalg.solve(m, rhs))
        x = rng.standard_normal(6)
        assert np.allclose(solver.dot(x), m @ x)

    def test_woodbury_mode(self):
        rng = np.random.default_rng(3)
        d = rng.uniform(1.0, 2.0, 8)
        v = rng.standard_normal((8, 2))
        s = np.array([0.5, 1.5])
        upd = LowRankUpdate(d, v, s)
        solver = MassSolver(upd)
        assert solver.mode == "woodbury"
        dense = upd.dense()
        rhs = rng.standard_normal(8)
        assert np.allclose(solver.solve(rhs), np.linalg.solve(dense, rhs))
        assert np.allclose(solver.dot(rhs), dense @ rhs)

    def test_rejects_indefinite(self):
        with pytest.raises(SolveFailure):
            MassSolver(np.array([1.0, -1.0]))


class TestCentralDifference:
    def test_single_oscillator_phase(self):
        # m = 1, k = 4: omega = 2; the discrete frequency matches to O(dt^2)
        k = np.array([[4.0]])
        m = np.array([1.0])
        dt = 1e-3
        steps = int(round(2 * np.pi / 2.0 / dt))  # one period
        res = central_difference_run(k, m, np.array([1.0]), np.array([0.0]), dt, steps)
        assert not res.diverged
        assert res.final.displacement[0] == pytest.approx(1.0, abs=1e-4)

    def test_energy_conservation(self):
        rng = np.random.default_rng(4)
        k = random_spd(10, rng)
        m = rng.uniform(1.0, 2.0, 10)
        lam = generalized_eigvalues(MatrixPair(k, np.diag(m)))
        dt = 0.1 * analysis.critical_dt(lam[-1])
        u0 = rng.standard_normal(10)
        res = central_difference_run(k, m, u0, np.zeros(10), dt, 2000)
        assert not res.diverged
        e = res.energies
        assert np.abs(e - e[0]).max() <= 0.05 * abs(e[0])

    def test_static_equilibrium(self):
        k = np.diag([2.0, 3.0])
        m = np.array([1.0, 1.0])
        f = np.array([4.0, 9.0])
        u_star = f / np.diag(k)
        res = central_difference_run(k, m, u_star, np.zeros(2), 0.01, 100, force=f)
        assert np.allclose(res.final.displacement, u_star, rtol=1e-10)

    def test_stop_growth_aborts(self):
        k = np.array([[4.0]])
        m = np.array([1.0])
        dt = 1.5 * analysis.critical_dt(4.0)
        res = central_difference_run(
            k, m, np.array([1.0]), np.array([0.0]), dt, 10_000, stop_growth=1e6
        )
        assert res.diverged
        assert res.final.step < 10_000

    def test_trace_csv(self, tmp_path):
        k = np.array([[4.0]])
        m = np.array([1.0])
        path = tmp_path / "trace.csv"
        central_difference_run(
            k, m, np.array([1.0]), np.array([0.0]), 0.01, 10, trace_path=path
        )
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "time,energy,norm"
        assert len(lines) == 12


class TestStabilityBracket:
    def test_oscillator_brackets_critical_step(self):
        k = np.array([[4.0]])
        m = np.array([1.0])
        dt_c = analysis.critical_dt(4.0)
        below, above = stability_bracket(k, m, dt_c)
        assert below.classification == "stable"
        assert above.classification == "unstable"
        assert below.dt == pytest.approx(0.99 * dt_c)
        assert above.dt == pytest.approx(1.05 * dt_c)

    def test_small_random_system(self):
        rng = np.random.default_rng(7)
        k = random_spd(12, rng)
        m = rng.uniform(0.5, 1.5, 12)
        lam = generalized_eigvalues(MatrixPair(k, np.diag(m)))
        dt_c = analysis.critical_dt(lam[-1])
        below, above = stability_bracket(k, m, dt_c)
        assert below.classification == "stable"
        assert above.classification == "unstable"

    def test_woodbury_mass_path(self, small_system):
        # globally deflated plate-like system runs entirely through
        # Woodbury solves yet brackets its own critical step
        mesh, blocks, pair = small_system
        scaled = scaling.global_deflation(pair, 8, mode="shave")
        lam_bar = generalized_eigvalues(
            MatrixPair(scaled.kbar, scaled.mbar.dense())
        )
        dt_c = analysis.critical_dt(lam_bar[-1])
        below, above = stability_bracket(
            scaled.kbar, scaled.mbar, dt_c, steps=2000
        )
        assert below.classification == "stable"
        assert above.classification == "unstable"

    def test_growth_factor_reported(self):
        k = np.array([[4.0]])
        m = np.array([1.0])
        below, above = stability_bracket(k, m, analysis.critical_dt(4.0))
        assert below.growth_factor <= integrator.STABLE_FACTOR
        assert above.growth_factor >= integrator.UNSTABLE_FACTOR or above.growth_factor == float("inf")
