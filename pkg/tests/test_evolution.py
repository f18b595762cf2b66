"""Tests for the trajectory solvers.

Oracle strategy: the homogeneous fractional problem has the closed form
u_n(t) = E_{alpha,1}(-lambda_n t^alpha) u0_n per mode, so the linear
solver is pinned against the Mittag-Leffler dispatcher.  The constant
forcing identity u_n = (c_n / lambda_n)(1 - s(t, lambda_n)) is exact in
the discrete algebra, not just asymptotically.  The semilinear solver is
checked against the linear one (zero map), against the global bound
||u|| <= ||u0|| + ||f(0)||/(lambda_1 - kappa), and by an independent
product-integration residual on the user mesh.
"""

import math

import numpy as np
import pytest

from nlevo.errors import SolverError, UsageError
from nlevo import evolution as ev
from nlevo import kernels as kn
from nlevo import nonlinear as nl
from nlevo import special as spc
from nlevo import spectral as sp
from nlevo import volterra as vt


def heat_problem(alpha=0.5, modes=4, steps=256, horizon=1.0, grading=vt.UNIFORM, forcing=None, u0=None):
    op = sp.dirichlet_laplacian_1d(1.0, 1.0, modes)
    if u0 is None:
        u0 = sp.StateVector(1.0 / np.arange(1, modes + 1))
    mesh = vt.make_mesh(horizon, steps, grading)
    return ev.EvolutionProblem(
        op=op, pair=kn.fractional(alpha), u0=u0, mesh=mesh, forcing=forcing
    )


def zero_map(modes):
    return nl.make_global_lipschitz(0.0, sp.StateVector(np.zeros(modes)))


class TestSolveLinear:
    def test_initial_node_exact(self):
        prob = heat_problem(steps=16)
        traj = ev.solve_linear(prob)
        np.testing.assert_array_equal(traj.states[0], prob.u0.coeffs)
        assert np.all(traj.picard_iters == 0)

    def test_single_mode_mittag_leffler(self):
        lam = math.pi**2
        prob = heat_problem(modes=1, steps=512, u0=sp.StateVector([1.0]))
        traj = ev.solve_linear(prob)
        t = prob.mesh.nodes
        ref = spc.mittag_leffler_neg_grid(spc.MLParams(0.5, 1.0), lam * np.sqrt(t))
        sel = t >= 0.01
        rel = np.abs(traj.norms()[sel] - ref[sel]) / ref[sel]
        assert np.max(rel) < 2e-3

    def test_constant_forcing_identity(self):
        modes = 3
        c = np.array([2.0, -1.0, 0.5])
        prob = heat_problem(
            modes=modes,
            steps=128,
            u0=sp.StateVector(np.zeros(modes)),
            forcing=np.tile(c, (129, 1)),
        )
        traj = ev.solve_linear(prob)
        lam = prob.op.eigenvalues
        for n in range(modes):
            s = vt.solve_s(prob.pair, prob.mesh, lam[n]).values
            want = (c[n] / lam[n]) * (1.0 - s)
            np.testing.assert_allclose(traj.states[:, n], want, rtol=0, atol=1e-13)

    def test_callable_matches_array_forcing(self):
        modes = 2
        g = lambda t: np.array([math.sin(t), math.cos(t)])
        prob_c = heat_problem(modes=modes, steps=64, forcing=g)
        rows = np.array([g(t) for t in prob_c.mesh.nodes])
        prob_a = heat_problem(modes=modes, steps=64, forcing=rows)
        np.testing.assert_array_equal(
            ev.solve_linear(prob_c).states, ev.solve_linear(prob_a).states
        )

    def test_mode_parallelism_paths_agree(self):
        prob = heat_problem(modes=3, steps=64)
        a = ev.solve_linear(prob, ev.SolverConfig(mode_parallelism=True))
        b = ev.solve_linear(prob, ev.SolverConfig(mode_parallelism=False))
        np.testing.assert_allclose(a.states, b.states, rtol=0, atol=1e-14)

    def test_rejects_nonlinearity(self):
        prob = heat_problem(modes=2, steps=16, forcing=zero_map(2))
        with pytest.raises(UsageError):
            ev.solve_linear(prob)


class TestSolveSemilinear:
    def test_zero_map_matches_linear(self):
        lin = ev.solve_linear(heat_problem(modes=3, steps=64))
        semi = ev.solve_semilinear(heat_problem(modes=3, steps=64, forcing=zero_map(3)))
        np.testing.assert_allclose(semi.states, lin.states, rtol=0, atol=1e-15)

    def test_zero_data_zero_map_short_circuits(self):
        prob = heat_problem(
            modes=3, steps=32, u0=sp.StateVector(np.zeros(3)), forcing=zero_map(3)
        )
        traj = ev.solve_semilinear(prob)
        assert np.all(traj.states == 0.0)
        assert np.all(traj.picard_iters == 0)

    def test_global_bound(self):
        # ||u(t)|| <= ||u0|| + ||f(0)||/(lambda_1 - kappa) for kappa < lambda_1
        modes = 2
        kappa = 3.0
        offset = sp.StateVector([1.0, -0.5])
        f = nl.make_global_lipschitz(kappa, offset)
        prob = heat_problem(modes=modes, steps=128, forcing=f)
        traj = ev.solve_semilinear(prob)
        lam1 = prob.op.eigenvalues[0]
        bound = prob.u0.norm + f.f_zero_norm / (lam1 - kappa)
        assert np.max(traj.norms()) <= bound * (1.0 + 1e-10)

    def test_two_solution_contraction(self):
        modes = 2
        f = nl.make_global_lipschitz(0.5 * math.pi**2, sp.StateVector(np.zeros(modes)))
        eps = np.array([3e-3, -4e-3])
        prob_a = heat_problem(modes=modes, steps=192, forcing=f)
        u0b = sp.StateVector(prob_a.u0.coeffs + eps)
        prob_b = heat_problem(modes=modes, steps=192, forcing=f, u0=u0b)
        ua = ev.solve_semilinear(prob_a)
        ub = ev.solve_semilinear(prob_b)
        gap = np.linalg.norm(ua.states - ub.states, axis=1)
        rate = prob_a.op.eigenvalues[0] - 0.5 * math.pi**2
        envelope = vt.solve_s(prob_a.pair, prob_a.mesh, rate).values * np.linalg.norm(eps)
        assert np.all(gap <= envelope * (1.0 + 1e-2))

    def test_diagnostics_recorded(self):
        f = nl.make_global_lipschitz(1.0, sp.StateVector([0.3, 0.0]))
        traj = ev.solve_semilinear(heat_problem(modes=2, steps=48, forcing=f))
        assert np.all(traj.picard_iters[1:] >= 1)
        assert np.all(traj.picard_iters <= 50)
        assert np.all(traj.picard_residuals[1:] <= 1e-10)
        assert traj.picard_iters[0] == 0

    def test_mode_truncation_stability(self):
        # componentwise map: modes beyond the data's support stay zero
        f8 = nl.make_global_lipschitz(2.0, sp.StateVector(np.zeros(8)))
        f16 = nl.make_global_lipschitz(2.0, sp.StateVector(np.zeros(16)))
        u8 = np.zeros(8)
        u8[:4] = [0.5, -0.25, 0.125, 0.0625]
        u16 = np.zeros(16)
        u16[:8] = u8
        a = ev.solve_semilinear(
            heat_problem(modes=8, steps=96, u0=sp.StateVector(u8), forcing=f8)
        )
        b = ev.solve_semilinear(
            heat_problem(modes=16, steps=96, u0=sp.StateVector(u16), forcing=f16)
        )
        na = np.linalg.norm(a.states[-1])
        nb = np.linalg.norm(b.states[-1])
        assert abs(na - nb) <= 1e-10

    def test_refinement_first_order_or_better(self):
        f = nl.make_global_lipschitz(2.0, sp.StateVector([0.5, -0.2]))
        finals = {}
        for steps in (64, 128, 256):
            traj = ev.solve_semilinear(heat_problem(modes=2, steps=steps, forcing=f))
            finals[steps] = np.linalg.norm(traj.states[-1])
        e_coarse = abs(finals[64] - finals[256])
        e_mid = abs(finals[128] - finals[256])
        assert e_coarse >= 2.0 * e_mid or e_coarse < 1e-12

    def test_nonconvergence_reported(self):
        f = nl.make_global_lipschitz(5e4, sp.StateVector([1.0]))
        prob = heat_problem(modes=1, steps=4, horizon=4.0, forcing=f)
        with pytest.raises(SolverError, match="t="):
            ev.solve_semilinear(prob, ev.SolverConfig(picard_max_iters=8))

    def test_rejects_fixed_forcing(self):
        prob = heat_problem(modes=2, steps=16)
        with pytest.raises(UsageError):
            ev.solve_semilinear(prob)


class TestResidualCheck:
    def test_linear_trajectory_passes_on_graded_mesh(self):
        prob = heat_problem(modes=4, steps=512, grading=vt.Grading(3.0))
        traj = ev.solve_linear(prob)
        rep = ev.residual_check(traj, prob, tol=5e-3)
        assert rep.passed, rep

    def test_semilinear_trajectory_passes(self):
        f = nl.make_global_lipschitz(2.0, sp.StateVector([0.3, -0.1]))
        prob = heat_problem(modes=2, steps=256, grading=vt.Grading(3.0), forcing=f)
        traj = ev.solve_semilinear(prob)
        rep = ev.residual_check(traj, prob, tol=5e-3)
        assert rep.passed, rep

    def test_zero_trajectory_residual_zero(self):
        prob = heat_problem(modes=2, steps=32, u0=sp.StateVector(np.zeros(2)))
        traj = ev.solve_linear(prob)
        rep = ev.residual_check(traj, prob, tol=1e-12)
        assert rep.max_residual == 0.0
        assert rep.passed

    def test_corrupted_state_fails(self):
        # the graded mesh keeps the scheme's own residual near roundoff, so
        # the injected bump is the only signal and must be located exactly
        prob = heat_problem(modes=2, steps=64, grading=vt.Grading(3.0))
        traj = ev.solve_linear(prob)
        bad = traj.states.copy()
        bad[40, 0] += 0.1
        corrupted = ev.Trajectory(
            mesh=traj.mesh,
            states=bad,
            picard_iters=traj.picard_iters,
            picard_residuals=traj.picard_residuals,
        )
        rep = ev.residual_check(corrupted, prob, tol=5e-3)
        assert not rep.passed
        assert rep.worst_mode == 1
        assert rep.worst_time == pytest.approx(traj.mesh.nodes[40])
        assert rep.max_residual >= 0.1

    def test_rejects_mesh_mismatch(self):
        prob = heat_problem(modes=2, steps=32)
        other = heat_problem(modes=2, steps=64)
        traj = ev.solve_linear(other)
        with pytest.raises(UsageError):
            ev.residual_check(traj, prob, tol=1e-3)
        with pytest.raises(UsageError):
            ev.residual_check(ev.solve_linear(prob), prob, tol=0.0)


class TestTrajectoryPlumbing:
    def test_csv_shape_and_mode_cap(self, tmp_path):
        modes = 10
        prob = heat_problem(modes=modes, steps=8, u0=sp.StateVector(np.ones(modes)))
        traj = ev.solve_linear(prob)
        path = tmp_path / "trajectory.csv"
        ev.write_trajectory_csv(traj, prob.op, path)
        lines = path.read_text().splitlines()
        header = lines[0].split(",")
        assert header == ["t", "norm", "norm_half"] + [f"u_{j}" for j in range(1, 9)]
        assert len(lines) == 10
        first = [float(x) for x in lines[1].split(",")]
        assert first[0] == 0.0
        assert first[1] == pytest.approx(math.sqrt(modes))
        lam = prob.op.eigenvalues
        assert first[2] == pytest.approx(math.sqrt(lam.sum()), rel=1e-12)

    def test_state_accessor_and_norms(self):
        prob = heat_problem(modes=3, steps=8)
        traj = ev.solve_linear(prob)
        v = traj.state(0)
        assert isinstance(v, sp.StateVector)
        np.testing.assert_array_equal(v.coeffs, prob.u0.coeffs)
        np.testing.assert_allclose(
            traj.norms(), np.linalg.norm(traj.states, axis=1), rtol=1e-15
        )

    def test_problem_validation(self):
        op = sp.dirichlet_laplacian_1d(1.0, 1.0, 2)
        mesh = vt.make_mesh(1.0, 8)
        pair = kn.fractional(0.5)
        with pytest.raises(UsageError):
            ev.EvolutionProblem(op=op, pair=pair, u0=sp.StateVector([1.0]), mesh=mesh)
        with pytest.raises(UsageError):
            ev.EvolutionProblem(
                op=op,
                pair=pair,
                u0=sp.StateVector([1.0, 0.0]),
                mesh=mesh,
                forcing=np.zeros((5, 2)),
            )
        with pytest.raises(UsageError):
            ev.SolverConfig(picard_tol=0.0)
        with pytest.raises(UsageError):
            ev.SolverConfig(picard_max_iters=0)
