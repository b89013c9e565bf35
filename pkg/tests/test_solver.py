import numpy as np
import pytest

from hampath.action import Cauchy, Connecting, ProblemSpec, SemiConvex
from hampath.conditions import GrowthCert
from hampath.convex import Hamiltonian, Quadratic, squared_norm
from hampath.grid import PathGrid, interval_data
from hampath.solver import (
    ResonanceError,
    SolveParams,
    SolveStatus,
    gradient_action,
    lbfgs,
    solve,
    solve_linear_bvp,
)

from conftest import (
    harmonic_cauchy_spec,
    harmonic_hamiltonian,
    p1_connecting_spec,
    scaled_hamiltonian,
)
from oracles import resample, rk4, shooting_connecting


class TestLbfgs:
    def test_quadratic_bowl(self):
        A = np.diag([1.0, 10.0, 100.0])

        def fg(x):
            return 0.5 * x @ A @ x, A @ x

        x, f, g, it, reason = lbfgs(fg, np.array([1.0, 1.0, 1.0]), ftarget=1e-14)
        assert f <= 1e-14

    def test_already_stationary(self):
        def fg(x):
            return float(x @ x), 2 * x

        x, f, g, it, reason = lbfgs(fg, np.zeros(3))
        assert it == 0 and reason == "gtol"


class TestHarmonicCauchy:
    def test_reproduces_closed_form(self):
        res = solve(harmonic_cauchy_spec(), SolveParams(M=200, tol_zero=1e-6))
        assert res.status is SolveStatus.CONVERGED
        assert res.certificate.action_value <= 1e-6
        t = res.path.times
        err = max(np.abs(res.path.p_nodes[:, 0] - np.cos(t)).max(),
                  np.abs(res.path.q_nodes[:, 0] + np.sin(t)).max())
        assert err <= 1e-3
        assert res.certificate.energy_drift <= 1e-4 * 1.5

    def test_matches_rk4_oracle(self):
        res = solve(harmonic_cauchy_spec(), SolveParams(M=200, tol_zero=1e-6))
        fine = rk4(lambda t, y: np.array([y[1], -y[0]]), [1.0, 0.0], 1.0, 4000)
        tf = np.linspace(0, 1, 4001)
        p_or = resample(tf, fine[:, 0], res.path.times)
        q_or = resample(tf, fine[:, 1], res.path.times)
        err = max(np.abs(res.path.p_nodes[:, 0] - p_or).max(),
                  np.abs(res.path.q_nodes[:, 0] - q_or).max())
        assert err <= 1e-3

    def test_seed_insensitive(self):
        a = solve(harmonic_cauchy_spec(), SolveParams(M=100, tol_zero=1e-6, seed=0))
        b = solve(harmonic_cauchy_spec(), SolveParams(M=100, tol_zero=1e-6, seed=99))
        d = max(np.abs(a.path.p_nodes - b.path.p_nodes).max(),
                np.abs(a.path.q_nodes - b.path.q_nodes).max())
        assert d <= 10 * 1e-6

    def test_stage_history_monotone(self):
        res = solve(harmonic_cauchy_spec(), SolveParams(M=100, tol_zero=1e-6))
        acts = [st.action_true for st in res.stage_history]
        assert all(b <= a + 1e-12 for a, b in zip(acts, acts[1:]))


class TestConnecting:
    def test_trivial_zero_path(self):
        spec = ProblemSpec(scaled_hamiltonian(0.1), 0.2,
                           Connecting(squared_norm(1, 0.5), squared_norm(1, 0.5), 1),
                           GrowthCert(0.01, 0.1, 0.01))
        res = solve(spec, SolveParams(M=100, tol_zero=1e-9))
        assert res.status is SolveStatus.CONVERGED
        assert res.certificate.action_value <= 1e-9
        assert np.abs(res.path.p_nodes).max() <= 1e-9

    def test_p1_matches_shooting_oracle(self):
        spec = p1_connecting_spec()
        res = solve(spec, SolveParams(M=400, tol_zero=1e-6))
        assert res.status is SolveStatus.CONVERGED
        assert res.certificate.passed
        tf, p_or, q_or = shooting_connecting(
            lambda p, q: (0.1 * p, 0.1 * q),
            lambda a: a - 1.0,
            lambda b: b,
            0.2)
        err = max(np.abs(res.path.p_nodes[:, 0] - resample(tf, p_or, res.path.times)).max(),
                  np.abs(res.path.q_nodes[:, 0] - resample(tf, q_or, res.path.times)).max())
        assert err <= 1e-3

    def test_hypothesis_failure_blocks(self):
        spec = ProblemSpec(scaled_hamiltonian(0.3), 1.0,
                           Connecting(squared_norm(1, 3.0), squared_norm(1, 3.0), 1),
                           GrowthCert(0.01, 0.3, 0.01))
        res = solve(spec, SolveParams(M=50))
        assert res.status is SolveStatus.HYPOTHESIS_FAILED

    def test_proceed_on_failure(self):
        spec = ProblemSpec(scaled_hamiltonian(0.3), 1.0,
                           Connecting(squared_norm(1, 3.0), squared_norm(1, 3.0), 1),
                           GrowthCert(0.01, 0.3, 0.01))
        res = solve(spec, SolveParams(M=50), proceed_on_check_failure=True)
        assert res.status is SolveStatus.CONVERGED

    def test_stall_reported(self):
        spec = p1_connecting_spec()
        res = solve(spec, SolveParams(M=400, tol_zero=1e-12, max_iters=2,
                                      eps_schedule=(0.1,)))
        assert res.status is SolveStatus.STALLED
        assert res.certificate.action_value > 1e-12


class TestNoncoerciveHamiltonian:
    def test_momentum_only_closed_form(self):
        # H = |p|^2/2 ignores q: flow is p constant, q(t) = q0 - p0 t; the
        # true conjugate is infinite so certification stays at the last stage
        fn = Quadratic(np.diag([1.0, 0.0]))
        spec = ProblemSpec(Hamiltonian(fn, 1), 1.0, Cauchy([1.0], [0.5]), None)
        res = solve(spec, SolveParams(M=100, eps_schedule=(1e-1, 1e-2, 1e-3, 1e-4),
                                      tol_zero=1e-6))
        assert res.certified_hamiltonian == "final_stage"
        assert res.certificate_true is None
        assert res.status is SolveStatus.CONVERGED
        t = res.path.times
        assert np.abs(res.path.p_nodes[:, 0] - 1.0).max() <= 2e-3
        assert np.abs(res.path.q_nodes[:, 0] - (0.5 - t)).max() <= 2e-3


class TestGridBackedHamiltonian:
    def test_requires_both_schedules(self):
        from hampath.convex import GridSampled
        from hampath.legendre import GridFn

        x = np.linspace(-4, 4, 41)
        X1, X2 = np.meshgrid(x, x, indexing="ij")
        H = Hamiltonian(GridSampled(GridFn([-4, -4], [4, 4],
                                           0.5 * (X1**2 + X2**2))), 1)
        spec = ProblemSpec(H, 0.5, Cauchy([0.5], [0.0]), None)
        with pytest.raises(ValueError, match="nonsmooth"):
            solve(spec, SolveParams(M=10, eps_schedule=(0.1,), lambda_schedule=()))

    def test_smoke_solve_decreases(self):
        from hampath.action import action_for
        from hampath.convex import GridSampled
        from hampath.legendre import GridFn
        from hampath.regularize import EpsPerturbed, InfConvolved

        x = np.linspace(-4, 4, 41)
        X1, X2 = np.meshgrid(x, x, indexing="ij")
        H = Hamiltonian(GridSampled(GridFn([-4, -4], [4, 4],
                                           0.5 * (X1**2 + X2**2))), 1)
        spec = ProblemSpec(H, 0.5, Cauchy([0.5], [0.0]), None)
        params = SolveParams(M=10, eps_schedule=(0.05,), lambda_schedule=(0.3,),
                             max_iters=15, tol_zero=1e-6, polish=False)
        res = solve(spec, params)
        stage_H = InfConvolved(EpsPerturbed(spec.hamiltonian, 0.05), 0.3, 4.0)
        start = action_for(spec, PathGrid.constant(0.5, [0.5], [0.0], 10),
                           H=stage_H).total
        assert res.stage_history[-1].objective < start


class TestMixedHamiltonianSolve:
    def test_cauchy_matches_rk4(self):
        # H = (p^2+q^2)/4 + (p^4+q^4)/10: smooth pair through the exact
        # scalar-inverse conjugate, so the polish stage runs on the true H
        from conftest import mixed_hamiltonian

        spec = ProblemSpec(mixed_hamiltonian(), 1.0, Cauchy([1.0], [0.0]),
                           GrowthCert(0.01, 0.6, 0.01, r=4.0))
        res = solve(spec, SolveParams(M=150, tol_zero=1e-6))
        assert res.status is SolveStatus.CONVERGED
        assert res.certified_hamiltonian == "true"

        def rhs(t, y):
            p, q = y
            return np.array([0.5 * q + 0.4 * q**3, -(0.5 * p + 0.4 * p**3)])

        fine = rk4(rhs, [1.0, 0.0], 1.0, 3000)
        tf = np.linspace(0, 1, 3001)
        err = max(
            np.abs(res.path.p_nodes[:, 0] - resample(tf, fine[:, 0], res.path.times)).max(),
            np.abs(res.path.q_nodes[:, 0] - resample(tf, fine[:, 1], res.path.times)).max())
        assert err <= 2e-3


class TestCoupledCauchySolve:
    def test_two_dof_matches_rk4(self):
        from conftest import coupled_hamiltonian

        H = coupled_hamiltonian()
        A = H.fn.A
        p0 = np.array([1.0, -0.5])
        q0 = np.array([0.2, 0.4])
        spec = ProblemSpec(H, 1.0, Cauchy(p0, q0), GrowthCert(0.01, 0.7, 0.01, r=2.0))
        res = solve(spec, SolveParams(M=150, tol_zero=1e-6))
        assert res.status is SolveStatus.CONVERGED

        def rhs(t, y):
            g = A @ y
            return np.concatenate([g[2:], -g[:2]])

        fine = rk4(rhs, np.concatenate([p0, q0]), 1.0, 3000)
        tf = np.linspace(0, 1, 3001)
        err = 0.0
        for j in range(2):
            err = max(err, np.abs(res.path.p_nodes[:, j]
                                  - resample(tf, fine[:, j], res.path.times)).max())
            err = max(err, np.abs(res.path.q_nodes[:, j]
                                  - resample(tf, fine[:, 2 + j], res.path.times)).max())
        assert err <= 2e-3


class TestSemiConvexSolve:
    def test_feedback_limit_enforced_without_cert(self):
        spec = ProblemSpec(scaled_hamiltonian(0.05), 1.0,
                           SemiConvex(squared_norm(1, 3.0), squared_norm(1, 0.5),
                                      -0.6, -0.1), None)
        with pytest.raises(ValueError, match="solvability limit"):
            solve(spec, SolveParams(M=50))

    def test_converges_with_certificate(self):
        spec = ProblemSpec(scaled_hamiltonian(0.05), 1.0,
                           SemiConvex(squared_norm(1, 3.0, [0.5]), squared_norm(1, 0.5),
                                      -0.1, -0.1),
                           GrowthCert(0.01, 0.05, 0.01))
        res = solve(spec, SolveParams(M=200, tol_zero=1e-6))
        assert res.status is SolveStatus.CONVERGED
        assert res.certificate.action_value <= 1e-6
        assert res.checks is not None and res.checks.passed


class TestGradientAction:
    def test_zero_at_trivial_stationary_point(self):
        spec = ProblemSpec(scaled_hamiltonian(0.1), 0.2,
                           Connecting(squared_norm(1, 0.5), squared_norm(1, 0.5), 1), None)
        g = gradient_action(spec, PathGrid.zeros(0.2, 1, 30))
        assert np.abs(g.p_nodes).max() <= 1e-12
        assert np.abs(g.q_nodes).max() <= 1e-12

    def test_small_at_converged_minimum(self):
        spec = harmonic_cauchy_spec()
        res = solve(spec, SolveParams(M=100, tol_zero=1e-8))
        g = gradient_action(spec, res.path)
        assert max(np.abs(g.p_nodes[1:]).max(), np.abs(g.q_nodes[1:]).max()) <= 1e-3

    def test_finite_difference_with_smoothing(self, rng):
        from hampath.grid import random_path

        spec = harmonic_cauchy_spec()
        g = random_path(rng, 1.0, 1, 6)
        p = g.p_nodes.copy()
        q = g.q_nodes.copy()
        p[0], q[0] = 1.0, 0.0
        g = PathGrid(1.0, p, q)
        grad = gradient_action(spec, g, eps=0.05, lam=0.3, r=4.0)
        from hampath.action import action_for
        from hampath.regularize import EpsPerturbed, InfConvolved

        H = InfConvolved(EpsPerturbed(spec.hamiltonian, 0.05), 0.3, 4.0)
        hfd = 1e-6
        for k, j in ((2, 0), (5, 0)):
            p = g.p_nodes.copy()
            p[k, j] += hfd
            fp = action_for(spec, PathGrid(1.0, p, g.q_nodes), H=H).total
            p[k, j] -= 2 * hfd
            fm = action_for(spec, PathGrid(1.0, p, g.q_nodes), H=H).total
            num = (fp - fm) / (2 * hfd)
            assert grad.p_nodes[k, j] == pytest.approx(num, rel=2e-4, abs=2e-5)


class TestLinearBvp:
    def test_decoupled_ramp(self):
        M = 100
        f = np.ones((M + 1, 1))
        g = np.zeros((M + 1, 1))
        sol = solve_linear_bvp(0.0, 0.0, f, g, [0.0], [3.0], 1.0, M)
        assert np.abs(sol.p_nodes[:, 0] - sol.times).max() <= 1e-12
        assert np.abs(sol.q_nodes - 3.0).max() <= 1e-12

    def test_backward_ramp(self):
        M = 100
        sol = solve_linear_bvp(0.0, 0.0, np.zeros((M + 1, 1)), np.ones((M + 1, 1)),
                               [2.0], [0.0], 1.0, M)
        assert np.abs(sol.p_nodes - 2.0).max() <= 1e-12
        assert np.abs(sol.q_nodes[:, 0] - (1.0 - sol.times)).max() <= 1e-12

    def test_random_forcing_matches_rk4_oracle(self, rng):
        M, T, d1, d2 = 200, 1.0, -0.3, -0.3
        t = np.linspace(0, T, M + 1)
        f = np.column_stack([np.sin(2 * t) + 0.3, np.cos(t)])
        g = np.column_stack([0.5 * t, np.sin(t) * 0.2])
        x = np.array([0.5, -0.2])
        y = np.array([0.1, 0.4])
        sol = solve_linear_bvp(d1, d2, f, g, x, y, T, M)
        assert np.allclose(sol.p_nodes[0], x)
        assert np.abs(sol.q_nodes[-1] - y).max() <= 1e-12

        def forcing(tq, nodes):
            return np.array([np.interp(tq, t, nodes[:, j]) for j in range(2)])

        def rhs(tq, z):
            r, s = z[:2], z[2:]
            return np.concatenate([d2 * s + forcing(tq, f), -d1 * r - forcing(tq, g)])

        fine = rk4(rhs, np.concatenate([x, sol.q_nodes[0]]), T, M)
        assert np.abs(fine[:, :2] - sol.p_nodes).max() <= 1e-8
        assert np.abs(fine[:, 2:] - sol.q_nodes).max() <= 1e-8

    def test_resonance_detected(self):
        M = 50
        z = np.zeros((M + 1, 1))
        with pytest.raises(ResonanceError):
            solve_linear_bvp(0.6, 0.6, z, z, [0.0], [0.0], 1.0, M)


class TestInfConvSolutionStructure:
    def test_inclusion_passes_through_prox_points(self):
        # at a solved smoothing stage the slope pair equals the gradient of
        # the base Hamiltonian evaluated at the attaining points
        from hampath.regularize import infconv, prox_points

        spec = harmonic_cauchy_spec()
        lam = 0.3
        res = solve(spec, SolveParams(M=80, eps_schedule=(), lambda_schedule=(lam,),
                                      tol_zero=1e-6, polish=False))
        assert res.status is SolveStatus.CONVERGED
        Hl = infconv(spec.hamiltonian, lam, 4.0)
        iv = interval_data(res.path)
        worst = 0.0
        for k in range(iv.pbar.shape[0]):
            ip, jq = prox_points(Hl, iv.pbar[k], iv.qbar[k])
            grad = spec.hamiltonian.grad(np.concatenate([ip, jq]))
            y = np.concatenate([-iv.dq[k], iv.dp[k]])
            worst = max(worst, float(np.max(np.abs(y - grad))))
        assert worst <= 1e-4

    def test_smoothed_energy_conserved(self):
        from hampath.regularize import infconv

        spec = harmonic_cauchy_spec()
        lam = 0.3
        res = solve(spec, SolveParams(M=80, eps_schedule=(), lambda_schedule=(lam,),
                                      tol_zero=1e-6, polish=False))
        Hl = infconv(spec.hamiltonian, lam, 4.0)
        nodes = np.concatenate([res.path.p_nodes, res.path.q_nodes], axis=1)
        vals = Hl.value(nodes)
        assert vals.max() - vals.min() <= 1e-3 * (1.0 + abs(vals[0]))


class TestSlopeBound:
    def test_derivatives_stay_bounded_down_the_lambda_schedule(self):
        spec = harmonic_cauchy_spec()
        bounds = []
        for lam in (0.4, 0.2, 0.1):
            res = solve(spec, SolveParams(M=100, eps_schedule=(), lambda_schedule=(lam,),
                                          tol_zero=1e-6, polish=False))
            iv = interval_data(res.path)
            bounds.append(float(np.max(np.linalg.norm(iv.dp, axis=1)
                                       + np.linalg.norm(iv.dq, axis=1))))
        assert all(b <= 2.0 * bounds[0] for b in bounds)
