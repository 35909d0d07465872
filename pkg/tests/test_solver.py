import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from hypothesis import given, settings
from hypothesis import strategies as st

from svamerican import (ConfigurationError, DegenerateBoundaryUnsupported, PenaltyParams,
                        SVModel, SolveConfig, StepFailure, Surface, assemble, build_grid,
                        heston_model, monotonicity_report, pi_smooth, psor_solve, solve, step)
from svamerican.solver import complementarity_residual, psor_lcp, system_matrix

from conftest import REF


def _interior(stencil, arr):
    return arr.ravel()[stencil.interior]


class TestAssemble:
    def test_constant_maps_to_minus_r(self, ref_model, small_grid):
        st_ = assemble(small_grid, ref_model, 1e-3)
        out = _interior(st_, st_.apply(np.ones(small_grid.shape)))
        np.testing.assert_allclose(out, -ref_model.r, atol=1e-11)

    def test_discounted_stock_is_a_martingale(self, ref_model, small_grid):
        # L e^s = [1/2(sig^2+eps) + (r - 1/2 sig^2 - 1/2 eps) - r] e^s = 0
        st_ = assemble(small_grid, ref_model, 1e-3)
        es = np.exp(small_grid.s_nodes)[:, None] * np.ones(small_grid.shape)
        out = _interior(st_, st_.apply(es))
        scale = _interior(st_, es) * (1.0 + np.max(st_.a_ss) / small_grid.ds ** 2)
        assert np.max(np.abs(out) / scale) < 1e-12

    def test_intrinsic_value_maps_to_minus_rk(self, ref_model, small_grid):
        st_ = assemble(small_grid, ref_model, 0.0)
        u = (ref_model.K - np.exp(small_grid.s_nodes))[:, None] * np.ones(small_grid.shape)
        np.testing.assert_allclose(_interior(st_, st_.apply(u)), -ref_model.r * ref_model.K,
                                   atol=1e-10)

    def test_centred_weights_accuracy_on_exponential(self, ref_model):
        # with the textbook stencil the same identity holds only to first order in ds
        errs = []
        for n in (41, 81):
            g = build_grid(ref_model, 4.0, 1.0, n, 11, 4)
            st_ = assemble(g, ref_model, 1e-3, s_scheme="upwind")
            es = np.exp(g.s_nodes)[:, None] * np.ones(g.shape)
            errs.append(np.max(np.abs(_interior(st_, st_.apply(es)) / _interior(st_, es))))
        assert errs[1] < 0.6 * errs[0]

    def test_zero_correlation_kills_cross_terms(self, small_grid):
        m = heston_model(**{**REF, "rho": 0.0})
        st_ = assemble(small_grid, m, 1e-3)
        assert np.all(st_.a_sy == 0.0)

    def test_diffusion_coefficients_nonnegative(self, ref_model, small_grid):
        st_ = assemble(small_grid, ref_model, 1e-3)
        assert np.all(st_.a_ss >= 0) and np.all(st_.a_yy >= 0)

    def test_boundary_rows(self, ref_model, small_grid):
        st_ = assemble(small_grid, ref_model, 1e-3)
        A = system_matrix(st_, small_grid.dtheta, 1.0).toarray()
        dir_rows = np.flatnonzero(st_.dirichlet)
        np.testing.assert_array_equal(A[dir_rows][:, dir_rows], np.eye(len(dir_rows)))
        assert np.all(np.count_nonzero(A[dir_rows], axis=1) == 1)
        mask = st_.dirichlet.reshape(small_grid.shape)
        assert mask[:, 0].all() and mask[0, :].all()

    def test_offdiagonals_nonnegative_away_from_cross_terms(self, small_grid):
        m = heston_model(**{**REF, "rho": 0.0})
        L = assemble(small_grid, m, 1e-3).L.tocoo()
        off = L.row != L.col
        assert np.all(L.data[off] >= -1e-14)

    def test_f2_model_rejected_in_strict_mode(self, small_grid):
        m = heston_model(**{**REF, "xi": 0.3})
        with pytest.raises(DegenerateBoundaryUnsupported):
            assemble(small_grid, m, 1e-3)
        with pytest.warns(RuntimeWarning):
            st_ = assemble(small_grid, m, 1e-3, strict=False)
        assert st_.dirichlet.reshape(small_grid.shape)[:, 0].all()

    def test_unknown_scheme(self, ref_model, small_grid):
        with pytest.raises(ConfigurationError):
            assemble(small_grid, ref_model, 1e-3, s_scheme="spectral")


class TestConfig:
    def test_validation(self):
        with pytest.raises(ConfigurationError):
            SolveConfig(newton_tol=0.0)
        with pytest.raises(ConfigurationError):
            SolveConfig(theta_scheme=0.4)
        with pytest.raises(ConfigurationError):
            SolveConfig(epsilon_schedule=(1e-3, 1e-2))
        with pytest.raises(ConfigurationError):
            SolveConfig(linear_solver="cg")

    def test_schedule_sets_final_epsilon(self):
        c = SolveConfig(epsilon_schedule=[1e-2, 1e-3])
        assert c.epsilon == 1e-3 and c.epsilon_schedule == (1e-2, 1e-3)

    def test_rannacher_weights(self):
        c = SolveConfig()
        assert [c.weight(k) for k in range(7)] == [1.0] * 5 + [0.5] * 2


class TestStep:
    def test_one_step_is_monotone_in_theta(self, ref_model):
        g = build_grid(ref_model, 4.0, 1.0, 21, 21, 10)
        st_ = assemble(g, ref_model, 1e-3)
        pen = PenaltyParams.for_put(1e-3, ref_model.r, ref_model.K)
        u0 = Surface(st_.obstacle.reshape(g.shape).copy(), 0.0, g, 1e-3)
        u1, its = step(u0, st_, SolveConfig(), pen)
        assert its >= 1
        assert np.all(u1.values >= u0.values - 1e-12)
        assert u1.theta == pytest.approx(g.dtheta)

    def test_dirichlet_edge_exact(self, ref_model, small_grid):
        st_ = assemble(small_grid, ref_model, 1e-3)
        pen = PenaltyParams.for_put(1e-3, ref_model.r, ref_model.K)
        u0 = Surface(st_.obstacle.reshape(small_grid.shape).copy(), 0.0, small_grid, 1e-3)
        u1, _ = step(u0, st_, SolveConfig(), pen)
        edge = pi_smooth(ref_model.K - np.exp(small_grid.s_min), 1e-3)
        assert np.all(u1.values[0, :] == edge)
        y0 = pi_smooth(ref_model.K - np.exp(small_grid.s_nodes), 1e-3)
        assert np.all(u1.values[:, 0] == y0)

    def test_frozen_dynamics_stay_near_zero_out_of_the_money(self, small_grid):
        zero = lambda y: 0.0 * np.asarray(y, dtype=float)  # noqa: E731
        m = SVModel(r=0.05, rho=0.0, K=1.0, T=0.5, mu=zero, sigma=zero, b=zero,
                    dmu=zero, dsigma=zero, db=zero)
        with pytest.warns(RuntimeWarning):
            st_ = assemble(small_grid, m, 1e-3, strict=False)
        pen = PenaltyParams.for_put(1e-3, m.r, m.K)
        u0 = Surface(st_.obstacle.reshape(small_grid.shape).copy(), 0.0, small_grid, 1e-3)
        u1, _ = step(u0, st_, SolveConfig(strict=False), pen)
        far = small_grid.s_nodes > small_grid.log_strike + 0.5
        assert np.all(u1.values[far, 1:] <= 1e-2)

    def test_non_finite_input_rejected(self, ref_model, small_grid):
        st_ = assemble(small_grid, ref_model, 1e-3)
        bad = np.full(small_grid.shape, np.nan)
        with pytest.raises(StepFailure):
            step(Surface(bad, 0.0, small_grid), st_, SolveConfig(),
                 PenaltyParams.for_put(1e-3, 0.05, 1.0))

    def test_newton_cap_raises_step_failure(self, ref_model, small_grid):
        with pytest.raises(StepFailure) as exc:
            solve(ref_model, small_grid, SolveConfig(newton_max_iter=1, newton_tol=1e-15))
        assert exc.value.exit_code == 3 and exc.value.step == 0


class TestSolve:
    def test_initial_slice_only(self, ref_model):
        g = build_grid(ref_model, 4.0, 1.0, 21, 11, 0)
        res = solve(ref_model, g, SolveConfig(epsilon=1e-3))
        assert len(res.surfaces) == 1
        expect = pi_smooth(ref_model.K - np.exp(g.s_nodes), 1e-3)[:, None]
        np.testing.assert_array_equal(res.final.values, np.broadcast_to(expect, g.shape))

    def test_result_shape_and_residuals(self, small_penalty, small_grid):
        assert len(small_penalty.surfaces) == small_grid.n_theta + 1
        assert len(small_penalty.newton_iterations) == small_grid.n_theta
        assert np.all(np.isfinite(small_penalty.complementarity_residual))
        assert small_penalty.values.shape == (small_grid.n_theta + 1,) + small_grid.shape

    def test_bounds(self, small_penalty, small_grid):
        pay = small_grid.payoff()[None, :, None]
        U = small_penalty.values
        assert np.all(U >= pay - 1e-3)
        assert np.all(U <= small_grid.K + 1 + 1e-8)

    def test_positivity(self, small_penalty, small_psor):
        assert np.all(small_penalty.values[1:, 1:-1, 1:] > 0)
        # far out of the money the discrete value is below the PSOR stopping tolerance
        assert np.all(small_psor.values[1:, 1:-1, 1:] >= 0)

    def test_neumann_rows_hold(self, small_psor):
        u = small_psor.final.values
        np.testing.assert_allclose(3 * u[-1, 1:-1] - 4 * u[-2, 1:-1] + u[-3, 1:-1], 0, atol=1e-10)
        np.testing.assert_allclose(3 * u[1:-1, -1] - 4 * u[1:-1, -2] + u[1:-1, -3], 0, atol=1e-10)
        corner = (3 * u[-1, -1] - 2 * u[-2, -1] + 0.5 * u[-3, -1]
                  - 2 * u[-1, -2] + 0.5 * u[-1, -3])
        assert abs(corner) < 1e-10

    @pytest.mark.parametrize("method", ["sparse-lu", "bicgstab-ilu"])
    def test_linear_solvers_agree(self, ref_model, small_grid, small_penalty, method):
        other = solve(ref_model, small_grid, SolveConfig(epsilon=1e-3, linear_solver=method))
        np.testing.assert_allclose(other.values, small_penalty.values, atol=1e-8)

    def test_price_interpolation(self, small_penalty, small_grid):
        p_lin = small_penalty.price_at(1.0, 0.04)
        p_cub = small_penalty.price_at(1.0, 0.04, method="cubic")
        assert 0.0 < p_lin < 0.2 and abs(p_lin - p_cub) < 0.02
        with pytest.raises(ValueError):
            small_penalty.price_at(1.0, 0.04, t=0.0123)
        with pytest.raises(ValueError):
            small_penalty.price_at(1e-6, 0.04)

    def test_warm_started_schedule_records_each_level(self, ref_model, small_grid):
        res = solve(ref_model, small_grid, SolveConfig(epsilon_schedule=(4e-3, 1e-3, 2.5e-4)))
        r = res.schedule_residuals
        assert len(r) == 3 and r[0] > r[1] > r[2]


class TestMonotonicity:
    def test_psor_signs(self, small_psor):
        rep = monotonicity_report(small_psor, theta_slack=1e-8)
        assert all(c.passed for c in rep.values()), rep

    def test_penalty_violations_shrink_with_epsilon(self, ref_model, small_grid):
        worst = []
        for sched in ((1e-3,), (1e-3, 1e-4), (1e-3, 1e-4, 1e-5)):
            res = solve(ref_model, small_grid, SolveConfig(epsilon_schedule=sched))
            rep = monotonicity_report(res)
            worst.append(min(min(c.worst for c in rep.values()), 0.0))
        assert worst[2] >= worst[0] / 20
        assert worst[2] >= -1e-6


class TestPSOR:
    def _laplacian(self, n):
        main = 2.5 * np.ones(n)
        off = -np.ones(n - 1)
        return sp.diags([off, main, off], [-1, 0, 1]).tocsr()

    def test_inactive_obstacle_is_linear_solve(self, rng):
        A = self._laplacian(40)
        b = rng.normal(size=40)
        x, _ = psor_lcp(A, b, np.full(40, -np.inf), np.zeros(40), 1.5, 1e-13, 20000,
                        np.ones(40, dtype=bool))
        np.testing.assert_allclose(x, spla.spsolve(A.tocsc(), b), atol=1e-9)

    def test_single_active_node_complementarity(self):
        n = 30
        A = self._laplacian(n)
        b = np.full(n, 0.1)
        psi = np.full(n, -np.inf)
        psi[n // 2] = 1.0
        x, _ = psor_lcp(A, b, psi, np.zeros(n), 1.3, 1e-13, 20000, np.ones(n, dtype=bool))
        res = np.minimum(A @ x - b, x - psi)
        assert np.max(np.abs(res)) < 1e-9
        assert x[n // 2] == pytest.approx(1.0, abs=1e-12)

    @given(seed=st.integers(0, 2 ** 31 - 1), omega=st.floats(1.0, 1.8))
    @settings(max_examples=25, deadline=None)
    def test_random_lcp_complementarity(self, seed, omega):
        r = np.random.default_rng(seed)
        n = 25
        A = self._laplacian(n)
        b = r.normal(size=n)
        psi = r.normal(size=n)
        x, _ = psor_lcp(A, b, psi, np.maximum(psi, 0), omega, 1e-13, 50000,
                        np.ones(n, dtype=bool))
        assert np.all(x >= psi - 1e-12)
        assert np.all(A @ x - b >= -1e-8)
        assert np.max(np.abs(np.minimum(A @ x - b, x - psi))) < 1e-8

    def test_oracle_failure_on_cap(self, ref_model, small_grid):
        from svamerican import OracleFailure
        with pytest.raises(OracleFailure):
            psor_solve(ref_model, small_grid, SolveConfig(psor_max_iter=2))

    def test_residual_small_for_psor(self, small_psor):
        assert np.max(small_psor.complementarity_residual) < 1e-6

    def test_residual_helper_zero_on_boundary(self, ref_model, small_grid, small_psor):
        st0 = assemble(small_grid, ref_model, 0.0)
        r = complementarity_residual(st0, small_psor.surfaces[0].values,
                                     small_psor.surfaces[1].values, small_grid.dtheta, 1.0)
        assert np.all(r[0, :] == 0) and np.all(r[:, 0] == 0)
