import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from svamerican import (Method, ParameterDomainError, RegressionDegenerateError, absorbed_model,
                        degenerate_boundary_check, european_value, heston_model, lsmc_value,
                        policy_value, simulate)
from svamerican.mc_oracle import exercise_boundary_interpolator

from conftest import REF


@pytest.fixture(scope="module")
def absorbed():
    return absorbed_model(kappa=2.0, xi=0.5, rho=-0.7, r=0.05, K=1.0, T=0.5)


@pytest.fixture(scope="module")
def heston_paths(ref_model):
    return simulate(ref_model, 1.0, 0.04, 0.0, 20_000, 50, seed=11)


class TestSimulate:
    def test_frozen_volatility_gives_deterministic_growth(self, absorbed):
        p = simulate(absorbed, 0.8, 0.0, 0.0, 100, 40, seed=3)
        np.testing.assert_allclose(p.X[:, -1], 0.8 * math.exp(absorbed.r * absorbed.T), rtol=1e-13)
        assert np.all(p.Y == 0.0)
        assert np.all(p.hit_nu == 0)

    def test_first_variance_step_from_zero(self, ref_model):
        p = simulate(ref_model, 1.0, 0.0, 0.0, 50, 10, seed=5)
        dt = ref_model.T / 10
        np.testing.assert_allclose(p.Y[:, 1], 2.0 * 0.04 * dt, rtol=1e-14)

    def test_discounted_stock_martingale(self, ref_model):
        p = simulate(ref_model, 1.0, 0.04, 0.0, 100_000, 50, seed=21, antithetic=True)
        disc = math.exp(-ref_model.r * ref_model.T) * p.X[:, -1]
        pairs = disc.reshape(-1, 2).mean(axis=1)
        se = pairs.std(ddof=1) / math.sqrt(pairs.size)
        assert abs(pairs.mean() - 1.0) <= 3 * se

    def test_positivity_and_truncation(self, heston_paths):
        assert np.all(heston_paths.X > 0)
        assert np.all(heston_paths.Y >= 0)
        # the reference parameters violate the Feller condition, so zero is reached
        assert np.any(heston_paths.hit_nu > 0)
        hit = heston_paths.hit_nu > 0
        rows = np.flatnonzero(hit)[:50]
        assert np.all(heston_paths.Y[rows, heston_paths.hit_nu[rows]] == 0.0)

    def test_reproducible_bitwise(self, ref_model):
        a = simulate(ref_model, 1.0, 0.04, 0.0, 3000, 20, seed=99)
        b = simulate(ref_model, 1.0, 0.04, 0.0, 3000, 20, seed=99)
        c = simulate(ref_model, 1.0, 0.04, 0.0, 3000, 20, seed=100)
        assert a.X.tobytes() == b.X.tobytes() and a.Y.tobytes() == b.Y.tobytes()
        assert a.X.tobytes() != c.X.tobytes()

    def test_times(self, ref_model):
        p = simulate(ref_model, 1.0, 0.04, 0.1, 10, 8, seed=1)
        np.testing.assert_allclose(p.times, np.linspace(0.1, 0.5, 9))

    @pytest.mark.parametrize("kw", [{"x0": 0.0}, {"y0": -0.1}, {"n_paths": 0}, {"n_steps": 0},
                                    {"t0": 0.5}])
    def test_domain_checks(self, ref_model, kw):
        args = dict(x0=1.0, y0=0.04, t0=0.0, n_paths=10, n_steps=5, seed=1) | kw
        with pytest.raises(ParameterDomainError):
            simulate(ref_model, **args)

    def test_split_keeps_antithetic_pairs(self, ref_model):
        p = simulate(ref_model, 1.0, 0.04, 0.0, 10, 5, seed=1, antithetic=True)
        a, b = p.split()
        assert a.n_paths % 2 == 0 and a.n_paths + b.n_paths == 10
        # mirrored first-step shocks: every pair has the same summed log-increment
        pair_sum = np.log(a.X[0::2, 1]) + np.log(a.X[1::2, 1])
        np.testing.assert_allclose(pair_sum, pair_sum[0], rtol=1e-12)

    @given(seed=st.integers(0, 2 ** 32 - 1), y0=st.floats(0.0, 0.5))
    @settings(max_examples=20, deadline=None)
    def test_invariants_any_seed(self, seed, y0):
        p = simulate(heston_model(**REF), 1.0, y0, 0.0, 200, 20, seed)
        assert np.all(p.X > 0) and np.all(p.Y >= 0)


class TestLSMC:
    def test_one_short_step_is_intrinsic(self, ref_model):
        m = ref_model.replace(T=1e-4)
        est = lsmc_value(simulate(m, 0.9, 0.04, 0.0, 20_000, 1, seed=2), m)
        assert abs(est.value - 0.1) <= max(3 * est.std_error, 1e-12)

    def test_deep_in_the_money_exercises_at_once(self, ref_model):
        est = lsmc_value(simulate(ref_model, 0.1, 0.04, 0.0, 20_000, 50, seed=4), ref_model)
        assert abs(est.value - 0.9) <= max(3 * est.std_error, 1e-12)

    def test_american_dominates_european(self, ref_model, heston_paths):
        lsmc = lsmc_value(heston_paths, ref_model)
        euro = european_value(heston_paths, ref_model)
        assert euro.value <= lsmc.value + 3 * lsmc.std_error
        assert lsmc.method is Method.LSMC and lsmc.n_paths == 10_000
        assert lsmc.value >= 0 and lsmc.std_error >= 0

    def test_degree_three(self, ref_model, heston_paths):
        a = lsmc_value(heston_paths, ref_model, 2)
        b = lsmc_value(heston_paths, ref_model, 3)
        assert abs(a.value - b.value) < 4 * max(a.std_error, b.std_error)

    def test_bad_degree(self, ref_model, heston_paths):
        with pytest.raises(ParameterDomainError):
            lsmc_value(heston_paths, ref_model, 4)

    def test_too_few_in_the_money_paths(self, ref_model):
        p = simulate(ref_model, 1.6, 0.04, 0.0, 2000, 50, seed=8)
        with pytest.raises(RegressionDegenerateError):
            lsmc_value(p, ref_model)

    def test_reproducible_estimate(self, ref_model):
        a = lsmc_value(simulate(ref_model, 1.0, 0.04, 0.0, 4000, 20, 9), ref_model)
        b = lsmc_value(simulate(ref_model, 1.0, 0.04, 0.0, 4000, 20, 9), ref_model)
        assert a == b
        assert a.to_dict() == {"value": a.value, "std_error": a.std_error, "n_paths": 2000,
                               "n_steps": 20, "method": "LSMC", "seed": 9}


class TestPolicy:
    def test_zero_boundary_is_european(self, ref_model, heston_paths):
        pol = policy_value(heston_paths, lambda y, t: np.zeros_like(y), ref_model)
        euro = european_value(heston_paths, ref_model)
        assert pol.value == pytest.approx(euro.value, abs=1e-15)

    def test_strike_boundary_exercises_at_first_itm_step(self, ref_model, heston_paths):
        pol = policy_value(heston_paths, lambda y, t: np.full_like(y, ref_model.K), ref_model)
        X, t = heston_paths.X, heston_paths.times
        itm = X < ref_model.K
        first = np.where(itm.any(axis=1), itm.argmax(axis=1), X.shape[1] - 1)
        rows = np.arange(X.shape[0])
        manual = np.exp(-ref_model.r * t[first]) * np.maximum(ref_model.K - X[rows, first], 0)
        assert pol.value == pytest.approx(manual.mean(), rel=1e-12)

    def test_stop_indices(self, ref_model, heston_paths):
        est, stops = policy_value(heston_paths, lambda y, t: np.zeros_like(y), ref_model,
                                  return_stops=True)
        assert np.all(stops == heston_paths.n_steps)

    def test_interpolator_sentinel_and_clamp(self):
        g = np.array([[0.9, 0.95], [-np.inf, 0.8]])
        f = exercise_boundary_interpolator(np.array([0.0, 1.0]), np.array([0.0, 1.0]), g)
        assert f(np.array([1.0]), 0.0)[0] == 0.0
        assert f(np.array([5.0]), 2.0)[0] == pytest.approx(0.8)
        assert f(np.array([0.0]), 0.5)[0] == pytest.approx(0.925)


class TestEuropean:
    def test_deterministic_case(self):
        m = absorbed_model(kappa=1.0, xi=0.3, rho=0.0, r=0.0, K=1.0, T=0.5)
        est = european_value(simulate(m, 0.7, 0.0, 0.0, 500, 10, seed=1), m)
        assert est.value == pytest.approx(0.3, abs=1e-14) and est.std_error == pytest.approx(0.0, abs=1e-15)

    def test_parity_lower_bound(self, ref_model, heston_paths):
        est = european_value(heston_paths, ref_model)
        bound = math.exp(-ref_model.r * ref_model.T) * ref_model.K - 1.0
        assert est.value >= bound - 3 * est.std_error


class TestOrderingChain:
    def test_chain_with_pde_boundary(self, ref_model, ref_penalty):
        from svamerican import extract

        fb = extract(ref_penalty)
        p = simulate(ref_model, 1.0, 0.04, 0.0, 40_000, 100, seed=17)
        euro = european_value(p, ref_model)
        pol = policy_value(p, fb, ref_model)
        lsmc = lsmc_value(p, ref_model)
        assert euro.value <= pol.value + 3 * pol.std_error
        assert pol.value <= lsmc.value + 6 * lsmc.std_error
        pde = ref_penalty.price_at(1.0, 0.04)
        for est in (euro, pol, lsmc):
            assert pde >= est.value - 3 * est.std_error


class TestDegenerate:
    def test_absorbed_model_values_equal_payoff(self, absorbed):
        rep = degenerate_boundary_check(absorbed, [0.5, 0.9, 1.5, 2.0])
        assert rep.passed
        vals = {r.x0: r.value for r in rep.rows}
        assert vals[0.5] == pytest.approx(0.5, abs=1e-12)
        assert vals[2.0] == 0.0

    def test_heston_gauge_near_zero_variance(self, ref_model):
        rep = degenerate_boundary_check(ref_model, [0.5], y0=1e-4)
        row = rep.rows[0]
        assert row.passed is None
        assert row.deviation <= 5e-3
