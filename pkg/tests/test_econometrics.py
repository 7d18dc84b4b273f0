import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rdlab import econometrics as ec
from rdlab.dgp import Dataset, sample_dataset
from rdlab.errors import BandwidthError, FitError, InsufficientData
from rdlab.montecarlo import simulate_tests
from rdlab.rng import rng_from

from conftest import quad_dgp


def jump_dataset(n=400, d=0.7, sigma=0.0, slope_l=0.5, slope_r=-0.3, seed=0):
    rng = rng_from(seed, "jump")
    x = np.concatenate([rng.uniform(-1, 0, n // 2), rng.uniform(0, 1, n - n // 2)])
    y = np.where(x < 0, slope_l * x, d + slope_r * x)
    if sigma > 0:
        y = y + rng.normal(0, sigma, n)
    return Dataset(x, y, 0.0, d, "jump", seed)


class TestPiecewiseQuintic:
    def test_noiseless_extreme_jump_rejects(self, curved_dgp):
        ds = sample_dataset(curved_dgp, 1.5, seed=9, sigma_override=1e-8)
        res = ec.piecewise_quintic_test(ds)
        assert res.reject
        assert res.estimate == pytest.approx(1.5 * curved_dgp.sigma, rel=1e-4)

    def test_matches_normal_equations_oracle(self, curved_dataset):
        res = ec.piecewise_quintic_test(curved_dataset)
        X = ec.piecewise_design(curved_dataset.x, 5)
        oracle = np.linalg.solve(X.T @ X, X.T @ curved_dataset.y)
        assert res.estimate == pytest.approx(oracle[6], rel=1e-8)

    def test_weight_vector_reproduces_estimate(self, curved_dataset):
        res = ec.piecewise_quintic_test(curved_dataset)
        assert abs(res.weights @ curved_dataset.y - res.estimate) < 1e-10

    def test_size_quick(self, flat_dgp):
        out = simulate_tests(flat_dgp, "pq", 0.0, 300, seed=17)
        assert 0.02 <= out["rejection_rate"] <= 0.09

    def test_rank_deficiency_raises(self):
        x = np.concatenate([-np.linspace(0.1, 0.9, 8), np.full(40, 0.5)])
        y = np.zeros(len(x))
        with pytest.raises(FitError):
            ec.piecewise_quintic_test(Dataset(x, y, 0, 0, "r", 0))


class TestBandwidthFormula:
    def test_variance_scaling_law(self):
        h1 = ec.plugin_bandwidth_formula(1.0, 0.5, 4.0, 1000, 3.4)
        h2 = ec.plugin_bandwidth_formula(2.0, 0.5, 4.0, 1000, 3.4)
        assert h2 == pytest.approx(2**0.2 * h1)

    def test_sample_size_scaling_law(self):
        h1 = ec.plugin_bandwidth_formula(1.0, 0.5, 4.0, 1000, 3.4)
        h2 = ec.plugin_bandwidth_formula(1.0, 0.5, 4.0, 32000, 3.4)
        assert h2 == pytest.approx(h1 / 2)

    def test_degenerate_raises(self):
        with pytest.raises(BandwidthError):
            ec.plugin_bandwidth_formula(1.0, 0.0, 4.0, 1000, 3.4)


class TestKernelConstants:
    def test_triangular_matches_closed_form(self):
        k = ec.kernel_constants("triangular")
        assert k["c2"] == pytest.approx(-0.1, abs=1e-9)
        assert k["r2"] == pytest.approx(4.8, abs=1e-9)
        assert k["c_bw"] == pytest.approx((4.8 / 0.01) ** 0.2, abs=1e-6)

    def test_uniform_constants_positive(self):
        k = ec.kernel_constants("uniform")
        assert k["c_bw"] > 0 and k["c_pilot"] > 0


class TestIkBandwidth:
    def test_within_35pct_of_theoretical(self):
        # known truth: quadratic arms, uniform x on [-1, 1], so f(0)=0.5
        c2 = 6.0
        sigma = 1.0
        const = ec.kernel_constants("triangular")["c_bw"]
        n = 10_000
        theory = const * ((2 * sigma**2) / (0.5 * (2 * c2 + 2 * c2) ** 2)) ** 0.2 * n ** (-0.2)
        ratios = []
        for r in range(200):
            rng = rng_from(55, "ikh", r)
            x = rng.uniform(-1, 1, n)
            y = np.where(x < 0, c2 * x**2, -c2 * x**2) + rng.normal(0, sigma, n)
            ds = Dataset(x, y, 0.0, 0.0, "ikh", r)
            ratios.append(ec.ik_bandwidth(ds) / theory)
        med = float(np.median(ratios))
        assert abs(med - 1.0) <= 0.35

    def test_brute_force_mse_minimum_agrees(self):
        # empirical MSE over an h grid should dip near the formula optimum
        c2, sigma, n = 6.0, 1.0, 2000
        const = ec.kernel_constants("triangular")["c_bw"]
        theory = const * ((2 * sigma**2) / (0.5 * (4 * c2) ** 2)) ** 0.2 * n ** (-0.2)
        grid = np.geomspace(theory / 4, min(4 * theory, 0.95), 13)
        mses = []
        for h in grid:
            errs = []
            for r in range(300):
                rng = rng_from(56, "mse", r)
                x = rng.uniform(-1, 1, n)
                y = np.where(x < 0, c2 * x**2, -c2 * x**2) + rng.normal(0, sigma, n)
                ds = Dataset(x, y, 0.0, 0.0, "mse", r)
                tau, _, _ = ec.local_linear_estimate(ds, float(h))
                errs.append(tau**2)
            mses.append(np.mean(errs))
        best = grid[int(np.argmin(mses))]
        assert theory / 1.8 <= best <= theory * 1.8

    def test_insensitive_to_global_linear_trend(self, curved_dataset):
        h0 = ec.ik_bandwidth(curved_dataset)
        shifted = Dataset(
            curved_dataset.x,
            curved_dataset.y + 2.0 * curved_dataset.x,
            0.0, 0.0, "t", 0,
        )
        h1 = ec.ik_bandwidth(shifted)
        assert h1 == pytest.approx(h0, rel=1e-6)

    def test_caps_at_max_abs_x(self):
        # nearly zero curvature: regularization keeps it finite and capped
        rng = rng_from(57, "cap")
        x = np.concatenate([rng.uniform(-1, 0, 100), rng.uniform(0, 1, 100)])
        y = 0.5 * x + rng.normal(0, 1, 200)
        ds = Dataset(x, y, 0, 0, "cap", 0)
        assert ec.ik_bandwidth(ds) <= np.max(np.abs(x)) + 1e-12

    def test_requires_30_per_side(self):
        rng = rng_from(58, "few")
        x = np.concatenate([rng.uniform(-1, 0, 20), rng.uniform(0, 1, 100)])
        ds = Dataset(x, np.zeros(120), 0, 0, "few", 0)
        with pytest.raises(BandwidthError):
            ec.ik_bandwidth(ds)


class TestLocalLinear:
    def test_exact_on_piecewise_linear(self):
        ds = jump_dataset(d=0.7)
        for h in (0.3, 0.6, 1.0):
            tau, _, _ = ec.local_linear_estimate(ds, h)
            assert tau == pytest.approx(0.7, abs=1e-10)

    def test_weight_sums(self):
        ds = jump_dataset(d=0.2, sigma=0.5, seed=3)
        _, _, w = ec.local_linear_estimate(ds, 0.4)
        right = ds.x >= 0
        assert np.sum(w[right]) == pytest.approx(1.0, abs=1e-10)
        assert np.sum(w[~right]) == pytest.approx(-1.0, abs=1e-10)

    def test_matches_wls_oracle(self):
        ds = jump_dataset(d=0.3, sigma=0.4, seed=5)
        h = 0.5
        tau, _, w = ec.local_linear_estimate(ds, h)
        parts = {}
        for side in ("left", "right"):
            mask = (ds.x < 0) & (ds.x >= -h) if side == "left" else (ds.x >= 0) & (ds.x <= h)
            X = np.column_stack([np.ones(mask.sum()), ds.x[mask]])
            W = np.diag(np.maximum(1 - np.abs(ds.x[mask] / h), 0))
            beta = np.linalg.inv(X.T @ W @ X) @ (X.T @ W @ ds.y[mask])
            parts[side] = beta[0]
        assert tau == pytest.approx(parts["right"] - parts["left"], rel=1e-8)
        assert tau == pytest.approx(w @ ds.y, abs=1e-12)

    def test_insufficient_data(self):
        ds = jump_dataset(n=40)
        with pytest.raises(InsufficientData):
            ec.local_linear_estimate(ds, 0.001)


class TestIkTest:
    def test_size_on_linear_cef(self, linear_dgp):
        out = simulate_tests(linear_dgp, "ik", 0.0, 1000, seed=23)
        assert 0.03 <= out["rejection_rate"] <= 0.08

    def test_over_rejection_on_curved(self):
        dgp = quad_dgp(c2=20.0)
        out = simulate_tests(dgp, "ik", 0.0, 1000, seed=2024)
        assert out["rejection_rate"] > 0.05

    def test_infinite_critical_value_never_rejects(self, curved_dataset):
        res = ec.ik_test(curved_dataset, critical_value=math.inf)
        assert not res.reject

    def test_reject_iff_zero_outside_ci(self, curved_dataset):
        res = ec.ik_test(curved_dataset)
        assert res.reject == (not res.ci_low <= 0 <= res.ci_high)


class TestCct:
    def test_noiseless_linear_bias_correction_is_zero(self):
        ds = jump_dataset(d=0.7)
        ik = ec.ik_test(ds)
        cct = ec.cct_robust_test(ds)
        assert cct.estimate == pytest.approx(0.7, abs=1e-8)
        assert cct.estimate == pytest.approx(ik.estimate, abs=1e-8)

    def test_weight_vector_matches_long_way(self, curved_dataset):
        res = ec.cct_robust_test(curved_dataset)
        h, b = res.bandwidth_used, res.pilot_bandwidth
        tau, _, _ = ec.local_linear_estimate(curved_dataset, h)
        x, y = curved_dataset.x, curved_dataset.y
        c2 = ec.kernel_constants("triangular")["c2"]
        m2 = {}
        for side in ("left", "right"):
            mask = (x < 0) & (x >= -b) if side == "left" else (x >= 0) & (x <= b)
            u = x[mask] / b
            wk = np.maximum(1 - np.abs(u), 0)
            X = np.column_stack([np.ones(mask.sum()), x[mask], x[mask] ** 2])
            A = np.linalg.inv(X.T @ (X * wk[:, None])) @ (X * wk[:, None]).T
            m2[side] = 2.0 * (A @ y[mask])[2]
        bias_hat = (c2 / 2.0) * (m2["right"] - m2["left"])
        long_way = tau - h**2 * bias_hat
        assert res.estimate == pytest.approx(long_way, abs=1e-10)
        assert res.estimate == pytest.approx(res.weights @ y, abs=1e-10)

    def test_null_rejection_not_above_ik_paired(self):
        dgp = quad_dgp(c2=20.0)
        ik = simulate_tests(dgp, "ik", 0.0, 400, seed=2024)
        cct = simulate_tests(dgp, "cct", 0.0, 400, seed=2024)
        assert cct["rejection_rate"] <= ik["rejection_rate"]


class TestAkHonest:
    def test_cv_zero_is_normal_quantile(self):
        assert ec.folded_normal_quantile(0.0) == pytest.approx(1.959963984540054)

    def test_cv_monotone_and_bounded(self):
        z = 1.959963984540054
        prev = 0.0
        for t in (0.0, 0.3, 0.8, 1.5, 3.0, 6.0):
            cv = ec.folded_normal_quantile(t)
            assert cv >= prev - 1e-12
            assert max(t, z) - 1e-9 <= cv <= t + z + 1e-9
            prev = cv

    def test_ct_zero_halflength_exactly_normal(self):
        ds = jump_dataset(d=0.2, sigma=0.8, seed=7)
        res = ec.ak_honest_ci(ds, c_t=0.0)
        half = (res.ci_high - res.ci_low) / 2
        assert half == pytest.approx(1.959963984540054 * res.se, abs=1e-12)

    def test_weights_reproduce_estimate(self, curved_dataset):
        res = ec.ak_honest_ci(curved_dataset, c_t=1.0)
        assert abs(res.weights @ curved_dataset.y - res.estimate) < 1e-10

    def test_quick_coverage_quadratic(self):
        a, sigma, n, tau = 2.0, 1.0, 400, 0.3
        cover = 0
        reps = 150
        for r in range(reps):
            rng = rng_from(78, "akq", r)
            x = rng.uniform(-1, 1, n)
            y = a * x**2 + tau * (x >= 0) + rng.normal(0, sigma, n)
            ds = Dataset(x, y, 0.0, tau, "akq", r)
            res = ec.ak_honest_ci(ds, c_t=a)
            cover += res.ci_low <= tau <= res.ci_high
        assert cover / reps >= 0.90


class TestRotBound:
    def test_linear_data_near_zero(self):
        ds = jump_dataset(d=0.5)
        assert ec.rot_second_derivative_bound(ds) < 1e-8

    def test_quadratic_exact(self):
        rng = rng_from(59, "rot")
        x = np.concatenate([rng.uniform(-1, 0, 200), rng.uniform(0, 1, 200)])
        ds = Dataset(x, x**2, 0.0, 0.0, "rot", 0)
        assert ec.rot_second_derivative_bound(ds) == pytest.approx(2.0, abs=1e-6)

    def test_monotone_in_curvature(self):
        # paired runs: same noise vector, quadratic component scaled up;
        # monotone once the true curvature dominates the noise-driven wiggle
        rng = rng_from(60, "rot2")
        x = np.concatenate([rng.uniform(-1, 0, 300), rng.uniform(0, 1, 300)])
        noise = rng.normal(0, 0.05, 600)
        bounds = []
        for a in (1.0, 2.0, 4.0, 8.0):
            ds = Dataset(x, a * x**2 + noise, 0.0, 0.0, "rot2", 0)
            bounds.append(ec.rot_second_derivative_bound(ds))
        assert all(b2 >= b1 for b1, b2 in zip(bounds, bounds[1:]))


class TestAdjustedCriticalValue:
    def test_enumeration_example(self):
        t = [v for m in range(1, 11) for v in (m, -m)]
        assert ec.adjusted_critical_value(t, 0.2) == 8.0

    def test_target_at_least_one(self):
        assert ec.adjusted_critical_value([1.0, 2.0], 1.0) == 0.0

    @given(
        st.lists(st.floats(-50, 50, allow_nan=False), min_size=1, max_size=60),
        st.floats(0.01, 0.99),
    )
    @settings(max_examples=200, deadline=None)
    def test_rate_never_exceeds_target(self, values, target):
        c = ec.adjusted_critical_value(values, target)
        rate = np.mean(np.abs(values) > c)
        assert rate <= target + 1e-12
        assert c >= 0


@pytest.fixture(scope="module")
def ds(curved_dgp):
    return sample_dataset(curved_dgp, 0.54, seed=41)


class TestEquivariance:
    def _all_methods(self, ds):
        return {
            "pq": ec.piecewise_quintic_test(ds),
            "ik": ec.ik_test(ds),
            "cct": ec.cct_robust_test(ds),
            "ak": ec.ak_honest_ci(ds, c_t=2.0),
        }

    def test_linear_in_y_weight_identity(self, ds):
        for name, res in self._all_methods(ds).items():
            assert abs(res.weights @ ds.y - res.estimate) < 1e-10, name

    def test_constant_shift_leaves_estimates(self, ds):
        base = self._all_methods(ds)
        shifted = Dataset(ds.x, ds.y + 5.0, ds.d_multiple, ds.true_d, "s", 1)
        for name, res in self._all_methods(shifted).items():
            assert res.estimate == pytest.approx(base[name].estimate, abs=1e-8), name

    def test_step_shift_moves_estimates_by_c(self, ds):
        base = self._all_methods(ds)
        shifted = Dataset(
            ds.x, ds.y + 3.0 * (ds.x >= 0), ds.d_multiple, ds.true_d, "s", 2
        )
        for name, res in self._all_methods(shifted).items():
            assert res.estimate == pytest.approx(base[name].estimate + 3.0, abs=1e-8), name

    def test_scale_equivariance(self, ds):
        base = self._all_methods(ds)
        k = 2.5
        scaled = Dataset(ds.x, ds.y * k, ds.d_multiple, ds.true_d, "s", 3)
        # ak's curvature bound scales with the outcome as well
        results = {
            "pq": ec.piecewise_quintic_test(scaled),
            "ik": ec.ik_test(scaled),
            "cct": ec.cct_robust_test(scaled),
            "ak": ec.ak_honest_ci(scaled, c_t=2.0 * k),
        }
        for name, res in results.items():
            assert res.estimate == pytest.approx(k * base[name].estimate, rel=1e-8), name
            assert res.se == pytest.approx(k * base[name].se, rel=1e-8), name
            assert res.t_stat == pytest.approx(base[name].t_stat, rel=1e-8), name
