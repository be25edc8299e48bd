"""Gaussian process regression tests: hand computations, dense-solve
oracles, and the regularizer/confidence contracts."""

import json
import math

import numpy as np
import pytest

from riskbound.gpr import (
    ConfidenceParams,
    GpDataset,
    NumericalError,
    SquaredExponentialKernel,
    confidence_multiplier,
    fit,
    kernel_eval,
    load_posterior,
    mean,
    posterior_from_dict,
    posterior_to_dict,
    save_posterior,
    upper_bound,
    variance,
)


@pytest.fixture
def unit_kernel():
    return SquaredExponentialKernel(length_scale=1.0, signal_variance=1.0)


@pytest.fixture
def single_point_gp(unit_kernel):
    # N=1, X={0}, y={1}: lam = 3, so (K + lam*I) = [[4]]
    return fit(np.array([[0.0]]), np.array([1.0]), unit_kernel)


class TestKernel:
    def test_self_evaluation(self, unit_kernel):
        x = np.array([0.3, -1.2, 0.9])
        assert kernel_eval(unit_kernel, x, x) == 1.0

    def test_sqrt2_separation(self, unit_kernel):
        a = np.array([0.0, 0.0])
        b = np.array([1.0, 1.0])  # distance sqrt(2): exp(-2/2) = 1/e
        assert kernel_eval(unit_kernel, a, b) == pytest.approx(math.exp(-1.0), rel=1e-12)

    def test_vanishes_far_away(self, unit_kernel):
        assert kernel_eval(unit_kernel, np.zeros(3), np.full(3, 100.0)) < 1e-300

    def test_symmetry_and_range(self, unit_kernel):
        rng = np.random.default_rng(0)
        for _ in range(20):
            a, b = rng.normal(size=3), rng.normal(size=3)
            k_ab = kernel_eval(unit_kernel, a, b)
            assert k_ab == kernel_eval(unit_kernel, b, a)
            assert 0.0 < k_ab <= 1.0

    def test_dimension_mismatch(self, unit_kernel):
        with pytest.raises(ValueError):
            kernel_eval(unit_kernel, np.zeros(2), np.zeros(3))

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            SquaredExponentialKernel(length_scale=0.0)
        with pytest.raises(ValueError):
            SquaredExponentialKernel(signal_variance=-1.0)


class TestFit:
    def test_single_point_system(self, single_point_gp):
        gp = single_point_gp
        assert gp.lam == 3.0
        assert gp.chol_lower.shape == (1, 1)
        assert gp.chol_lower[0, 0] == pytest.approx(2.0)  # chol([[4]])

    def test_empty_dataset_prior(self, unit_kernel):
        gp = fit(np.zeros((0, 3)), np.zeros(0), unit_kernel)
        assert gp.count == 0
        assert mean(gp, np.array([1.0, 2.0, 1.5])) == 0.0
        assert variance(gp, np.array([1.0, 2.0, 1.5])) == 1.0

    def test_duplicate_points_regularized(self, unit_kernel):
        gp = fit(np.array([[1.0], [1.0]]), np.array([1.0, 1.0]), unit_kernel)
        assert gp.lam == 2.0
        assert np.isfinite(mean(gp, np.array([1.0])))

    def test_lambda_tracks_dataset_size(self, unit_kernel):
        rng = np.random.default_rng(3)
        for n in (1, 2, 5, 50):
            gp = fit(rng.normal(size=(n, 2)), rng.normal(size=n), unit_kernel)
            assert gp.lam == 1.0 + 2.0 / n

    def test_shape_mismatch(self, unit_kernel):
        with pytest.raises(ValueError):
            fit(np.zeros((3, 2)), np.zeros(2), unit_kernel)

    def test_nonfinite_rejected(self, unit_kernel):
        with pytest.raises(ValueError):
            GpDataset(np.array([[np.inf]]), np.array([1.0]))


class TestMeanVariance:
    def test_hand_computed_single_point(self, single_point_gp):
        assert mean(single_point_gp, np.array([0.0])) == pytest.approx(0.25, abs=1e-15)
        assert variance(single_point_gp, np.array([0.0])) == pytest.approx(0.75, abs=1e-15)

    def test_prior_recovery_far_away(self, single_point_gp):
        far = np.array([1e3])
        assert mean(single_point_gp, far) == pytest.approx(0.0, abs=1e-12)
        assert variance(single_point_gp, far) == pytest.approx(1.0, abs=1e-12)

    def test_zero_targets_zero_mean(self, unit_kernel):
        rng = np.random.default_rng(1)
        gp = fit(rng.normal(size=(10, 2)), np.zeros(10), unit_kernel)
        for _ in range(10):
            assert mean(gp, rng.normal(size=2)) == 0.0

    def test_query_dimension_mismatch(self, single_point_gp):
        with pytest.raises(ValueError):
            mean(single_point_gp, np.array([0.0, 1.0]))

    def test_dense_solve_oracle(self, unit_kernel):
        rng = np.random.default_rng(42)
        for _ in range(10):
            n = int(rng.integers(1, 40))
            dim = int(rng.integers(1, 4))
            pts = rng.normal(scale=2.0, size=(n, dim))
            y = rng.normal(size=n)
            gp = fit(pts, y, unit_kernel)
            lam = 1.0 + 2.0 / n
            gram = unit_kernel.gram(pts)
            a = gram + lam * np.eye(n)
            for query in (pts[0], rng.normal(size=dim)):
                kx = unit_kernel.cross(pts, query[None, :]).ravel()
                mu_dense = kx @ np.linalg.solve(a, y)
                var_dense = 1.0 - kx @ np.linalg.solve(a, kx)
                assert mean(gp, query) == pytest.approx(mu_dense, abs=1e-8)
                assert variance(gp, query) == pytest.approx(var_dense, abs=1e-8)

    def test_interpolation_damping(self, unit_kernel):
        # at an isolated data point: mean = y * k/(k + lam)
        pts = np.array([[0.0, 0.0], [50.0, 0.0], [0.0, 50.0]])
        y = np.array([2.0, -1.0, 0.5])
        gp = fit(pts, y, unit_kernel)
        lam = 1.0 + 2.0 / 3.0
        for i in range(3):
            expected = y[i] * 1.0 / (1.0 + lam)
            assert mean(gp, pts[i]) == pytest.approx(expected, abs=1e-6)

    def test_variance_shrinks_with_data(self, unit_kernel):
        rng = np.random.default_rng(9)
        for _ in range(10):
            n = int(rng.integers(1, 20))
            pts = rng.normal(size=(n + 1, 2))
            y = rng.normal(size=n + 1)
            smaller = fit(pts[:n], y[:n], unit_kernel)
            larger = fit(pts, y, unit_kernel)
            for _ in range(5):
                q = rng.normal(size=2)
                assert variance(larger, q) <= variance(smaller, q) + 1e-9

    def test_gram_symmetry_and_eigenvalues(self, unit_kernel):
        rng = np.random.default_rng(13)
        pts = rng.normal(size=(30, 3))
        gram = unit_kernel.gram(pts)
        assert np.abs(gram - gram.T).max() < 1e-12
        lam = 1.0 + 2.0 / 30
        eigs = np.linalg.eigvalsh(gram + lam * np.eye(30))
        assert eigs.min() >= lam - 1e-9

    def test_determinism(self, unit_kernel):
        rng = np.random.default_rng(17)
        pts, y = rng.normal(size=(20, 3)), rng.normal(size=20)
        gp1 = fit(pts, y, unit_kernel)
        gp2 = fit(pts.copy(), y.copy(), unit_kernel)
        q = rng.normal(size=3)
        assert mean(gp1, q) == mean(gp2, q)
        assert variance(gp1, q) == variance(gp2, q)


class TestConfidence:
    def test_zero_noise_scale_gives_bound(self, single_point_gp):
        params = ConfidenceParams(rkhs_bound=2.5, noise_scale=0.0)
        assert confidence_multiplier(single_point_gp, params) == 2.5

    def test_hand_computed_multiplier(self, single_point_gp):
        # det(lam*I + K) = 4: B + R*sqrt(2*ln(2/0.5)) = 1 + sqrt(2*ln 4)
        params = ConfidenceParams(rkhs_bound=1.0, noise_scale=1.0, conf_delta=0.5)
        expected = 1.0 + math.sqrt(2.0 * math.log(4.0))
        value = confidence_multiplier(single_point_gp, params)
        assert value == pytest.approx(expected, abs=1e-12)
        assert value == pytest.approx(2.6651, abs=1e-4)

    def test_delta_near_one_shrinks_noise_term(self, single_point_gp):
        tight = confidence_multiplier(
            single_point_gp, ConfidenceParams(1.0, 1.0, conf_delta=0.999999)
        )
        loose = confidence_multiplier(
            single_point_gp, ConfidenceParams(1.0, 1.0, conf_delta=0.01)
        )
        assert tight < loose

    def test_empty_dataset_uses_unit_determinant(self, unit_kernel):
        gp = fit(np.zeros((0, 2)), np.zeros(0), unit_kernel)
        params = ConfidenceParams(1.0, 1.0, conf_delta=0.5)
        expected = 1.0 + math.sqrt(2.0 * math.log(2.0))
        assert confidence_multiplier(gp, params) == pytest.approx(expected)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            ConfidenceParams(rkhs_bound=0.0)
        with pytest.raises(ValueError):
            ConfidenceParams(rkhs_bound=1.0, noise_scale=-0.1)
        with pytest.raises(ValueError):
            ConfidenceParams(rkhs_bound=1.0, conf_delta=1.0)
        with pytest.raises(ValueError):
            ConfidenceParams(rkhs_bound=1.0, sigma_mode="std")


class TestUpperBound:
    def test_hand_computed_composition(self, single_point_gp):
        params = ConfidenceParams(rkhs_bound=1.0, noise_scale=0.0)
        assert upper_bound(single_point_gp, params, np.array([0.0])) == pytest.approx(1.0)

    def test_small_bound_approaches_mean(self, single_point_gp):
        params = ConfidenceParams(rkhs_bound=1e-12, noise_scale=0.0)
        value = upper_bound(single_point_gp, params, np.array([0.0]))
        assert value == pytest.approx(mean(single_point_gp, np.array([0.0])), abs=1e-9)

    def test_prior_bound_far_away(self, single_point_gp):
        params = ConfidenceParams(rkhs_bound=1.0, noise_scale=0.0)
        assert upper_bound(single_point_gp, params, np.array([500.0])) == pytest.approx(
            1.0, abs=1e-10
        )

    def test_sigma_mode_stddev(self, single_point_gp):
        q = np.array([0.5])
        var_mode = ConfidenceParams(2.0, 0.0, sigma_mode="variance")
        std_mode = ConfidenceParams(2.0, 0.0, sigma_mode="stddev")
        mu = mean(single_point_gp, q)
        sig = variance(single_point_gp, q)
        assert upper_bound(single_point_gp, var_mode, q) == pytest.approx(mu + 2.0 * sig)
        assert upper_bound(single_point_gp, std_mode, q) == pytest.approx(
            mu + 2.0 * math.sqrt(sig)
        )


class TestSerialization:
    def test_round_trip_preserves_queries(self, unit_kernel, tmp_path):
        rng = np.random.default_rng(23)
        gp = fit(rng.normal(size=(8, 3)), rng.normal(size=8), unit_kernel)
        path = tmp_path / "gp.json"
        save_posterior(gp, path)
        payload = json.loads(path.read_text())
        assert payload["schema_version"] == 1
        assert payload["lambda"] == gp.lam
        assert "chol" not in payload and "factorization" not in payload
        loaded = load_posterior(path)
        q = rng.normal(size=3)
        assert mean(loaded, q) == mean(gp, q)
        assert variance(loaded, q) == variance(gp, q)

    def test_empty_posterior_round_trip(self, unit_kernel):
        gp = fit(np.zeros((0, 3)), np.zeros(0), unit_kernel)
        loaded = posterior_from_dict(posterior_to_dict(gp))
        assert loaded.count == 0
        assert variance(loaded, np.ones(3)) == 1.0

    def test_rejects_foreign_payload(self):
        with pytest.raises(ValueError):
            posterior_from_dict({"kind": "something_else"})
