import numpy as np
import pytest

from kgdselect.datagen import gen_dataset
from kgdselect.descent import (
    KgdConfig,
    kgd_step,
    predict,
    run_kgd,
    spectral_radius,
    spectral_solution,
    trace_to_csv,
    weighted_rkhs_norm,
)
from kgdselect.kernels import KernelSpec, build_kernel_matrix, eval_kernel
from kgdselect.spectral import eigendecompose
from tests.conftest import as_kernel_matrix, random_psd_matrix


class TestStep:
    def test_first_step_from_zero(self, rng):
        K = random_psd_matrix(rng, 6)
        y = rng.normal(0, 1, 6)
        out = kgd_step(np.zeros(6), as_kernel_matrix(K), y, 0.7)
        np.testing.assert_allclose(out, 0.7 / 6 * y, rtol=1e-15)

    def test_scaled_identity_fixed_point(self):
        n = 5
        K = as_kernel_matrix(n * np.eye(n))
        y = np.arange(1.0, n + 1)
        c1 = kgd_step(np.zeros(n), K, y, 1.0)
        np.testing.assert_allclose(c1, y / n, rtol=1e-15)
        c2 = kgd_step(c1, K, y, 1.0)
        np.testing.assert_allclose(c2, y / n, rtol=1e-15)

    def test_dimension_mismatch(self, rng):
        K = as_kernel_matrix(np.eye(4))
        with pytest.raises(ValueError):
            kgd_step(np.zeros(3), K, np.zeros(4), 1.0)

    def test_iteration_agrees_with_closed_form(self, rng):
        K = random_psd_matrix(rng, 6, scale=3.0)
        y = rng.normal(0, 1, 6)
        beta = 0.9 * 6 / np.linalg.eigvalsh(K)[-1]
        c = np.zeros(6)
        for _ in range(200):
            c = kgd_step(c, as_kernel_matrix(K), y, beta)
        oracle = spectral_solution(eigendecompose(as_kernel_matrix(K)), y, beta, 200)
        assert np.linalg.norm(c - oracle) <= 1e-8 * np.linalg.norm(oracle)


class TestRunKgd:
    def test_zero_iterations(self, rng):
        K = as_kernel_matrix(random_psd_matrix(rng, 4))
        trace = run_kgd(K, rng.normal(0, 1, 4), KgdConfig(0.5, 0))
        assert trace.coefficients.shape == (1, 4)
        np.testing.assert_array_equal(trace.coefficients[0], np.zeros(4))
        assert trace.inc_empirical.shape == (1,)

    def test_null_outputs(self, rng):
        K = as_kernel_matrix(random_psd_matrix(rng, 5))
        trace = run_kgd(K, np.zeros(5), KgdConfig(0.5, 10))
        assert np.all(trace.coefficients == 0)
        assert np.all(trace.inc_empirical == 0)
        assert np.all(trace.inc_rkhs == 0)

    def test_residual_strictly_decreasing_on_paper_setup(self):
        data = gen_dataset("g1", 200, 0.6, seed=3)
        spec = KernelSpec("sobolev_min", 1)
        K = build_kernel_matrix(spec, data.inputs)
        trace = run_kgd(K, data.outputs, KgdConfig(1.0, 200))
        assert np.all(np.diff(trace.residual_l2) < 0)

    def test_inadmissible_step_size_names_radius(self, rng):
        K = random_psd_matrix(rng, 6, scale=3.0)
        sig_max = np.linalg.eigvalsh(K)[-1]
        beta = 2.5 * 6 / sig_max
        with pytest.raises(ValueError, match="sigma_max"):
            run_kgd(as_kernel_matrix(K), rng.normal(0, 1, 6), KgdConfig(beta, 5))

    def test_norm_identities_against_recomputation(self, rng):
        K = random_psd_matrix(rng, 8, scale=2.0)
        y = rng.normal(0, 1, 8)
        beta = 0.8 * 8 / np.linalg.eigvalsh(K)[-1]
        trace = run_kgd(as_kernel_matrix(K), y, KgdConfig(beta, 30))
        for t in (0, 3, 17, 29):
            dc = trace.coefficients[t + 1] - trace.coefficients[t]
            rkhs_sq = dc @ K @ dc
            emp_sq = (K @ dc) @ (K @ dc) / 8
            assert trace.inc_rkhs[t] ** 2 == pytest.approx(rkhs_sq, rel=1e-10, abs=1e-30)
            assert trace.inc_empirical[t] ** 2 == pytest.approx(emp_sq, rel=1e-10, abs=1e-30)

    def test_train_predictions_match_gram_product(self, rng):
        K = random_psd_matrix(rng, 7)
        y = rng.normal(0, 1, 7)
        trace = run_kgd(as_kernel_matrix(K), y, KgdConfig(0.5, 12))
        expect = trace.coefficients @ K
        np.testing.assert_allclose(trace.train_predictions, expect, atol=1e-12)

    def test_linearity_in_outputs(self, rng):
        K = as_kernel_matrix(random_psd_matrix(rng, 6))
        y1, y2 = rng.normal(0, 1, 6), rng.normal(0, 1, 6)
        cfg = KgdConfig(0.4, 25)
        t1 = run_kgd(K, y1, cfg)
        t2 = run_kgd(K, y2, cfg)
        t12 = run_kgd(K, y1 + y2, cfg)
        np.testing.assert_allclose(
            t12.coefficients, t1.coefficients + t2.coefficients, atol=1e-12
        )

    def test_streaming_mode_keeps_norms_only(self, rng):
        K = as_kernel_matrix(random_psd_matrix(rng, 5))
        trace = run_kgd(K, rng.normal(0, 1, 5), KgdConfig(0.5, 8, keep_history=False))
        assert trace.coefficients is None
        assert trace.train_predictions is None
        assert trace.inc_empirical.shape == (9,)

    def test_residual_non_increasing_up_to_divergence_limit(self, rng):
        for _ in range(5):
            K = random_psd_matrix(rng, 10, scale=4.0)
            sig = np.linalg.eigvalsh(K)[-1]
            beta = rng.uniform(0.1, 1.99) * 10 / sig
            trace = run_kgd(as_kernel_matrix(K), rng.normal(0, 1, 10), KgdConfig(beta, 40))
            assert np.all(np.diff(trace.residual_l2) <= 1e-10)

    def test_overshoot_flagged(self, rng):
        K = random_psd_matrix(rng, 6, scale=3.0)
        sig = np.linalg.eigvalsh(K)[-1]
        trace = run_kgd(
            as_kernel_matrix(K), rng.normal(0, 1, 6),
            KgdConfig(1.5 * 6 / sig, 5),
        )
        assert trace.overshoot

    def test_csv_dump(self, tmp_path, rng):
        K = as_kernel_matrix(random_psd_matrix(rng, 4))
        trace = run_kgd(K, rng.normal(0, 1, 4), KgdConfig(0.5, 3))
        path = tmp_path / "trace.csv"
        trace_to_csv(trace, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "t,inc_empirical,inc_rkhs,residual_l2"
        assert len(lines) == 5


class TestSpectralSolution:
    def test_zero_iterations(self, rng):
        s = eigendecompose(as_kernel_matrix(np.eye(4)))
        np.testing.assert_array_equal(
            spectral_solution(s, rng.normal(0, 1, 4), 0.5, 0), np.zeros(4)
        )

    def test_single_step_filter(self, rng):
        K = random_psd_matrix(rng, 6)
        s = eigendecompose(as_kernel_matrix(K))
        y = rng.normal(0, 1, 6)
        np.testing.assert_allclose(
            spectral_solution(s, y, 0.7, 1), 0.7 / 6 * y, atol=1e-12
        )

    def test_zero_eigenvalue_handled(self):
        # rank-deficient matrix exercises the t*beta limit of the filter
        K = np.diag([2.0, 0.0])
        s = eigendecompose(as_kernel_matrix(K))
        y = np.array([1.0, 1.0])
        out = spectral_solution(s, y, 0.5, 10)
        # zero mode integrates the gradient linearly: (1/n) * t * beta * y_i
        assert out[1] == pytest.approx(0.5 * 10 * 1.0 / 2, rel=1e-12)

    def test_matches_iterative_path(self, rng):
        K = random_psd_matrix(rng, 10, scale=5.0)
        y = rng.normal(0, 1, 10)
        beta = 0.95 * 10 / np.linalg.eigvalsh(K)[-1]
        trace = run_kgd(as_kernel_matrix(K), y, KgdConfig(beta, 150))
        s = eigendecompose(as_kernel_matrix(K))
        worst = 0.0
        for t in range(1, 151):
            oracle = spectral_solution(s, y, beta, t)
            err = np.linalg.norm(trace.coefficients[t] - oracle)
            worst = max(worst, err / max(np.linalg.norm(oracle), 1e-300))
        assert worst <= 1e-8


class TestWeightedNorm:
    def test_zero_vector(self, rng):
        K = as_kernel_matrix(random_psd_matrix(rng, 5))
        assert weighted_rkhs_norm(K, np.zeros(5), 0.3) == 0.0

    def test_small_lambda_limit(self, rng):
        K = random_psd_matrix(rng, 6)
        dc = rng.normal(0, 1, 6)
        emp = np.sqrt((K @ dc) @ (K @ dc) / 6)
        val = weighted_rkhs_norm(as_kernel_matrix(K), dc, 1e-12)
        assert val == pytest.approx(emp, rel=1e-5)

    def test_identity_decomposition(self, rng):
        K = random_psd_matrix(rng, 7, scale=2.0)
        dc = rng.normal(0, 1, 7)
        lam = 0.37
        emp_sq = (K @ dc) @ (K @ dc) / 7
        rkhs_sq = dc @ K @ dc
        expect = np.sqrt(emp_sq + lam * rkhs_sq)
        assert weighted_rkhs_norm(as_kernel_matrix(K), dc, lam) == pytest.approx(
            expect, rel=1e-10
        )


class TestPredict:
    def test_zero_coefficients(self, rng):
        spec = KernelSpec("sobolev_min", 1)
        X = rng.uniform(0, 1, (5, 1))
        out = predict(spec, X, np.zeros(5), rng.uniform(0, 1, (3, 1)))
        np.testing.assert_array_equal(out, np.zeros(3))

    def test_gram_consistency(self, rng):
        spec = KernelSpec("wendland_3d", 3)
        X = rng.uniform(0, 1, (6, 3))
        c = rng.normal(0, 1, 6)
        K = build_kernel_matrix(spec, X).entries
        np.testing.assert_allclose(predict(spec, X, c, X), K @ c, atol=1e-12)

    def test_hand_computed_sums(self):
        spec = KernelSpec("sobolev_min", 1)
        X = np.array([[0.1], [0.4], [0.9]])
        c = np.array([1.0, -2.0, 0.5])
        q = np.array([[0.3]])
        expect = sum(
            c[i] * eval_kernel(spec, X[i], q[0]) for i in range(3)
        )
        assert predict(spec, X, c, q)[0] == pytest.approx(expect, rel=1e-14)


def test_spectral_radius_power_iteration(rng):
    K = random_psd_matrix(rng, 20, scale=3.0)
    exact = np.linalg.eigvalsh(K)[-1]
    assert spectral_radius(K) == pytest.approx(exact, rel=1e-6)
