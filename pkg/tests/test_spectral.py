import math

import numpy as np
import pytest

from kgdselect.datagen import gen_dataset
from kgdselect.errors import NumericError
from kgdselect.kernels import KernelSpec, build_kernel_matrix
from kgdselect.spectral import (
    Spectrum,
    build_tables,
    concentration_u,
    eigendecompose,
    empirical_effective_dimension,
    local_rademacher,
    sudden_stop_horizon,
    tables_to_csv,
    variance_proxy_w,
)
from tests.conftest import as_kernel_matrix, random_psd_matrix


def spectrum_of(K):
    return eigendecompose(as_kernel_matrix(K))


class TestEigendecompose:
    def test_identity(self):
        s = spectrum_of(np.eye(4))
        np.testing.assert_array_equal(s.eigenvalues, np.ones(4))

    def test_diagonal(self):
        s = spectrum_of(np.diag([3.0, 2.0, 1.0]))
        np.testing.assert_allclose(s.eigenvalues, [3, 2, 1], atol=1e-14)
        # eigenvectors permute the axes
        np.testing.assert_allclose(np.abs(s.eigenvectors), np.eye(3)[:, [0, 1, 2]],
                                   atol=1e-12)

    def test_reconstruction(self, rng):
        K = random_psd_matrix(rng, 10)
        s = spectrum_of(K)
        R = s.eigenvectors @ np.diag(s.eigenvalues) @ s.eigenvectors.T
        assert np.linalg.norm(R - K) <= 1e-8 * np.linalg.norm(K)

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            eigendecompose(np.array([[1.0, 0.5], [0.2, 1.0]]))

    def test_rejects_indefinite(self):
        with pytest.raises(NumericError):
            eigendecompose(np.diag([1.0, -0.5]))

    def test_negative_noise_clipped(self):
        s = spectrum_of(np.diag([1.0, 0.0]))
        assert np.all(s.eigenvalues >= 0.0)


class TestEffectiveDimension:
    def test_identity_value(self):
        s = spectrum_of(np.eye(4))
        assert empirical_effective_dimension(s, 4, 0.25) == pytest.approx(2.0)

    def test_heavy_regularization_kills_everything(self, rng):
        s = spectrum_of(random_psd_matrix(rng, 12))
        assert empirical_effective_dimension(s, 12, 1e12) < 1e-6

    def test_trace_by_solves_oracle(self, rng):
        K = random_psd_matrix(rng, 10, scale=5.0)
        s = spectrum_of(K)
        lam = 0.1
        direct = np.trace(np.linalg.solve(lam * 10 * np.eye(10) + K, K))
        value = empirical_effective_dimension(s, 10, lam)
        assert value == pytest.approx(direct, rel=1e-8)

    def test_bounded_by_positive_count(self, rng):
        K = random_psd_matrix(rng, 15)
        s = spectrum_of(K)
        count = int(np.sum(s.eigenvalues > 0))
        for lam in (1e-6, 0.01, 1.0):
            nd = empirical_effective_dimension(s, 15, lam)
            assert 0.0 <= nd <= count

    def test_strictly_decreasing_in_lambda(self, rng):
        s = spectrum_of(random_psd_matrix(rng, 8))
        lams = np.logspace(-4, 2, 20)
        vals = [empirical_effective_dimension(s, 8, l) for l in lams]
        assert np.all(np.diff(vals) < 0)

    def test_rejects_nonpositive_lambda(self, rng):
        s = spectrum_of(np.eye(3))
        with pytest.raises(ValueError):
            empirical_effective_dimension(s, 3, 0.0)


class TestVarianceProxy:
    def test_identity_hand_value(self):
        # N_D(1) = 4/5 -> floor at 1 -> 1/4 + (1 + 1/2)/2 = 1
        s = spectrum_of(np.eye(4))
        assert variance_proxy_w(s, 4, 1) == pytest.approx(1.0)

    def test_monotone_sweep(self, rng):
        K = random_psd_matrix(rng, 10, scale=4.0)
        s = spectrum_of(K)
        vals = [variance_proxy_w(s, 10, t) for t in range(1, 11)]
        assert vals == sorted(vals)

    def test_endpoint_dominates_start(self, rng):
        s = spectrum_of(random_psd_matrix(rng, 10))
        assert variance_proxy_w(s, 10, 10) >= variance_proxy_w(s, 10, 1)


class TestConcentration:
    def test_small_for_large_samples(self):
        s = Spectrum(eigenvalues=np.ones(4), eigenvectors=np.eye(4))
        assert concentration_u(s, 10**6, 1, 0.05) < 0.01

    def test_monotone_in_confidence(self, rng):
        s = spectrum_of(random_psd_matrix(rng, 10))
        assert concentration_u(s, 10, 3, 0.05) > concentration_u(s, 10, 3, 0.5)

    def test_monotone_sweep(self, rng):
        s = spectrum_of(random_psd_matrix(rng, 10, scale=3.0))
        vals = [concentration_u(s, 10, t, 0.05) for t in range(1, 11)]
        assert vals == sorted(vals)

    def test_rejects_bad_delta(self, rng):
        s = spectrum_of(np.eye(3))
        for bad in (0.0, 1.0, -0.1, 2.0):
            with pytest.raises(ValueError):
                concentration_u(s, 3, 1, bad)


class TestSuddenStop:
    def test_interior_on_paper_kernel(self):
        data = gen_dataset("g1", 2000, 0.6, seed=7)
        spec = KernelSpec("sobolev_min", 1)
        s = eigendecompose(build_kernel_matrix(spec, data.inputs))
        T = sudden_stop_horizon(s, 2000, spec.kappa, 0.05)
        assert 1 <= T < 2000

    def test_monotone_in_delta(self, rng):
        K = random_psd_matrix(rng, 200, scale=10.0)
        s = spectrum_of(K)
        assert sudden_stop_horizon(s, 200, 1.0, 0.5) >= sudden_stop_horizon(
            s, 200, 1.0, 0.01
        )

    def test_zero_spectrum_maximizes_horizon(self, rng):
        # the zero operator minimizes the concentration term at every t,
        # so its horizon dominates any other spectrum's at equal n/kappa/delta
        n = 300
        zero = Spectrum(eigenvalues=np.zeros(n), eigenvectors=np.eye(n))
        other = spectrum_of(random_psd_matrix(rng, n, scale=5.0))
        t_zero = sudden_stop_horizon(zero, n, 1.0, 0.05)
        t_other = sudden_stop_horizon(other, n, 1.0, 0.05)
        assert t_zero >= t_other

    def test_warns_when_degenerate(self):
        # huge effective dimension at tiny n forces the bound to fail at t=1
        s = Spectrum(eigenvalues=np.full(4, 1e12), eigenvectors=np.eye(4))
        with pytest.warns(RuntimeWarning):
            T = sudden_stop_horizon(s, 4, 10.0, 0.01)
        assert T == 1


class TestLocalRademacher:
    def test_saturated_at_large_epsilon(self, rng):
        K = random_psd_matrix(rng, 10)
        s = spectrum_of(K)
        mu = s.eigenvalues / 10
        eps = math.sqrt(mu[0]) + 1.0
        expected = math.sqrt(np.sum(mu) / 10)
        assert local_rademacher(s, 10, eps) == pytest.approx(expected, rel=1e-12)

    def test_vanishes_at_tiny_epsilon(self, rng):
        s = spectrum_of(random_psd_matrix(rng, 10))
        assert local_rademacher(s, 10, 1e-9) <= 1e-9

    def test_brute_force_oracle(self, rng):
        K = random_psd_matrix(rng, 10, scale=2.0)
        s = spectrum_of(K)
        eps = 0.2
        mu = np.linalg.eigvalsh(K) / 10
        brute = math.sqrt(sum(min(m, eps**2) for m in mu) / 10)
        assert local_rademacher(s, 10, eps) == pytest.approx(brute, rel=1e-12)

    def test_monotone_in_epsilon(self, rng):
        s = spectrum_of(random_psd_matrix(rng, 8))
        eps = np.linspace(1e-3, 2.0, 25)
        vals = [local_rademacher(s, 8, e) for e in eps]
        assert np.all(np.diff(vals) >= -1e-15)


class TestTables:
    def test_matches_scalar_functions(self, rng):
        K = random_psd_matrix(rng, 12, scale=6.0)
        s = spectrum_of(K)
        tab = build_tables(s, 12, 12, delta=0.1, kappa=1.3)
        for t in (1, 5, 12):
            assert tab.w(t) == pytest.approx(variance_proxy_w(s, 12, t), rel=1e-12)
            assert tab.u(t) == pytest.approx(
                concentration_u(s, 12, t, 0.1), rel=1e-12
            )
            assert tab.effective_dimension[t] == pytest.approx(
                empirical_effective_dimension(s, 12, 1.0 / t), rel=1e-12
            )
        assert tab.sudden_stop_T == sudden_stop_horizon(s, 12, 1.3, 0.1)

    def test_tables_monotone(self, rng):
        s = spectrum_of(random_psd_matrix(rng, 30, scale=8.0))
        tab = build_tables(s, 30, 30, delta=0.05, kappa=1.0)
        assert np.all(np.diff(tab.w_values[1:]) >= -1e-15)
        assert np.all(np.diff(tab.u_values[1:]) >= -1e-15)

    def test_csv_dump(self, tmp_path, rng):
        s = spectrum_of(random_psd_matrix(rng, 6))
        tab = build_tables(s, 6, 6)
        path = tmp_path / "tables.csv"
        tables_to_csv(tab, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "t,N_D,W,U"
        assert len(lines) == 7
