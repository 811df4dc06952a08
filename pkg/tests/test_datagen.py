import math

import numpy as np
import pytest

from kgdselect.datagen import (
    ShiftConfig,
    add_truncated_gaussian_noise,
    dataset_to_csv,
    denormalize,
    gen_dataset,
    gen_shifted_testset,
    kl_divergence,
    load_geomagnetic_csv,
    normalize_like,
    target_g1,
    target_g2,
)
from kgdselect.errors import IngestionError


class TestTargets:
    def test_g1_values(self):
        assert target_g1(0.25) == 0.25
        assert target_g1(0.5) == 0.5
        assert target_g1(0.75) == pytest.approx(0.25)

    def test_g1_continuity_at_half(self):
        eps = 1e-9
        assert abs(target_g1(0.5 - eps) - target_g1(0.5 + eps)) < 1e-8

    def test_g2_values(self):
        assert target_g2(np.zeros(3)) == 3.0
        assert target_g2(np.array([1.0, 0.0, 0.0])) == 0.0
        assert target_g2(np.array([0.5, 0.0, 0.0])) == pytest.approx(0.32421875)

    def test_g2_outside_support(self):
        assert target_g2(np.array([1.5, 0.0, 0.0])) == 0.0

    def test_g2_smooth_at_boundary(self):
        # value and radial derivative both vanish at r = 1
        eps = 1e-3
        inner = target_g2(np.array([1.0 - eps, 0.0, 0.0]))
        assert inner / eps < 1e-5


class TestGenDataset:
    def test_no_noise_means_clean(self):
        data = gen_dataset("g1", 50, 0.0, seed=0)
        np.testing.assert_array_equal(data.outputs, data.clean_targets)

    def test_seed_determinism(self):
        a = gen_dataset("g2", 40, 0.6, seed=5)
        b = gen_dataset("g2", 40, 0.6, seed=5)
        np.testing.assert_array_equal(a.inputs, b.inputs)
        np.testing.assert_array_equal(a.outputs, b.outputs)

    def test_noise_std_band(self):
        data = gen_dataset("g1", 100_000, 0.6, seed=1)
        sd = np.std(data.outputs - data.clean_targets)
        assert 0.594 <= sd <= 0.606

    def test_inputs_in_unit_cube(self):
        data = gen_dataset("g2", 500, 0.1, seed=2)
        assert data.inputs.shape == (500, 3)
        assert data.inputs.min() >= 0.0 and data.inputs.max() <= 1.0

    def test_rejects_unknown_target(self):
        with pytest.raises(ValueError):
            gen_dataset("g3", 10, 0.1, seed=0)


class TestShiftedTestset:
    def test_unshifted_law(self):
        data = gen_shifted_testset("g1", 200, ShiftConfig(b=1.0), seed=3)
        assert data.inputs.max() <= 1.0
        np.testing.assert_array_equal(data.outputs, data.clean_targets)

    def test_shift_frequency(self):
        data = gen_shifted_testset("g1", 60_000, ShiftConfig(b=1.5), seed=4)
        frac = np.mean(data.inputs[:, 0] > 1.0)
        assert abs(frac - 1.0 / 3.0) < 0.01

    def test_determinism(self):
        a = gen_shifted_testset("g1", 100, ShiftConfig(b=1.2), seed=9)
        b = gen_shifted_testset("g1", 100, ShiftConfig(b=1.2), seed=9)
        np.testing.assert_array_equal(a.inputs, b.inputs)

    def test_rejects_b_below_one(self):
        with pytest.raises(ValueError):
            ShiftConfig(b=0.9)


class TestKlDivergence:
    def test_identical_samples_near_zero(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(0, 1, 2000)
        assert kl_divergence(x, x.copy()) <= 0.01

    def test_uniform_pair_calibration(self):
        rng = np.random.default_rng(1)
        p = rng.uniform(0, 1.0, 4000)
        q = rng.uniform(0, 1.5, 4000)
        est = kl_divergence(p, q)
        assert abs(est - math.log(1.5)) <= 0.08

    def test_asymmetry(self):
        rng = np.random.default_rng(2)
        p = rng.uniform(0, 1.0, 3000)
        q = rng.uniform(0, 1.5, 3000)
        assert kl_divergence(p, q) != kl_divergence(q, p)
        # the reverse direction diverges on the unsupported region
        assert kl_divergence(q, p) > kl_divergence(p, q)

    def test_non_negative(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            p = rng.uniform(0, 1, 500)
            q = rng.uniform(0, 1.2, 500)
            assert kl_divergence(p, q) >= 0.0

    def test_degenerate_sample_rejected(self):
        with pytest.raises(ValueError):
            kl_divergence(np.array([0.5]), np.array([0.1, 0.2]))


class TestGeomagneticCsv:
    def _write(self, path, rows, header="phi,theta,h,total_intensity,declination"):
        path.write_text(header + "\n" + "\n".join(rows) + "\n")

    def test_normalization_endpoints(self, tmp_path):
        f = tmp_path / "geo.csv"
        self._write(f, [
            "-90,0,0,30000,1.0",
            "0,90,300,40000,2.0",
            "90,180,600,50000,3.0",
        ])
        data = load_geomagnetic_csv(f, "total_intensity")
        assert data.inputs.min() == -1.0 and data.inputs.max() == 1.0
        np.testing.assert_array_equal(data.inputs[0], [-1.0, -1.0, -1.0])
        np.testing.assert_array_equal(data.inputs[2], [1.0, 1.0, 1.0])
        np.testing.assert_array_equal(data.outputs, [30000, 40000, 50000])

    def test_missing_column_named(self, tmp_path):
        f = tmp_path / "geo.csv"
        self._write(f, ["1,2,3"], header="phi,theta,declination")
        with pytest.raises(IngestionError, match="h"):
            load_geomagnetic_csv(f, "declination")

    def test_unparsable_row_reports_index(self, tmp_path):
        f = tmp_path / "geo.csv"
        self._write(f, ["1,2,3,4,5", "1,2,oops,4,5"])
        with pytest.raises(IngestionError, match="row 3"):
            load_geomagnetic_csv(f, "total_intensity")

    def test_round_trip_denormalization(self, tmp_path):
        f = tmp_path / "geo.csv"
        rng = np.random.default_rng(7)
        rows = [
            f"{a:.8f},{b:.8f},{c:.8f},{d:.4f},{e:.4f}"
            for a, b, c, d, e in zip(
                rng.uniform(-90, 90, 20), rng.uniform(-180, 180, 20),
                rng.uniform(0, 600, 20), rng.uniform(2e4, 6e4, 20),
                rng.uniform(-20, 20, 20),
            )
        ]
        self._write(f, rows)
        data = load_geomagnetic_csv(f, "total_intensity")
        raw = denormalize(data)
        parsed = np.array([[float(v) for v in r.split(",")[:3]] for r in rows])
        np.testing.assert_allclose(raw, parsed, atol=1e-12 * 600)

    def test_normalize_like_uses_reference_frame(self, tmp_path):
        f = tmp_path / "geo.csv"
        self._write(f, ["-10,0,0,1,1", "10,20,100,2,2"])
        data = load_geomagnetic_csv(f, "total_intensity")
        mapped = normalize_like(np.array([[0.0, 10.0, 50.0]]), data)
        np.testing.assert_allclose(mapped, [[0.0, 0.0, 0.0]], atol=1e-14)

    def test_bad_value_column(self, tmp_path):
        f = tmp_path / "geo.csv"
        self._write(f, ["1,2,3,4,5"])
        with pytest.raises(ValueError):
            load_geomagnetic_csv(f, "inclination")


class TestTruncatedNoise:
    def test_zero_sigma_identity(self):
        data = gen_dataset("g1", 20, 0.0, seed=0)
        out = add_truncated_gaussian_noise(data, 0.0, seed=1)
        assert out is data

    def test_all_draws_within_bound(self):
        data = gen_dataset("g1", 5000, 0.0, seed=1)
        out = add_truncated_gaussian_noise(data, 2.5, truncation=2.0, seed=2)
        noise = out.outputs - out.clean_targets
        assert np.max(np.abs(noise)) <= 2.0 * 2.5

    def test_variance_shrinkage_ratio(self):
        data = gen_dataset("g1", 200_000, 0.0, seed=3)
        out = add_truncated_gaussian_noise(data, 1.0, truncation=2.0, seed=4)
        ratio = np.std(out.outputs - out.clean_targets)
        assert 0.85 <= ratio <= 0.95

    def test_pre_noise_values_become_clean_targets(self):
        data = gen_dataset("g1", 50, 0.0, seed=5)
        out = add_truncated_gaussian_noise(data, 0.3, seed=6)
        np.testing.assert_array_equal(out.clean_targets, data.outputs)


def test_dataset_csv_export(tmp_path):
    data = gen_dataset("g2", 10, 0.2, seed=0)
    path = tmp_path / "data.csv"
    dataset_to_csv(data, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "x1,x2,x3,y,clean"
    assert len(lines) == 11
