import numpy as np
import pytest

import oracles
from pufkey.data_io import ROArrayMeasurement, generate_synthetic
from pufkey.transforms import (AlreadyDecorrelatedError, SearchSpaceError,
                               TransformMatrix, build_large_transform,
                               decorrelation_efficiency, enumerate_seed_matrices,
                               fast_dwht_2d, forward_2d, inverse_2d,
                               load_transform_family, population_coefficients,
                               rank_transforms, sample_covariance,
                               save_transform_family, select_transform,
                               sylvester_hadamard)


class TestEnumeration:
    def test_dim1(self):
        seeds = enumerate_seed_matrices(1)
        assert len(seeds) == 2
        assert seeds[0].entries.tolist() == [[1]]
        assert seeds[1].entries.tolist() == [[-1]]

    def test_dim2_against_brute_force(self):
        seeds = enumerate_seed_matrices(2)
        oracle = oracles.brute_force_orthogonal_sign_matrices(2)
        assert len(seeds) == len(oracle) == 8
        assert [s.entries.tolist() for s in seeds] == [list(map(list, o)) for o in oracle]

    def test_dim3_has_none(self):
        # odd-length +-1 rows cannot be orthogonal
        assert enumerate_seed_matrices(3) == []

    def test_dim4_against_brute_force(self):
        seeds = enumerate_seed_matrices(4)
        oracle = oracles.brute_force_orthogonal_sign_matrices(4)
        assert len(seeds) == len(oracle)
        assert len(seeds) == 768

    def test_all_seeds_orthogonal(self):
        for s in enumerate_seed_matrices(2):
            gram = s.entries @ s.entries.T
            assert np.array_equal(gram, 2 * np.eye(2, dtype=int))

    def test_too_large(self):
        with pytest.raises(SearchSpaceError, match="too large"):
            enumerate_seed_matrices(6)


class TestBuildLarge:
    def test_sylvester_from_h2(self):
        h2 = TransformMatrix.from_signs([[1, 1], [1, -1]])
        h4 = build_large_transform(h2, h2)
        assert np.array_equal(h4.entries, sylvester_hadamard(4).entries)

    def test_random_seed_pairs_stay_orthogonal(self):
        seeds = enumerate_seed_matrices(4)
        rng = np.random.default_rng(42)
        for _ in range(25):
            a, b = rng.integers(0, len(seeds), size=2)
            big = build_large_transform(seeds[a], seeds[b])
            gram = big.entries @ big.entries.T
            assert np.array_equal(gram, 16 * np.eye(16, dtype=int))

    def test_family_cardinality(self):
        # Pairing 768 seeds gives 589824 16x16 transforms; the 12288-strong
        # family quoted for this construction upstream is not reproduced by
        # plain pairing and is reported, not forced.
        seeds = enumerate_seed_matrices(4)
        assert len(seeds) ** 2 == 589824


class TestForwardInverse:
    def test_constant_input_is_dc_only(self):
        h = sylvester_hadamard(4)
        grid = forward_2d(h, np.full((4, 4), 7.5))
        assert grid.coefficient(1) != 0.0
        assert np.allclose(grid.values.flat[1:], 0.0, atol=1e-12)

    def test_round_trip(self):
        rng = np.random.default_rng(3)
        h = sylvester_hadamard(8)
        x = 100.0 + rng.standard_normal((8, 8))
        back = inverse_2d(h, forward_2d(h, x))
        assert np.max(np.abs(back.values - x)) <= 1e-9 * np.max(np.abs(x))

    def test_against_naive_triple_loop(self):
        rng = np.random.default_rng(4)
        seeds = enumerate_seed_matrices(4)
        t = seeds[100]
        x = 100.0 + rng.standard_normal((4, 4))
        got = forward_2d(t, x).values
        expected = oracles.naive_forward_2d(t.entries.tolist(), t.scale, x.tolist())
        assert np.max(np.abs(got - expected)) <= 1e-12 * np.max(np.abs(expected))

    def test_size_mismatch(self):
        h = sylvester_hadamard(4)
        with pytest.raises(ValueError, match="size"):
            forward_2d(h, np.ones((8, 8)))
        with pytest.raises(ValueError, match="size"):
            inverse_2d(h, np.ones((8, 8)))

    def test_accepts_measurement(self):
        h = sylvester_hadamard(2)
        meas = ROArrayMeasurement(np.array([[1.0, 2.0], [3.0, 4.0]]))
        grid = forward_2d(h, meas)
        assert grid.side == 2

    def test_coefficient_indexing_row_major(self):
        h = sylvester_hadamard(4)
        grid = forward_2d(h, np.arange(1.0, 17.0).reshape(4, 4))
        for j in range(1, 17):
            row, col = (j - 1) // 4, (j - 1) % 4
            assert grid.coefficient(j) == grid.values[row, col]


class TestFastDwht:
    def test_matches_dense_multiply(self):
        rng = np.random.default_rng(5)
        for side in (2, 4, 16):
            x = 100.0 + rng.standard_normal((side, side))
            fast = fast_dwht_2d(x).values
            dense = forward_2d(sylvester_hadamard(side), x).values
            assert np.max(np.abs(fast - dense)) <= 1e-12 * np.max(np.abs(dense))

    def test_constant_input(self):
        grid = fast_dwht_2d(np.full((8, 8), 3.0))
        assert np.allclose(grid.values.flat[1:], 0.0, atol=1e-12)

    def test_impulse_input(self):
        x = np.zeros((8, 8))
        x[2, 5] = 1.0
        grid = fast_dwht_2d(x)
        assert np.allclose(np.abs(grid.values), np.abs(grid.values[0, 0]))

    def test_non_power_of_two(self):
        with pytest.raises(ValueError, match="power of two"):
            fast_dwht_2d(np.ones((3, 3)))


class TestDecorrelationEfficiency:
    def test_diagonal_after_is_one(self):
        c = np.array([[2.0, 0.5], [0.5, 1.0]])
        assert decorrelation_efficiency(c, np.diag(np.diag(c))) == 1.0

    def test_unchanged_is_zero(self):
        c = np.array([[2.0, 0.5], [0.5, 1.0]])
        assert decorrelation_efficiency(c, c) == 0.0

    def test_already_decorrelated_error(self):
        with pytest.raises(AlreadyDecorrelatedError):
            decorrelation_efficiency(np.eye(3), np.eye(3))

    def test_synthetic_field_under_dwht(self):
        pop = generate_synthetic(num_devices=300, shape=8, correlation_length=4.0,
                                 mean_freq=100.0, device_sigma=1.0, noise_sigma=0.0,
                                 repeats=1, seed=606)
        enrollments = [d.enrollment for d in pop.devices]
        before = sample_covariance(enrollments)
        after = sample_covariance([fast_dwht_2d(m) for m in enrollments])
        eff = decorrelation_efficiency(before, after)
        assert 0.0 < eff <= 1.0
        # oracle: recompute both off-diagonal sums from the raw samples
        flat = np.stack([m.values.ravel() for m in enrollments])
        cov_o = np.cov(flat, rowvar=False)
        tflat = np.stack([fast_dwht_2d(m).values.ravel() for m in enrollments])
        cov_t = np.cov(tflat, rowvar=False)
        off = lambda c: np.abs(c).sum() - np.abs(np.diag(c)).sum()
        assert eff == pytest.approx(1.0 - off(cov_t) / off(cov_o), abs=1e-12)

    def test_shape_checks(self):
        with pytest.raises(ValueError):
            decorrelation_efficiency(np.ones((2, 3)), np.ones((3, 3)))
        with pytest.raises(ValueError, match="symmetric"):
            decorrelation_efficiency(np.array([[1.0, 0.9], [0.1, 1.0]]), np.eye(2))


class TestSelectTransform:
    def test_single_candidate(self, small_population):
        h = sylvester_hadamard(4)
        assert select_transform([h], small_population, 2) is h

    def test_identical_candidates_keep_first(self, small_population):
        h1 = sylvester_hadamard(4)
        h2 = sylvester_hadamard(4)
        assert select_transform([h1, h2], small_population, 2) is h1

    def test_prefers_lower_worst_error(self, small_population):
        seeds = enumerate_seed_matrices(4)
        candidates = [seeds[0], seeds[400]]
        scores = rank_transforms(candidates, small_population, 2)
        assert scores[0] != scores[1]
        best = select_transform(candidates, small_population, 2)
        assert best is candidates[int(np.argmin(scores))]
        # oracle: recompute each candidate's worst coefficient error directly
        from pufkey.models import fit_coefficient_models
        from pufkey.quantizer import correctness_probability, design_boundaries
        for cand, score in zip(candidates, scores):
            enroll, per_dev = population_coefficients(small_population, cand)
            models = fit_coefficient_models(enroll, per_dev)
            worst = max(1.0 - correctness_probability(design_boundaries(mod, 2),
                                                      mod.sigma_noise, 0.0)
                        for mod in models.values())
            assert score == pytest.approx(worst, abs=1e-12)

    def test_empty_candidates(self, small_population):
        with pytest.raises(ValueError, match="candidate"):
            select_transform([], small_population, 2)


def test_family_file_round_trip(tmp_path):
    seeds = enumerate_seed_matrices(2)
    family = [build_large_transform(a, b) for a in seeds[:3] for b in seeds[:2]]
    path = tmp_path / "family.txt"
    save_transform_family(path, family)
    loaded = load_transform_family(path)
    assert len(loaded) == len(family)
    for orig, back in zip(family, loaded):
        assert np.array_equal(orig.entries, back.entries)
        assert orig.scale == back.scale


def test_transform_matrix_validation():
    with pytest.raises(ValueError, match="orthogonal"):
        TransformMatrix.from_signs([[1, 1], [1, 1]])
    with pytest.raises(ValueError, match="\\+1 or -1"):
        TransformMatrix.from_signs([[1, 2], [1, -1]])
