import csv
import math

import numpy as np
import pytest

from clusterlsh.errors import InvalidArgument
from clusterlsh.randexp import (
    eigenvalue_experiment,
    eigenvalue_sweep,
    metric_probability_experiment,
    metric_threshold,
    random_gram,
    random_lsh_precondition,
    random_unit_vectors,
)


class TestVectors:
    def test_unit_norm(self):
        X = random_unit_vectors(50, 7, seed=1)
        np.testing.assert_allclose(np.linalg.norm(X, axis=1), 1.0, atol=1e-12)

    def test_one_dimensional(self):
        assert set(np.unique(random_unit_vectors(30, 1, seed=2))) <= {-1.0, 1.0}

    def test_deterministic(self):
        np.testing.assert_array_equal(random_unit_vectors(3, 4, 5), random_unit_vectors(3, 4, 5))

    @pytest.mark.parametrize("d", [3, 10])
    def test_squared_inner_product_mean(self, d):
        X = random_unit_vectors(10_000, d, seed=d)
        Y = random_unit_vectors(10_000, d, seed=d + 100)
        sq = np.sum(X * Y, axis=1) ** 2
        se = sq.std(ddof=1) / math.sqrt(sq.size)
        assert abs(sq.mean() - 1 / d) <= 3 * se

    def test_gram_is_exactly_symmetric_unit_diagonal(self):
        Z = random_gram(6, 3, 0)
        assert Z.is_symmetric and Z.has_unit_diagonal


class TestMetricExperiment:
    def test_threshold(self):
        assert metric_threshold(16, 0.1) == 202

    def test_two_points_always_metric(self):
        assert metric_probability_experiment(2, 3, trials=100).fraction == 1.0

    def test_five_points_in_plane_never_metric(self):
        rep = metric_probability_experiment(5, 2, trials=500, seed=1)
        assert rep.fraction == 0.0
        assert rep.passed  # no claim below the threshold

    def test_report_fields(self, tmp_path):
        rep = metric_probability_experiment(4, 3, trials=100, seed=3)
        assert 0.0 <= rep.fraction_metric <= 1.0
        assert rep.bound_params["d_threshold"] == metric_threshold(4, 0.1)
        assert rep.lambda_min_stats[0] >= -1e-9
        path = tmp_path / "t.csv"
        rep.write_trials_csv(path)
        with open(path) as fh:
            assert len(list(csv.DictReader(fh))) == 100
        assert "per_trial" not in rep.as_dict()

    def test_requires_100_trials(self):
        with pytest.raises(InvalidArgument):
            metric_probability_experiment(4, 3, trials=10)

    def test_reproducible(self):
        a = metric_probability_experiment(6, 4, trials=100, seed=9, spectra=False)
        b = metric_probability_experiment(6, 4, trials=100, seed=9, spectra=False)
        assert [r["metric"] for r in a.per_trial] == [r["metric"] for r in b.per_trial]


class TestEigenExperiment:
    def test_high_dimension(self):
        assert eigenvalue_experiment(8, 8192, 0.2, trials=100).fraction >= 0.95

    def test_low_dimension(self):
        assert eigenvalue_experiment(8, 8, 0.1, trials=100).fraction <= 0.05

    def test_sweep_improves(self):
        fr = [r.fraction for r in eigenvalue_sweep(6, [16, 128, 1024, 8192], 0.2, trials=60)]
        assert fr == sorted(fr) and fr[-1] == 1.0

    def test_orthonormal_rows(self):
        from clusterlsh.simcore import spectrum
        Q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((6, 4)))
        G = Q.T @ Q
        G = (G + G.T) / 2
        np.testing.assert_allclose(spectrum(G).eigenvalues, 1.0, atol=1e-12)

    def test_t_range(self):
        with pytest.raises(InvalidArgument):
            eigenvalue_experiment(4, 4, 1.5)


class TestGramInvariants:
    def test_psd_and_log_bound(self):
        from clusterlsh.symcheck import generalized_alpha_upper
        for i in range(20):
            Z = random_gram(7, 3 + i % 5, np.random.default_rng([1, i]))
            assert np.linalg.eigvalsh(Z.values).min() >= -1e-9
            assert generalized_alpha_upper(Z, C=1) <= math.log(7) + 1e-9

    def test_passed_flags(self):
        for rep in (metric_probability_experiment(6, 3, trials=100, seed=2),
                    eigenvalue_experiment(6, 3, 0.5, trials=30, seed=2),
                    random_lsh_precondition(6, 3, trials=30, seed=2)):
            assert rep.passed and rep.lambda_min_stats[0] >= -1e-9


class TestLshPrecondition:
    def test_monotone_sweep(self):
        n = 8
        L = math.log(n) ** 2
        ds = [n, 4 * n, math.ceil(n * L), math.ceil(8 * n * L)]
        fr = [random_lsh_precondition(n, d, C0=1, trials=100, seed=2).fraction for d in ds]
        assert fr == sorted(fr)

    def test_large_d(self):
        assert random_lsh_precondition(8, 100_000, trials=20).fraction == 1.0

    def test_two_points_algebra(self):
        rep = random_lsh_precondition(2, 3, C0=1, trials=100, seed=4)
        level = 1 / math.log(2)
        for i, row in enumerate(rep.per_trial):
            Z = random_gram(2, 3, np.random.default_rng([4, i]))
            assert row["precondition"] == int(abs(Z.values[0, 1]) <= level + 1e-15)

    def test_C0_positive(self):
        with pytest.raises(InvalidArgument):
            random_lsh_precondition(4, 4, C0=0)
