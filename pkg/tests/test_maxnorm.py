import numpy as np
import pytest

from clusterlsh.errors import SolverFailure
from clusterlsh.maxnorm import SolverConfig, centered_max_norm, max_norm, rank_entry_bound, witness_t
from clusterlsh.simcore import random_corpus, theorem2_matrix

from oracles import sdp_maxnorm

FAST = SolverConfig(restarts=4)


def check_witness(fac, Z, tol=1e-6):
    np.testing.assert_allclose(fac.U @ fac.V.T, Z, atol=tol)
    assert fac.t == witness_t(fac.U, fac.V)
    assert fac.residual == float(np.max(np.abs(fac.U @ fac.V.T - Z)))
    assert fac.t >= np.max(np.abs(Z)) - 1e-9 - fac.residual
    assert not fac.U.flags.writeable


class TestMaxNorm:
    @pytest.mark.parametrize("Z,expected", [
        (np.array([[1.0, -1.0], [-1.0, 1.0]]), 1.0),
        (np.eye(3), 1.0),
        (np.eye(5), 1.0),
        (np.ones((2, 4)), 1.0),
    ])
    def test_exact_values(self, Z, expected):
        fac = max_norm(Z, FAST)
        check_witness(fac, Z)
        assert fac.t == pytest.approx(expected, abs=1e-6)

    @pytest.mark.parametrize("n", [4, 6, 8])
    def test_theorem2_matrix_at_most_three(self, n):
        Z = theorem2_matrix(n).values
        fac = max_norm(Z, FAST)
        check_witness(fac, Z)
        assert fac.t <= 3 + 1e-6

    @pytest.mark.parametrize("Z", random_corpus(5, (3, 4), seed=3) + random_corpus(3, 4, seed=4),
                             ids=lambda z: f"{z.shape}")
    def test_matches_sdp(self, Z):
        fac = max_norm(Z, FAST)
        check_witness(fac, Z.values)
        assert fac.t == pytest.approx(sdp_maxnorm(Z.values), abs=1e-5)

    def test_zero_matrix(self):
        fac = max_norm(np.zeros((2, 3)))
        assert fac.t == 0.0 and fac.residual == 0.0

    @pytest.mark.parametrize("c", [0.5, 2.0, -1.0])
    def test_scale_homogeneous(self, c):
        for Z in random_corpus(3, 4, seed=12):
            base = max_norm(Z, FAST).t
            assert max_norm(c * Z.values, FAST).t == pytest.approx(abs(c) * base, rel=1e-4)

    def test_deterministic(self, rng):
        Z = rng.uniform(-1, 1, size=(3, 3))
        a, b = max_norm(Z, FAST), max_norm(Z, FAST)
        np.testing.assert_array_equal(a.U, b.U)

    def test_unreachable_fit_raises(self):
        with pytest.raises(SolverFailure) as err:
            max_norm(np.eye(3), SolverConfig(rank=1, restarts=2))
        assert err.value.best_residual > 1e-6

    def test_triangle_inequality(self, rng):
        A, B = rng.uniform(-1, 1, size=(2, 3, 3))
        assert max_norm(A + B, FAST).t <= max_norm(A, FAST).t + max_norm(B, FAST).t + 1e-6


class TestCenteredMaxNorm:
    def test_all_ones(self):
        cm = centered_max_norm(np.ones((3, 3)))
        assert cm.value == 0.0 and cm.theta == 1.0

    def test_identity3(self):
        cm = centered_max_norm(np.eye(3), FAST)
        assert cm.value == pytest.approx(2 / 3, abs=1e-6)
        assert cm.theta == pytest.approx(1 / 3, abs=1e-4)

    def test_never_above_plain(self):
        Z = np.array([[1.0, -1.0], [-1.0, 1.0]])
        assert centered_max_norm(Z, FAST).value <= 1 + 1e-9

    @pytest.mark.parametrize("n,expected", [(4, 1.5), (6, None)])
    def test_theorem2(self, n, expected):
        Z = theorem2_matrix(n).values
        cm = centered_max_norm(Z, FAST)
        check_witness(cm.inner, Z - cm.theta)
        assert cm.value <= 3 + 1e-6
        if expected is not None:
            assert cm.value == pytest.approx(expected, abs=1e-6)

    @pytest.mark.parametrize("Z", random_corpus(4, 3, seed=8), ids=lambda z: "")
    def test_matches_sdp_and_golden(self, Z):
        joint = centered_max_norm(Z, FAST)
        ref = sdp_maxnorm(Z.values, centered=True)
        assert joint.value == pytest.approx(ref, abs=1e-5)
        golden = centered_max_norm(Z, SolverConfig(restarts=2), method="golden")
        assert golden.value == pytest.approx(ref, abs=1e-4)

    def test_shift_invariant(self, rng):
        Z = rng.uniform(-1, 1, size=(3, 3))
        a = centered_max_norm(Z, FAST)
        b = centered_max_norm(Z + 0.25, FAST)
        assert a.value == pytest.approx(b.value, abs=1e-6)

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            centered_max_norm(np.eye(2), method="newton")


class TestRankEntryBound:
    def test_rectangular(self):
        Z = np.linspace(-1, 1, 15).reshape(3, 5)
        out = rank_entry_bound(Z)
        assert out["bound"] == 3.0
        assert out["sqrt_bound"] == pytest.approx(np.sqrt(3))

    def test_zero(self):
        assert rank_entry_bound(np.zeros((2, 2)))["bound"] == 0.0

    def test_dominates(self):
        Z = np.array([[1.0, -1.0], [-1.0, 1.0]])
        assert rank_entry_bound(Z)["bound"] == 2.0 >= max_norm(Z).t - 1e-9
