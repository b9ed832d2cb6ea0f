"""Cholesky, triangular solve, and reparameterized MVN sampling."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from d2e.errors import DimensionMismatch, NotPositiveDefinite, SingularTriangular
from d2e.numerics import RngStream, Tape, cholesky_psd, sample_mvn, solve_lower
from d2e.numerics import ops

from fdcheck import assert_grads_match


class TestCholeskyPsd:
    def test_identity(self):
        assert np.allclose(cholesky_psd(np.eye(2), 0.0), np.eye(2))

    def test_2x2_closed_form(self):
        a = np.array([[4.0, 2.0], [2.0, 3.0]])
        expected = np.array([[2.0, 0.0], [1.0, np.sqrt(2.0)]])
        assert np.allclose(cholesky_psd(a, 0.0), expected, atol=1e-12)

    def test_random_reconstruction(self):
        rng = np.random.default_rng(0)
        b = rng.normal(size=(8, 8))
        a = b @ b.T + np.eye(8)
        l = cholesky_psd(a, 0.0)
        assert np.max(np.abs(l @ l.T - a)) <= 1e-8

    def test_jitter_added_to_diagonal(self):
        l = cholesky_psd(np.zeros((3, 3)), 1.0)
        assert np.allclose(l, np.eye(3))

    def test_escalation_recovers_semidefinite(self):
        # rank-deficient PSD matrix: plain cholesky may fail, ladder rescues
        v = np.array([1.0, 2.0, 3.0])
        a = np.outer(v, v)
        l = cholesky_psd(a, 0.0)
        n = a.shape[0]
        max_jitter = 1e-6 * np.trace(a) / n * 10.0**8
        assert np.max(np.abs(l @ l.T - a)) <= max_jitter + 1e-8

    def test_not_positive_definite_raises(self):
        a = np.diag([1.0, -5.0])
        with pytest.raises(NotPositiveDefinite):
            cholesky_psd(a, 0.0)

    def test_non_square_raises(self):
        with pytest.raises(DimensionMismatch):
            cholesky_psd(np.ones((2, 3)), 0.0)

    def test_asymmetric_raises(self):
        with pytest.raises(DimensionMismatch):
            cholesky_psd(np.array([[1.0, 0.5], [0.0, 1.0]]), 0.0)

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1), n=st.integers(1, 10))
    def test_reconstruction_property(self, seed, n):
        rng = np.random.default_rng(seed)
        b = rng.normal(size=(n, n))
        a = b @ b.T + 0.5 * np.eye(n)
        l = cholesky_psd(a, 0.0)
        assert np.max(np.abs(l @ l.T - a)) <= 1e-8
        assert np.allclose(np.triu(l, 1), 0.0)


class TestSolveLower:
    def test_identity(self):
        b = np.array([3.0, -1.0, 2.0])
        assert np.allclose(solve_lower(np.eye(3), b), b)

    def test_hand_substitution(self):
        l = np.array([[2.0, 0.0], [1.0, 1.0]])
        x = solve_lower(l, np.array([2.0, 3.0]))
        assert np.allclose(x, [1.0, 2.0])

    def test_random_residual(self):
        rng = np.random.default_rng(1)
        l = np.tril(rng.normal(size=(6, 6))) + 3.0 * np.eye(6)
        b = rng.normal(size=(6, 2))
        x = solve_lower(l, b)
        assert np.max(np.abs(l @ x - b) / np.maximum(1.0, np.abs(b))) <= 1e-9

    def test_zero_diagonal_raises(self):
        l = np.array([[1.0, 0.0], [2.0, 0.0]])
        with pytest.raises(SingularTriangular):
            solve_lower(l, np.array([1.0, 1.0]))

    def test_shape_mismatch_raises(self):
        with pytest.raises(DimensionMismatch):
            solve_lower(np.eye(3), np.ones(4))


class TestSampleMvn:
    def test_zero_chol_returns_mean(self):
        mean = np.array([1.0, -2.0])
        out = sample_mvn(mean, np.zeros((2, 2)), RngStream(0))
        assert np.array_equal(out, mean)

    def test_monte_carlo_mean(self):
        n = 10**6
        rng = RngStream(123)
        draws = rng.normal((n,))  # same machinery as 1-D sample_mvn
        assert abs(draws.mean()) <= 4.0 / np.sqrt(n)

    def test_determinism_same_state(self):
        mean = np.zeros(3)
        chol = np.tril(np.ones((3, 3)))
        a = sample_mvn(mean, chol, RngStream(9))
        b = sample_mvn(mean, chol, RngStream(9))
        assert np.array_equal(a, b)

    def test_covariance_statistics(self):
        cov = np.array([[2.0, 0.6], [0.6, 1.0]])
        l = np.linalg.cholesky(cov)
        rng = RngStream(5)
        draws = np.stack([sample_mvn(np.zeros(2), l, rng) for _ in range(4000)])
        emp = np.cov(draws.T)
        assert np.max(np.abs(emp - cov)) < 0.15

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            sample_mvn(np.zeros(3), np.eye(2), RngStream(0))

    def test_differentiable_through_tape(self):
        u_seed = 31  # fixed so FD and tape see the same noise

        def loss(tape, v):
            chol = ops.reshape(v["chol_flat"], (2, 2))
            s = sample_mvn(v["mean"], chol, RngStream(u_seed))
            return ops.sum_(ops.square(s))

        params = {
            "mean": np.array([0.4, -0.2]),
            "chol_flat": np.array([1.0, 0.0, 0.3, 0.8]),
        }
        assert_grads_match(loss, params)


def test_cholesky_psd_differentiable():
    rng = np.random.default_rng(2)
    b = rng.normal(size=(3, 3))
    params = {"raw": b @ b.T + 2.0 * np.eye(3)}

    def loss(tape, v):
        a = (v["raw"] + ops.transpose(v["raw"])) / 2.0
        l = cholesky_psd(a, 0.0)
        return ops.sum_(ops.square(l))

    assert_grads_match(loss, params, tol=2e-4)
