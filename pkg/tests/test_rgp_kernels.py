"""Kernel expectations: trivial limits, the Monte-Carlo oracle (binding),
and PSD fuzzing."""

import numpy as np
import pytest

from d2e.errors import DimensionMismatch
from d2e.numerics import RngStream
from d2e.numerics import ops
from d2e.rgp import kernel_eval, kernel_matrix, psi0, psi1, psi2, psi2_per_point

from fdcheck import assert_grads_match


class TestKernelEval:
    def test_zero_distance(self):
        x = np.array([0.3, -1.0])
        assert float(ops.value_of(kernel_eval(x, x, np.log(2.5), np.zeros(2)))) == pytest.approx(2.5)

    def test_unit_case(self):
        x = np.array([1.0, 0.0])
        y = np.array([0.0, 1.0])  # squared distance 2
        k = float(ops.value_of(kernel_eval(x, y, 0.0, np.zeros(2))))
        assert k == pytest.approx(np.exp(-1.0), rel=1e-12)

    def test_symmetry(self):
        rng = RngStream(0)
        ls = rng.normal((3,)) * 0.3
        for _ in range(20):
            x, y = rng.normal((3,)), rng.normal((3,))
            kxy = float(ops.value_of(kernel_eval(x, y, 0.2, ls)))
            kyx = float(ops.value_of(kernel_eval(y, x, 0.2, ls)))
            assert kxy == pytest.approx(kyx, rel=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            kernel_eval(np.zeros(2), np.zeros(3), 0.0, np.zeros(2))

    def test_matrix_matches_eval(self):
        rng = RngStream(1)
        x, z = rng.normal((4, 2)), rng.normal((3, 2))
        ls = rng.normal((2,)) * 0.2
        km = np.asarray(ops.value_of(kernel_matrix(x, z, 0.1, ls)))
        for i in range(4):
            for j in range(3):
                assert km[i, j] == pytest.approx(
                    float(ops.value_of(kernel_eval(x[i], z[j], 0.1, ls))), rel=1e-10
                )


class TestPsiStatistics:
    def setup_method(self):
        rng = RngStream(7)
        self.mu = rng.normal((4, 2)) * 0.8
        self.var = np.exp(rng.normal((4, 2)) * 0.3 - 1.0)
        self.z = rng.normal((3, 2))
        self.log_sf2 = np.array(0.3)
        self.log_ls2 = rng.normal((2,)) * 0.2

    def test_delta_belief_limit(self):
        k_direct = np.asarray(ops.value_of(kernel_matrix(self.mu, self.z, self.log_sf2, self.log_ls2)))
        p1 = np.asarray(ops.value_of(psi1(self.mu, np.zeros_like(self.mu), self.z,
                                          self.log_sf2, self.log_ls2)))
        assert np.allclose(p1, k_direct, rtol=1e-12)
        p2 = np.asarray(ops.value_of(psi2_per_point(self.mu, np.zeros_like(self.mu), self.z,
                                                    self.log_sf2, self.log_ls2)))
        want = np.einsum("nm,nk->nmk", k_direct, k_direct)
        assert np.allclose(p2, want, rtol=1e-10)

    def test_null_kernel(self):
        neg_inf = np.array(-np.inf)
        assert float(ops.value_of(psi0(self.mu, neg_inf))) == 0.0
        assert np.all(np.asarray(ops.value_of(
            psi1(self.mu, self.var, self.z, neg_inf, self.log_ls2))) == 0.0)
        assert np.all(np.asarray(ops.value_of(
            psi2(self.mu, self.var, self.z, neg_inf, self.log_ls2))) == 0.0)

    def test_monte_carlo_oracle(self):
        # binding definition: expectations of kernel rows under the beliefs;
        # per entry |closed - mc| <= max(3 SE, 1% of the mc value)
        n_mc = 10**5
        rng = np.random.default_rng(2024)
        sf2 = np.exp(self.log_sf2)
        ls2 = np.exp(self.log_ls2)
        p1_mc = np.zeros((4, 3))
        p1_se = np.zeros((4, 3))
        p2_mc = np.zeros((4, 3, 3))
        p2_se = np.zeros((4, 3, 3))
        for n in range(4):
            x = self.mu[n] + np.sqrt(self.var[n]) * rng.standard_normal((n_mc, 2))
            d2 = ((x[:, None, :] - self.z[None, :, :]) ** 2 / ls2).sum(-1)
            krows = sf2 * np.exp(-0.5 * d2)  # (n_mc, 3)
            p1_mc[n] = krows.mean(0)
            p1_se[n] = krows.std(0, ddof=1) / np.sqrt(n_mc)
            prod = np.einsum("sm,sk->smk", krows, krows)
            p2_mc[n] = prod.mean(0)
            p2_se[n] = prod.std(0, ddof=1) / np.sqrt(n_mc)
        p1_cf = np.asarray(ops.value_of(psi1(self.mu, self.var, self.z, self.log_sf2, self.log_ls2)))
        p2_cf = np.asarray(ops.value_of(psi2_per_point(self.mu, self.var, self.z,
                                                       self.log_sf2, self.log_ls2)))
        assert np.all(np.abs(p1_cf - p1_mc) <= np.maximum(3.0 * p1_se, 0.01 * np.abs(p1_mc)))
        assert np.all(np.abs(p2_cf - p2_mc) <= np.maximum(3.0 * p2_se, 0.01 * np.abs(p2_mc)))
        p0_cf = float(ops.value_of(psi0(self.mu, self.log_sf2)))
        assert p0_cf == pytest.approx(4 * sf2, rel=1e-12)

    def test_psi2_summed_matches_per_point(self):
        full = np.asarray(ops.value_of(psi2(self.mu, self.var, self.z, self.log_sf2, self.log_ls2)))
        per = np.asarray(ops.value_of(psi2_per_point(self.mu, self.var, self.z,
                                                     self.log_sf2, self.log_ls2)))
        assert np.allclose(full, per.sum(0), rtol=1e-12)

    def test_psi2_symmetric_psd_fuzz(self):
        rng = RngStream(11)
        for _ in range(1000):
            n, m, d = [int(v) for v in rng.integers(1, 5, (3,))]
            mu = rng.normal((n, d))
            var = np.exp(rng.normal((n, d)))
            z = rng.normal((m, d))
            p2 = np.asarray(ops.value_of(psi2(mu, var, z, float(rng.normal(())), rng.normal((d,)))))
            assert np.allclose(p2, p2.T, atol=1e-12)
            eig = np.linalg.eigvalsh(p2)
            assert eig.min() >= -1e-10 * max(1.0, eig.max())

    def test_psi0_trace_consistency(self):
        # psi0 >= tr(K^-1 psi2) - 1e-8 for any inducing geometry
        rng = RngStream(13)
        for _ in range(50):
            mu = rng.normal((5, 2))
            var = np.exp(rng.normal((5, 2)) - 1.0)
            z = rng.normal((4, 2))
            lsf, lls = 0.2, rng.normal((2,)) * 0.3
            p0 = float(ops.value_of(psi0(mu, lsf)))
            p2v = np.asarray(ops.value_of(psi2(mu, var, z, lsf, lls)))
            k = np.asarray(ops.value_of(kernel_matrix(z, z, lsf, lls))) + 1e-6 * np.eye(4)
            assert p0 >= np.trace(np.linalg.solve(k, p2v)) - 1e-8

    def test_gradients(self):
        params = {
            "mu": self.mu,
            "raw_var": np.log(self.var),
            "z": self.z,
            "log_sf2": np.array(0.3),
            "log_ls2": self.log_ls2,
        }

        def loss(tape, v):
            var = ops.exp(v["raw_var"])
            t1 = ops.sum_(ops.square(psi1(v["mu"], var, v["z"], v["log_sf2"], v["log_ls2"])))
            t2 = ops.sum_(ops.square(psi2(v["mu"], var, v["z"], v["log_sf2"], v["log_ls2"])))
            return ops.add(t1, t2)

        assert_grads_match(loss, params, tol=2e-4)
