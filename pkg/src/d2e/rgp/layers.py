"""Sparse variational GP layers with shared kernel and per-output posteriors.

One layer models ``D_out`` functions over the same ``D_in``-dimensional
input: inducing inputs and kernel hyperparameters are shared, while each
output dimension carries its own variational Gaussian N(m_d, S_d) over the
inducing outputs (S_d parameterized by an unconstrained lower factor plus a
log-diagonal) and the noise variance is a single shared scalar.

Parameter names under a layer prefix ``p``:

  p/log_sf2, p/log_ls2      kernel hyperparameters (log space)
  p/z                       inducing inputs (M, D_in)
  p/m                       variational means (M, D_out)
  p/chol_lower, p/chol_log_diag   factor of S_d per output dim
  p/log_noise               observation/transition noise variance (log)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numerics import ops
from ..numerics.linalg import cholesky_psd
from ..numerics.rng import RngStream
from . import kernels

KZ_JITTER = 1e-6


@dataclass(frozen=True)
class GpLayerSpec:
    in_dim: int
    out_dim: int
    n_inducing: int
    prefix: str
    jitter: float = KZ_JITTER


def init_layer(spec: GpLayerSpec, rng: RngStream,
               z_init: np.ndarray | None = None,
               noise_var: float = 1e-2) -> dict[str, np.ndarray]:
    m, din, dout = spec.n_inducing, spec.in_dim, spec.out_dim
    z = rng.normal((m, din)) if z_init is None else np.array(z_init, dtype=np.float64)
    return {
        f"{spec.prefix}/log_sf2": np.zeros(()),
        f"{spec.prefix}/log_ls2": np.zeros(din),
        f"{spec.prefix}/z": z,
        f"{spec.prefix}/m": 0.01 * rng.normal((m, dout)),
        f"{spec.prefix}/chol_lower": np.zeros((dout, m, m)),
        # S starts near 0.1 * I: small enough to move, large enough to regularize
        f"{spec.prefix}/chol_log_diag": np.full((dout, m), 0.5 * np.log(0.1)),
        f"{spec.prefix}/log_noise": np.full((), np.log(noise_var)),
    }


def variational_chol(params, spec: GpLayerSpec):
    """Lower factors L_S with positive diagonal: (D_out, M, M)."""
    m = spec.n_inducing
    strict = np.tril(np.ones((m, m)), -1)
    lower = ops.multiply(params[f"{spec.prefix}/chol_lower"], strict)
    diag = ops.einsum2("dm,mk->dmk", ops.exp(params[f"{spec.prefix}/chol_log_diag"]), np.eye(m))
    return ops.add(lower, diag)


def inducing_chol(params, spec: GpLayerSpec):
    """Cholesky of K_zz + jitter, shared across output dims."""
    z = params[f"{spec.prefix}/z"]
    k = kernels.kernel_matrix(z, z, params[f"{spec.prefix}/log_sf2"],
                              params[f"{spec.prefix}/log_ls2"])
    kv = ops.value_of(k)
    sym = ops.multiply(0.5, ops.add(k, ops.transpose(k))) if kv.shape[0] > 1 else k
    return cholesky_psd(sym, spec.jitter)


def _solve_k(l, rhs):
    """K^{-1} rhs via two triangular solves against L = chol(K)."""
    return ops.solve_triangular(l, ops.solve_triangular(l, rhs, lower=True), lower=True, trans=True)


def gp_conditional(params, spec: GpLayerSpec, x):
    """Posterior function-value belief at point inputs x (N, D_in).

    Returns (mean (N, D_out), var (N, D_out)) of the sparse predictive
    with the inducing posterior folded in; no explicit inverses are formed.
    """
    xv = ops.value_of(x)
    single = xv.ndim == 1
    if single:
        x = ops.reshape(x, (1, -1))
    l = inducing_chol(params, spec)
    kxz = kernels.kernel_matrix(x, params[f"{spec.prefix}/z"],
                                params[f"{spec.prefix}/log_sf2"],
                                params[f"{spec.prefix}/log_ls2"])  # (N, M)
    kxx = ops.exp(params[f"{spec.prefix}/log_sf2"])  # scalar diag of K_xx
    a = ops.solve_triangular(l, ops.transpose(kxz), lower=True)  # (M, N): L^{-1} K_zx
    c = ops.solve_triangular(l, a, lower=True, trans=True)  # (M, N): K^{-1} K_zx
    mean = ops.matmul(ops.transpose(c), params[f"{spec.prefix}/m"])  # (N, D_out)
    base_var = ops.subtract(kxx, ops.sum_(ops.square(a), axis=0))  # (N,)
    ls = variational_chol(params, spec)  # (D, M, M)
    proj = ops.einsum2("dmk,mn->dkn", ls, c)  # rows of L_S_d^T c
    s_corr = ops.sum_(ops.square(proj), axis=1)  # (D, N): c^T S_d c
    var = ops.add(ops.reshape(base_var, (-1, 1)), ops.transpose(s_corr))
    if single:
        return ops.reshape(mean, (spec.out_dim,)), ops.reshape(var, (spec.out_dim,))
    return mean, var


def kl_inducing(params, spec: GpLayerSpec):
    """sum_d KL(N(m_d, S_d) || N(0, K_zz)), Cholesky-based."""
    l = inducing_chol(params, spec)
    m = params[f"{spec.prefix}/m"]
    ls = variational_chol(params, spec)
    n_ind = spec.n_inducing
    logdet_k = ops.logdet_from_chol(l)
    u = ops.solve_triangular(l, m, lower=True)  # (M, D)
    maha = ops.sum_(ops.square(u))
    # trace: || L^{-1} L_S_d ||_F^2 summed over d
    tr = 0.0
    for d in range(spec.out_dim):
        a = ops.solve_triangular(l, ls[d], lower=True)
        tr = ops.add(tr, ops.sum_(ops.square(a)))
    logdet_s = ops.multiply(2.0, ops.sum_(params[f"{spec.prefix}/chol_log_diag"]))
    return ops.multiply(
        0.5,
        ops.add(
            ops.add(tr, maha),
            ops.subtract(
                ops.multiply(float(spec.out_dim), logdet_k),
                ops.add(logdet_s, float(spec.out_dim * n_ind)),
            ),
        ),
    )


class ClampCounter:
    """Process-wide diagnostics for predictive-variance floors."""

    count = 0

    @classmethod
    def bump(cls, n: int) -> None:
        cls.count += int(n)

    @classmethod
    def reset(cls) -> None:
        cls.count = 0


def predict_moments(params, spec: GpLayerSpec, mu, var):
    """Moment-matched function-value belief under uncertain inputs.

    mu, var: (N, D_in) diagonal input beliefs.  Returns (mean (N, D_out),
    variance (N, D_out)); variances are floored at 1e-12 with a diagnostics
    counter tracking how often the floor engages.
    """
    log_sf2 = params[f"{spec.prefix}/log_sf2"]
    log_ls2 = params[f"{spec.prefix}/log_ls2"]
    z = params[f"{spec.prefix}/z"]
    l = inducing_chol(params, spec)
    p1 = kernels.psi1(mu, var, z, log_sf2, log_ls2)  # (N, M)
    p2 = kernels.psi2_per_point(mu, var, z, log_sf2, log_ls2)  # (N, M, M)
    b = _solve_k(l, params[f"{spec.prefix}/m"])  # (M, D)
    mean = ops.matmul(p1, b)  # (N, D)

    ls = variational_chol(params, spec)
    kinv_p2 = None
    var_cols = []
    sf2 = ops.exp(log_sf2)
    for d in range(spec.out_dim):
        s_d = ops.matmul(ls[d], ops.transpose(ls[d]))
        # T_d = K^{-1} (I - S_d K^{-1}); trace against per-point psi2
        kinv_s = _solve_k(l, s_d)
        t_d = _solve_k(l, ops.subtract(np.eye(spec.n_inducing), ops.transpose(kinv_s)))
        tr_term = ops.einsum2("mk,nkm->n", t_d, p2)
        b_d = b[:, d]
        p2b = ops.einsum2("nmk,k->nm", p2, b_d)
        bp2b = ops.einsum2("nm,m->n", p2b, b_d)
        p1b = ops.matmul(p1, b_d)  # (N,)
        var_d = ops.add(
            ops.subtract(sf2, tr_term),
            ops.subtract(bp2b, ops.square(p1b)),
        )
        var_cols.append(ops.reshape(var_d, (-1, 1)))
    raw = ops.concat(var_cols, axis=1)
    ClampCounter.bump(int(np.sum(ops.value_of(raw) < 1e-12)))
    return mean, ops.maximum(raw, 1e-12)
