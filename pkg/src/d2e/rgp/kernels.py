"""Squared-exponential kernel and its expectations under Gaussian inputs.

Hyperparameters live in log space (`log_sf2`, per-dimension `log_ls2`).
Besides pointwise evaluation, this module provides the three closed-form
kernel expectations needed by uncertain-input sparse-GP bounds:

  psi0 = sum_n <k(x_n, x_n)>            (scalar)
  psi1[n, m] = <k(x_n, z_m)>            (N x M)
  psi2[m, m'] = sum_n <k(x_n,z_m) k(x_n,z_m')>   (M x M, summed over n)

with the per-point variant of psi2 available for prediction.  The beliefs
are diagonal Gaussians N(mu_n, diag(s_n)); zero variance recovers plain
kernel evaluation.  The Monte-Carlo oracle in the test suite is the binding
definition of these expectations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch
from ..numerics import ops


@dataclass(frozen=True)
class KernelHyper:
    """Value-level view of one kernel's hyperparameters (log-space arrays)."""

    log_sf2: np.ndarray  # scalar array
    log_ls2: np.ndarray  # (D,) log squared lengthscales

    @property
    def sf2(self) -> float:
        return float(np.exp(self.log_sf2))

    @property
    def ls2(self) -> np.ndarray:
        return np.exp(self.log_ls2)


def kernel_eval(x, y, log_sf2, log_ls2):
    """k(x, y) for single points x, y of dimension D."""
    xv, yv = ops.value_of(x), ops.value_of(y)
    lv = ops.value_of(log_ls2)
    if xv.shape != yv.shape or xv.shape[-1] != lv.shape[-1]:
        raise DimensionMismatch(f"kernel_eval shapes: x {xv.shape}, y {yv.shape}, ls {lv.shape}")
    d = ops.subtract(x, y)
    quad = ops.sum_(ops.divide(ops.square(d), ops.exp(log_ls2)), axis=-1)
    return ops.multiply(ops.exp(log_sf2), ops.exp(ops.multiply(-0.5, quad)))


def kernel_matrix(x, z, log_sf2, log_ls2):
    """Kernel cross-matrix for row stacks x (N, D), z (M, D)."""
    ls2 = ops.exp(log_ls2)
    xs = ops.divide(x, ops.sqrt(ls2))
    zs = ops.divide(z, ops.sqrt(ls2))
    x2 = ops.sum_(ops.square(xs), axis=-1, keepdims=True)  # (N, 1)
    z2 = ops.sum_(ops.square(zs), axis=-1, keepdims=True)  # (M, 1)
    cross = ops.matmul(xs, ops.transpose(zs))
    quad = ops.subtract(ops.add(x2, ops.transpose(z2)), ops.multiply(2.0, cross))
    return ops.multiply(ops.exp(log_sf2), ops.exp(ops.multiply(-0.5, quad)))


def psi0(mu, log_sf2) -> object:
    """sum_n <k(x_n, x_n)> = N * sf2 for the squared-exponential kernel."""
    n = ops.value_of(mu).shape[0]
    return ops.multiply(float(n), ops.exp(log_sf2))


def psi1(mu, var, z, log_sf2, log_ls2):
    """<K_xz> under x_n ~ N(mu_n, diag(var_n)): (N, M)."""
    ls2 = ops.exp(log_ls2)
    denom = ops.add(ls2, var)  # (N, D)
    log_norm = ops.multiply(-0.5, ops.sum_(ops.log(ops.divide(denom, ls2)), axis=-1))
    # quadratic (mu_nd - z_md)^2 / denom_nd expanded to avoid (N, M, D) blocks
    inv = ops.divide(1.0, denom)
    mu2 = ops.sum_(ops.multiply(ops.square(mu), inv), axis=-1, keepdims=True)  # (N, 1)
    z2 = ops.einsum2("nd,md->nm", inv, ops.square(z))
    cross = ops.einsum2("nd,md->nm", ops.multiply(mu, inv), z)
    quad = ops.subtract(ops.add(mu2, z2), ops.multiply(2.0, cross))
    return ops.exp(
        ops.add(
            ops.add(log_sf2, ops.reshape(log_norm, (-1, 1))),
            ops.multiply(-0.5, quad),
        )
    )


def psi2_per_point(mu, var, z, log_sf2, log_ls2):
    """<k(x_n, z_m) k(x_n, z_m')> per point: (N, M, M)."""
    ls2 = ops.exp(log_ls2)
    zr = ops.reshape(z, (1,) + ops.value_of(z).shape)  # (1, M, D)
    zc = ops.transpose(zr, (1, 0, 2))  # (M, 1, D)
    zbar = ops.multiply(0.5, ops.add(zr, zc))  # (M, M, D)
    zdiff2 = ops.square(ops.subtract(zr, zc))  # (M, M, D)
    cross = ops.sum_(ops.divide(zdiff2, ops.multiply(4.0, ls2)), axis=-1)  # (M, M)

    denom = ops.add(ls2, ops.multiply(2.0, var))  # (N, D)
    inv = ops.divide(1.0, denom)
    log_norm = ops.multiply(-0.5, ops.sum_(ops.log(ops.divide(denom, ls2)), axis=-1))  # (N,)
    mu2 = ops.sum_(ops.multiply(ops.square(mu), inv), axis=-1)  # (N,)
    zbar2 = ops.einsum2("nd,mkd->nmk", inv, ops.square(zbar))
    mixed = ops.einsum2("nd,mkd->nmk", ops.multiply(mu, inv), zbar)
    quad = ops.add(
        ops.reshape(mu2, (-1, 1, 1)),
        ops.subtract(zbar2, ops.multiply(2.0, mixed)),
    )
    log_out = ops.add(
        ops.add(
            ops.multiply(2.0, log_sf2),
            ops.reshape(log_norm, (-1, 1, 1)),
        ),
        ops.negative(ops.add(ops.reshape(cross, (1,) + ops.value_of(cross).shape), quad)),
    )
    return ops.exp(log_out)


def psi2(mu, var, z, log_sf2, log_ls2):
    """sum over points of the per-point expectation: (M, M)."""
    return ops.sum_(psi2_per_point(mu, var, z, log_sf2, log_ls2), axis=0)
