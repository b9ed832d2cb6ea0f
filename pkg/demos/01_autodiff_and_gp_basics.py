"""Tape differentiation and sparse-GP building blocks, end to end.

Run:  python3 demos/01_autodiff_and_gp_basics.py
"""

import numpy as np

from d2e.numerics import RngStream, Tape, cholesky_psd, solve_lower
from d2e.numerics import ops
from d2e.rgp import GpLayerSpec, gp_conditional, init_layer, predict_moments

print("== reverse-mode tape ==")
tape = Tape()
w = tape.parameter("w", np.array([0.5, -1.2, 2.0]))
loss = ops.sum_(ops.tanh(w) ** 2) + 0.1 * ops.sum_(ops.square(w))
grads = tape.grad(loss)
print("loss:", float(loss.value))
print("dloss/dw:", grads["w"])

# central-difference cross-check, the same oracle the test suite uses
h = 1e-6
fd = np.zeros(3)
for i in range(3):
    for sign in (+1, -1):
        wp = np.array([0.5, -1.2, 2.0])
        wp[i] += sign * h
        t2 = Tape()
        v = t2.parameter("w", wp)
        fd[i] += sign * float((ops.sum_(ops.tanh(v) ** 2) + 0.1 * ops.sum_(ops.square(v))).value)
fd /= 2 * h
print("finite differences:", fd, "max err:", np.max(np.abs(fd - grads["w"])))

print("\n== robust Cholesky ==")
b = RngStream(0).normal((4, 4))
a = b @ b.T  # semidefinite-ish
l = cholesky_psd(a, 0.0)
print("reconstruction error:", np.max(np.abs(l @ l.T - a)))
print("solve residual:", np.max(np.abs(l @ solve_lower(l, np.ones(4)) - 1.0)))

print("\n== sparse GP with uncertain inputs ==")
spec = GpLayerSpec(in_dim=1, out_dim=1, n_inducing=8, prefix="gp")
params = init_layer(spec, RngStream(1))
params["gp/z"] = np.linspace(-2, 2, 8)[:, None]
params["gp/m"] = np.sin(params["gp/z"]) * 1.5

x = np.linspace(-2, 2, 9)[:, None]
mean, var = gp_conditional(params, spec, x)
print("conditional mean:", np.round(np.asarray(ops.value_of(mean))[:, 0], 3))

# the same query under input uncertainty: variance grows, mean smooths
mu_b = np.zeros((3, 1))
for s in (0.0, 0.1, 0.5):
    m2, v2 = predict_moments(params, spec, mu_b, np.full((3, 1), s))
    print(f"input var {s:.1f}: predictive mean {float(ops.value_of(m2)[0, 0]):+.4f} "
          f"variance {float(ops.value_of(v2)[0, 0]):.4f}")
