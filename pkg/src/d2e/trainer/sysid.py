"""Standalone dynamics fitting on observed-state datasets.

Trains a single sparse variational GP layer (the same machinery the full
state-space bound uses, with delta input beliefs) on (input, target) pairs
and reports held-out one-step RMSE through the moment-matched predictor.
"""

from __future__ import annotations

import numpy as np

from ..numerics import ops
from ..numerics.rng import RngStream
from ..numerics.tape import Tape
from ..rgp import GpLayerSpec, expected_loglik_term, init_layer, kl_inducing, predict_moments
from .optim import Adam, clip_by_global_norm


def fit_sysid(dataset: dict, n_inducing: int = 16, seed: int = 0, steps: int = 1000,
              lr: float = 1e-2) -> dict:
    """Fit the one-step model; returns params, spec, loss trace, and RMSEs."""
    x = np.asarray(dataset["train_inputs"], dtype=np.float64)
    y = np.asarray(dataset["train_targets"], dtype=np.float64)
    spec = GpLayerSpec(x.shape[1], y.shape[1], n_inducing, "sysid")
    rng = RngStream(seed)
    params = init_layer(spec, rng, noise_var=float(np.maximum(0.1 * y.var(), 1e-4)))
    idx = np.asarray(rng.integers(0, len(x), (n_inducing,)))
    params["sysid/z"] = x[idx] + 0.01 * rng.normal((n_inducing, x.shape[1]))
    params["sysid/log_sf2"] = np.log(np.maximum(y.var(), 1e-4)) * np.ones(())
    params["sysid/log_ls2"] = np.log(np.maximum(x.var(axis=0), 1e-4))

    opt = Adam(lr=lr)
    zeros = np.zeros_like(x)
    trace = []
    for step in range(steps):
        if step == int(0.7 * steps):
            opt.lr = lr * 0.1
        tape = Tape()
        pvars = tape.register(params)
        term = expected_loglik_term(pvars, spec, x, zeros, y, y * y)
        loss = ops.negative(ops.subtract(term, kl_inducing(pvars, spec)))
        grads = tape.grad(loss)
        grads, _, _ = clip_by_global_norm(grads, 1000.0)
        opt.step(params, grads)
        trace.append(float(ops.value_of(loss)))

    def rmse(inputs, targets):
        mean, _ = predict_moments(params, spec, np.asarray(inputs), np.zeros_like(inputs))
        return float(np.sqrt(np.mean((np.asarray(ops.value_of(mean)) - targets) ** 2)))

    return {
        "params": params,
        "spec": spec,
        "loss_trace": trace,
        "train_rmse": rmse(x, y),
        "test_rmse": rmse(dataset["test_inputs"], dataset["test_targets"]),
    }
