"""One-step dynamics learning on the kinked map benchmark.

Fits the sparse variational GP layer on observed transitions and prints
held-out error plus a small text rendering of the learned map.

Run:  python3 demos/03_kink_system_identification.py   (~1 minute)
"""

import numpy as np

from d2e.envs import kink_map, make_sysid_dataset
from d2e.numerics import RngStream
from d2e.numerics import ops
from d2e.rgp import predict_moments
from d2e.trainer import fit_sysid

dataset = make_sysid_dataset("kink", 500, 0.0, RngStream(3))
print(f"train pairs: {len(dataset['train_inputs'])}, held out: {len(dataset['test_inputs'])}")

report = fit_sysid(dataset, n_inducing=16, seed=0, steps=2000)
print(f"loss: {report['loss_trace'][0]:.1f} -> {report['loss_trace'][-1]:.1f}")
print(f"train rmse: {report['train_rmse']:.5f}   held-out rmse: {report['test_rmse']:.5f}")

grid = np.linspace(-2.8, 0.9, 13)[:, None]
mean, var = predict_moments(report["params"], report["spec"], grid, np.zeros_like(grid))
mean = np.asarray(ops.value_of(mean))[:, 0]
sd = np.sqrt(np.asarray(ops.value_of(var))[:, 0])
print("\n  z      true f(z)   model      +-sd")
for z, m, s in zip(grid[:, 0], mean, sd):
    print(f"{z:+.2f}   {float(kink_map(z)):+.4f}    {m:+.4f}   {s:.4f}")
