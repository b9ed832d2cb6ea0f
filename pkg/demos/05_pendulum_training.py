"""A short end-to-end training run on the pendulum.

This is a scaled-down version of the full loop (the acceptance-sized run
lives in tests/test_acceptance.py): seed episodes, joint world-model
updates, policy episodes, imagination, actor-critic steps, and an eval.

Run:  python3 demos/05_pendulum_training.py   (~2 minutes)
"""

import numpy as np

from d2e.envs import make_env
from d2e.igmm import IgmmConfig
from d2e.planner import PlannerConfig
from d2e.rgp import RgpConfig
from d2e.trainer import D2EAgent, TrainConfig, random_baseline, run_d2e

env = make_env("pendulum")
igmm = IgmmConfig(obs_dim=3, latent_dim=3, style_dim=2, truncation=5, hidden=32)
rgp = RgpConfig(horizon=5, lag=2, exo_lag=2, action_lag=1, n_inducing=10,
                layer_dim=3, exo_dim=3, action_dim=1, recog_hidden=16)
planner = PlannerConfig(discount=0.99, lr_q=1e-3, lr_v=1e-3, hidden=64)
train = TrainConfig(seed_episodes=5, iterations=4, updates_per_iteration=25,
                    ac_steps=50, eval_every=2, eval_episodes=3,
                    checkpoint_every=0, seed=0)

agent = D2EAgent(env, igmm, rgp, planner, train)
print("random baseline:", round(random_baseline(agent, 5), 1))
report = run_d2e(agent)
for row in report["metrics_rows"]:
    if row["phase"] in ("eval", "eval_final"):
        print(f"iteration {row['iteration']:2d}: eval return {row['eval_return']:.1f}")
print("\n(four iterations only; the full run improves much further)")
