"""The soft planner on an exactly solvable tabular problem.

Shows the soft Bellman operator contracting to its fixed point and the
alternating loss minimization landing on the closed-form policy.

Run:  python3 demos/04_soft_planner_tabular.py
"""

import numpy as np

from d2e.planner import (
    PlannerConfig,
    closed_form_policy,
    random_mdp,
    soft_bellman_apply,
    soft_q_from_v,
    soft_value_iteration,
    tabular_actor_critic,
)

rng = np.random.default_rng(0)
mdp = random_mdp(rng, n_states=5, n_actions=3)
config = PlannerConfig(discount=0.9, temperature=1.0)

print("== contraction of the soft operator ==")
v = np.zeros(5)
v_star = soft_value_iteration(mdp, config)
prev = np.max(np.abs(v - v_star))
for k in range(8):
    v = soft_bellman_apply(mdp, v, config)
    err = np.max(np.abs(v - v_star))
    print(f"iter {k + 1}: error {err:.3e}  ratio {err / prev:.3f} (discount {config.discount})")
    prev = err

print("\n== alternating loss minimization vs closed form ==")
sol = tabular_actor_critic(mdp, config)
pi_star = closed_form_policy(mdp, soft_q_from_v(mdp, v_star, config), v_star)
tv = 0.5 * np.abs(sol["policy"] - pi_star).sum(axis=-1)
print("total variation per state:", np.array2string(tv, precision=2))
print("learned policy rows:")
print(np.round(sol["policy"], 3))
