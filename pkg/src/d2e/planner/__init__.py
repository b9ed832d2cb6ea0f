"""Soft actor-critic in latent space with exact tabular references."""

from .act import select_action
from .heads import (
    CriticSpec,
    PlannerConfig,
    PolicySpec,
    init_critic_params,
    init_policy_params,
    policy_log_prob,
    policy_mean_action,
    policy_sample,
    q_value,
    update_v_target,
    v_value,
)
from .losses import j_pi, j_q, j_v
from .tabular import (
    TabularMdp,
    closed_form_policy,
    random_mdp,
    soft_bellman_apply,
    soft_q_from_v,
    soft_value_iteration,
    tabular_actor_critic,
    tabular_j_pi,
)

__all__ = [
    "PlannerConfig",
    "PolicySpec",
    "CriticSpec",
    "TabularMdp",
    "init_policy_params",
    "init_critic_params",
    "policy_sample",
    "policy_mean_action",
    "policy_log_prob",
    "q_value",
    "v_value",
    "update_v_target",
    "j_pi",
    "j_v",
    "j_q",
    "soft_bellman_apply",
    "soft_q_from_v",
    "closed_form_policy",
    "soft_value_iteration",
    "tabular_actor_critic",
    "tabular_j_pi",
    "random_mdp",
    "select_action",
]
