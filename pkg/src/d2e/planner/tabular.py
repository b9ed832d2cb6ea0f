"""Exact tabular references for the soft planner.

These small enumerative implementations exist to property-test the
continuous losses: the soft Bellman operator (monotone, discount-contractive)
defines the fixed point, the closed-form policy is its exact minimizer, and
``tabular_actor_critic`` performs the alternating exact minimization of the
three losses to convergence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .heads import PlannerConfig


@dataclass(frozen=True)
class TabularMdp:
    transition: np.ndarray  # (S, A, S) rows sum to 1
    reward: np.ndarray  # (S, A)

    def __post_init__(self):
        t = self.transition
        if t.ndim != 3 or t.shape[0] != t.shape[2]:
            raise ValueError("transition must be (S, A, S)")
        if not np.allclose(t.sum(-1), 1.0, atol=1e-9):
            raise ValueError("transition rows must sum to 1")
        if self.reward.shape != t.shape[:2]:
            raise ValueError("reward must be (S, A)")

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    def log_action_prior(self) -> np.ndarray:
        return np.full((self.n_states, self.n_actions), -np.log(self.n_actions))


def random_mdp(rng, n_states: int, n_actions: int) -> TabularMdp:
    raw = rng.uniform(0.1, 1.0, (n_states, n_actions, n_states))
    return TabularMdp(raw / raw.sum(-1, keepdims=True),
                      rng.uniform(-1.0, 1.0, (n_states, n_actions)))


def soft_q_from_v(mdp: TabularMdp, v: np.ndarray, config: PlannerConfig) -> np.ndarray:
    """Q(s,a) = eta r + gamma log sum_s' P(s'|s,a) exp(V(s'))."""
    log_e_exp = logsumexp(v[None, None, :], axis=-1, b=mdp.transition)
    return config.temperature * mdp.reward + config.discount * log_e_exp


def soft_bellman_apply(mdp: TabularMdp, v: np.ndarray, config: PlannerConfig) -> np.ndarray:
    """One exact application of the soft operator under the uniform prior."""
    q = soft_q_from_v(mdp, v, config)
    return logsumexp(q + mdp.log_action_prior(), axis=-1)


def closed_form_policy(mdp: TabularMdp, q_table: np.ndarray, v_table: np.ndarray) -> np.ndarray:
    """pi(a|s) = exp(log p(a|s) + Q(s,a) - V(s)), renormalized per state."""
    log_pi = mdp.log_action_prior() + q_table - v_table[:, None]
    log_pi -= logsumexp(log_pi, axis=-1, keepdims=True)
    return np.exp(log_pi)


def soft_value_iteration(mdp: TabularMdp, config: PlannerConfig,
                         tol: float = 1e-12, max_iter: int = 100_000):
    v = np.zeros(mdp.n_states)
    for _ in range(max_iter):
        nxt = soft_bellman_apply(mdp, v, config)
        if np.max(np.abs(nxt - v)) < tol:
            return nxt
        v = nxt
    return v


def tabular_j_pi(mdp: TabularMdp, policy: np.ndarray, q_table: np.ndarray,
                 v_table: np.ndarray) -> float:
    """Exact policy loss averaged uniformly over states."""
    log_p = mdp.log_action_prior()
    with np.errstate(divide="ignore", invalid="ignore"):
        log_pi = np.where(policy > 0, np.log(np.maximum(policy, 1e-300)), 0.0)
    inner = policy * (log_pi - log_p - q_table + v_table[:, None])
    return float(inner.sum(-1).mean())


def tabular_actor_critic(mdp: TabularMdp, config: PlannerConfig,
                         n_iters: int = 5000, tol: float = 1e-13) -> dict:
    """Alternating exact minimization of (j_q, j_v, j_pi) to convergence.

    Each sweep sets Q to its temporal-difference target, V to the soft
    expectation under the current policy, and the policy to the closed form;
    the fixed point is the soft-value-iteration solution.
    """
    s, a = mdp.n_states, mdp.n_actions
    v = np.zeros(s)
    policy = np.full((s, a), 1.0 / a)
    log_p = mdp.log_action_prior()
    q = np.zeros((s, a))
    for _ in range(n_iters):
        q = soft_q_from_v(mdp, v, config)  # j_q minimizer
        with np.errstate(divide="ignore"):
            log_pi = np.log(np.maximum(policy, 1e-300))
        v_new = (policy * (q - log_pi + log_p)).sum(-1)  # j_v minimizer
        normalizer = logsumexp(q + log_p, axis=-1)
        policy_new = closed_form_policy(mdp, q, normalizer)  # j_pi minimizer
        delta = max(np.max(np.abs(v_new - v)), np.max(np.abs(policy_new - policy)))
        v, policy = v_new, policy_new
        if delta < tol:
            break
    return {"q": q, "v": v, "policy": policy}
