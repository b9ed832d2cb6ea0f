"""Soft actor-critic losses over real or imagined latent transitions.

A batch is a dict of value arrays:

  z            (B, D)   states where the heads are evaluated
  action       (B, Da)  executed action (j_q only)
  reward       (B,)     observed or imagined reward (j_q only)
  z_next_mean  (B, D)   next-state belief mean
  z_next_var   (B, D)   next-state belief variance (zeros for replay)
  dyn_log_ratio (B,)    log posterior/prior one-step predictive ratio
                        (zeros for replay transitions)

The action prior is uniform over the action box, so the policy-vs-prior KL
terms reduce to entropy regularizers up to a constant.  Each loss is a
scalar tape node; the trainer applies each gradient only to its own head,
matching the alternating update scheme.
"""

from __future__ import annotations

import numpy as np

from ..numerics import ops
from ..numerics.rng import RngStream
from .heads import CriticSpec, PlannerConfig, PolicySpec, policy_sample, q_value, v_value


def j_pi(batch, policy_spec: PolicySpec, critic_spec: CriticSpec, params,
         rng: RngStream):
    """Policy loss: E[log q(a|z) - log p(a|z) - Q(z, a) + V(z)]."""
    z = batch["z"]
    action, log_prob = policy_sample(policy_spec, params, z, rng)
    q = q_value(critic_spec, params, z, action)
    v = v_value(critic_spec, params, z)
    inner = ops.add(
        ops.subtract(ops.subtract(log_prob, policy_spec.log_uniform_density), q), v
    )
    return ops.mean_(inner)


def j_v(batch, policy_spec: PolicySpec, critic_spec: CriticSpec, params,
        config: PlannerConfig, rng: RngStream):
    """Soft value residual with the optional dynamics-ratio term.

    With ``config.use_dyn_ratio`` off (or the ratio identically zero, as for
    replay transitions) this is the standard entropy-regularized value loss.
    """
    z = batch["z"]
    action, log_prob = policy_sample(policy_spec, params, z, rng)
    q = q_value(critic_spec, params, z, action)
    target = ops.subtract(q, ops.subtract(log_prob, policy_spec.log_uniform_density))
    if config.use_dyn_ratio:
        target = ops.subtract(target, np.asarray(batch["dyn_log_ratio"]))
    v = v_value(critic_spec, params, z)
    resid = ops.subtract(v, target)
    return ops.mean_(ops.multiply(0.5, ops.square(resid)))


def j_q(batch, critic_spec: CriticSpec, params, config: PlannerConfig,
        rng: RngStream, target_params=None):
    """Temporal-difference loss against the soft log-expected-exp target.

    The next-state expectation log E[exp(V_target(z'))] is estimated with
    ``config.n_value_samples`` Gaussian draws from the next-state belief via
    log-sum-exp; a deterministic belief collapses it to V_target(z').
    ``target_params`` (value arrays) supply the frozen target head.
    """
    z = np.asarray(batch["z"])
    action = np.asarray(batch["action"])
    reward = np.asarray(batch["reward"])
    nm = np.asarray(batch["z_next_mean"])
    nv = np.asarray(batch["z_next_var"])
    tp = target_params if target_params is not None else {
        k: ops.value_of(v) for k, v in params.items() if "planner/v_target/" in k
    }

    n = config.n_value_samples
    eps = rng.normal((n,) + nm.shape)
    samples = nm[None] + np.sqrt(np.maximum(nv, 0.0))[None] * eps  # (n, B, D)
    vt = np.stack([
        np.asarray(ops.value_of(v_value(critic_spec, tp, samples[k], target=True)))
        for k in range(n)
    ])  # (n, B)
    from scipy.special import logsumexp as _lse

    log_e_exp = _lse(vt, axis=0) - np.log(n)
    target = config.temperature * reward + config.discount * log_e_exp

    q = q_value(critic_spec, params, z, action)
    resid = ops.subtract(q, target)
    return ops.mean_(ops.multiply(0.5, ops.square(resid)))
