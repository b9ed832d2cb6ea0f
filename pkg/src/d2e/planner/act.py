"""Action selection: encode the observation, query the policy."""

from __future__ import annotations

import numpy as np

from ..igmm import IgmmConfig, encode_mean
from ..numerics import ops
from ..numerics.rng import RngStream
from .heads import PolicySpec, policy_mean_action, policy_sample


def select_action(obs, igmm_params, igmm_config: IgmmConfig, policy_spec: PolicySpec,
                  params, mode: str, rng: RngStream) -> np.ndarray:
    """Environment action for a raw observation.

    "explore" draws from the squashed policy; "exploit" returns the squashed
    mean.  The action is bounded by construction.
    """
    z = ops.value_of(encode_mean(igmm_params, igmm_config, np.asarray(obs)[None, :]))[0]
    if mode == "exploit":
        return np.asarray(ops.value_of(policy_mean_action(policy_spec, params, z)))
    if mode == "explore":
        action, _ = policy_sample(policy_spec, params, z, rng)
        return np.asarray(ops.value_of(action))
    raise ValueError(f"unknown mode {mode!r}")
