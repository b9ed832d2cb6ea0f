"""Policy and value heads over the latent space.

The policy is a squashed Gaussian: a perceptron produces a mean and a raw
spread, the spread is smoothly mapped into a bounded log-std interval, the
Gaussian draw is pushed through tanh and rescaled to the action box, and the
log-density includes the exact change-of-variables correction.  Q and V are
plain perceptrons; the target V head is a slow exponential copy updated only
by ``update_v_target``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..nn import MlpSpec
from ..numerics import ops
from ..numerics.rng import RngStream

LOG_STD_LO = -10.0
LOG_STD_HI = 2.0


@dataclass(frozen=True)
class PlannerConfig:
    discount: float = 0.999
    temperature: float = 1.0
    target_rate: float = 0.01
    lr_pi: float = 3e-4
    lr_q: float = 3e-4
    lr_v: float = 3e-4
    n_value_samples: int = 8
    hidden: int = 64
    use_dyn_ratio: bool = True

    def __post_init__(self):
        if not (0.0 < self.discount <= 1.0):
            raise ValueError("discount must lie in (0, 1]")
        if self.temperature <= 0 or self.target_rate <= 0 or self.target_rate > 1:
            raise ValueError("temperature > 0 and target_rate in (0, 1] required")


@dataclass(frozen=True)
class PolicySpec:
    latent_dim: int
    action_low: tuple[float, ...]
    action_high: tuple[float, ...]
    hidden: int = 64

    @property
    def action_dim(self) -> int:
        return len(self.action_low)

    @property
    def mlp(self) -> MlpSpec:
        return MlpSpec((self.latent_dim, self.hidden, self.hidden, 2 * self.action_dim),
                       final_scale=0.01)

    @property
    def log_uniform_density(self) -> float:
        width = np.asarray(self.action_high) - np.asarray(self.action_low)
        return float(-np.sum(np.log(width)))


@dataclass(frozen=True)
class CriticSpec:
    latent_dim: int
    action_dim: int
    hidden: int = 64

    @property
    def q_mlp(self) -> MlpSpec:
        return MlpSpec((self.latent_dim + self.action_dim, self.hidden, self.hidden, 1),
                       final_scale=0.1)

    @property
    def v_mlp(self) -> MlpSpec:
        return MlpSpec((self.latent_dim, self.hidden, self.hidden, 1), final_scale=0.1)


def init_policy_params(spec: PolicySpec, rng: RngStream) -> dict[str, np.ndarray]:
    return spec.mlp.init(rng, "planner/pi")


def init_critic_params(spec: CriticSpec, rng: RngStream) -> dict[str, np.ndarray]:
    params = spec.q_mlp.init(rng.split("q"), "planner/q")
    params.update(spec.v_mlp.init(rng.split("v"), "planner/v"))
    for k in list(params):
        if k.startswith("planner/v/"):
            params[k.replace("planner/v/", "planner/v_target/")] = np.array(params[k])
    return params


def _policy_raw(spec: PolicySpec, params, z):
    raw = spec.mlp.apply(params, "planner/pi", z)
    da = spec.action_dim
    mean = raw[..., :da] if ops.value_of(raw).ndim == 1 else raw[:, :da]
    spread = raw[..., da:] if ops.value_of(raw).ndim == 1 else raw[:, da:]
    log_std = ops.add(
        LOG_STD_LO,
        ops.multiply(LOG_STD_HI - LOG_STD_LO, ops.sigmoid(spread)),
    )
    return mean, log_std


def _squash(spec: PolicySpec, u):
    lo = np.asarray(spec.action_low)
    hi = np.asarray(spec.action_high)
    return ops.add(lo, ops.multiply((hi - lo) / 2.0, ops.add(ops.tanh(u), 1.0)))


def _log_det_squash(spec: PolicySpec, u):
    # log|da/du| = log((hi-lo)/2) + log(1 - tanh(u)^2), the latter expanded
    # as 2*(log 2 - u - softplus(-2u)) for stability far from zero
    lo = np.asarray(spec.action_low)
    hi = np.asarray(spec.action_high)
    core = ops.multiply(2.0, ops.subtract(np.log(2.0), ops.add(u, ops.softplus(ops.multiply(-2.0, u)))))
    return ops.add(np.log((hi - lo) / 2.0), core)


def policy_sample(spec: PolicySpec, params, z, rng: RngStream):
    """Reparameterized bounded action and its exact log-density.

    z: (D,) or (B, D).  Returns (action, log_prob) with matching leading
    shape; differentiable when params are tape nodes.
    """
    mean, log_std = _policy_raw(spec, params, z)
    eps = rng.normal(ops.value_of(mean).shape)
    u = ops.add(mean, ops.multiply(ops.exp(log_std), eps))
    action = _squash(spec, u)
    log_gauss = ops.gaussian_log_density(u, mean, ops.multiply(2.0, log_std), axis=-1)
    log_prob = ops.subtract(log_gauss, ops.sum_(_log_det_squash(spec, u), axis=-1))
    return action, log_prob


def policy_mean_action(spec: PolicySpec, params, z):
    """Deterministic squashed-mean action (exploit mode)."""
    mean, _ = _policy_raw(spec, params, z)
    return _squash(spec, mean)


def policy_log_prob(spec: PolicySpec, params, z, action):
    """Log-density of a given bounded action under the current policy."""
    lo = np.asarray(spec.action_low)
    hi = np.asarray(spec.action_high)
    a01 = np.clip((ops.value_of(action) - lo) / (hi - lo) * 2.0 - 1.0, -1 + 1e-12, 1 - 1e-12)
    u = np.arctanh(a01)
    mean, log_std = _policy_raw(spec, params, z)
    log_gauss = ops.gaussian_log_density(u, mean, ops.multiply(2.0, log_std), axis=-1)
    return ops.subtract(log_gauss, ops.sum_(_log_det_squash(spec, u), axis=-1))


def q_value(spec: CriticSpec, params, z, action):
    za = ops.concat([z, action], axis=-1)
    out = spec.q_mlp.apply(params, "planner/q", za)
    return ops.reshape(out, ops.value_of(out).shape[:-1])


def v_value(spec: CriticSpec, params, z, target: bool = False):
    prefix = "planner/v_target" if target else "planner/v"
    out = spec.v_mlp.apply(params, prefix, z)
    return ops.reshape(out, ops.value_of(out).shape[:-1])


def update_v_target(params: dict[str, np.ndarray], rate: float) -> None:
    """Exponential-average copy of the V head into the target head."""
    for k in list(params):
        if k.startswith("planner/v/"):
            tk = k.replace("planner/v/", "planner/v_target/")
            params[tk] = (1.0 - rate) * params[tk] + rate * params[k]
