"""Imagination: moment-matched latent rollouts through the layer stack.

A rollout starts from a ``SeedWindow`` (per-layer lagged beliefs plus recent
encoded observations and actions, usually produced by sweeping the
recognition networks over real history).  Each step queries the action
source at the newest top-layer belief, pushes the action, emits the reward
belief for that (state, action), then advances every transition layer by
one moment-matched prediction.  Encoded observations are exogenous and stay
frozen during dreaming.  Everything here is value-level numpy: rollouts
produce training data for the planner, not tape nodes.

Rollouts are capped at the model horizon: layer depth is what the bound
trains for consistency, so longer dreams have no calibrated layer to run on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InsufficientHistory
from ..numerics import ops
from ..numerics.rng import RngStream
from .layers import predict_moments
from .structure import RgpConfig, controller_spec, posterior_sweep, reward_spec, transition_spec


@dataclass
class SeedWindow:
    """Lagged state for a batch of rollouts (newest entry last).

    layer_mean/var: per layer h, (B, lag, D) beliefs of that layer's own
    recent latents; exo: (B, exo_lag, exo_dim); actions: (B, action_lag, Da).
    """

    layer_mean: list[np.ndarray]
    layer_var: list[np.ndarray]
    exo: np.ndarray
    actions: np.ndarray

    def batch_size(self) -> int:
        return self.exo.shape[0]


def seed_from_history(params, config: RgpConfig, exo_hist: np.ndarray,
                      action_hist: np.ndarray) -> SeedWindow:
    """Sweep the recognition networks over real history and keep the tail.

    exo_hist: (B, T, exo_dim) encoded observations; action_hist: (B, T, Da);
    T must be at least the lag.
    """
    b, t = exo_hist.shape[0], exo_hist.shape[1]
    if t < config.lag or t < config.exo_lag or t < config.action_lag:
        raise InsufficientHistory(f"history length {t} shorter than the lags")
    exo_steps = [exo_hist[:, i] for i in range(t)]
    action_steps = [action_hist[:, i] for i in range(t)]
    means, betas = posterior_sweep(params, config, exo_steps, action_steps)
    layer_mean = [
        np.stack([ops.value_of(means[h][i]) for i in range(t - config.lag, t)], axis=1)
        for h in range(config.horizon)
    ]
    layer_var = [
        np.stack([ops.value_of(betas[h][i]) for i in range(t - config.lag, t)], axis=1)
        for h in range(config.horizon)
    ]
    return SeedWindow(
        layer_mean=layer_mean,
        layer_var=layer_var,
        exo=exo_hist[:, t - config.exo_lag :],
        actions=action_hist[:, t - config.action_lag :],
    )


def _push(window: np.ndarray, entry: np.ndarray) -> np.ndarray:
    return np.concatenate([window[:, 1:], entry[:, None, :]], axis=1)


def _flatten_window(window: np.ndarray, newest_first: int) -> np.ndarray:
    """(B, L, D) -> (B, L*D) ordered newest to oldest."""
    return window[:, ::-1].reshape(window.shape[0], -1)


def imagine_rollout(params, config: RgpConfig, seed: SeedWindow, action_source,
                    steps: int, rng: RngStream):
    """Dream ``steps`` transitions; returns a list of step records.

    ``action_source(state_mean, rng) -> (B, action_dim)`` supplies actions
    (the planner's policy during training; ``controller_action_source``
    reproduces the model's own GP controllers).  Each record holds the
    pre-transition state belief, the action, the reward belief for that
    pair, the post-transition state belief, and the log-ratio of the
    posterior to prior one-step predictive at the new state mean.
    """
    if steps > config.horizon:
        raise ValueError(f"steps {steps} exceeds the trained horizon {config.horizon}")
    if steps == 0:
        return []
    mean_w = [np.array(w) for w in seed.layer_mean]
    var_w = [np.array(w) for w in seed.layer_var]
    exo_flat = _flatten_window(seed.exo, config.exo_lag)
    act_w = np.array(seed.actions)
    short = config.short_lag

    records = []
    for _ in range(steps):
        top = config.horizon - 1
        z_pre_mean = mean_w[top][:, -1]
        z_pre_var = var_w[top][:, -1]
        action = np.asarray(action_source(z_pre_mean, rng), dtype=np.float64)
        act_w = _push(act_w, action)

        # reward belief for (z_pre, action): window ends at the newest entries
        r_spec = reward_spec(config)
        r_in_mean = np.concatenate(
            [_flatten_window(mean_w[top][:, -short:], short), _flatten_window(act_w, 0)],
            axis=1,
        )
        r_in_var = np.concatenate(
            [_flatten_window(var_w[top][:, -short:], short), np.zeros_like(_flatten_window(act_w, 0))],
            axis=1,
        )
        r_mean, r_var = predict_moments(params, r_spec, r_in_mean, r_in_var)
        r_noise = float(np.exp(params[f"{r_spec.prefix}/log_noise"]))

        # advance the stack bottom-up
        log_ratio = np.zeros(seed.batch_size())
        new_top_mean = new_top_var = None
        for h in range(1, config.horizon + 1):
            spec = transition_spec(config, h)
            own_mu = _flatten_window(mean_w[h - 1], config.lag)
            own_var = _flatten_window(var_w[h - 1], config.lag)
            if h == 1:
                in_mu = np.concatenate([own_mu, exo_flat], axis=1)
                in_var = np.concatenate([own_var, np.zeros_like(exo_flat)], axis=1)
            else:
                # the lower layer was already advanced this step, so its
                # window is exactly the [i .. i-M+1] slice the bound uses
                below_mu = _flatten_window(mean_w[h - 2], 0)
                below_var = _flatten_window(var_w[h - 2], 0)
                af = _flatten_window(act_w, 0)
                in_mu = np.concatenate([own_mu, below_mu, af], axis=1)
                in_var = np.concatenate([own_var, below_var, np.zeros_like(af)], axis=1)
            f_mean, f_var = predict_moments(params, spec, in_mu, in_var)
            noise = float(np.exp(params[f"{spec.prefix}/log_noise"]))
            new_mean, new_var = np.asarray(f_mean), np.asarray(f_var) + noise
            if h == config.horizon:
                # posterior vs prior predictive log-density at the new mean
                sf2 = float(np.exp(params[f"{spec.prefix}/log_sf2"]))
                prior_var = sf2 + noise
                post = -0.5 * (np.log(2 * np.pi * new_var)).sum(axis=1)
                prior = -0.5 * (
                    np.log(2 * np.pi * prior_var) + new_mean**2 / prior_var
                ).sum(axis=1)
                log_ratio = post - prior
                new_top_mean, new_top_var = new_mean, new_var
            mean_w[h - 1] = _push(mean_w[h - 1], new_mean)
            var_w[h - 1] = _push(var_w[h - 1], new_var)

        records.append(
            {
                "z_mean": z_pre_mean,
                "z_var": z_pre_var,
                "action": action,
                "r_mean": np.asarray(r_mean)[:, 0],
                "r_var": np.asarray(r_var)[:, 0] + r_noise,
                "z_next_mean": new_top_mean,
                "z_next_var": new_top_var,
                "dyn_log_ratio": log_ratio,
            }
        )
    return records


def controller_action_source(params, config: RgpConfig, layer: int = 1):
    """Action source backed by the model's own controller GP at ``layer``.

    Uses the layer's newest latent window mean as the controller input; this
    reproduces action sequences the bound was trained on, for diagnostics
    and model-only dreaming.
    """
    spec = controller_spec(config, layer)
    short = config.short_lag

    def source(state_mean: np.ndarray, rng: RngStream) -> np.ndarray:
        reps = int(np.ceil(short))
        window = np.tile(state_mean, (1, reps))
        mean, _ = predict_moments(
            params, spec, window, np.zeros_like(window)
        )
        return np.asarray(mean)

    return source
