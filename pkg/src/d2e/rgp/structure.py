"""Layer wiring for the recurrent GP state-space model.

A model with horizon H owns H transition layers, H controller layers, and a
final reward layer.  Lagged input windows follow a fixed concatenation
order (documented per layer kind below); the mean-field posterior over the
latent sequences is amortized by per-layer recognition perceptrons that read
the previous step's assembled input, swept forward in time so no circular
dependency arises.

Window layouts (i is the target index, 0-based within a chunk):

  transition h=1 :  [z^1_{i-1..i-M} | e_{i-1..i-Mx}]
  transition h>1 :  [z^h_{i-1..i-M} | z^{h-1}_{i..i-M+1} | a_{i-1..i-La}]
  controller h   :  [z^h_{i-1..i-M+1}]            (length max(M-1, 1))
  reward         :  [z^H_{i-1..i-M+1} | a_{i-1..i-La}]

Recognition input for q(z_i^h) is the transition window evaluated at index
i-1, zero-padded where history is missing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InsufficientHistory
from ..nn import MlpSpec
from ..numerics import ops
from ..numerics.rng import RngStream
from .layers import GpLayerSpec, init_layer

BETA_FLOOR = 1e-6


@dataclass(frozen=True)
class RgpConfig:
    horizon: int = 5
    lag: int = 2
    exo_lag: int = 2
    action_lag: int = 1
    n_inducing: int = 16
    layer_dim: int = 3
    exo_dim: int = 3
    action_dim: int = 1
    recog_hidden: int = 32
    noise_var_init: float = 1e-2
    kz_jitter: float = 1e-6

    def __post_init__(self):
        if self.horizon < 1 or self.lag < 1 or self.n_inducing < 2:
            raise ValueError("horizon >= 1, lag >= 1, n_inducing >= 2 required")
        if self.exo_lag > self.lag or self.action_lag > self.lag:
            raise ValueError("exo_lag and action_lag may not exceed lag")

    @property
    def short_lag(self) -> int:
        # the controller/reward latent window is one shorter than the
        # transition window; a single entry is kept when lag == 1
        return max(self.lag - 1, 1)


def transition_in_dim(config: RgpConfig, h: int) -> int:
    if h == 1:
        return config.lag * config.layer_dim + config.exo_lag * config.exo_dim
    return 2 * config.lag * config.layer_dim + config.action_lag * config.action_dim


def controller_in_dim(config: RgpConfig) -> int:
    return config.short_lag * config.layer_dim


def reward_in_dim(config: RgpConfig) -> int:
    return config.short_lag * config.layer_dim + config.action_lag * config.action_dim


def transition_spec(config: RgpConfig, h: int) -> GpLayerSpec:
    return GpLayerSpec(transition_in_dim(config, h), config.layer_dim,
                       config.n_inducing, f"rgp/trans{h}", config.kz_jitter)


def controller_spec(config: RgpConfig, h: int) -> GpLayerSpec:
    return GpLayerSpec(controller_in_dim(config), config.action_dim,
                       config.n_inducing, f"rgp/ctrl{h}", config.kz_jitter)


def reward_spec(config: RgpConfig) -> GpLayerSpec:
    return GpLayerSpec(reward_in_dim(config), 1, config.n_inducing, "rgp/reward",
                       config.kz_jitter)


def recog_spec(config: RgpConfig, h: int) -> MlpSpec:
    return MlpSpec((transition_in_dim(config, h), config.recog_hidden, 2 * config.layer_dim))


def init_rgp_params(config: RgpConfig, rng: RngStream) -> dict[str, np.ndarray]:
    params: dict[str, np.ndarray] = {}
    for h in range(1, config.horizon + 1):
        params.update(init_layer(transition_spec(config, h), rng.split(f"trans{h}"),
                                 noise_var=config.noise_var_init))
        params.update(init_layer(controller_spec(config, h), rng.split(f"ctrl{h}"),
                                 noise_var=config.noise_var_init))
        params.update(recog_spec(config, h).init(rng.split(f"recog{h}"), f"rgp/recog{h}"))
    params.update(init_layer(reward_spec(config), rng.split("reward"),
                             noise_var=config.noise_var_init))
    return params


def all_layer_specs(config: RgpConfig) -> list[GpLayerSpec]:
    specs = [transition_spec(config, h) for h in range(1, config.horizon + 1)]
    specs += [controller_spec(config, h) for h in range(1, config.horizon + 1)]
    specs.append(reward_spec(config))
    return specs


# ---------------------------------------------------------------------------
# single-sequence history container and the public window op


@dataclass
class LayerHistory:
    """Aligned sequences for one trajectory (value-level, for the public op).

    latent_mean/var: per layer h (list index h-1), arrays (T, layer_dim);
    exo: (T, exo_dim) encoded observations; actions: (T, action_dim).
    """

    latent_mean: list[np.ndarray]
    latent_var: list[np.ndarray]
    exo: np.ndarray
    actions: np.ndarray


def _gather(seq, times, dim, allow_pad: bool = False):
    """Concatenate seq[t] over ``times`` (newest first); -1 pads zeros."""
    parts_mean = []
    for t in times:
        if t < 0:
            if not allow_pad:
                raise InsufficientHistory(f"window needs index {t}")
            parts_mean.append(np.zeros(dim))
        else:
            parts_mean.append(seq[t])
    return np.concatenate(parts_mean)


def assemble_layer_input(history: LayerHistory, h: int, config: RgpConfig, i: int,
                         kind: str = "transition"):
    """Input belief (mean, var) for target index ``i`` of layer ``h``.

    ``kind`` selects the window layout: "transition" (h in 1..H),
    "controller" (latent-only window), or "reward" (h ignored, layer H
    window plus actions).  Raises InsufficientHistory if ``i`` precedes the
    first index with a full window.
    """
    m, mx, la = config.lag, config.exo_lag, config.action_lag
    d = config.layer_dim

    def latents(layer, times):
        mu = _gather(history.latent_mean[layer - 1], times, d)
        var = _gather(history.latent_var[layer - 1], times, d)
        return mu, var

    if kind == "transition":
        own_times = [i - k for k in range(1, m + 1)]
        mu, var = latents(h, own_times)
        if h == 1:
            exo_times = [i - k for k in range(1, mx + 1)]
            exo = _gather(history.exo, exo_times, config.exo_dim)
            return np.concatenate([mu, exo]), np.concatenate([var, np.zeros_like(exo)])
        below_times = [i - k for k in range(0, m)]
        mu2, var2 = latents(h - 1, below_times)
        act_times = [i - k for k in range(1, la + 1)]
        act = _gather(history.actions, act_times, config.action_dim)
        return (
            np.concatenate([mu, mu2, act]),
            np.concatenate([var, var2, np.zeros_like(act)]),
        )
    if kind == "controller":
        times = [i - k for k in range(1, config.short_lag + 1)]
        return latents(h, times)
    if kind == "reward":
        times = [i - k for k in range(1, config.short_lag + 1)]
        mu, var = latents(config.horizon, times)
        act_times = [i - k for k in range(1, la + 1)]
        act = _gather(history.actions, act_times, config.action_dim)
        return np.concatenate([mu, act]), np.concatenate([var, np.zeros_like(act)])
    raise ValueError(f"unknown window kind {kind!r}")


# ---------------------------------------------------------------------------
# batched recognition sweep (tape-aware)


def _window_batch(seq_list, i_times, zeros):
    """Concatenate per-time (B, D) entries; negative times become zeros."""
    return ops.concat([seq_list[t] if t >= 0 else zeros for t in i_times], axis=-1)


def posterior_sweep(params, config: RgpConfig, exo_steps, action_steps):
    """Amortized mean-field posterior for every layer and step.

    exo_steps / action_steps: python lists of (B, dim) values (Var or array)
    per time index.  Returns (means, betas): per layer h, lists over i of
    (B, layer_dim) nodes.  Sweep order is i outer, h inner, so every
    recognition input is already available when needed.
    """
    n = len(exo_steps)
    b = ops.value_of(exo_steps[0]).shape[0]
    zeros_lat = np.zeros((b, config.layer_dim))
    zeros_exo = np.zeros((b, config.exo_dim))
    zeros_act = np.zeros((b, config.action_dim))
    m, mx, la = config.lag, config.exo_lag, config.action_lag

    means: list[list] = [[] for _ in range(config.horizon)]
    betas: list[list] = [[] for _ in range(config.horizon)]
    for i in range(n):
        j = i - 1  # recognition reads the previous step's window
        for h in range(1, config.horizon + 1):
            own = _window_batch(means[h - 1], [j - k for k in range(1, m + 1)], zeros_lat)
            if h == 1:
                exo = _window_batch(exo_steps, [j - k for k in range(1, mx + 1)], zeros_exo)
                net_in = ops.concat([own, exo], axis=-1)
            else:
                below = _window_batch(means[h - 2], [j - k for k in range(0, m)], zeros_lat)
                act = _window_batch(action_steps, [j - k for k in range(1, la + 1)], zeros_act)
                net_in = ops.concat([own, below, act], axis=-1)
            raw = recog_spec(config, h).apply(params, f"rgp/recog{h}", net_in)
            d = config.layer_dim
            means[h - 1].append(raw[:, :d])
            betas[h - 1].append(ops.add(ops.softplus(raw[:, d:]), BETA_FLOOR))
    return means, betas
