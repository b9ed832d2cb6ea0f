"""Evidence bound for the recurrent GP state-space model.

Every data term is an expected Gaussian log-likelihood under uncertain
inputs, expanded through the kernel expectation statistics:

  term = -n*D/2 * log(2*pi*s2)
         - 1/(2*s2) * [ sum<t^2> - 2 sum tic (Psi1 K^-1 m)
                        + sum_d (a_d' Psi2 a_d + tr(W S_d))
                        + D * (psi0 - tr(K^-1 Psi2)) ]

with a_d = K^-1 m_d and W = K^-1 Psi2 K^-1.  Transition layers take their
own next-step posterior beliefs as targets (<t^2> = mu^2 + beta); controller
and reward layers take observed actions/rewards (<t^2> = t^2).  Entropy and
first-step prior terms close the latent part of the bound; inducing-point
KL divergences are global and never scaled by mini-batching.
"""

from __future__ import annotations

import numpy as np

from ..numerics import ops
from . import kernels
from .layers import GpLayerSpec, _solve_k, inducing_chol, kl_inducing, variational_chol
from .structure import RgpConfig, controller_spec, posterior_sweep, reward_spec, transition_spec

LOG_2PI = float(np.log(2.0 * np.pi))


def expected_loglik_term(params, spec: GpLayerSpec, in_mean, in_var, target_mean, target_sq):
    """Sum over rows of <p(f|inducing, input) log N(target | f, s2)>.

    in_mean/in_var: (n, D_in) input beliefs; target_mean: (n, D_out);
    target_sq: (n, D_out) second moments of the targets.
    """
    log_sf2 = params[f"{spec.prefix}/log_sf2"]
    log_ls2 = params[f"{spec.prefix}/log_ls2"]
    z = params[f"{spec.prefix}/z"]
    log_noise = params[f"{spec.prefix}/log_noise"]
    n = ops.value_of(in_mean).shape[0]
    d_out = spec.out_dim

    l = inducing_chol(params, spec)
    p0 = kernels.psi0(in_mean, log_sf2)
    p1 = kernels.psi1(in_mean, in_var, z, log_sf2, log_ls2)
    p2 = kernels.psi2(in_mean, in_var, z, log_sf2, log_ls2)

    a = _solve_k(l, params[f"{spec.prefix}/m"])  # (M, D_out)
    kinv_p2 = _solve_k(l, p2)
    tr_kinv_p2 = ops.trace(kinv_p2)
    w = _solve_k(l, ops.transpose(kinv_p2))  # K^-1 Psi2 K^-1

    data_cross = ops.sum_(ops.multiply(target_mean, ops.matmul(p1, a)))
    quad = ops.sum_(ops.multiply(a, ops.matmul(p2, a)))
    ls = variational_chol(params, spec)
    s = ops.einsum2("dmj,dkj->dmk", ls, ls)
    tr_ws = ops.sum_(ops.einsum2("mk,dkm->d", w, s))

    fit = ops.add(
        ops.subtract(ops.sum_(target_sq), ops.multiply(2.0, data_cross)),
        ops.add(
            ops.add(quad, tr_ws),
            ops.multiply(float(d_out), ops.subtract(p0, tr_kinv_p2)),
        ),
    )
    s2 = ops.exp(log_noise)
    const = ops.multiply(-0.5 * n * d_out, ops.add(LOG_2PI, log_noise))
    return ops.subtract(const, ops.divide(fit, ops.multiply(2.0, s2)))


def entropy_and_prior_terms(means, betas, lag: int):
    """Latent closing terms for one layer.

    means/betas: lists over time of (B, D) beliefs.  Contributes the q
    entropies at every step plus the expected standard-normal prior
    log-density on the first ``lag`` steps.
    """
    total = 0.0
    for i, (mu, beta) in enumerate(zip(means, betas)):
        ent = ops.multiply(0.5, ops.sum_(ops.add(LOG_2PI + 1.0, ops.log(beta))))
        total = ops.add(total, ent)
        if i < lag:
            logp = ops.multiply(
                -0.5, ops.sum_(ops.add(LOG_2PI, ops.add(ops.square(mu), beta)))
            )
            total = ops.add(total, logp)
    return total


def _window(seq_steps, times, zeros=None):
    parts = []
    for t in times:
        parts.append(seq_steps[t] if t >= 0 else zeros)
    return ops.concat(parts, axis=-1)


def _rows(parts_per_i):
    return ops.concat(parts_per_i, axis=0)


def rgp_bound_terms(params, config: RgpConfig, means, betas, exo_steps, action_steps,
                    reward_steps):
    """Data terms of the bound for given posterior beliefs.

    means/betas: per layer, lists over time of (B, layer_dim).
    exo/action/reward_steps: lists over time of (B, dim) values.
    Returns a dict of named scalar nodes (one per layer term).
    """
    n = len(exo_steps)
    m_lag = config.lag
    i_range = range(m_lag, n)
    if not len(i_range):
        raise ValueError("chunk length must exceed the lag")
    terms = {}

    for h in range(1, config.horizon + 1):
        mus, vars, t_mu, t_sq = [], [], [], []
        for i in i_range:
            own_t = [i - k for k in range(1, m_lag + 1)]
            mu_parts = [_window(means[h - 1], own_t)]
            var_parts = [_window(betas[h - 1], own_t)]
            if h == 1:
                exo_t = [i - k for k in range(1, config.exo_lag + 1)]
                exo = _window(exo_steps, exo_t)
                mu_parts.append(exo)
                var_parts.append(np.zeros(ops.value_of(exo).shape))
            else:
                below_t = [i - k for k in range(0, m_lag)]
                mu_parts.append(_window(means[h - 2], below_t))
                var_parts.append(_window(betas[h - 2], below_t))
                act_t = [i - k for k in range(1, config.action_lag + 1)]
                act = _window(action_steps, act_t)
                mu_parts.append(act)
                var_parts.append(np.zeros(ops.value_of(act).shape))
            mus.append(ops.concat(mu_parts, axis=-1))
            vars.append(ops.concat(var_parts, axis=-1))
            t_mu.append(means[h - 1][i])
            t_sq.append(ops.add(ops.square(means[h - 1][i]), betas[h - 1][i]))
        terms[f"trans{h}"] = expected_loglik_term(
            params, transition_spec(config, h),
            _rows(mus), _rows(vars), _rows(t_mu), _rows(t_sq),
        )

    short = config.short_lag
    for h in range(1, config.horizon + 1):
        mus, vars, t_mu, t_sq = [], [], [], []
        for i in i_range:
            times = [i - k for k in range(1, short + 1)]
            mus.append(_window(means[h - 1], times))
            vars.append(_window(betas[h - 1], times))
            act = action_steps[i]
            t_mu.append(act)
            t_sq.append(ops.square(act))
        terms[f"ctrl{h}"] = expected_loglik_term(
            params, controller_spec(config, h),
            _rows(mus), _rows(vars), _rows(t_mu), _rows(t_sq),
        )

    mus, vars, t_mu, t_sq = [], [], [], []
    for i in i_range:
        times = [i - k for k in range(1, short + 1)]
        act_t = [i - k for k in range(1, config.action_lag + 1)]
        lat_mu = _window(means[config.horizon - 1], times)
        lat_var = _window(betas[config.horizon - 1], times)
        act = _window(action_steps, act_t)
        mus.append(ops.concat([lat_mu, act], axis=-1))
        vars.append(ops.concat([lat_var, np.zeros(ops.value_of(act).shape)], axis=-1))
        # the window ends at i-1, so it explains the reward booked at i-1
        r = ops.reshape(reward_steps[i - 1], (-1, 1))
        t_mu.append(r)
        t_sq.append(ops.square(r))
    terms["reward"] = expected_loglik_term(
        params, reward_spec(config),
        _rows(mus), _rows(vars), _rows(t_mu), _rows(t_sq),
    )
    return terms


def rgp_elbo(params, config: RgpConfig, exo, actions, rewards, scale: float = 1.0,
             beliefs=None, include_entropy: bool = True,
             include_kl: bool = True):
    """Negative evidence bound for a batch of encoded chunks (a loss node).

    exo: (B, N, exo_dim) encoded observations; actions: (B, N, action_dim);
    rewards: (B, N).  ``scale`` multiplies the per-datum terms for unbiased
    mini-batching; inducing KL terms are never scaled.  ``beliefs`` may
    supply (means, betas) directly (lists over layers of lists over time),
    bypassing the recognition sweep; entropy/KL switches exist for the
    collapsed oracles in the test suite.
    """
    nv = ops.value_of(exo).shape[1]
    if nv <= config.lag:
        raise ValueError("chunk length must exceed the lag")
    exo_steps = [exo[:, i] for i in range(nv)] if not isinstance(exo, list) else exo
    action_steps = (
        [actions[:, i] for i in range(nv)] if not isinstance(actions, list) else actions
    )
    reward_steps = (
        [rewards[:, i] for i in range(nv)] if not isinstance(rewards, list) else rewards
    )

    if beliefs is None:
        means, betas = posterior_sweep(params, config, exo_steps, action_steps)
    else:
        means, betas = beliefs

    terms = rgp_bound_terms(params, config, means, betas, exo_steps, action_steps,
                            reward_steps)
    data = 0.0
    for t in terms.values():
        data = ops.add(data, t)
    if include_entropy:
        for h in range(1, config.horizon + 1):
            data = ops.add(data, entropy_and_prior_terms(means[h - 1], betas[h - 1],
                                                         config.lag))
    bound = ops.multiply(float(scale), data)
    if include_kl:
        kl = 0.0
        for h in range(1, config.horizon + 1):
            kl = ops.add(kl, kl_inducing(params, transition_spec(config, h)))
            kl = ops.add(kl, kl_inducing(params, controller_spec(config, h)))
        kl = ops.add(kl, kl_inducing(params, reward_spec(config)))
        bound = ops.subtract(bound, kl)
    return ops.negative(bound)
