"""Variational autoencoder with a truncated stick-breaking mixture prior.

The latent prior is a Dirichlet-process mixture truncated at K components:
stick fractions get Kumaraswamy posteriors (closed-form KL against their
Beta(1, alpha) prior), mixture weights follow by stick-breaking, component
means/variances are produced by a network from a style variable w, and
cluster assignments are handled analytically through responsibilities (a
Gumbel-Softmax sampler is exposed for hard assignments).

All bound evaluation happens on a tape, so the negative bound returned by
``elbo_igmm`` is directly differentiable with respect to every parameter
bundle.  Reparameterized draws happen in a fixed order (w, z, sticks) so
seeded runs are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDensity, OutOfRange, ParameterOutOfRange
from .nn import ConvDecoderSpec, ConvEncoderSpec, MlpSpec
from .numerics import ops
from .numerics.rng import RngStream

EULER_GAMMA = 0.5772156649015329
# series length for the Kumaraswamy/Beta cross-entropy; 50 keeps the
# truncation bias well under Monte-Carlo resolution at 1e6 samples
KL_SERIES_TERMS = 50


@dataclass(frozen=True)
class TemperatureSchedule:
    """Geometric annealing for the assignment-relaxation temperature."""

    initial: float = 1.0
    floor: float = 0.3
    decay: float = 0.999

    def at(self, update_count: int) -> float:
        return max(self.floor, self.initial * self.decay**update_count)


@dataclass(frozen=True)
class IgmmConfig:
    obs_dim: int = 3
    latent_dim: int = 3
    style_dim: int = 2
    truncation: int = 10
    concentration: float = 1.0
    temperature: TemperatureSchedule = field(default_factory=TemperatureSchedule)
    hidden: int = 64
    encoder_kind: str = "mlp"  # "mlp" for vectors, "conv" for 16x16 images
    image_hw: int = 16
    n_mc_samples: int = 1

    def __post_init__(self):
        if self.truncation < 1:
            raise ValueError("truncation must be >= 1")
        if self.concentration <= 0:
            raise ValueError("concentration must be positive")
        if self.temperature.floor <= 0:
            raise ValueError("temperature floor must be positive")


# ---------------------------------------------------------------------------
# distribution primitives


def stick_break(nu):
    """Map stick fractions in (0,1)^(K-1) to weights on the K-simplex.

    Supports a trailing-axis batch: (K-1,) -> (K,) or (B, K-1) -> (B, K).
    """
    nv = ops.value_of(nu)
    if nv.size and (np.any(nv <= 0.0) or np.any(nv >= 1.0)):
        raise OutOfRange("stick fractions must lie strictly inside (0, 1)")
    if nv.shape[-1] == 0:
        return np.ones(nv.shape[:-1] + (1,))
    log_remain = ops.cumsum(ops.log1p(ops.negative(nu)), axis=-1)
    pad = np.zeros(nv.shape[:-1] + (1,))
    log_prefix = ops.concat([pad, log_remain], axis=-1)  # log prod_{j<i}(1-nu_j)
    log_nu_ext = ops.concat([ops.log(nu), pad], axis=-1)  # last stick takes the rest
    return ops.exp(ops.add(log_nu_ext, log_prefix))


def kumaraswamy_sample(a, b, rng: RngStream, shape=None):
    """Inverse-CDF draw (1-(1-u)^(1/b))^(1/a); differentiable in a and b."""
    av, bv = ops.value_of(a), ops.value_of(b)
    if np.any(av <= 0.0) or np.any(bv <= 0.0):
        raise ParameterOutOfRange("Kumaraswamy parameters must be positive")
    if shape is None:
        shape = np.broadcast_shapes(av.shape, bv.shape)
    u = rng.uniform(1e-12, 1.0 - 1e-12, shape)
    # nu = exp(log(1 - (1-u)^(1/b)) / a), with both logs expanded stably;
    # extreme (a, b) can still round onto the endpoints, so clamp them off
    t_log = ops.divide(np.log1p(-u), b)
    s = ops.negative(ops.expm1(t_log))
    nu = ops.exp(ops.divide(ops.log(s), a))
    return ops.clip(nu, 1e-12, 1.0 - 1e-12)


def kumaraswamy_mean(a, b):
    """E[nu] = b * Beta(1 + 1/a, b)."""
    av, bv = ops.value_of(a), ops.value_of(b)
    return bv * np.exp(
        _log_beta_value(1.0 + 1.0 / av, bv)
    )


def _log_beta(x, y):
    return ops.subtract(ops.add(ops.gammaln(x), ops.gammaln(y)), ops.gammaln(ops.add(x, y)))


def _log_beta_value(x, y):
    from scipy.special import gammaln

    return gammaln(x) + gammaln(y) - gammaln(x + y)


def kl_kumaraswamy_beta(a, b, alpha0, beta0, n_terms: int = KL_SERIES_TERMS):
    """Closed-form KL(Kumaraswamy(a, b) || Beta(alpha0, beta0)).

    The infinite series in the cross-entropy is truncated at ``n_terms``;
    elementwise over broadcast shapes, differentiable in a and b.
    """
    for p in (a, b, alpha0, beta0):
        if np.any(ops.value_of(p) <= 0.0):
            raise ParameterOutOfRange("all KL parameters must be positive")
    ab = ops.multiply(a, b)
    term = ops.multiply(
        ops.divide(ops.subtract(a, alpha0), a),
        ops.subtract(ops.negative(ops.digamma(b)), EULER_GAMMA + 0.0)
        - ops.divide(1.0, b),
    )
    term = ops.add(term, ops.log(ab))
    term = ops.add(term, _log_beta(alpha0, beta0))
    term = ops.subtract(term, ops.divide(ops.subtract(b, 1.0), b))
    # series over m stacked on a leading axis: one gammaln node for all
    # terms; its prefactor (beta0 - 1) vanishes identically at beta0 = 1
    skip_series = not ops.is_var(beta0) and np.all(ops.value_of(beta0) == 1.0)
    if not skip_series:
        base = np.broadcast_shapes(ops.value_of(a).shape, ops.value_of(b).shape)
        m = np.arange(1.0, n_terms + 1.0).reshape((n_terms,) + (1,) * len(base))
        beta_m = ops.exp(_log_beta(ops.divide(m, a), b))
        series = ops.sum_(ops.divide(beta_m, ops.add(m, ab)), axis=0)
        term = ops.add(term, ops.multiply(ops.multiply(ops.subtract(beta0, 1.0), b), series))
    return ops.maximum(term, -1e-9)


def gumbel_softmax_sample(logits, temperature: float, rng: RngStream):
    """softmax((logits + Gumbel noise) / temperature) on the last axis."""
    if temperature <= 0:
        raise ParameterOutOfRange("temperature must be positive")
    lv = ops.value_of(logits)
    if not np.all(np.isfinite(lv)):
        raise ParameterOutOfRange("logits must be finite")
    g = rng.gumbel(lv.shape)
    return ops.softmax(ops.divide(ops.add(logits, g), float(temperature)), axis=-1)


def _log_responsibilities(z, theta, comp_mean, comp_log_var):
    """log of Eq-style posterior over components.

    z: (B, D); theta: (B, K); comp_mean/log_var: (B, K, D).
    Returns (B, K) log-responsibilities.
    """
    zb = ops.reshape(z, (ops.value_of(z).shape[0], 1, -1))
    log_dens = ops.gaussian_log_density(zb, comp_mean, comp_log_var, axis=-1)  # (B, K)
    log_joint = ops.add(ops.log(ops.maximum(theta, 1e-300)), log_dens)
    ljv = ops.value_of(log_joint)
    if np.any(~np.isfinite(ljv.max(axis=-1))):
        raise DegenerateDensity("all component densities underflowed")
    return ops.log_softmax(log_joint, axis=-1)


def responsibilities(z, w, theta, params, config: IgmmConfig):
    """Posterior assignment probabilities for a single latent point."""
    tv = ops.value_of(theta)
    if abs(float(tv.sum()) - 1.0) > 1e-6 or np.any(tv < 0):
        raise OutOfRange("theta must lie on the simplex")
    comp_mean, comp_log_var = prior_component_params(params, config, ops.reshape(w, (1, -1)))
    log_r = _log_responsibilities(ops.reshape(z, (1, -1)), ops.reshape(theta, (1, -1)),
                                  comp_mean, comp_log_var)
    return ops.reshape(ops.exp(log_r), (tv.shape[-1],))


def gaussian_kl_diag(mean_q, var_q, mean_p, var_p, axis=None):
    """KL between diagonal Gaussians, summed over ``axis``."""
    for v in (var_q, var_p):
        if np.any(ops.value_of(v) <= 0.0):
            raise ParameterOutOfRange("variances must be positive")
    ratio = ops.divide(var_q, var_p)
    d = ops.subtract(mean_q, mean_p)
    core = ops.subtract(
        ops.add(ratio, ops.divide(ops.multiply(d, d), var_p)),
        ops.add(1.0, ops.log(ratio)),
    )
    return ops.multiply(0.5, ops.sum_(core, axis=axis))


# ---------------------------------------------------------------------------
# parameter bundles


def _encoder_specs(config: IgmmConfig):
    k = config.truncation
    heads = {
        "z": 2 * config.latent_dim,
        "w": 2 * config.style_dim,
        "nu": 2 * max(k - 1, 1) if k > 1 else 0,
    }
    return heads


def init_igmm_params(config: IgmmConfig, rng: RngStream) -> dict[str, np.ndarray]:
    params: dict[str, np.ndarray] = {}
    heads = _encoder_specs(config)
    if config.encoder_kind == "conv":
        trunk = ConvEncoderSpec(image_hw=config.image_hw, out_dim=config.hidden)
        params.update(trunk.init(rng.split("enc_trunk"), "igmm/enc_trunk"))
    else:
        trunk = MlpSpec((config.obs_dim, config.hidden, config.hidden))
        params.update(trunk.init(rng.split("enc_trunk"), "igmm/enc_trunk"))
    for name, out_dim in heads.items():
        if out_dim == 0:
            continue
        head = MlpSpec((config.hidden, out_dim))
        params.update(head.init(rng.split(f"enc_{name}"), f"igmm/enc_{name}"))
    prior = MlpSpec((config.style_dim, config.hidden, 2 * config.truncation * config.latent_dim))
    params.update(prior.init(rng.split("prior"), "igmm/prior"))
    # scatter the component means at init: identical components are a
    # symmetric saddle the responsibilities cannot escape
    bias = params["igmm/prior/b1"].reshape(config.truncation, 2 * config.latent_dim)
    bias[:, : config.latent_dim] = 1.5 * rng.split("prior_spread").normal(
        (config.truncation, config.latent_dim)
    )
    params["igmm/prior/b1"] = bias.reshape(-1)
    if config.encoder_kind == "conv":
        dec = ConvDecoderSpec(image_hw=config.image_hw, in_dim=config.latent_dim)
        params.update(dec.init(rng.split("dec"), "igmm/dec"))
    else:
        dec = MlpSpec((config.latent_dim, config.hidden, config.hidden, 2 * config.obs_dim))
        params.update(dec.init(rng.split("dec"), "igmm/dec"))
    return params


def _apply_trunk(params, config: IgmmConfig, x):
    if config.encoder_kind == "conv":
        spec = ConvEncoderSpec(image_hw=config.image_hw, out_dim=config.hidden)
        return ops.softplus(spec.apply(params, "igmm/enc_trunk", x))
    spec = MlpSpec((config.obs_dim, config.hidden, config.hidden))
    return ops.softplus(spec.apply(params, "igmm/enc_trunk", x))


def encode(params, config: IgmmConfig, x):
    """Recognition heads for a batch of observations.

    Returns a dict with q(z|x) mean/log-var, q(w|x) mean/log-var, and the
    Kumaraswamy log-parameter heads (absent when truncation == 1).
    """
    h = _apply_trunk(params, config, x)
    dz, dw, k = config.latent_dim, config.style_dim, config.truncation
    z_head = MlpSpec((config.hidden, 2 * dz)).apply(params, "igmm/enc_z", h)
    w_head = MlpSpec((config.hidden, 2 * dw)).apply(params, "igmm/enc_w", h)
    out = {
        "z_mean": z_head[:, :dz],
        "z_log_var": ops.clip(z_head[:, dz:], -12.0, 8.0),
        "w_mean": w_head[:, :dw],
        "w_log_var": ops.clip(w_head[:, dw:], -12.0, 8.0),
    }
    if k > 1:
        nu_head = MlpSpec((config.hidden, 2 * (k - 1))).apply(params, "igmm/enc_nu", h)
        out["log_a"] = ops.clip(nu_head[:, : k - 1], -5.0, 5.0)
        out["log_b"] = ops.clip(nu_head[:, k - 1 :], -5.0, 5.0)
    return out


def prior_component_params(params, config: IgmmConfig, w):
    """Component means/log-variances from the style variable: (B, K, D) each."""
    k, dz = config.truncation, config.latent_dim
    spec = MlpSpec((config.style_dim, config.hidden, 2 * k * dz))
    raw = ops.reshape(spec.apply(params, "igmm/prior", w), (-1, k, 2 * dz))
    mean = raw[:, :, :dz]
    log_var = ops.clip(raw[:, :, dz:], -12.0, 8.0)
    return mean, log_var


def decode(params, config: IgmmConfig, z):
    """Observation mean and log-variance for latent batch z."""
    if config.encoder_kind == "conv":
        spec = ConvDecoderSpec(image_hw=config.image_hw, in_dim=config.latent_dim)
        return spec.apply(params, "igmm/dec", z)
    d = config.obs_dim
    spec = MlpSpec((config.latent_dim, config.hidden, config.hidden, 2 * d))
    raw = spec.apply(params, "igmm/dec", z)
    return raw[:, :d], ops.clip(raw[:, d:], -12.0, 8.0)


def encode_mean(params, config: IgmmConfig, x):
    """Posterior z mean, the package-wide convention for 'encoded observation'."""
    return encode(params, config, x)["z_mean"]


# ---------------------------------------------------------------------------
# the bound


def elbo_igmm(x, params, config: IgmmConfig, rng: RngStream, heads=None):
    """Negative evidence bound, averaged over the batch (a loss node).

    Per reparameterized sample (draw order: w, z, sticks) the bound is
    reconstruction log-likelihood minus four KL regularizers: style against
    its unit-Gaussian prior, latent against the mixture component (averaged
    under responsibilities), assignment against the stick weights, and stick
    fractions against their Beta(1, alpha) prior.  ``heads`` may carry a
    precomputed ``encode`` output to share the encoder pass with callers.
    """
    xv = ops.value_of(x)
    if xv.ndim != 2 or xv.shape[0] == 0:
        raise ValueError("x must be a nonempty (batch, obs_dim) array")
    b = xv.shape[0]
    k = config.truncation
    if heads is None:
        heads = encode(params, config, x)

    total = 0.0
    for s in range(config.n_mc_samples):
        eps_w = rng.normal((b, config.style_dim))
        w = ops.add(heads["w_mean"], ops.multiply(ops.exp(ops.multiply(0.5, heads["w_log_var"])), eps_w))
        eps_z = rng.normal((b, config.latent_dim))
        z = ops.add(heads["z_mean"], ops.multiply(ops.exp(ops.multiply(0.5, heads["z_log_var"])), eps_z))

        if k > 1:
            a = ops.exp(heads["log_a"])
            bb = ops.exp(heads["log_b"])
            nu = kumaraswamy_sample(a, bb, rng)
            theta = stick_break(nu)
            kl_nu = ops.sum_(
                kl_kumaraswamy_beta(a, bb, 1.0, config.concentration), axis=-1
            )
        else:
            theta = np.ones((b, 1))
            kl_nu = np.zeros(b)

        comp_mean, comp_log_var = prior_component_params(params, config, w)
        log_r = _log_responsibilities(z, theta, comp_mean, comp_log_var)
        r = ops.exp(log_r)

        recon_mean, recon_log_var = decode(params, config, z)
        recon = ops.gaussian_log_density(x, recon_mean, recon_log_var, axis=-1)

        kl_w = gaussian_kl_diag(
            heads["w_mean"], ops.exp(heads["w_log_var"]),
            np.zeros(config.style_dim), np.ones(config.style_dim), axis=-1,
        )
        # expected latent KL under responsibilities: (B, K) -> (B,)
        zq_mean = ops.reshape(heads["z_mean"], (b, 1, -1))
        zq_var = ops.exp(ops.reshape(heads["z_log_var"], (b, 1, -1)))
        kl_z_per = gaussian_kl_diag(zq_mean, zq_var, comp_mean, ops.exp(comp_log_var), axis=-1)
        kl_z = ops.sum_(ops.multiply(r, kl_z_per), axis=-1)
        kl_c = ops.sum_(
            ops.multiply(r, ops.subtract(log_r, ops.log(ops.maximum(theta, 1e-300)))),
            axis=-1,
        )

        bound = ops.subtract(
            recon, ops.add(ops.add(kl_w, kl_z), ops.add(kl_c, kl_nu))
        )
        total = ops.add(total, ops.mean_(bound))

    return ops.negative(ops.divide(total, float(config.n_mc_samples)))


def elbo_term_values(x, params, config: IgmmConfig, rng: RngStream) -> dict[str, float]:
    """Scalar per-term diagnostics (means over the batch), untraced."""
    xv = np.asarray(x, dtype=np.float64)
    b = xv.shape[0]
    heads = {kk: ops.value_of(v) for kk, v in encode(params, config, xv).items()}
    k = config.truncation
    eps_w = rng.normal((b, config.style_dim))
    w = heads["w_mean"] + np.exp(0.5 * heads["w_log_var"]) * eps_w
    eps_z = rng.normal((b, config.latent_dim))
    z = heads["z_mean"] + np.exp(0.5 * heads["z_log_var"]) * eps_z
    if k > 1:
        a, bb = np.exp(heads["log_a"]), np.exp(heads["log_b"])
        nu = ops.value_of(kumaraswamy_sample(a, bb, rng))
        theta = ops.value_of(stick_break(nu))
        kl_nu = ops.value_of(kl_kumaraswamy_beta(a, bb, 1.0, config.concentration)).sum(-1)
    else:
        theta = np.ones((b, 1))
        kl_nu = np.zeros(b)
    comp_mean, comp_log_var = prior_component_params(params, config, w)
    comp_mean, comp_log_var = ops.value_of(comp_mean), ops.value_of(comp_log_var)
    log_r = ops.value_of(_log_responsibilities(z, theta, comp_mean, comp_log_var))
    r = np.exp(log_r)
    recon_mean, recon_log_var = decode(params, config, z)
    recon = ops.value_of(
        ops.gaussian_log_density(xv, ops.value_of(recon_mean), ops.value_of(recon_log_var), axis=-1)
    )
    kl_w = ops.value_of(
        gaussian_kl_diag(heads["w_mean"], np.exp(heads["w_log_var"]),
                         np.zeros(config.style_dim), np.ones(config.style_dim), axis=-1)
    )
    kl_z = (r * ops.value_of(
        gaussian_kl_diag(heads["z_mean"][:, None, :], np.exp(heads["z_log_var"])[:, None, :],
                         comp_mean, np.exp(comp_log_var), axis=-1)
    )).sum(-1)
    kl_c = (r * (log_r - np.log(np.maximum(theta, 1e-300)))).sum(-1)
    return {
        "recon": float(recon.mean()),
        "kl_w": float(kl_w.mean()),
        "kl_z": float(kl_z.mean()),
        "kl_c": float(kl_c.mean()),
        "kl_nu": float(kl_nu.mean()),
    }


# ---------------------------------------------------------------------------
# clustering diagnostics used by the cluster command and acceptance checks


def expected_theta(params, config: IgmmConfig, x) -> np.ndarray:
    """Mean mixture weights under the amortized stick posteriors: (K,)."""
    if config.truncation == 1:
        return np.ones(1)
    heads = encode(params, config, x)
    a = np.exp(ops.value_of(heads["log_a"]))
    b = np.exp(ops.value_of(heads["log_b"]))
    nu = np.clip(kumaraswamy_mean(a, b), 1e-12, 1.0 - 1e-12)
    return np.asarray(ops.value_of(stick_break(nu))).mean(axis=0)


def hard_assignments(params, config: IgmmConfig, x) -> np.ndarray:
    """Argmax responsibilities at posterior means (no sampling)."""
    heads = encode(params, config, x)
    z = ops.value_of(heads["z_mean"])
    w = ops.value_of(heads["w_mean"])
    if config.truncation > 1:
        a = np.exp(ops.value_of(heads["log_a"]))
        b = np.exp(ops.value_of(heads["log_b"]))
        nu = np.clip(kumaraswamy_mean(a, b), 1e-12, 1.0 - 1e-12)
        theta = np.asarray(ops.value_of(stick_break(nu)))
    else:
        theta = np.ones((z.shape[0], 1))
    comp_mean, comp_log_var = prior_component_params(params, config, w)
    log_r = _log_responsibilities(z, theta, ops.value_of(comp_mean), ops.value_of(comp_log_var))
    return np.argmax(ops.value_of(log_r), axis=-1)


def cluster_purity(assignments: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of points whose cluster's majority label matches their own."""
    total = 0
    for c in np.unique(assignments):
        members = labels[assignments == c]
        if members.size:
            total += int(np.bincount(members).max())
    return total / len(labels)


def fit_clustering(data: np.ndarray, config: IgmmConfig, seed: int,
                   steps: int = 1500, batch_size: int = 128, lr: float = 1e-3):
    """Train the bound on a fixed dataset; returns (params, loss_history)."""
    from .numerics.tape import Tape
    from .trainer.optim import Adam, clip_by_global_norm

    rng = RngStream(seed)
    params = init_igmm_params(config, rng.split("init"))
    opt = Adam(lr=lr)
    draw = rng.split("train")
    history = []
    n = data.shape[0]
    for step in range(steps):
        idx = draw.integers(0, n, (min(batch_size, n),))
        batch = data[idx]
        tape = Tape()
        pvars = tape.register(params)
        loss = elbo_igmm(batch, pvars, config, draw)
        grads = tape.grad(loss)
        grads, _, _ = clip_by_global_norm(grads, 1000.0)
        opt.step(params, grads)
        history.append(float(loss.value))
    return params, history
