"""Recurrent sparse-GP world model."""

from .bound import entropy_and_prior_terms, expected_loglik_term, rgp_bound_terms, rgp_elbo
from .kernels import KernelHyper, kernel_eval, kernel_matrix, psi0, psi1, psi2, psi2_per_point
from .layers import (
    ClampCounter,
    GpLayerSpec,
    gp_conditional,
    init_layer,
    kl_inducing,
    predict_moments,
)
from .rollout import SeedWindow, controller_action_source, imagine_rollout, seed_from_history
from .structure import (
    LayerHistory,
    RgpConfig,
    assemble_layer_input,
    controller_spec,
    init_rgp_params,
    posterior_sweep,
    reward_spec,
    transition_spec,
)

__all__ = [
    "RgpConfig",
    "GpLayerSpec",
    "KernelHyper",
    "LayerHistory",
    "SeedWindow",
    "ClampCounter",
    "kernel_eval",
    "kernel_matrix",
    "psi0",
    "psi1",
    "psi2",
    "psi2_per_point",
    "init_layer",
    "init_rgp_params",
    "gp_conditional",
    "kl_inducing",
    "predict_moments",
    "assemble_layer_input",
    "posterior_sweep",
    "transition_spec",
    "controller_spec",
    "reward_spec",
    "rgp_elbo",
    "rgp_bound_terms",
    "expected_loglik_term",
    "entropy_and_prior_terms",
    "imagine_rollout",
    "seed_from_history",
    "controller_action_source",
]
