"""Latent world-model reinforcement learning engine.

Subpackages:

- ``numerics``: reverse-mode tape, counter-based RNG streams, Cholesky tools.
- ``igmm``: mixture-prior variational autoencoder with stick-breaking weights.
- ``rgp``: recurrent sparse-GP state-space model and imagination rollouts.
- ``planner``: soft actor-critic heads, losses, and tabular references.
- ``envs``: desk-scale environments (pendulum, kink map, pixel dot-chaser).
- ``trainer``: replay buffer, joint world-model training, the full loop.
- ``cli``: command-line entry points (``train``, ``eval``, ``sysid``,
  ``cluster``, ``plot``).
"""

__version__ = "0.1.0"
