"""Desk-scale environments with a uniform reset/step interface."""

from .dotchaser import DotChaserEnv
from .kink import kink_map, kink_step, make_sysid_dataset, simulate_kink
from .pendulum import PendulumEnv, splat_bilinear, wrap_angle


def make_env(name: str, **kwargs):
    if name == "pendulum":
        return PendulumEnv(**kwargs)
    if name == "pendulum-image":
        return PendulumEnv(obs_kind="image", **kwargs)
    if name == "dotchaser":
        return DotChaserEnv(**kwargs)
    raise ValueError(f"unknown environment {name!r}")


__all__ = [
    "PendulumEnv",
    "DotChaserEnv",
    "kink_map",
    "kink_step",
    "simulate_kink",
    "make_sysid_dataset",
    "make_env",
    "wrap_angle",
    "splat_bilinear",
]
