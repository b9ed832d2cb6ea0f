"""Kinked 1-D map used as a system-identification benchmark, plus dataset
construction for training the dynamics model in isolation."""

from __future__ import annotations

import numpy as np

from ..numerics.rng import RngStream
from .pendulum import PendulumEnv


def kink_map(z):
    """f(z) = 0.8 + (z + 0.2) * (1 - 5 / (1 + e^{-2z}))."""
    z = np.asarray(z, dtype=np.float64)
    return 0.8 + (z + 0.2) * (1.0 - 5.0 / (1.0 + np.exp(-2.0 * z)))


def kink_step(z: float, rng: RngStream, noise_std: float) -> float:
    """One noisy iteration of the kink map."""
    if noise_std < 0:
        raise ValueError("noise_std must be nonnegative")
    out = float(kink_map(z))
    if noise_std > 0:
        out += noise_std * float(rng.normal(()))
    return out


def simulate_kink(z0: float, length: int, noise_std: float, rng: RngStream) -> np.ndarray:
    traj = np.empty(length + 1)
    traj[0] = z0
    for t in range(length):
        traj[t + 1] = kink_step(traj[t], rng, noise_std)
    return traj


def make_sysid_dataset(system: str, length: int, noise_std: float, rng: RngStream,
                       train_frac: float = 0.8) -> dict:
    """(input, target) pairs for one-step prediction with a held-out split.

    "kink": scalar inputs z_t, targets z_{t+1}.  "pendulum-passive": inputs
    (cos, sin, velocity), targets the next angle observation, torque held at
    zero.  The split is chronological: the first ``train_frac`` of pairs
    train, the rest test.
    """
    if system == "kink":
        z0 = float(rng.uniform(-0.5, 0.5, ()))
        traj = simulate_kink(z0, length, noise_std, rng)
        inputs = traj[:-1, None]
        targets = traj[1:, None]
    elif system == "pendulum-passive":
        env = PendulumEnv(episode_cap=length + 1)
        obs = [env.reset(rng)]
        for _ in range(length):
            obs.append(env.step(np.zeros(1))["observation"])
        obs = np.stack(obs)
        if noise_std > 0:
            obs = obs + noise_std * rng.normal(obs.shape)
        inputs = obs[:-1]
        targets = obs[1:]
    else:
        raise ValueError(f"unknown system {system!r}")
    n_train = int(round(train_frac * len(inputs)))
    return {
        "system": system,
        "noise_std": noise_std,
        "train_inputs": inputs[:n_train],
        "train_targets": targets[:n_train],
        "test_inputs": inputs[n_train:],
        "test_targets": targets[n_train:],
    }
