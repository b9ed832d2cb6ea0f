"""Pixel environment: steer a bright dot onto a dim fixed target.

The agent moves in the unit square by velocity actions scaled by 0.1; the
target is fixed per episode.  Observations are 16x16 grayscale renders with
both dots splatted bilinearly (agent intensity 1.0, target 0.5); reward is
the negative Euclidean distance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..numerics.rng import RngStream
from .pendulum import splat_bilinear


@dataclass
class DotChaserEnv:
    episode_cap: int = 100
    image_hw: int = 16

    agent: np.ndarray = field(default_factory=lambda: np.zeros(2))
    target: np.ndarray = field(default_factory=lambda: np.zeros(2))
    steps: int = 0

    @property
    def obs_dim(self) -> int:
        return self.image_hw * self.image_hw

    @property
    def action_dim(self) -> int:
        return 2

    @property
    def action_low(self) -> tuple[float, ...]:
        return (-1.0, -1.0)

    @property
    def action_high(self) -> tuple[float, ...]:
        return (1.0, 1.0)

    def reset(self, rng: RngStream) -> np.ndarray:
        self.agent = rng.uniform(0.1, 0.9, (2,))
        self.target = rng.uniform(0.1, 0.9, (2,))
        self.steps = 0
        return self.observe()

    def step(self, action) -> dict:
        a = np.clip(np.asarray(action).reshape(2), -1.0, 1.0)
        self.agent = np.clip(self.agent + 0.1 * a, 0.0, 1.0)
        self.steps += 1
        reward = -float(np.linalg.norm(self.agent - self.target))
        return {
            "observation": self.observe(),
            "reward": reward,
            "done": self.steps >= self.episode_cap,
            "info": {"agent": self.agent.copy(), "target": self.target.copy()},
        }

    def observe(self) -> np.ndarray:
        img = self.render_blob(self.target, 0.5)
        img += self.render_blob(self.agent, 1.0)
        return np.clip(img, 0.0, 1.0).reshape(-1)

    def render_blob(self, pos: np.ndarray, intensity: float) -> np.ndarray:
        img = np.zeros((self.image_hw, self.image_hw))
        x = pos[0] * (self.image_hw - 1)
        y = pos[1] * (self.image_hw - 1)
        splat_bilinear(img, x, y, intensity)
        return img
