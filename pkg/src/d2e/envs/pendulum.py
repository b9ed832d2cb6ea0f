"""Torque-limited pendulum swing-up.

State is (angle from upright, angular velocity); the dynamics integrate
theta_ddot = (3g / 2l) sin(theta) + (3 / m l^2) u - damping * theta_dot
with a semi-implicit Euler step, velocity clipped to [-8, 8] and torque to
[-2, 2].  Reward penalizes angle, velocity, and torque quadratically, so the
optimum is balancing upright with zero effort.  Observations are either the
(cos, sin, velocity) vector or a rendered 16x16 grayscale image of the rod.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..numerics.rng import RngStream

GRAVITY = 10.0
MASS = 1.0
LENGTH = 1.0
DT = 0.05
MAX_SPEED = 8.0
MAX_TORQUE = 2.0


def wrap_angle(theta: float) -> float:
    """Map to (-pi, pi]."""
    return float(((theta + np.pi) % (2.0 * np.pi)) - np.pi)


@dataclass
class PendulumEnv:
    episode_cap: int = 200
    obs_kind: str = "vector"  # "vector" or "image"
    damping: float = 0.0
    image_hw: int = 16

    state: np.ndarray = field(default_factory=lambda: np.zeros(2))
    steps: int = 0

    @property
    def obs_dim(self) -> int:
        return 3 if self.obs_kind == "vector" else self.image_hw * self.image_hw

    @property
    def action_dim(self) -> int:
        return 1

    @property
    def action_low(self) -> tuple[float, ...]:
        return (-MAX_TORQUE,)

    @property
    def action_high(self) -> tuple[float, ...]:
        return (MAX_TORQUE,)

    def reset(self, rng: RngStream) -> np.ndarray:
        theta = float(rng.uniform(-np.pi, np.pi, ()))
        theta_dot = float(rng.uniform(-1.0, 1.0, ()))
        self.state = np.array([theta, theta_dot])
        self.steps = 0
        return self.observe()

    def step(self, torque) -> dict:
        u = float(np.clip(np.asarray(torque).reshape(-1)[0], -MAX_TORQUE, MAX_TORQUE))
        theta, theta_dot = self.state
        cost = wrap_angle(theta) ** 2 + 0.1 * theta_dot**2 + 0.001 * u**2
        acc = (
            (3.0 * GRAVITY / (2.0 * LENGTH)) * np.sin(theta)
            + (3.0 / (MASS * LENGTH**2)) * u
            - self.damping * theta_dot
        )
        theta_dot = float(np.clip(theta_dot + acc * DT, -MAX_SPEED, MAX_SPEED))
        theta = theta + theta_dot * DT  # semi-implicit: new velocity moves the angle
        self.state = np.array([theta, theta_dot])
        self.steps += 1
        return {
            "observation": self.observe(),
            "reward": -cost,
            "done": self.steps >= self.episode_cap,
            "info": {"theta": wrap_angle(theta), "theta_dot": theta_dot},
        }

    def observe(self) -> np.ndarray:
        theta, theta_dot = self.state
        if self.obs_kind == "vector":
            return np.array([np.cos(theta), np.sin(theta), theta_dot])
        return self.render()

    def render(self) -> np.ndarray:
        """Grayscale rod from the pivot at the image center."""
        hw = self.image_hw
        img = np.zeros((hw, hw))
        cx = cy = (hw - 1) / 2.0
        theta = self.state[0]
        for frac in np.linspace(0.15, 1.0, 8):
            x = cx + frac * (hw / 2 - 1) * np.sin(theta)
            y = cy - frac * (hw / 2 - 1) * np.cos(theta)
            splat_bilinear(img, x, y, 1.0)
        return np.clip(img, 0.0, 1.0).reshape(-1)

    def energy(self) -> float:
        """Rod kinetic plus potential energy (zero level at the pivot)."""
        theta, theta_dot = self.state
        inertia = MASS * LENGTH**2 / 3.0
        return 0.5 * inertia * theta_dot**2 + (MASS * GRAVITY * LENGTH / 2.0) * np.cos(theta)


def splat_bilinear(img: np.ndarray, x: float, y: float, intensity: float) -> None:
    """Anti-aliased point deposit onto a grid (in-place, additive)."""
    hw = img.shape[0]
    x0, y0 = int(np.floor(x)), int(np.floor(y))
    fx, fy = x - x0, y - y0
    for dx, wx in ((0, 1 - fx), (1, fx)):
        for dy, wy in ((0, 1 - fy), (1, fy)):
            xi, yi = x0 + dx, y0 + dy
            if 0 <= xi < hw and 0 <= yi < hw:
                img[yi, xi] += intensity * wx * wy
