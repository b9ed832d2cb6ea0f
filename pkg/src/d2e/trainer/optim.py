"""Adaptive-moment optimizer with global gradient-norm clipping.

State is a flat dict of first/second moments per parameter name so that
checkpoints can serialize it alongside the parameters themselves.
"""

from __future__ import annotations

import numpy as np


def global_norm(grads: dict[str, np.ndarray]) -> float:
    total = 0.0
    for g in grads.values():
        total += float(np.sum(g * g))
    return float(np.sqrt(total))


def clip_by_global_norm(grads: dict[str, np.ndarray], max_norm: float):
    """Scale all gradients so their joint norm is at most ``max_norm``.

    Returns (clipped_grads, norm_before, clipped_flag).
    """
    norm = global_norm(grads)
    if norm <= max_norm or norm == 0.0:
        return grads, norm, False
    scale = max_norm / norm
    return {k: g * scale for k, g in grads.items()}, norm, True


class Adam:
    """Standard bias-corrected Adam over a named parameter dict (in-place)."""

    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-4):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for name, g in grads.items():
            if name not in self.m:
                self.m[name] = np.zeros_like(params[name])
                self.v[name] = np.zeros_like(params[name])
            m = self.m[name]
            v = self.v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            params[name] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    # checkpoint support -----------------------------------------------------
    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {"t": np.array([float(self.t)])}
        for k, m in self.m.items():
            out[f"m/{k}"] = m
            out[f"v/{k}"] = self.v[k]
        return out

    def load_state_arrays(self, state: dict[str, np.ndarray]) -> None:
        self.t = int(state["t"][0])
        self.m = {}
        self.v = {}
        for k, arr in state.items():
            if k.startswith("m/"):
                self.m[k[2:]] = np.array(arr)
            elif k.startswith("v/"):
                self.v[k[2:]] = np.array(arr)
