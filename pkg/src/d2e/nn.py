"""Small neural networks on the tape: perceptrons and strided conv stacks.

Parameter bundles are flat ``{name: ndarray}`` dicts with slash-separated
prefixes, so every bundle serializes directly into checkpoints and registers
onto a tape in one call.  Hidden activations are softplus ramps throughout;
heads are linear.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import ops
from .numerics.rng import RngStream


@dataclass(frozen=True)
class MlpSpec:
    """Fully connected stack: sizes = (in, hidden..., out)."""

    sizes: tuple[int, ...]
    final_scale: float = 1.0

    def init(self, rng: RngStream, prefix: str) -> dict[str, np.ndarray]:
        params = {}
        for i, (fan_in, fan_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            scale = np.sqrt(2.0 / fan_in)
            if i == len(self.sizes) - 2:
                scale *= self.final_scale
            params[f"{prefix}/w{i}"] = rng.normal((fan_in, fan_out)) * scale
            params[f"{prefix}/b{i}"] = np.zeros(fan_out)
        return params

    def apply(self, params, prefix: str, x):
        """x: (B, in) or (in,).  Returns matching (B, out) or (out,)."""
        squeeze = ops.value_of(x).ndim == 1
        h = ops.reshape(x, (1, -1)) if squeeze else x
        n_layers = len(self.sizes) - 1
        for i in range(n_layers):
            h = ops.add(ops.matmul(h, params[f"{prefix}/w{i}"]), params[f"{prefix}/b{i}"])
            if i < n_layers - 1:
                h = ops.softplus(h)
        return ops.reshape(h, (self.sizes[-1],)) if squeeze else h


@dataclass(frozen=True)
class ConvEncoderSpec:
    """Four stride-2 convolutions (16x16 -> 1x1) followed by a linear head."""

    image_hw: int = 16
    channels: tuple[int, ...] = (1, 8, 16, 32, 64)
    out_dim: int = 8
    kernel: int = 2
    stride: int = 2

    def init(self, rng: RngStream, prefix: str) -> dict[str, np.ndarray]:
        params = {}
        for i, (cin, cout) in enumerate(zip(self.channels[:-1], self.channels[1:])):
            fan_in = cin * self.kernel * self.kernel
            params[f"{prefix}/k{i}"] = rng.normal((fan_in, cout)) * np.sqrt(2.0 / fan_in)
            params[f"{prefix}/kb{i}"] = np.zeros(cout)
        params[f"{prefix}/w_out"] = rng.normal(
            (self.channels[-1], self.out_dim)
        ) * np.sqrt(2.0 / self.channels[-1])
        params[f"{prefix}/b_out"] = np.zeros(self.out_dim)
        return params

    def apply(self, params, prefix: str, x):
        """x: (B, H*W) flattened grayscale images in [0, 1]."""
        b = ops.value_of(x).shape[0]
        h = ops.reshape(x, (b, 1, self.image_hw, self.image_hw))
        hw = self.image_hw
        for i, cout in enumerate(self.channels[1:]):
            cols = ops.im2col(h, self.kernel, self.kernel, self.stride)
            oh = (hw - self.kernel) // self.stride + 1
            flat = ops.reshape(cols, (b * oh * oh, -1))
            y = ops.add(ops.matmul(flat, params[f"{prefix}/k{i}"]), params[f"{prefix}/kb{i}"])
            y = ops.softplus(y)
            h = ops.transpose(ops.reshape(y, (b, oh * oh, cout)), (0, 2, 1))
            h = ops.reshape(h, (b, cout, oh, oh))
            hw = oh
        flat = ops.reshape(h, (b, self.channels[-1]))
        return ops.add(ops.matmul(flat, params[f"{prefix}/w_out"]), params[f"{prefix}/b_out"])


@dataclass(frozen=True)
class ConvDecoderSpec:
    """Linear stem then four stride-2 transposed convolutions (1x1 -> 16x16)."""

    image_hw: int = 16
    channels: tuple[int, ...] = (64, 32, 16, 8, 1)
    in_dim: int = 8
    kernel: int = 2
    stride: int = 2

    def init(self, rng: RngStream, prefix: str) -> dict[str, np.ndarray]:
        params = {
            f"{prefix}/w_in": rng.normal((self.in_dim, self.channels[0]))
            * np.sqrt(2.0 / self.in_dim),
            f"{prefix}/b_in": np.zeros(self.channels[0]),
        }
        for i, (cin, cout) in enumerate(zip(self.channels[:-1], self.channels[1:])):
            fan_in = cin
            params[f"{prefix}/k{i}"] = rng.normal(
                (cin, cout * self.kernel * self.kernel)
            ) * np.sqrt(2.0 / fan_in)
            params[f"{prefix}/kb{i}"] = np.zeros(cout * self.kernel * self.kernel)
        params[f"{prefix}/logvar"] = np.full(1, -2.0)
        return params

    def apply(self, params, prefix: str, z):
        """z: (B, in_dim).  Returns ((B, H*W) mean, (B, H*W) log-variance)."""
        b = ops.value_of(z).shape[0]
        h = ops.softplus(ops.add(ops.matmul(z, params[f"{prefix}/w_in"]), params[f"{prefix}/b_in"]))
        hw = 1
        h = ops.reshape(h, (b, self.channels[0], 1, 1))
        n = len(self.channels) - 1
        for i, cout in enumerate(self.channels[1:]):
            cin = self.channels[i]
            flat = ops.reshape(ops.transpose(h, (0, 2, 3, 1)), (b * hw * hw, cin))
            cols = ops.add(ops.matmul(flat, params[f"{prefix}/k{i}"]), params[f"{prefix}/kb{i}"])
            cols = ops.reshape(cols, (b, hw * hw, -1))
            out_hw = hw * self.stride
            h = ops.col2im(cols, (b, cout, out_hw, out_hw), self.kernel, self.kernel, self.stride)
            if i < n - 1:
                h = ops.softplus(h)
            hw = out_hw
        mean = ops.reshape(h, (b, hw * hw))
        log_var = ops.multiply(params[f"{prefix}/logvar"], np.ones((b, hw * hw)))
        return mean, log_var


def count_params(params: dict[str, np.ndarray]) -> int:
    return sum(int(np.asarray(v).size) for v in params.values())
